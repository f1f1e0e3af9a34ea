use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use super::MetzlerMatrix;
use crate::error::{Error, Result};
use crate::matops::{border, quad_form};
use crate::sysmodel::lift;

/// Which switching law a certificate set was designed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Law {
    /// Linear dwell-time law with the cost Gramian in the comparison.
    Thm1Linear,
    /// Extended-state law that accounts for the affine terms.
    Thm2Affine,
    /// The linear law applied to an affine system via the `ϵ/2`-shifted design.
    Corollary1,
    /// Zero-dwell pairwise law `argmin x'X_j x`.
    GcT0,
    /// Dwell-time law without the cost Gramian.
    AllerhandBaseline,
}

impl Law {
    pub const ALL: [Law; 5] = [
        Law::Thm1Linear,
        Law::Thm2Affine,
        Law::Corollary1,
        Law::GcT0,
        Law::AllerhandBaseline,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Law::Thm1Linear => "thm1",
            Law::Thm2Affine => "thm2",
            Law::Corollary1 => "cor1",
            Law::GcT0 => "gc0",
            Law::AllerhandBaseline => "baseline",
        }
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Law {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Law::ALL
            .into_iter()
            .find(|l| l.tag() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown law '{s}' (thm1|thm2|cor1|gc0|baseline)")))
    }
}

/// Extended-state data of an affine certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedCertificates {
    /// `X̃_i = diag(X_i, 1)`.
    pub x: Vec<DMatrix<f64>>,
    pub y1: Vec<DMatrix<f64>>,
    pub y2: Vec<DMatrix<f64>>,
    /// Forced responses `m_j` over one dwell window.
    pub m: Vec<DVector<f64>>,
    /// Per-mode minimal corner slack (Schur complement, no margin).
    pub epsilon_modes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateSet {
    pub law: Law,
    /// Dwell time; zero for [`Law::GcT0`].
    pub dwell: f64,
    pub pi: MetzlerMatrix,
    pub rho: f64,
    pub x: Vec<DMatrix<f64>>,
    /// `e^{A_j'T} X_j e^{A_jT}` (with the shifted matrices for [`Law::Corollary1`]).
    pub y1: Vec<DMatrix<f64>>,
    /// Cost Gramian over one dwell window; zero for the baseline law.
    pub y2: Vec<DMatrix<f64>>,
    pub extended: Option<ExtendedCertificates>,
    /// Certified persistent cost rate (affine law); zero otherwise.
    pub epsilon: f64,
    /// Shift used by [`Law::Corollary1`]; zero otherwise.
    pub eps_shift: f64,
    /// Cost rate bound of [`Law::Corollary1`]; zero otherwise.
    pub delta: f64,
}

impl CertificateSet {
    pub fn n(&self) -> usize {
        self.x[0].nrows()
    }

    pub fn mode_count(&self) -> usize {
        self.x.len()
    }

    /// Matrix of the Lyapunov function at the start of a dwell window in
    /// mode `j`, embedded in extended coordinates. This is the form the
    /// switching rule compares against.
    pub fn entry_matrix(&self, j: usize) -> DMatrix<f64> {
        match (&self.extended, self.law) {
            (Some(ext), Law::Thm2Affine) => &ext.y1[j] + &ext.y2[j],
            (_, Law::GcT0) => border(&self.x[j], 0.0),
            _ => border(&(&self.y1[j] + &self.y2[j]), 0.0),
        }
    }

    /// Matrix of the Lyapunov function once the dwell window has elapsed.
    pub fn resting_matrix(&self, i: usize) -> DMatrix<f64> {
        match (&self.extended, self.law) {
            (Some(ext), Law::Thm2Affine) => ext.x[i].clone(),
            _ => border(&self.x[i], 0.0),
        }
    }

    /// Remark-style initialization: the mode minimizing the initial Lyapunov value.
    /// Ties go to the smallest index.
    pub fn initial_mode(&self, x0: &DVector<f64>) -> usize {
        let xt = lift(x0);
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for j in 0..self.mode_count() {
            let v = quad_form(&self.entry_matrix(j), &xt);
            if v < best_val {
                best_val = v;
                best = j;
            }
        }
        best
    }

    /// `(offset, slope)` of the guaranteed cost `J(t) ≤ offset + slope·(t - t₀)`
    /// for a run started at `x0` in mode `sigma0`.
    pub fn cost_bound(&self, x0: &DVector<f64>, sigma0: usize) -> Result<(f64, f64)> {
        if x0.len() != self.n() {
            return Err(Error::Mismatch(format!(
                "initial state has length {}, certificates are for n = {}",
                x0.len(),
                self.n()
            )));
        }
        if sigma0 >= self.mode_count() {
            return Err(Error::Mismatch(format!(
                "initial mode {} out of range for {} modes",
                sigma0 + 1,
                self.mode_count()
            )));
        }
        let xt = lift(x0);
        match self.law {
            Law::Thm1Linear => Ok((quad_form(&self.entry_matrix(sigma0), &xt), 0.0)),
            Law::Thm2Affine => Ok((quad_form(&self.entry_matrix(sigma0), &xt), self.epsilon)),
            Law::Corollary1 => Ok((quad_form(&self.entry_matrix(sigma0), &xt), self.delta)),
            Law::GcT0 => Ok((self.x.iter().map(|x| quad_form(x, x0)).sum(), 0.0)),
            Law::AllerhandBaseline => Err(Error::Unsupported(
                "the baseline law carries no guaranteed cost bound".into(),
            )),
        }
    }

    /// Initial guaranteed cost from `x0` with the remark-style initial mode.
    pub fn initial_bound(&self, x0: &DVector<f64>) -> Result<f64> {
        Ok(self.cost_bound(x0, self.initial_mode(x0))?.0)
    }

    pub fn to_json(&self) -> String {
        use crate::sysmodel::config::{matrix_json, vector_json};
        let mats = |v: &[DMatrix<f64>]| Value::Array(v.iter().map(matrix_json).collect());
        let mut root = Map::new();
        root.insert("law".into(), json!(self.law.tag()));
        root.insert("n".into(), json!(self.n()));
        root.insert("M".into(), json!(self.mode_count()));
        root.insert("T".into(), json!(self.dwell));
        root.insert("Pi".into(), matrix_json(self.pi.entries()));
        root.insert("rho".into(), json!(self.rho));
        root.insert("epsilon".into(), json!(self.epsilon));
        root.insert("eps_shift".into(), json!(self.eps_shift));
        root.insert("delta".into(), json!(self.delta));
        root.insert("X".into(), mats(&self.x));
        root.insert("Y1".into(), mats(&self.y1));
        root.insert("Y2".into(), mats(&self.y2));
        if let Some(ext) = &self.extended {
            root.insert("X_ext".into(), mats(&ext.x));
            root.insert("Y1_ext".into(), mats(&ext.y1));
            root.insert("Y2_ext".into(), mats(&ext.y2));
            root.insert(
                "m".into(),
                Value::Array(ext.m.iter().map(vector_json).collect()),
            );
            root.insert("epsilon_modes".into(), json!(ext.epsilon_modes));
        }
        serde_json::to_string_pretty(&Value::Object(root)).expect("JSON values always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| Error::schema("$", format!("invalid JSON: {e}")))?;
        let root = doc
            .as_object()
            .ok_or_else(|| Error::schema("$", "expected an object"))?;
        let get = |k: &str| {
            root.get(k)
                .ok_or_else(|| Error::schema(format!("$.{k}"), "missing required field"))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .as_f64()
                .ok_or_else(|| Error::schema(format!("$.{k}"), "expected a number"))
        };
        let law: Law = get("law")?
            .as_str()
            .ok_or_else(|| Error::schema("$.law", "expected a string"))?
            .parse()
            .map_err(|e: Error| Error::schema("$.law", e.to_string()))?;
        let mats = |k: &str| -> Result<Vec<DMatrix<f64>>> {
            let arr = get(k)?
                .as_array()
                .ok_or_else(|| Error::schema(format!("$.{k}"), "expected an array"))?;
            arr.iter()
                .enumerate()
                .map(|(i, v)| read_matrix(v, &format!("$.{k}[{i}]")))
                .collect()
        };
        let pi = MetzlerMatrix::new(read_matrix(get("Pi")?, "$.Pi")?)
            .map_err(|e| Error::schema("$.Pi", e.to_string()))?;
        let x = mats("X")?;
        let y1 = mats("Y1")?;
        let y2 = mats("Y2")?;
        let m_count = x.len();
        if m_count == 0 || y1.len() != m_count || y2.len() != m_count || pi.size() != m_count {
            return Err(Error::schema("$", "inconsistent mode counts across X, Y1, Y2, Pi"));
        }
        let n = x[0].nrows();
        for (k, set) in [("X", &x), ("Y1", &y1), ("Y2", &y2)] {
            if let Some(i) = set.iter().position(|s| s.nrows() != n || s.ncols() != n) {
                return Err(Error::schema(format!("$.{k}[{i}]"), format!("expected {n}x{n}")));
            }
        }
        let extended = if root.contains_key("X_ext") {
            let m = get("m")?
                .as_array()
                .ok_or_else(|| Error::schema("$.m", "expected an array"))?
                .iter()
                .enumerate()
                .map(|(i, v)| read_vector(v, &format!("$.m[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            let epsilon_modes = read_vector(get("epsilon_modes")?, "$.epsilon_modes")?
                .iter()
                .copied()
                .collect();
            Some(ExtendedCertificates {
                x: mats("X_ext")?,
                y1: mats("Y1_ext")?,
                y2: mats("Y2_ext")?,
                m,
                epsilon_modes,
            })
        } else {
            None
        };
        if law == Law::Thm2Affine && extended.is_none() {
            return Err(Error::schema("$.X_ext", "affine certificates need the extended matrices"));
        }
        Ok(Self {
            law,
            dwell: num("T")?,
            pi,
            rho: num("rho")?,
            x,
            y1,
            y2,
            extended,
            epsilon: num("epsilon")?,
            eps_shift: num("eps_shift")?,
            delta: num("delta")?,
        })
    }
}

fn read_vector(v: &Value, path: &str) -> Result<DVector<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::schema(path, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_f64()
                .ok_or_else(|| Error::schema(format!("{path}[{i}]"), "expected a number"))
        })
        .collect::<Result<Vec<_>>>()
        .map(DVector::from_vec)
}

fn read_matrix(v: &Value, path: &str) -> Result<DMatrix<f64>> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::schema(path, "expected an array of rows"))?;
    let parsed = rows
        .iter()
        .enumerate()
        .map(|(i, r)| read_vector(r, &format!("{path}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let cols = parsed.first().map_or(0, |r| r.len());
    if parsed.is_empty() || cols == 0 || parsed.iter().any(|r| r.len() != cols) {
        return Err(Error::schema(path, "ragged or empty matrix"));
    }
    Ok(DMatrix::from_fn(parsed.len(), cols, |i, j| parsed[i][j]))
}
