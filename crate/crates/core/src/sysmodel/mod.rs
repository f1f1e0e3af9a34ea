//! Switched affine systems `ẋ = A_σ x + b_σ`, `z = C x`.
//!
//! Modes are indexed from 0 internally; user-facing I/O (config files,
//! CSV, CLI) is 1-based.

pub(crate) mod config;
mod factories;

pub use config::{parse_config, serialize_config, SystemConfig};
pub use factories::{
    example_boost_boost, example_congestion, example_unstable_pair, BoostBoost, BoostParams,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matops::{augment, ensure_finite, ensure_square};

/// One affine subsystem `(A_i, b_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedAffineSystem {
    modes: Vec<Mode>,
    c: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl SwitchedAffineSystem {
    pub fn new(modes: Vec<Mode>, c: DMatrix<f64>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Invalid("a switched system needs at least one mode".into()));
        }
        let n = modes[0].a.nrows();
        for (i, mode) in modes.iter().enumerate() {
            ensure_square("mode matrix A_i", &mode.a)?;
            if mode.a.nrows() != n {
                return Err(Error::Dimension(format!(
                    "A_{} is {}x{}, expected {n}x{n}",
                    i + 1,
                    mode.a.nrows(),
                    mode.a.ncols()
                )));
            }
            if mode.b.len() != n {
                return Err(Error::Dimension(format!(
                    "b_{} has length {}, expected {n}",
                    i + 1,
                    mode.b.len()
                )));
            }
            if !mode.b.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("affine term b_i"));
            }
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "C is {}x{}, expected p x {n} with p >= 1",
                c.nrows(),
                c.ncols()
            )));
        }
        ensure_finite("output matrix C", &c)?;
        Ok(Self {
            modes,
            c,
            labels: None,
        })
    }

    /// Linear system: every `b_i = 0`.
    pub fn linear(a: Vec<DMatrix<f64>>, c: DMatrix<f64>) -> Result<Self> {
        let modes = a
            .into_iter()
            .map(|a| {
                let n = a.nrows();
                Mode {
                    a,
                    b: DVector::zeros(n),
                }
            })
            .collect();
        Self::new(modes, c)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.modes.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} modes",
                labels.len(),
                self.modes.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.c.ncols()
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn a(&self, i: usize) -> &DMatrix<f64> {
        &self.modes[i].a
    }

    pub fn b(&self, i: usize) -> &DVector<f64> {
        &self.modes[i].b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// `C'C`.
    pub fn output_weight(&self) -> DMatrix<f64> {
        self.c.transpose() * &self.c
    }

    pub fn is_linear(&self) -> bool {
        self.modes.iter().all(|m| m.b.iter().all(|&v| v == 0.0))
    }

    /// Same `A_i`, `C`; every affine term replaced by zero.
    pub fn linear_part(&self) -> Self {
        let mut out = self.clone();
        for m in &mut out.modes {
            m.b.fill(0.0);
        }
        out
    }

    /// Change of variable `x ↦ x - x_e`: the affine terms become `A_i x_e + b_i`.
    pub fn shift_equilibrium(&self, x_e: &DVector<f64>) -> Result<Self> {
        if x_e.len() != self.n() {
            return Err(Error::Dimension(format!(
                "equilibrium has length {}, expected {}",
                x_e.len(),
                self.n()
            )));
        }
        let mut out = self.clone();
        for m in &mut out.modes {
            m.b = &m.a * x_e + &m.b;
        }
        Ok(out)
    }

    /// Extended linear form in `x̃ = [x' 1]'`.
    pub fn extend(&self) -> ExtendedSystem {
        let n = self.n();
        let modes = self.modes.iter().map(|m| augment(&m.a, &m.b)).collect();
        let mut c = DMatrix::zeros(self.outputs(), n + 1);
        c.view_mut((0, 0), (self.outputs(), n)).copy_from(&self.c);
        let mut selector = DMatrix::zeros(n + 1, n + 1);
        selector[(n, n)] = 1.0;
        ExtendedSystem {
            modes,
            c,
            selector,
        }
    }
}

/// The `(n+1)`-dimensional linear system `x̃̇ = Ã_σ x̃`, `z = C̃ x̃`, with
/// `x̃ = [x' 1]'`. The last coordinate is constant along every trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSystem {
    /// `Ã_i = [[A_i, b_i], [0', 0]]`.
    pub modes: Vec<DMatrix<f64>>,
    /// `C̃ = [C 0]`.
    pub c: DMatrix<f64>,
    /// `Ĩ`: a single 1 in the bottom-right corner.
    pub selector: DMatrix<f64>,
}

impl ExtendedSystem {
    pub fn output_weight(&self) -> DMatrix<f64> {
        self.c.transpose() * &self.c
    }
}

/// `[x' 1]'`.
pub fn lift(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut out = DVector::zeros(n + 1);
    out.rows_mut(0, n).copy_from(x);
    out[n] = 1.0;
    out
}
