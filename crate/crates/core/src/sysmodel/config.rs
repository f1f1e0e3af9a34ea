//! JSON system documents.
//!
//! ```json
//! { "name": "pair", "n": 2, "M": 2, "C": [[1,0],[0,1]],
//!   "modes": [ { "A": [[-2,0.3],[-2,1]], "b": [1,-1] }, ... ],
//!   "x_e": [0, 0], "units": "..." }
//! ```
//!
//! Matrices are row-major nested arrays. `b` may be omitted (zero), as may
//! `x_e`, `units` and the per-mode `label`. Errors carry a JSON path.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use super::{Mode, SwitchedAffineSystem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub name: String,
    pub units: Option<String>,
    /// Operating point the caller wants regulated; see [`SystemConfig::regulated_system`].
    pub x_e: Option<DVector<f64>>,
    pub system: SwitchedAffineSystem,
}

impl SystemConfig {
    pub fn new(name: impl Into<String>, system: SwitchedAffineSystem) -> Self {
        Self {
            name: name.into(),
            units: None,
            x_e: None,
            system,
        }
    }

    /// The system in error coordinates `x - x_e` (unchanged when `x_e` is absent).
    pub fn regulated_system(&self) -> Result<SwitchedAffineSystem> {
        match &self.x_e {
            Some(xe) => self.system.shift_equilibrium(xe),
            None => Ok(self.system.clone()),
        }
    }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::schema(format!("{path}.{key}"), "missing required field"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::schema(path, "expected a non-negative integer"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| Error::schema(path, "expected a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::schema(path, "number is not finite"))
    }
}

fn as_vector(v: &Value, path: &str) -> Result<DVector<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::schema(path, "expected an array of numbers"))?;
    let data = arr
        .iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{path}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(data))
}

fn as_matrix(v: &Value, path: &str) -> Result<DMatrix<f64>> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::schema(path, "expected a row-major array of rows"))?;
    if rows.is_empty() {
        return Err(Error::schema(path, "matrix has no rows"));
    }
    let parsed = rows
        .iter()
        .enumerate()
        .map(|(i, r)| as_vector(r, &format!("{path}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let cols = parsed[0].len();
    if cols == 0 {
        return Err(Error::schema(format!("{path}[0]"), "matrix row is empty"));
    }
    if let Some(i) = parsed.iter().position(|r| r.len() != cols) {
        return Err(Error::schema(
            format!("{path}[{i}]"),
            format!("row has {} entries, expected {cols}", parsed[i].len()),
        ));
    }
    Ok(DMatrix::from_fn(parsed.len(), cols, |i, j| parsed[i][j]))
}

pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::schema("$", format!("invalid JSON: {e}")))?;
    let root = doc
        .as_object()
        .ok_or_else(|| Error::schema("$", "expected an object"))?;

    let name = match root.get("name") {
        Some(v) => v
            .as_str()
            .ok_or_else(|| Error::schema("$.name", "expected a string"))?
            .to_string(),
        None => return Err(Error::schema("$.name", "missing required field")),
    };
    let n = as_usize(field(root, "n", "$")?, "$.n")?;
    let m = as_usize(field(root, "M", "$")?, "$.M")?;
    if n == 0 {
        return Err(Error::schema("$.n", "state dimension must be >= 1"));
    }
    if m == 0 {
        return Err(Error::schema("$.M", "mode count must be >= 1"));
    }
    let c = as_matrix(field(root, "C", "$")?, "$.C")?;
    if c.ncols() != n {
        return Err(Error::schema(
            "$.C",
            format!("C has {} columns, expected n = {n}", c.ncols()),
        ));
    }

    let modes_val = field(root, "modes", "$")?
        .as_array()
        .ok_or_else(|| Error::schema("$.modes", "expected an array"))?;
    if modes_val.len() != m {
        return Err(Error::schema(
            "$.modes",
            format!("{} modes listed, expected M = {m}", modes_val.len()),
        ));
    }
    let mut modes = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for (i, mv) in modes_val.iter().enumerate() {
        let path = format!("$.modes[{i}]");
        let obj = mv
            .as_object()
            .ok_or_else(|| Error::schema(&path, "expected an object"))?;
        let a = as_matrix(field(obj, "A", &path)?, &format!("{path}.A"))?;
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::schema(
                format!("{path}.A"),
                format!("A is {}x{}, expected {n}x{n}", a.nrows(), a.ncols()),
            ));
        }
        let b = match obj.get("b") {
            Some(v) => as_vector(v, &format!("{path}.b"))?,
            None => DVector::zeros(n),
        };
        if b.len() != n {
            return Err(Error::schema(
                format!("{path}.b"),
                format!("b has length {}, expected {n}", b.len()),
            ));
        }
        if let Some(l) = obj.get("label") {
            labels.push(
                l.as_str()
                    .ok_or_else(|| Error::schema(format!("{path}.label"), "expected a string"))?
                    .to_string(),
            );
        }
        modes.push(Mode { a, b });
    }
    if !labels.is_empty() && labels.len() != m {
        return Err(Error::schema("$.modes", "either every mode or no mode has a label"));
    }

    let x_e = match root.get("x_e") {
        Some(Value::Null) | None => None,
        Some(v) => {
            let xe = as_vector(v, "$.x_e")?;
            if xe.len() != n {
                return Err(Error::schema(
                    "$.x_e",
                    format!("x_e has length {}, expected {n}", xe.len()),
                ));
            }
            Some(xe)
        }
    };
    let units = match root.get("units") {
        Some(Value::Null) | None => None,
        Some(v) => Some(
            v.as_str()
                .ok_or_else(|| Error::schema("$.units", "expected a string"))?
                .to_string(),
        ),
    };

    let mut system = SwitchedAffineSystem::new(modes, c)?;
    if !labels.is_empty() {
        system = system.with_labels(labels)?;
    }
    Ok(SystemConfig {
        name,
        units,
        x_e,
        system,
    })
}

pub(crate) fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|&v| json!(v)).collect()))
            .collect(),
    )
}

pub(crate) fn vector_json(v: &DVector<f64>) -> Value {
    Value::Array(v.iter().map(|&x| json!(x)).collect())
}

pub fn serialize_config(cfg: &SystemConfig) -> String {
    let sys = &cfg.system;
    let modes: Vec<Value> = (0..sys.mode_count())
        .map(|i| {
            let mut obj = Map::new();
            obj.insert("A".into(), matrix_json(sys.a(i)));
            obj.insert("b".into(), vector_json(sys.b(i)));
            if let Some(labels) = sys.labels() {
                obj.insert("label".into(), json!(labels[i]));
            }
            Value::Object(obj)
        })
        .collect();
    let mut root = Map::new();
    root.insert("name".into(), json!(cfg.name));
    root.insert("n".into(), json!(sys.n()));
    root.insert("M".into(), json!(sys.mode_count()));
    root.insert("C".into(), matrix_json(sys.c()));
    root.insert("modes".into(), Value::Array(modes));
    if let Some(xe) = &cfg.x_e {
        root.insert("x_e".into(), vector_json(xe));
    }
    if let Some(u) = &cfg.units {
        root.insert("units".into(), json!(u));
    }
    serde_json::to_string_pretty(&Value::Object(root)).expect("JSON values always serialize")
}
