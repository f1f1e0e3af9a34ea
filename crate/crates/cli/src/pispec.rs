//! Rate-matrix arguments: an inline row-major matrix `[[..],[..]]`, a family
//! object `{"type": "uniform-pair"|"cyclic"|"from-lambda", "alpha": .., "lambda": [..]}`,
//! or a path to a file holding either.

use dwellswitch::certdesign::{MetzlerFamily, MetzlerMatrix};
use nalgebra::DMatrix;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum PiSpec {
    Matrix(MetzlerMatrix),
    /// `alpha` may be left out when the caller tunes it.
    Family { family: MetzlerFamily, alpha: Option<f64> },
}

impl PiSpec {
    pub fn parse(arg: &str) -> Result<Self, CliError> {
        let trimmed = arg.trim_start();
        let text = if trimmed.starts_with('[') || trimmed.starts_with('{') {
            arg.to_string()
        } else {
            std::fs::read_to_string(arg).map_err(|e| CliError::input(format!("cannot read pi spec '{arg}': {e}")))?
        };
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("pi spec is not valid JSON: {e}")))?;
        match &doc {
            Value::Array(_) => Ok(PiSpec::Matrix(parse_matrix(&doc)?)),
            Value::Object(obj) => {
                let kind = obj
                    .get("type")
                    .and_then(Value::as_str)
                    .ok_or_else(|| CliError::input("pi spec $.type: expected uniform-pair, cyclic or from-lambda"))?;
                let alpha = match obj.get("alpha") {
                    None => None,
                    Some(v) => Some(
                        v.as_f64()
                            .ok_or_else(|| CliError::input("pi spec $.alpha: expected a number"))?,
                    ),
                };
                let family = match kind {
                    "uniform-pair" => MetzlerFamily::UniformPair,
                    "cyclic" => MetzlerFamily::Cyclic,
                    "from-lambda" => {
                        let lam = obj
                            .get("lambda")
                            .and_then(Value::as_array)
                            .ok_or_else(|| CliError::input("pi spec $.lambda: required for from-lambda"))?;
                        let lam = lam
                            .iter()
                            .enumerate()
                            .map(|(i, v)| {
                                v.as_f64()
                                    .ok_or_else(|| CliError::input(format!("pi spec $.lambda[{i}]: expected a number")))
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        MetzlerFamily::FromLambda(lam)
                    }
                    other => {
                        return Err(CliError::input(format!(
                            "pi spec $.type: unknown family '{other}' (uniform-pair|cyclic|from-lambda)"
                        )))
                    }
                };
                Ok(PiSpec::Family { family, alpha })
            }
            _ => Err(CliError::input("pi spec must be a matrix or a family object")),
        }
    }

    /// Concrete matrix for an `m`-mode system.
    pub fn resolve(&self, m: usize) -> Result<MetzlerMatrix, CliError> {
        match self {
            PiSpec::Matrix(pi) => {
                if pi.size() != m {
                    return Err(CliError::input(format!(
                        "pi is {0}x{0} but the system has {m} modes",
                        pi.size()
                    )));
                }
                Ok(pi.clone())
            }
            PiSpec::Family { family, alpha } => {
                let alpha = alpha.ok_or_else(|| CliError::input("pi spec needs alpha unless --tune-alpha is given"))?;
                Ok(family.build(alpha, m)?)
            }
        }
    }
}

fn parse_matrix(doc: &Value) -> Result<MetzlerMatrix, CliError> {
    let rows = doc.as_array().expect("caller checked");
    let m = rows.len();
    let mut data = Vec::with_capacity(m * m);
    for (i, r) in rows.iter().enumerate() {
        let r = r
            .as_array()
            .filter(|r| r.len() == m)
            .ok_or_else(|| CliError::input(format!("pi spec $[{i}]: expected a row of {m} numbers")))?;
        for (j, v) in r.iter().enumerate() {
            data.push(
                v.as_f64()
                    .ok_or_else(|| CliError::input(format!("pi spec $[{i}][{j}]: expected a number")))?,
            );
        }
    }
    if m == 0 {
        return Err(CliError::input("pi spec: empty matrix"));
    }
    Ok(MetzlerMatrix::new(DMatrix::from_row_slice(m, m, &data))?)
}
