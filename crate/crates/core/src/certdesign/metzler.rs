use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Rate matrix `Π`: nonnegative off-diagonal entries, zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct MetzlerMatrix(DMatrix<f64>);

impl MetzlerMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let m = entries.nrows();
        if m == 0 || entries.ncols() != m {
            return Err(Error::Dimension(format!(
                "Metzler matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("Metzler matrix"));
        }
        let scale = entries.amax().max(1.0);
        for i in 0..m {
            for j in 0..m {
                if i != j && entries[(i, j)] < 0.0 {
                    return Err(Error::Invalid(format!(
                        "off-diagonal rate pi[{},{}] = {} is negative",
                        i + 1,
                        j + 1,
                        entries[(i, j)]
                    )));
                }
            }
            let row_sum: f64 = entries.row(i).sum();
            if row_sum.abs() > ROW_SUM_TOL * scale {
                return Err(Error::Invalid(format!(
                    "row {} of the rate matrix sums to {row_sum:e}",
                    i + 1
                )));
            }
        }
        Ok(Self(entries))
    }

    /// `Π = 0`: no coupling between modes.
    pub fn zeros(m: usize) -> Self {
        Self(DMatrix::zeros(m, m))
    }

    /// `α [[-1, 1], [1, -1]]`.
    pub fn uniform_pair(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Self::new(DMatrix::from_row_slice(2, 2, &[-alpha, alpha, alpha, -alpha]))
    }

    /// Circulant rate matrix for the cycle `M → M-1 → … → 1 → M`:
    /// mode `i` hands over to mode `i-1` (mode 1 to mode `M`) at rate `α`.
    pub fn cyclic(alpha: f64, m: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if m < 2 {
            return Err(Error::Invalid(format!("a cycle needs M >= 2, got {m}")));
        }
        let mut p = DMatrix::zeros(m, m);
        for i in 0..m {
            let next = (i + m - 1) % m;
            p[(i, i)] = -alpha;
            p[(i, next)] = alpha;
        }
        Self::new(p)
    }

    /// `π_ij = α λ_j` off the diagonal, so that `λ'Π = 0`.
    pub fn from_lambda(lambda: &[f64], alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if lambda.is_empty() {
            return Err(Error::Invalid("lambda is empty".into()));
        }
        if lambda.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::Invalid(format!(
                "lambda must be strictly positive, got {lambda:?}"
            )));
        }
        let total: f64 = lambda.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("lambda sums to {total}, expected 1")));
        }
        let m = lambda.len();
        let mut p = DMatrix::zeros(m, m);
        for i in 0..m {
            let mut off = 0.0;
            for j in 0..m {
                if i != j {
                    p[(i, j)] = alpha * lambda[j];
                    off += p[(i, j)];
                }
            }
            p[(i, i)] = -off;
        }
        Self::new(p)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Expected sojourn `1 / Σ_{j≠i} π_ij` in mode `i` (infinite when the mode never leaves).
    pub fn mean_dwell(&self, i: usize) -> f64 {
        let out: f64 = (0..self.size())
            .filter(|&j| j != i)
            .map(|j| self.0[(i, j)])
            .sum();
        1.0 / out
    }

    /// `Π' λ`, i.e. the row vector `λ'Π` as a column.
    pub fn left_action(&self, lambda: &DVector<f64>) -> DVector<f64> {
        self.0.transpose() * lambda
    }

    /// Largest `|row sum|` and smallest off-diagonal entry (`+∞` when `M = 1`).
    pub fn invariant_residuals(&self) -> (f64, f64) {
        let m = self.size();
        let row = (0..m)
            .map(|i| self.0.row(i).sum().abs())
            .fold(0.0, f64::max);
        let mut min_off = f64::INFINITY;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    min_off = min_off.min(self.0[(i, j)]);
                }
            }
        }
        (row, min_off)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("rate scale alpha must be positive, got {alpha}")))
    }
}

/// Parametric rate-matrix families swept by the tuning routines.
#[derive(Debug, Clone, PartialEq)]
pub enum MetzlerFamily {
    UniformPair,
    Cyclic,
    FromLambda(Vec<f64>),
}

impl MetzlerFamily {
    pub fn build(&self, alpha: f64, m: usize) -> Result<MetzlerMatrix> {
        let pi = match self {
            MetzlerFamily::UniformPair => MetzlerMatrix::uniform_pair(alpha)?,
            MetzlerFamily::Cyclic => MetzlerMatrix::cyclic(alpha, m)?,
            MetzlerFamily::FromLambda(l) => MetzlerMatrix::from_lambda(l, alpha)?,
        };
        if pi.size() != m {
            return Err(Error::Dimension(format!(
                "rate family yields a {0}x{0} matrix for a {m}-mode system",
                pi.size()
            )));
        }
        Ok(pi)
    }
}
