use nalgebra::DMatrix;

use super::MetzlerMatrix;
use crate::error::{Error, Result};
use crate::matops::{ensure_finite, ensure_square, expm_unchecked, is_hurwitz, kron_sum};
use crate::sysmodel::SwitchedAffineSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceReport {
    pub j_dim: usize,
    pub spectral_abscissa: f64,
    pub hurwitz: bool,
}

/// Builds `𝒥 = 𝒜 + ℬ(Π)` with `𝒜 = blockdiag(A_i'⊕A_i')` and
/// `ℬ(Π) = Π_d⊗I + [(Π - Π_d)⊗I] e^{𝒜T}`.
pub fn existence_matrix(modes: &[DMatrix<f64>], pi: &MetzlerMatrix, dwell: f64) -> Result<DMatrix<f64>> {
    if modes.is_empty() {
        return Err(Error::Invalid("no mode matrices given".into()));
    }
    if pi.size() != modes.len() {
        return Err(Error::Dimension(format!(
            "rate matrix is {0}x{0} but {1} modes were given",
            pi.size(),
            modes.len()
        )));
    }
    if !(dwell.is_finite() && dwell >= 0.0) {
        return Err(Error::Invalid(format!("dwell time must be >= 0, got {dwell}")));
    }
    let d = modes[0].nrows();
    for (i, a) in modes.iter().enumerate() {
        ensure_square("mode matrix", a)?;
        ensure_finite("mode matrix", a)?;
        if a.nrows() != d {
            return Err(Error::Dimension(format!(
                "mode {} is {}x{}, expected {d}x{d}",
                i + 1,
                a.nrows(),
                a.ncols()
            )));
        }
    }
    let m = modes.len();
    let dd = d * d;
    let k: Vec<DMatrix<f64>> = modes
        .iter()
        .map(|a| kron_sum(&a.transpose(), &a.transpose()))
        .collect::<Result<_>>()?;
    let mut j = DMatrix::<f64>::zeros(m * dd, m * dd);
    for r in 0..m {
        let diag = &k[r] + DMatrix::<f64>::identity(dd, dd) * pi.rate(r, r);
        j.view_mut((r * dd, r * dd), (dd, dd)).copy_from(&diag);
        for c in 0..m {
            if c != r && pi.rate(r, c) != 0.0 {
                let block = expm_unchecked(&(&k[c] * dwell)) * pi.rate(r, c);
                j.view_mut((r * dd, c * dd), (dd, dd)).copy_from(&block);
            }
        }
    }
    Ok(j)
}

/// Hurwitz test on `𝒥`. Pass `A_i` for the linear test; the extended
/// matrices `Ã_i` always give a zero eigenvalue (see [`super::affine_existence`]).
pub fn existence_check(modes: &[DMatrix<f64>], pi: &MetzlerMatrix, dwell: f64) -> Result<ExistenceReport> {
    let j = existence_matrix(modes, pi, dwell)?;
    let (hurwitz, spectral_abscissa) = is_hurwitz(&j)?;
    Ok(ExistenceReport {
        j_dim: j.nrows(),
        spectral_abscissa,
        hurwitz,
    })
}

/// Existence data for the affine law. The extended operator annihilates
/// `vec(e_{n+1}e_{n+1}')` (every `Ã_i` has a zero last row and `Π1 = 0`), so
/// its abscissa is never negative; the verdict therefore rests on the
/// linear part and the extended abscissa is informational.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineExistence {
    pub linear: ExistenceReport,
    pub extended_dim: usize,
    pub extended_abscissa: f64,
}

pub fn affine_existence(sys: &SwitchedAffineSystem, pi: &MetzlerMatrix, dwell: f64) -> Result<AffineExistence> {
    let linear: Vec<DMatrix<f64>> = (0..sys.mode_count()).map(|i| sys.a(i).clone()).collect();
    let linear = existence_check(&linear, pi, dwell)?;
    let ext = existence_check(&sys.extend().modes, pi, dwell)?;
    Ok(AffineExistence {
        linear,
        extended_dim: ext.j_dim,
        extended_abscissa: ext.spectral_abscissa,
    })
}
