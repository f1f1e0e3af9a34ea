//! Lyapunov-Metzler certificate design.

mod certificate;
mod existence;
mod metzler;
mod solve;
mod tuning;

pub use certificate::{CertificateSet, ExtendedCertificates, Law};
pub use existence::{affine_existence, existence_check, existence_matrix, AffineExistence, ExistenceReport};
pub use metzler::{MetzlerFamily, MetzlerMatrix, ROW_SUM_TOL};
pub use solve::{
    baseline_design, corollary1_design, default_rho, gc_design_t0, largest_feasible_eps_shift,
    lm_solve_affine, lm_solve_linear, DELTA_GRID, SOLVE_REL_TOL,
};
pub use tuning::{default_rho_grid, log_grid, tune_alpha, Objective, TuneOutcome, TuneProblem};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matops::{border, definiteness, expm_unchecked, gram_unchecked, max_sym_eigenvalue, symmetrize};
use crate::sysmodel::SwitchedAffineSystem;

/// Relative width of the `ϵ` bisection used when no shift is given.
pub const EPS_SHIFT_REL_TOL: f64 = 1e-3;

/// Designs certificates for `law`. `rho` defaults to [`default_rho`]. For
/// [`Law::Corollary1`] a missing `eps_shift` is replaced by the bisected
/// largest feasible shift. [`Law::GcT0`] reads `γ` from `π_12` of a
/// symmetric two-mode `Π` and ignores `dwell`.
pub fn design(
    sys: &SwitchedAffineSystem,
    pi: &MetzlerMatrix,
    dwell: f64,
    law: Law,
    rho: Option<f64>,
    eps_shift: Option<f64>,
) -> Result<CertificateSet> {
    let rho = rho.unwrap_or_else(|| default_rho(sys));
    match law {
        Law::Thm1Linear => lm_solve_linear(sys, pi, dwell, rho),
        Law::Thm2Affine => lm_solve_affine(sys, pi, dwell, rho),
        Law::AllerhandBaseline => baseline_design(sys, pi, dwell, rho),
        Law::Corollary1 => {
            let eps = match eps_shift {
                Some(e) => e,
                None => largest_feasible_eps_shift(sys, pi, dwell, rho, EPS_SHIFT_REL_TOL)?,
            };
            corollary1_design(sys, pi, dwell, eps, rho)
        }
        Law::GcT0 => {
            if pi.size() != 2 || pi.rate(0, 1) != pi.rate(1, 0) {
                return Err(Error::Unsupported(
                    "the zero-dwell law needs a symmetric two-mode rate matrix".into(),
                ));
            }
            gc_design_t0(sys, pi.rate(0, 1), rho)
        }
    }
}

/// Independent re-evaluation of a certificate set against `sys`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// Largest eigenvalue of each substituted residual (minus `εĨ` for the affine law).
    pub residual_max_eig: Vec<f64>,
    /// Smallest eigenvalue of each `X_i`.
    pub x_min_eig: Vec<f64>,
    /// Largest `|row sum|` of `Π`.
    pub pi_row_sum: f64,
    /// Smallest off-diagonal entry of `Π`.
    pub pi_min_offdiag: f64,
    /// `X̃_i == diag(X_i, 1)` exactly (vacuous without extended data).
    pub structure_ok: bool,
}

impl AuditReport {
    pub fn passes(&self, rho: f64) -> bool {
        self.residual_max_eig.iter().all(|&e| e <= -rho / 2.0)
            && self.x_min_eig.iter().all(|&e| e > 0.0)
            && self.pi_row_sum <= ROW_SUM_TOL
            && self.pi_min_offdiag >= 0.0
            && self.structure_ok
    }
}

/// Recomputes every `Y` from `sys` and substitutes the stored `X_i` into the
/// design conditions of the certificate's law.
pub fn audit(sys: &SwitchedAffineSystem, certs: &CertificateSet) -> Result<AuditReport> {
    let m = sys.mode_count();
    let n = sys.n();
    if certs.mode_count() != m || certs.n() != n {
        return Err(Error::Mismatch(format!(
            "certificates are for n = {}, M = {}; system has n = {n}, M = {m}",
            certs.n(),
            certs.mode_count()
        )));
    }
    let pi = &certs.pi;
    let t = certs.dwell;
    let shift = DMatrix::<f64>::identity(n, n) * (0.5 * certs.eps_shift);
    let (a, q, with_gram, extended): (Vec<DMatrix<f64>>, DMatrix<f64>, bool, bool) = match certs.law {
        Law::Corollary1 => ((0..m).map(|i| sys.a(i) + &shift).collect(), sys.output_weight(), true, false),
        Law::AllerhandBaseline => ((0..m).map(|i| sys.a(i).clone()).collect(), sys.output_weight(), false, false),
        Law::Thm2Affine => (sys.extend().modes, sys.extend().output_weight(), true, true),
        Law::Thm1Linear | Law::GcT0 => ((0..m).map(|i| sys.a(i).clone()).collect(), sys.output_weight(), true, false),
    };
    let x: Vec<DMatrix<f64>> = if extended {
        certs
            .extended
            .as_ref()
            .ok_or_else(|| Error::Mismatch("affine certificates lack extended data".into()))?
            .x
            .clone()
    } else {
        certs.x.clone()
    };
    let d = q.nrows();
    let y: Vec<DMatrix<f64>> = a
        .iter()
        .zip(&x)
        .map(|(aj, xj)| {
            let e = expm_unchecked(&(aj * t));
            let mut yj = e.transpose() * xj * &e;
            if with_gram {
                yj += gram_unchecked(aj, &q, t);
            }
            yj
        })
        .collect();
    let mut selector = DMatrix::<f64>::zeros(d, d);
    if extended {
        selector[(d - 1, d - 1)] = certs.epsilon;
    }
    let residual_max_eig = (0..m)
        .map(|i| {
            let mut r = a[i].transpose() * &x[i] + &x[i] * &a[i] + &q - &selector;
            for j in 0..m {
                if j != i {
                    r += (&y[j] - &x[i]) * pi.rate(i, j);
                }
            }
            max_sym_eigenvalue(&symmetrize(&r))
        })
        .collect();
    let x_min_eig = certs
        .x
        .iter()
        .map(|xi| definiteness(xi).map(|r| r.min_eigenvalue))
        .collect::<Result<Vec<_>>>()?;
    let (row, min_off) = pi.invariant_residuals();
    let structure_ok = match &certs.extended {
        Some(ext) => ext.x.iter().zip(&certs.x).all(|(xe, xi)| *xe == border(xi, 1.0)),
        None => true,
    };
    Ok(AuditReport {
        residual_max_eig,
        x_min_eig,
        pi_row_sum: row,
        pi_min_offdiag: if m == 1 { 0.0 } else { min_off },
        structure_ok,
    })
}
