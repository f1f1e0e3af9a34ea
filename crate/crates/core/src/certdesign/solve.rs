//! Lyapunov-Metzler certificates for a fixed rate matrix.
//!
//! For fixed `Π` and `T` the coupled conditions are linear in `{X_i}`. We
//! replace each strict inequality by the equality with right-hand side
//! `-ρI`, solve the stacked system of dimension `M·n²` once, and then
//! check definiteness of the solution and of the substituted residuals.
//!
//! Vectorization is column-stacking. With `vec(P'XQ) = (Q'⊗P')vec(X)`
//! block `(i, i)` of the operator is `A_i'⊕A_i' + π_ii I` and block
//! `(i, j)` is `π_ij (E_j'⊗E_j')` with `E_j = e^{A_jT}`. This is the same
//! matrix that [`super::existence_check`] builds from `e^{(A_j'⊕A_j')T}`.

use nalgebra::{DMatrix, DVector};

use super::{CertificateSet, ExtendedCertificates, Law, MetzlerMatrix};
use crate::error::{Error, Result};
use crate::matops::{
    border, definiteness, expm_unchecked, forced_integral, gram_unchecked, kron, kron_sum,
    max_sym_eigenvalue, symmetrize,
};
use crate::sysmodel::SwitchedAffineSystem;

/// Relative residual accepted from the stacked linear solve.
pub const SOLVE_REL_TOL: f64 = 1e-8;

/// `ρ = 1e-6·‖C'C‖₂`, floored so that a zero output matrix still yields a margin.
pub fn default_rho(sys: &SwitchedAffineSystem) -> f64 {
    let w = sys.output_weight();
    let norm = w.symmetric_eigenvalues().amax();
    if norm > 0.0 {
        1e-6 * norm
    } else {
        1e-6
    }
}

/// Solution of the coupled equality for one set of mode matrices.
#[derive(Debug, Clone)]
pub(crate) struct CoupledSolution {
    pub x: Vec<DMatrix<f64>>,
    pub y1: Vec<DMatrix<f64>>,
    pub y2: Vec<DMatrix<f64>>,
}

/// Solves `A_i'X_i + X_iA_i + Σ_{j≠i} π_ij(E_j'X_jE_j + G_j - X_i) + Q = -ρI`.
/// `G_j` is the cost Gramian when `with_gramian`, zero otherwise.
pub(crate) fn solve_coupled(
    a: &[DMatrix<f64>],
    q: &DMatrix<f64>,
    pi: &MetzlerMatrix,
    dwell: f64,
    rho: f64,
    with_gramian: bool,
) -> Result<CoupledSolution> {
    let m = a.len();
    if pi.size() != m {
        return Err(Error::Dimension(format!(
            "rate matrix is {0}x{0} but the system has {m} modes",
            pi.size()
        )));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::Invalid(format!("margin rho must be positive, got {rho}")));
    }
    if !(dwell.is_finite() && dwell >= 0.0) {
        return Err(Error::Invalid(format!("dwell time must be >= 0, got {dwell}")));
    }
    let n = q.nrows();
    let nn = n * n;
    let id_n = DMatrix::<f64>::identity(n, n);

    let e: Vec<DMatrix<f64>> = a.iter().map(|ai| expm_unchecked(&(ai * dwell))).collect();
    let y2: Vec<DMatrix<f64>> = a
        .iter()
        .map(|ai| {
            if with_gramian {
                gram_unchecked(ai, q, dwell)
            } else {
                DMatrix::zeros(n, n)
            }
        })
        .collect();

    let mut op = DMatrix::<f64>::zeros(m * nn, m * nn);
    let mut rhs = DVector::<f64>::zeros(m * nn);
    for i in 0..m {
        let at = a[i].transpose();
        let diag = kron_sum(&at, &at)? + DMatrix::<f64>::identity(nn, nn) * pi.rate(i, i);
        op.view_mut((i * nn, i * nn), (nn, nn)).copy_from(&diag);
        let mut constant = q + &id_n * rho;
        for j in 0..m {
            if j == i || pi.rate(i, j) == 0.0 {
                continue;
            }
            let et = e[j].transpose();
            let block = kron(&et, &et) * pi.rate(i, j);
            op.view_mut((i * nn, j * nn), (nn, nn)).copy_from(&block);
            constant += &y2[j] * pi.rate(i, j);
        }
        rhs.rows_mut(i * nn, nn)
            .copy_from_slice((-constant).as_slice());
    }

    let sol = op.clone().lu().solve(&rhs).ok_or_else(|| {
        Error::ExistenceViolated("the stacked Lyapunov-Metzler operator is singular".into())
    })?;
    if !sol.iter().all(|v| v.is_finite()) {
        return Err(Error::ExistenceViolated(
            "the stacked Lyapunov-Metzler operator is numerically singular".into(),
        ));
    }
    let rel = (&op * &sol - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    if rel > SOLVE_REL_TOL {
        return Err(Error::ExistenceViolated(format!(
            "stacked solve is ill-conditioned (relative residual {rel:.2e})"
        )));
    }

    let x: Vec<DMatrix<f64>> = (0..m)
        .map(|i| symmetrize(&DMatrix::from_column_slice(n, n, &sol.as_slice()[i * nn..(i + 1) * nn])))
        .collect();
    for (i, xi) in x.iter().enumerate() {
        let rep = definiteness(xi)?;
        if !rep.is_positive_definite {
            return Err(Error::Infeasible {
                mode: i + 1,
                min_eigenvalue: rep.min_eigenvalue,
                reason: "solution X_i is not positive definite".into(),
            });
        }
    }
    let y1: Vec<DMatrix<f64>> = (0..m)
        .map(|j| symmetrize(&(e[j].transpose() * &x[j] * &e[j])))
        .collect();

    for i in 0..m {
        let r = linear_residual(&a[i], q, pi, i, &x, &y1, &y2);
        let top = max_sym_eigenvalue(&r);
        if top > -rho / 2.0 {
            return Err(Error::Infeasible {
                mode: i + 1,
                min_eigenvalue: -top,
                reason: format!("substituted residual has eigenvalue {top:.3e} > -rho/2"),
            });
        }
    }
    Ok(CoupledSolution {
        x,
        y1,
        y2,
    })
}

/// `A_i'X_i + X_iA_i + Σ_{j≠i} π_ij(Y1_j + Y2_j - X_i) + Q`.
pub(crate) fn linear_residual(
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    pi: &MetzlerMatrix,
    i: usize,
    x: &[DMatrix<f64>],
    y1: &[DMatrix<f64>],
    y2: &[DMatrix<f64>],
) -> DMatrix<f64> {
    let mut r = a.transpose() * &x[i] + &x[i] * a + q;
    for j in 0..x.len() {
        if j != i {
            r += (&y1[j] + &y2[j] - &x[i]) * pi.rate(i, j);
        }
    }
    symmetrize(&r)
}

fn linear_certificates(law: Law, pi: &MetzlerMatrix, dwell: f64, rho: f64, s: CoupledSolution) -> CertificateSet {
    CertificateSet {
        law,
        dwell,
        pi: pi.clone(),
        rho,
        x: s.x,
        y1: s.y1,
        y2: s.y2,
        extended: None,
        epsilon: 0.0,
        eps_shift: 0.0,
        delta: 0.0,
    }
}

fn mode_matrices(sys: &SwitchedAffineSystem) -> Vec<DMatrix<f64>> {
    (0..sys.mode_count()).map(|i| sys.a(i).clone()).collect()
}

fn check_dwell(dwell: f64) -> Result<()> {
    if dwell.is_finite() && dwell > 0.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("dwell time must be positive, got {dwell}")))
    }
}

/// Certificates for the linear dwell-time law. The affine terms of `sys` are ignored.
pub fn lm_solve_linear(
    sys: &SwitchedAffineSystem,
    pi: &MetzlerMatrix,
    dwell: f64,
    rho: f64,
) -> Result<CertificateSet> {
    check_dwell(dwell)?;
    let a = mode_matrices(sys);
    let sol = solve_coupled(&a, &sys.output_weight(), pi, dwell, rho, true)?;
    Ok(linear_certificates(Law::Thm1Linear, pi, dwell, rho, sol))
}

/// Certificates for the comparison law that forecasts `e^{A_j'T}P_je^{A_jT}`
/// only (no cost-to-go term).
pub fn baseline_design(
    sys: &SwitchedAffineSystem,
    pi: &MetzlerMatrix,
    dwell: f64,
    rho: f64,
) -> Result<CertificateSet> {
    check_dwell(dwell)?;
    let a = mode_matrices(sys);
    let sol = solve_coupled(&a, &sys.output_weight(), pi, dwell, rho, false)?;
    Ok(linear_certificates(Law::AllerhandBaseline, pi, dwell, rho, sol))
}

/// Full `(n+1)×(n+1)` residual of the extended condition at `X̃_i = diag(X_i, 1)`.
pub(crate) fn extended_residual(
    a_ext: &DMatrix<f64>,
    q_ext: &DMatrix<f64>,
    pi: &MetzlerMatrix,
    i: usize,
    x_ext: &[DMatrix<f64>],
    y1_ext: &[DMatrix<f64>],
    y2_ext: &[DMatrix<f64>],
) -> DMatrix<f64> {
    linear_residual(a_ext, q_ext, pi, i, x_ext, y1_ext, y2_ext)
}

/// Smallest `ε` with `[[UL + sI, v], [v', c + s - ε]] < 0`, i.e. the Schur
/// complement `c + s - v'(UL + sI)⁻¹v`. `None` when `UL + sI` is not negative definite.
fn corner_slack(r: &DMatrix<f64>, shift: f64) -> Option<f64> {
    let n = r.nrows() - 1;
    let ul = r.view((0, 0), (n, n)).into_owned() + DMatrix::<f64>::identity(n, n) * shift;
    if max_sym_eigenvalue(&ul) >= 0.0 {
        return None;
    }
    let v = r.view((0, n), (n, 1)).column(0).into_owned();
    let w = ul.lu().solve(&v)?;
    Some(r[(n, n)] + shift - v.dot(&w))
}

/// Certificates for the extended-state affine law.
///
/// The upper-left block of the extended condition is the linear one, so
/// `{X_i}` come from [`lm_solve_linear`]. The slack is then
/// `ε = max_i ε_i(3ρ/4) + ρ/4`, where `ε_i(s)` is the Schur complement of
/// the corner after shifting the residual by `sI`; this keeps every
/// `R_i - εĨ` at or below `-ρ/2` with a `ρ/4` cushion, and reduces to
/// `ε = ρ` when all `b_i = 0`.
pub fn lm_solve_affine(
    sys: &SwitchedAffineSystem,
    pi: &MetzlerMatrix,
    dwell: f64,
    rho: f64,
) -> Result<CertificateSet> {
    let lin = lm_solve_linear(sys, pi, dwell, rho)?;
    let ext = sys.extend();
    let q_ext = ext.output_weight();
    let m = sys.mode_count();

    let x_ext: Vec<DMatrix<f64>> = lin.x.iter().map(|x| border(x, 1.0)).collect();
    let e_ext: Vec<DMatrix<f64>> = ext.modes.iter().map(|a| expm_unchecked(&(a * dwell))).collect();
    let y1_ext: Vec<DMatrix<f64>> = (0..m)
        .map(|j| symmetrize(&(e_ext[j].transpose() * &x_ext[j] * &e_ext[j])))
        .collect();
    let y2_ext: Vec<DMatrix<f64>> = ext
        .modes
        .iter()
        .map(|a| gram_unchecked(a, &q_ext, dwell))
        .collect();
    let forced = (0..m)
        .map(|j| forced_integral(sys.a(j), sys.b(j), dwell))
        .collect::<Result<Vec<_>>>()?;

    let mut epsilon_modes = Vec::with_capacity(m);
    let mut certified = f64::NEG_INFINITY;
    for i in 0..m {
        let r = extended_residual(&ext.modes[i], &q_ext, pi, i, &x_ext, &y1_ext, &y2_ext);
        let minimal = corner_slack(&r, 0.0).ok_or_else(|| Error::Infeasible {
            mode: i + 1,
            min_eigenvalue: -max_sym_eigenvalue(&r.view((0, 0), (sys.n(), sys.n())).into_owned()),
            reason: "upper-left block of the extended residual is not negative definite".into(),
        })?;
        let with_margin = corner_slack(&r, 0.75 * rho).ok_or_else(|| Error::Infeasible {
            mode: i + 1,
            min_eigenvalue: f64::NAN,
            reason: "upper-left block does not clear the -rho/2 margin".into(),
        })?;
        epsilon_modes.push(minimal);
        certified = certified.max(with_margin);
    }
    let epsilon = certified + 0.25 * rho;

    Ok(CertificateSet {
        law: Law::Thm2Affine,
        extended: Some(ExtendedCertificates {
            x: x_ext,
            y1: y1_ext,
            y2: y2_ext,
            m: forced,
            epsilon_modes,
        }),
        epsilon,
        ..lin
    })
}

/// `A_i + (ϵ/2) I`.
fn shifted_modes(sys: &SwitchedAffineSystem, eps_shift: f64) -> Vec<DMatrix<f64>> {
    let n = sys.n();
    (0..sys.mode_count())
        .map(|i| sys.a(i) + DMatrix::<f64>::identity(n, n) * (0.5 * eps_shift))
        .collect()
}

/// Grid resolution for the `δ` maximization.
pub const DELTA_GRID: usize = 101;

/// `b'P(τ)b` with `P(τ) = e^{Â'τ}Xe^{Âτ} + ∫₀^τ e^{Â's}C'Ce^{Âs}ds`, `τ = T - s`
/// the time left in the dwell window.
pub(crate) fn dwell_weight(a: &DMatrix<f64>, q: &DMatrix<f64>, x: &DMatrix<f64>, b: &DVector<f64>, tau: f64) -> f64 {
    let e = expm_unchecked(&(a * tau));
    let p = e.transpose() * x * &e + gram_unchecked(a, q, tau);
    b.dot(&(p * b))
}

fn maximize_on_interval(f: impl Fn(f64) -> f64, len: f64, grid: usize) -> f64 {
    let h = len / (grid - 1) as f64;
    let values: Vec<f64> = (0..grid).map(|k| f(k as f64 * h)).collect();
    let (k_best, &v_best) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");
    // golden-section refinement on the bracketing cells
    let mut lo = (k_best as f64 - 1.0).max(0.0) * h;
    let mut hi = ((k_best + 1).min(grid - 1)) as f64 * h;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if hi - lo <= 1e-12 * len.max(1.0) {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    v_best.max(fc).max(fd)
}

/// Certificates for applying the linear law to an affine system, designed
/// on the shifted matrices `Â_i = A_i + (ϵ/2)I`, together with the cost rate
/// `δ = (1/ϵ) max_i max_{τ∈[0,T]} b_i'P_i(τ)b_i`.
pub fn corollary1_design(
    sys: &SwitchedAffineSystem,
    pi: &MetzlerMatrix,
    dwell: f64,
    eps_shift: f64,
    rho: f64,
) -> Result<CertificateSet> {
    check_dwell(dwell)?;
    if !(eps_shift.is_finite() && eps_shift > 0.0) {
        return Err(Error::Invalid(format!("eps_shift must be positive, got {eps_shift}")));
    }
    let a_hat = shifted_modes(sys, eps_shift);
    let q = sys.output_weight();
    let sol = solve_coupled(&a_hat, &q, pi, dwell, rho, true).map_err(|e| match e {
        Error::Infeasible {
            mode,
            min_eigenvalue,
            reason,
        } => Error::Infeasible {
            mode,
            min_eigenvalue,
            reason: format!("{reason}; try a smaller eps_shift"),
        },
        other => other,
    })?;
    let mut worst: f64 = 0.0;
    for i in 0..sys.mode_count() {
        let b = sys.b(i);
        if b.iter().all(|&v| v == 0.0) {
            continue;
        }
        let peak = maximize_on_interval(
            |tau| dwell_weight(&a_hat[i], &q, &sol.x[i], b, tau),
            dwell,
            DELTA_GRID,
        );
        worst = worst.max(peak);
    }
    let mut certs = linear_certificates(Law::Corollary1, pi, dwell, rho, sol);
    certs.eps_shift = eps_shift;
    certs.delta = worst / eps_shift;
    Ok(certs)
}

/// Largest shift `ϵ` for which [`corollary1_design`] stays feasible, located
/// by doubling then bisection to relative width `rel_tol`. Returns the last
/// feasible point. Optimality is not claimed.
pub fn largest_feasible_eps_shift(
    sys: &SwitchedAffineSystem,
    pi: &MetzlerMatrix,
    dwell: f64,
    rho: f64,
    rel_tol: f64,
) -> Result<f64> {
    let feasible = |eps: f64| -> Result<bool> {
        match solve_coupled(&shifted_modes(sys, eps), &sys.output_weight(), pi, dwell, rho, true) {
            Ok(_) => Ok(true),
            Err(Error::Infeasible { .. }) | Err(Error::ExistenceViolated(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if !feasible(0.0)? {
        return Err(Error::Infeasible {
            mode: 0,
            min_eigenvalue: f64::NAN,
            reason: "the unshifted design is already infeasible".into(),
        });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Invalid("eps_shift feasibility is unbounded".into()));
        }
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(Error::Infeasible {
            mode: 0,
            min_eigenvalue: f64::NAN,
            reason: "no positive eps_shift is feasible".into(),
        });
    }
    Ok(lo)
}

/// Pairwise zero-dwell certificates: `A_i'X_i + X_iA_i + γ(X_j - X_i) + C'C = -ρI`
/// with `j` the other mode. Only `M = 2` is supported.
pub fn gc_design_t0(sys: &SwitchedAffineSystem, gamma: f64, rho: f64) -> Result<CertificateSet> {
    if sys.mode_count() != 2 {
        return Err(Error::Unsupported(format!(
            "the zero-dwell pairwise law is defined for M = 2, got M = {}",
            sys.mode_count()
        )));
    }
    let pi = MetzlerMatrix::uniform_pair(gamma)?;
    let sol = solve_coupled(&mode_matrices(sys), &sys.output_weight(), &pi, 0.0, rho, true)?;
    Ok(linear_certificates(Law::GcT0, &pi, 0.0, rho, sol))
}
