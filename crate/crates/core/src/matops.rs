//! Dense numerical kernels shared by the design and simulation layers.
//!
//! Everything here is a pure function of its inputs. Matrices are
//! `nalgebra::DMatrix<f64>`; the exponential is a scaling-and-squaring
//! Padé implementation and the two exponential integrals are evaluated
//! through block-triangular exponentials (Van Loan), so they inherit its
//! accuracy instead of relying on quadrature.

use std::os::raw::c_char;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Abscissa below which a matrix counts as Hurwitz.
pub const HURWITZ_MARGIN: f64 = -1e-12;

/// Relative asymmetry tolerated before a nominally symmetric input is rejected.
pub const SYMMETRY_TOL: f64 = 1e-10;

pub(crate) fn ensure_finite(what: &'static str, a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_square(what: &'static str, a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() == 0 || a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square and non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite(what, a)
}

/// `(S + S')/2`.
pub fn symmetrize(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

/// Whether `s` is symmetric to [`SYMMETRY_TOL`] relative to its largest entry.
pub fn is_symmetric(s: &DMatrix<f64>) -> bool {
    let scale = s.amax().max(1.0);
    (s - s.transpose()).amax() <= SYMMETRY_TOL * scale
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Backward-error thresholds on the 1-norm for each Padé degree.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

fn pade_solve(u: DMatrix<f64>, v: DMatrix<f64>) -> DMatrix<f64> {
    let num = &v + &u;
    let den = v - u;
    // den = q(A) is well conditioned for ||A|| below the thresholds above
    den.lu()
        .solve(&num)
        .expect("Padé denominator is nonsingular within the scaling thresholds")
}

fn pade_low(a: &DMatrix<f64>, coeffs: &[f64]) -> DMatrix<f64> {
    let n = a.nrows();
    let a2 = a * a;
    let mut odd = DMatrix::<f64>::identity(n, n) * coeffs[1];
    let mut even = DMatrix::<f64>::identity(n, n) * coeffs[0];
    let mut power = DMatrix::<f64>::identity(n, n);
    for k in 1..coeffs.len() / 2 {
        power = &power * &a2;
        odd += &power * coeffs[2 * k + 1];
        even += &power * coeffs[2 * k];
    }
    pade_solve(a * odd, even)
}

fn pade13(a: &DMatrix<f64>) -> DMatrix<f64> {
    let b = &PADE13;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + id * b[0];
    pade_solve(u, v)
}

/// Matrix exponential `e^{A t}` by scaling and squaring with Padé
/// approximants of degree 3 to 13, selected on the 1-norm of `A t`.
pub fn expm(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    ensure_square("expm argument", a)?;
    if !t.is_finite() {
        return Err(Error::NonFinite("expm time"));
    }
    Ok(expm_unchecked(&(a * t)))
}

pub(crate) fn expm_unchecked(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = one_norm(a);
    for &(degree, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(a, coeffs);
        }
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s);
    let mut r = pade13(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `∫₀ᵀ e^{A'τ} Q e^{Aτ} dτ` via the exponential of `[[-A', Q], [0, A]]·T`.
pub fn gram_integral(a: &DMatrix<f64>, q: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    ensure_square("gram_integral A", a)?;
    ensure_square("gram_integral Q", q)?;
    if q.nrows() != a.nrows() {
        return Err(Error::Dimension(format!(
            "Q is {}x{} but A is {}x{}",
            q.nrows(),
            q.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_symmetric(q) {
        return Err(Error::Invalid("gram_integral weight Q is not symmetric".into()));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Invalid(format!("integration horizon must be >= 0, got {t}")));
    }
    Ok(gram_unchecked(a, q, t))
}

pub(crate) fn gram_unchecked(a: &DMatrix<f64>, q: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if t == 0.0 {
        return DMatrix::zeros(n, n);
    }
    let mut block = DMatrix::<f64>::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a.transpose()));
    block.view_mut((0, n), (n, n)).copy_from(q);
    block.view_mut((n, n), (n, n)).copy_from(a);
    let e = expm_unchecked(&(block * t));
    let f12 = e.view((0, n), (n, n));
    let f22 = e.view((n, n), (n, n));
    symmetrize(&(f22.transpose() * f12))
}

/// `∫₀ᵀ e^{A(T-τ)} b dτ`, the state reached from rest under the constant drift `b`.
pub fn forced_integral(a: &DMatrix<f64>, b: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    ensure_square("forced_integral A", a)?;
    if b.len() != a.nrows() {
        return Err(Error::Dimension(format!(
            "b has length {} but A is {}x{}",
            b.len(),
            a.nrows(),
            a.ncols()
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Invalid(format!("integration horizon must be >= 0, got {t}")));
    }
    let e = expm_unchecked(&(augment(a, b) * t));
    let n = a.nrows();
    Ok(e.view((0, n), (n, 1)).column(0).into_owned())
}

/// `[[A, b], [0', 0]]`.
pub fn augment(a: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, 1)).copy_from(b);
    m
}

/// `diag(S, c)` for a square `S`.
pub fn border(s: &DMatrix<f64>, corner: f64) -> DMatrix<f64> {
    let n = s.nrows();
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(s);
    m[(n, n)] = corner;
    m
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Kronecker sum `A ⊕ B = A ⊗ I + I ⊗ B`.
pub fn kron_sum(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square("kron_sum A", a)?;
    ensure_square("kron_sum B", b)?;
    let ia = DMatrix::<f64>::identity(a.nrows(), a.nrows());
    let ib = DMatrix::<f64>::identity(b.nrows(), b.nrows());
    Ok(a.kronecker(&ib) + ia.kronecker(b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefinitenessReport {
    pub is_positive_definite: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Extreme eigenvalues of the symmetrized matrix, with the positive
/// definiteness verdict taken from an attempted Cholesky factorization.
pub fn definiteness(s: &DMatrix<f64>) -> Result<DefinitenessReport> {
    ensure_square("definiteness argument", s)?;
    let sym = symmetrize(s);
    let eig = sym.clone().symmetric_eigenvalues();
    let min = eig.min();
    let max = eig.max();
    let chol = min > 0.0 && sym.cholesky().is_some();
    Ok(DefinitenessReport {
        is_positive_definite: chol,
        min_eigenvalue: min,
        max_eigenvalue: max,
    })
}

/// Largest eigenvalue of the symmetric part of `s`.
pub(crate) fn max_sym_eigenvalue(s: &DMatrix<f64>) -> f64 {
    symmetrize(s).symmetric_eigenvalues().max()
}

/// Eigenvalues `(re, im)` of a general real matrix via LAPACK `dgeev`,
/// which balances the input and uses exceptional shifts. The Kronecker-sum
/// operators built here have heavily repeated spectra on which a plain
/// double-shift QR iteration can stall.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    ensure_square("eigenvalue argument", a)?;
    ensure_finite("eigenvalue argument", a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let lapack_int = |v: usize| {
        i32::try_from(v).map_err(|_| Error::Dimension(format!("matrix of order {n} is too large for LAPACK")))
    };
    let ni = lapack_int(n)?;
    // column-major, as LAPACK expects
    let mut m: Vec<f64> = a.as_slice().to_vec();
    let (mut wr, mut wi) = (vec![0.0; n], vec![0.0; n]);
    let (mut vl, mut vr) = ([0.0_f64], [0.0_f64]);
    let no = b'N' as c_char;
    let one = 1_i32;
    let mut info = 0_i32;
    let mut query = 0.0_f64;
    let mut lwork = -1_i32;
    // SAFETY: every pointer references a live buffer of the size LAPACK
    // reads for these arguments; the job flags disable eigenvector output.
    unsafe {
        lapack_sys::dgeev_(
            &no, &no, &ni, m.as_mut_ptr(), &ni, wr.as_mut_ptr(), wi.as_mut_ptr(),
            vl.as_mut_ptr(), &one, vr.as_mut_ptr(), &one, &mut query, &lwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Invalid(format!("dgeev workspace query failed (info = {info})")));
    }
    lwork = lapack_int((query as usize).max(4 * n))?;
    let mut work = vec![0.0; lwork as usize];
    // SAFETY: as above, with a workspace of the queried size.
    unsafe {
        lapack_sys::dgeev_(
            &no, &no, &ni, m.as_mut_ptr(), &ni, wr.as_mut_ptr(), wi.as_mut_ptr(),
            vl.as_mut_ptr(), &one, vr.as_mut_ptr(), &one, work.as_mut_ptr(), &lwork, &mut info,
        );
    }
    match info {
        0 => Ok(wr.into_iter().zip(wi).collect()),
        i if i < 0 => Err(Error::Invalid(format!("dgeev rejected argument {}", -i))),
        i => Err(Error::Invalid(format!("eigenvalue iteration failed to converge (dgeev info = {i})"))),
    }
}

/// Maximum real part over the spectrum of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?
        .into_iter()
        .map(|(re, _)| re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `(hurwitz, abscissa)` where `hurwitz` means abscissa < [`HURWITZ_MARGIN`].
pub fn is_hurwitz(a: &DMatrix<f64>) -> Result<(bool, f64)> {
    let abscissa = spectral_abscissa(a)?;
    Ok((abscissa < HURWITZ_MARGIN, abscissa))
}

/// `x' S x`.
pub fn quad_form(s: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(s * x))
}
