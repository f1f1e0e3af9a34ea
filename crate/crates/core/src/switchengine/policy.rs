use nalgebra::{DMatrix, DVector};

use crate::certdesign::{CertificateSet, Law, MetzlerMatrix};
use crate::error::{Error, Result};
use crate::matops::{augment, border, expm_unchecked, quad_form, symmetrize};
use crate::sysmodel::SwitchedAffineSystem;

/// Relative tolerance when checking stored `Y₁` against the system.
const CONSISTENCY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum SwitchingPolicy {
    /// State-feedback law encoded by the certificates' [`Law`].
    Certified(CertificateSet),
    /// Fixed cyclic sequence of 0-based modes, each held for `period`.
    PeriodicOpenLoop { sequence: Vec<usize>, period: f64 },
}

impl SwitchingPolicy {
    pub fn certified(certs: CertificateSet) -> Result<Self> {
        let m = certs.mode_count();
        if m == 0 || certs.pi.size() != m || certs.y1.len() != m || certs.y2.len() != m {
            return Err(Error::Mismatch("certificate lists have inconsistent lengths".into()));
        }
        match certs.law {
            Law::Thm2Affine => {
                let ext = certs.extended.as_ref().ok_or_else(|| {
                    Error::Mismatch("the affine law needs extended certificates".into())
                })?;
                if ext.x.len() != m || ext.y1.len() != m || ext.y2.len() != m {
                    return Err(Error::Mismatch("extended certificate lists are incomplete".into()));
                }
                if !(certs.epsilon.is_finite() && certs.epsilon >= 0.0) {
                    return Err(Error::Mismatch(format!("invalid epsilon {}", certs.epsilon)));
                }
            }
            Law::Corollary1 => {
                if !(certs.eps_shift > 0.0 && certs.delta >= 0.0) {
                    return Err(Error::Mismatch(
                        "the shifted design needs eps_shift > 0 and delta >= 0".into(),
                    ));
                }
            }
            Law::GcT0 => {
                if m != 2 {
                    return Err(Error::Unsupported("the zero-dwell law needs M = 2".into()));
                }
            }
            Law::Thm1Linear | Law::AllerhandBaseline => {}
        }
        if certs.law != Law::GcT0 && !(certs.dwell > 0.0 && certs.dwell.is_finite()) {
            return Err(Error::Mismatch(format!("invalid dwell time {}", certs.dwell)));
        }
        Ok(SwitchingPolicy::Certified(certs))
    }

    pub fn periodic(sequence: Vec<usize>, period: f64) -> Result<Self> {
        if sequence.is_empty() {
            return Err(Error::Invalid("periodic sequence is empty".into()));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Invalid(format!("period must be positive, got {period}")));
        }
        Ok(SwitchingPolicy::PeriodicOpenLoop { sequence, period })
    }

    pub fn certificates(&self) -> Option<&CertificateSet> {
        match self {
            SwitchingPolicy::Certified(c) => Some(c),
            SwitchingPolicy::PeriodicOpenLoop { .. } => None,
        }
    }

    /// Minimum time between decisions. `None` for the zero-dwell law, whose
    /// window is the decision step itself.
    pub fn dwell(&self) -> Option<f64> {
        match self {
            SwitchingPolicy::Certified(c) if c.law == Law::GcT0 => None,
            SwitchingPolicy::Certified(c) => Some(c.dwell),
            SwitchingPolicy::PeriodicOpenLoop { period, .. } => Some(*period),
        }
    }
}

/// Comparison law of the stored certificates: the entry matrices `P_j(0)`
/// and the resting matrices, both in extended coordinates.
#[derive(Debug, Clone)]
pub(crate) struct Comparator {
    pub entry: Vec<DMatrix<f64>>,
    pub resting: Vec<DMatrix<f64>>,
}

impl Comparator {
    pub fn new(certs: &CertificateSet) -> Self {
        let m = certs.mode_count();
        Self {
            entry: (0..m).map(|j| certs.entry_matrix(j)).collect(),
            resting: (0..m).map(|i| certs.resting_matrix(i)).collect(),
        }
    }

    /// `min_{j≠i} x̃'(P_j(0) - X̂_i)x̃`; negative exactly when a switch is due.
    pub fn event(&self, xt: &DVector<f64>, i: usize) -> f64 {
        let rest = quad_form(&self.resting[i], xt);
        (0..self.entry.len())
            .filter(|&j| j != i)
            .map(|j| quad_form(&self.entry[j], xt) - rest)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn decide(&self, xt: &DVector<f64>, i: usize) -> Option<usize> {
        let rest = quad_form(&self.resting[i], xt);
        let mut best: Option<(usize, f64)> = None;
        let mut triggered = false;
        for j in 0..self.entry.len() {
            if j == i {
                continue;
            }
            let v = quad_form(&self.entry[j], xt);
            if v < rest {
                triggered = true;
            }
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((j, v));
            }
        }
        if triggered {
            best.map(|(j, _)| j)
        } else {
            None
        }
    }
}

/// Switch decision after the dwell window: `None` while
/// `x̃'P_j(0)x̃ ≥ x̃'X̂_i x̃` for every `j ≠ i`, otherwise the argmin over
/// `j ≠ i` of `x̃'P_j(0)x̃` (ties to the smallest index). `xt` is the lifted
/// state `[x; 1]`. The open-loop policy never decides on the state.
pub fn should_switch(xt: &DVector<f64>, active: usize, policy: &SwitchingPolicy) -> Option<usize> {
    match policy {
        SwitchingPolicy::Certified(c) => Comparator::new(c).decide(xt, active),
        SwitchingPolicy::PeriodicOpenLoop { .. } => None,
    }
}

/// Initial mode: the argmin of the initial Lyapunov value, or the first
/// entry of an open-loop sequence.
pub fn init_sigma(x0: &DVector<f64>, policy: &SwitchingPolicy) -> usize {
    match policy {
        SwitchingPolicy::Certified(c) => c.initial_mode(x0),
        SwitchingPolicy::PeriodicOpenLoop { sequence, .. } => sequence[0],
    }
}

/// Comparison-law policy built from certificates designed without the cost
/// Gramian.
pub fn baseline_allerhand(
    sys: &SwitchedAffineSystem,
    pi: &MetzlerMatrix,
    dwell: f64,
    rho: f64,
) -> Result<SwitchingPolicy> {
    if !sys.is_linear() {
        return Err(Error::Invalid("the baseline law is defined for linear systems".into()));
    }
    SwitchingPolicy::certified(crate::certdesign::baseline_design(sys, pi, dwell, rho)?)
}

/// Data for the time-varying Lyapunov matrix
/// `P_i(s) = e^{D_i'(T-s)} X̂_i e^{D_i(T-s)} + ∫₀^{T-s} e^{D_i'τ} Q e^{D_iτ} dτ`
/// during the dwell window and `X̂_i` after it.
#[derive(Debug, Clone)]
pub(crate) struct LyapunovData {
    pub design: Vec<DMatrix<f64>>,
    pub weight: DMatrix<f64>,
    pub window: f64,
}

impl LyapunovData {
    pub fn new(sys: &SwitchedAffineSystem, certs: &CertificateSet) -> Result<Self> {
        let m = sys.mode_count();
        let n = sys.n();
        if certs.n() != n || certs.mode_count() != m {
            return Err(Error::Mismatch(format!(
                "certificates are for n = {}, M = {}; system has n = {n}, M = {m}",
                certs.n(),
                certs.mode_count()
            )));
        }
        let zero = DVector::zeros(n);
        let shift = DMatrix::<f64>::identity(n, n) * (0.5 * certs.eps_shift);
        let (design, weight): (Vec<DMatrix<f64>>, DMatrix<f64>) = match certs.law {
            Law::Thm2Affine => {
                let ext = sys.extend();
                let w = ext.output_weight();
                (ext.modes, w)
            }
            Law::Corollary1 => (
                (0..m).map(|i| augment(&(sys.a(i) + &shift), &zero)).collect(),
                border(&sys.output_weight(), 0.0),
            ),
            Law::AllerhandBaseline => (
                (0..m).map(|i| augment(sys.a(i), &zero)).collect(),
                DMatrix::zeros(n + 1, n + 1),
            ),
            Law::Thm1Linear | Law::GcT0 => (
                (0..m).map(|i| augment(sys.a(i), &zero)).collect(),
                border(&sys.output_weight(), 0.0),
            ),
        };
        // Stored Y₁ must be reproducible from this system. The extended
        // copy also pins down the affine terms.
        let mismatch = |j: usize| {
            Error::Mismatch(format!(
                "certificates do not belong to this system (Y1 of mode {} differs)",
                j + 1
            ))
        };
        let reproduces = |a: &DMatrix<f64>, x: &DMatrix<f64>, stored: &DMatrix<f64>| {
            let e = expm_unchecked(&(a * certs.dwell));
            let y1 = symmetrize(&(e.transpose() * x * &e));
            (&y1 - stored).amax() <= CONSISTENCY_TOL * stored.amax().max(1.0)
        };
        for j in 0..m {
            let a = design[j].view((0, 0), (n, n)).into_owned();
            if !reproduces(&a, &certs.x[j], &certs.y1[j]) {
                return Err(mismatch(j));
            }
            if let (Law::Thm2Affine, Some(ext)) = (certs.law, &certs.extended) {
                if !reproduces(&design[j], &ext.x[j], &ext.y1[j]) {
                    return Err(mismatch(j));
                }
            }
        }
        Ok(Self {
            design,
            weight,
            window: certs.dwell,
        })
    }
}

/// `x̃' = e^{Ã_i h} x̃`.
pub fn propagate(sys: &SwitchedAffineSystem, mode: usize, xt: &DVector<f64>, h: f64) -> DVector<f64> {
    let a = augment(sys.a(mode), sys.b(mode));
    expm_unchecked(&(a * h)) * xt
}
