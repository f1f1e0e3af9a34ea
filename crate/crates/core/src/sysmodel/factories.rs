use nalgebra::{DMatrix, DVector};

use super::{Mode, SwitchedAffineSystem};
use crate::error::{Error, Result};

fn mat(rows: [[f64; 2]; 2]) -> DMatrix<f64> {
    DMatrix::from_fn(2, 2, |i, j| rows[i][j])
}

/// Two unstable planar modes whose half-half average is Hurwitz.
/// With `affine = true` the modes carry `b₁ = [1, -1]'`, `b₂ = [-1, 1]'`.
pub fn example_unstable_pair(affine: bool) -> SwitchedAffineSystem {
    let a1 = mat([[-2.0, 0.3], [-2.0, 1.0]]);
    let a2 = mat([[1.0, 2.0], [-0.3, -4.0]]);
    let (b1, b2) = if affine {
        (
            DVector::from_vec(vec![1.0, -1.0]),
            DVector::from_vec(vec![-1.0, 1.0]),
        )
    } else {
        (DVector::zeros(2), DVector::zeros(2))
    };
    SwitchedAffineSystem::new(
        vec![Mode { a: a1, b: b1 }, Mode { a: a2, b: b2 }],
        DMatrix::identity(2, 2),
    )
    .expect("static example is well formed")
}

/// Three-buffer triangular junction. In mode `i` buffer `i` drains at rate
/// `gamma` and buffer `i+2` grows with gain `beta` in buffer `i+1` (indices
/// mod 3). All buffers receive unit inflow.
pub fn example_congestion(gamma: f64, beta: f64) -> Result<SwitchedAffineSystem> {
    if !(gamma > 0.0 && beta > 0.0 && gamma.is_finite() && beta.is_finite()) {
        return Err(Error::Invalid(format!(
            "congestion parameters must be positive, got gamma={gamma}, beta={beta}"
        )));
    }
    let g = -gamma;
    let a1 = DMatrix::from_row_slice(3, 3, &[g, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, beta, 0.0]);
    let a2 = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, beta, 0.0, g, 0.0, 0.0, 0.0, 0.0]);
    let a3 = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, beta, 0.0, 0.0, 0.0, 0.0, g]);
    let inflow = DVector::from_element(3, 1.0);
    let modes = [a1, a2, a3]
        .into_iter()
        .map(|a| Mode {
            a,
            b: inflow.clone(),
        })
        .collect();
    SwitchedAffineSystem::new(modes, DMatrix::identity(3, 3))
}

/// Component values of the two-stage boost converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams {
    pub l1: f64,
    pub l2: f64,
    pub c1: f64,
    pub c2: f64,
    pub r1: f64,
    pub rl: f64,
    pub e: f64,
}

impl Default for BoostParams {
    /// Illustrative component values. They are not taken from any
    /// published design and only serve to make the preset runnable.
    fn default() -> Self {
        Self {
            l1: 10e-3,
            l2: 10e-3,
            c1: 100e-6,
            c2: 100e-6,
            r1: 100.0,
            rl: 100.0,
            e: 12.0,
        }
    }
}

impl BoostParams {
    fn validate(&self) -> Result<()> {
        let all = [self.l1, self.l2, self.c1, self.c2, self.r1, self.rl, self.e];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "boost-boost parameters must be positive: {self:?}"
            )))
        }
    }
}

/// Four-mode boost-boost converter together with its steady-state map.
#[derive(Debug, Clone)]
pub struct BoostBoost {
    pub system: SwitchedAffineSystem,
    pub params: BoostParams,
}

impl BoostBoost {
    /// Full operating point from the two regulated voltages `(x₂⋆, x₄⋆)`.
    pub fn equilibrium(&self, x2: f64, x4: f64) -> DVector<f64> {
        let p = &self.params;
        let x1 = x2 * x2 / (p.r1 * p.e) + x4 * x4 / (p.rl * p.e);
        let x3 = x4 * x4 / (p.rl * x2);
        DVector::from_vec(vec![x1, x2, x3, x4])
    }

    /// Error coordinates around the operating point for `(x₂⋆, x₄⋆)`, with
    /// the regulated voltages normalized as outputs: `z = [e₂/x₂⋆, e₄/x₄⋆]`.
    /// Returns the shifted system and the operating point.
    pub fn regulated(&self, x2: f64, x4: f64) -> Result<(SwitchedAffineSystem, DVector<f64>)> {
        if !(x2.is_finite() && x4.is_finite() && x2 > 0.0 && x4 > 0.0) {
            return Err(Error::Invalid(format!(
                "reference voltages must be positive, got ({x2}, {x4})"
            )));
        }
        let xe = self.equilibrium(x2, x4);
        let shifted = self.system.shift_equilibrium(&xe)?;
        let mut c = DMatrix::zeros(2, 4);
        c[(0, 1)] = 1.0 / x2;
        c[(1, 3)] = 1.0 / x4;
        let mut sys = SwitchedAffineSystem::new(shifted.modes().to_vec(), c)?;
        if let Some(labels) = self.system.labels() {
            sys = sys.with_labels(labels.to_vec())?;
        }
        Ok((sys, xe))
    }
}

/// State `[i_L1, v_C1, i_L2, v_C2]`; modes follow the switch pairs
/// `(u₁, u₂) = (0,0), (1,0), (0,1), (1,1)`.
pub fn example_boost_boost(params: BoostParams) -> Result<BoostBoost> {
    params.validate()?;
    let BoostParams {
        l1,
        l2,
        c1,
        c2,
        r1,
        rl,
        e,
    } = params;
    let first_row = [0.0, -1.0 / l1, 0.0, 0.0];
    let second_row = [1.0 / c1, -1.0 / (r1 * c1), -1.0 / c1, 0.0];
    let third_open = [0.0, 1.0 / l2, 0.0, -1.0 / l2];
    let third_closed = [0.0, 1.0 / l2, 0.0, 0.0];
    let fourth_open = [0.0, 0.0, 1.0 / c2, -1.0 / (rl * c2)];
    let fourth_closed = [0.0, 0.0, 0.0, -1.0 / (rl * c2)];

    let build = |u1: bool, u2: bool| {
        let r0 = if u1 { [0.0; 4] } else { first_row };
        let mut r1v = second_row;
        if u1 {
            r1v[0] = 0.0;
        }
        let r2 = if u2 { third_closed } else { third_open };
        let r3 = if u2 { fourth_closed } else { fourth_open };
        DMatrix::from_fn(4, 4, |i, j| [r0, r1v, r2, r3][i][j])
    };
    let b = DVector::from_vec(vec![e / l1, 0.0, 0.0, 0.0]);
    let modes = [(false, false), (true, false), (false, true), (true, true)]
        .into_iter()
        .map(|(u1, u2)| Mode {
            a: build(u1, u2),
            b: b.clone(),
        })
        .collect();
    let system = SwitchedAffineSystem::new(modes, DMatrix::identity(4, 4))?.with_labels(
        ["u=(0,0)", "u=(1,0)", "u=(0,1)", "u=(1,1)"]
            .into_iter()
            .map(String::from)
            .collect(),
    )?;
    Ok(BoostBoost { system, params })
}
