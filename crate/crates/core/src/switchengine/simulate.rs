use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::policy::{Comparator, LyapunovData, SwitchingPolicy};
use crate::certdesign::Law;
use crate::error::{Error, Result};
use crate::matops::{augment, expm_unchecked, gram_unchecked, quad_form};
use crate::sysmodel::{lift, SwitchedAffineSystem};

/// Abort once `‖x‖` exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e9;
/// Crossing refinement, relative to the decision step.
pub const EVENT_REL_TOL: f64 = 1e-3;
/// Decision step of the zero-dwell law when none is configured.
pub const GC_DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sigma0 {
    Auto,
    /// 0-based mode index.
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub x0: DVector<f64>,
    pub t0: f64,
    pub t_end: f64,
    /// Decision step; `None` selects `T/100`.
    pub h_check: Option<f64>,
    pub sigma0: Sigma0,
}

impl EngineConfig {
    pub fn new(x0: DVector<f64>, t_end: f64) -> Self {
        Self {
            x0,
            t0: 0.0,
            t_end,
            h_check: None,
            sigma0: Sigma0::Auto,
        }
    }

    /// Effective decision step for `policy` after validation.
    pub fn step_for(&self, policy: &SwitchingPolicy) -> Result<f64> {
        if !(self.t0.is_finite() && self.t_end.is_finite() && self.t_end > self.t0) {
            return Err(Error::Invalid(format!(
                "need t_end > t0, got t0 = {}, t_end = {}",
                self.t0, self.t_end
            )));
        }
        match (policy.dwell(), self.h_check) {
            (Some(t), h) => {
                let h = h.unwrap_or(t / 100.0);
                if !(h > 0.0 && h <= t / 10.0 * (1.0 + 1e-12)) {
                    return Err(Error::Invalid(format!(
                        "h_check must satisfy 0 < h <= T/10 = {}, got {h}",
                        t / 10.0
                    )));
                }
                Ok(h)
            }
            (None, Some(h)) if h > 0.0 && h.is_finite() => Ok(h),
            (None, Some(h)) => Err(Error::Invalid(format!("h_check must be positive, got {h}"))),
            (None, None) => Ok(GC_DEFAULT_STEP),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: DVector<f64>,
    /// 0-based active mode.
    pub sigma: usize,
    /// Lyapunov value; `NaN` for open-loop runs.
    pub v: f64,
    /// Accumulated cost `∫ z'z`.
    pub j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub t: f64,
    pub from: usize,
    pub to: usize,
    pub delta_v: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub switches: Vec<SwitchEvent>,
    /// Largest `|x̃_{n+1} - 1|` seen during propagation.
    pub lift_drift: f64,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> Option<&DVector<f64>> {
        self.samples.last().map(|s| &s.x)
    }

    pub fn final_cost(&self) -> Option<f64> {
        self.samples.last().map(|s| s.j)
    }

    /// Sample closest to `t` from below.
    pub fn sample_at(&self, t: f64) -> Option<&Sample> {
        let k = self.samples.partition_point(|s| s.t <= t);
        if k == 0 {
            None
        } else {
            Some(&self.samples[k - 1])
        }
    }

    pub fn mode_sequence(&self) -> Vec<usize> {
        self.switches.iter().map(|e| e.to).collect()
    }
}

/// Upper bound on cached step lengths per run.
const STEP_CACHE_LIMIT: usize = 256;
/// Dwell positions beyond this index are not cached.
const VALUE_CACHE_LIMIT: usize = 100_000;

struct Plant {
    ext_modes: Vec<DMatrix<f64>>,
    weight: DMatrix<f64>,
    /// Transition and step-cost matrices keyed by `(mode, step bits)`.
    cache: RefCell<HashMap<(usize, u64), (DMatrix<f64>, DMatrix<f64>)>>,
}

impl Plant {
    fn new(sys: &SwitchedAffineSystem) -> Self {
        let ext = sys.extend();
        let weight = ext.output_weight();
        let ext_modes: Vec<DMatrix<f64>> = (0..sys.mode_count()).map(|i| augment(sys.a(i), sys.b(i))).collect();
        Self {
            ext_modes,
            weight,
            cache: RefCell::new(HashMap::new()),
        }
    }

    fn matrices(&self, mode: usize, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let a = &self.ext_modes[mode];
        (expm_unchecked(&(a * h)), gram_unchecked(a, &self.weight, h))
    }

    /// Exact step; `reuse` marks step lengths that are expected to recur.
    fn step(&self, mode: usize, xt: &DVector<f64>, h: f64, reuse: bool) -> (DVector<f64>, f64) {
        let key = (mode, h.to_bits());
        if let Some((phi, g)) = self.cache.borrow().get(&key) {
            return (phi * xt, quad_form(g, xt));
        }
        let (phi, g) = self.matrices(mode, h);
        let out = (&phi * xt, quad_form(&g, xt));
        let mut cache = self.cache.borrow_mut();
        if reuse && cache.len() < STEP_CACHE_LIMIT {
            cache.insert(key, (phi, g));
        }
        out
    }

    fn flow(&self, mode: usize, xt: &DVector<f64>, h: f64) -> DVector<f64> {
        expm_unchecked(&(&self.ext_modes[mode] * h)) * xt
    }
}

enum Controller {
    Certified {
        cmp: Comparator,
        lyap: LyapunovData,
        resting: Vec<DMatrix<f64>>,
        gc: bool,
        /// `P_i(s)` keyed by `(mode, dwell step index)`.
        dwell_p: RefCell<HashMap<(usize, usize), DMatrix<f64>>>,
    },
    Periodic {
        sequence: Vec<usize>,
    },
}

impl Controller {
    /// `V` at dwell position `s`; `k` is the step index that produced `s`.
    fn value(&self, mode: usize, s: f64, k: usize, xt: &DVector<f64>) -> f64 {
        match self {
            Controller::Periodic { .. } => f64::NAN,
            Controller::Certified {
                lyap,
                resting,
                gc,
                dwell_p,
                ..
            } => {
                let left = lyap.window - s;
                if *gc || left <= 0.0 {
                    return quad_form(&resting[mode], xt);
                }
                let cacheable = k < VALUE_CACHE_LIMIT;
                if let Some(p) = dwell_p.borrow().get(&(mode, k)).filter(|_| cacheable) {
                    return quad_form(p, xt);
                }
                let d = &lyap.design[mode];
                let e = expm_unchecked(&(d * left));
                let p = e.transpose() * &resting[mode] * &e + gram_unchecked(d, &lyap.weight, left);
                let v = quad_form(&p, xt);
                if cacheable {
                    dwell_p.borrow_mut().insert((mode, k), p);
                }
                v
            }
        }
    }
}

fn check_state(t: f64, x: &DVector<f64>) -> Result<()> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Divergence {
            t,
            reason: "state is not finite".into(),
        });
    }
    let norm = x.rows(0, x.len() - 1).norm();
    if norm > DIVERGENCE_NORM {
        return Err(Error::Divergence {
            t,
            reason: format!("|x| = {norm:.3e} exceeds {DIVERGENCE_NORM:e}"),
        });
    }
    Ok(())
}

/// Runs the closed loop from `cfg.x0`.
///
/// Each mode is held for the dwell window `T`; afterwards the switching
/// condition is sampled every `h_check` and a detected crossing is refined
/// by bisection to `EVENT_REL_TOL·h_check`. States are propagated with the
/// exact transition matrix and the cost with the exact step Gramian. The
/// sample grid restarts at every switch, and the dwell end always lands on
/// a sample.
pub fn simulate(sys: &SwitchedAffineSystem, policy: &SwitchingPolicy, cfg: &EngineConfig) -> Result<TrajectoryRecord> {
    let n = sys.n();
    let m = sys.mode_count();
    if cfg.x0.len() != n {
        return Err(Error::Dimension(format!("x0 has length {}, expected {n}", cfg.x0.len())));
    }
    if !cfg.x0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    let h = cfg.step_for(policy)?;
    let (controller, window) = match policy {
        SwitchingPolicy::Certified(c) => {
            let lyap = LyapunovData::new(sys, c)?;
            let gc = c.law == Law::GcT0;
            let window = if gc { h } else { c.dwell };
            let cmp = Comparator::new(c);
            let resting = cmp.resting.clone();
            let dwell_p = RefCell::new(HashMap::new());
            (
                Controller::Certified {
                    cmp,
                    lyap,
                    resting,
                    gc,
                    dwell_p,
                },
                window,
            )
        }
        SwitchingPolicy::PeriodicOpenLoop { sequence, period } => {
            if let Some(&bad) = sequence.iter().find(|&&k| k >= m) {
                return Err(Error::Invalid(format!("sequence mode {} out of range", bad + 1)));
            }
            (Controller::Periodic { sequence: sequence.clone() }, *period)
        }
    };
    let mut sigma = match cfg.sigma0 {
        Sigma0::Fixed(k) if k >= m => {
            return Err(Error::Invalid(format!("sigma0 = {} out of range 1..={m}", k + 1)));
        }
        Sigma0::Fixed(k) => k,
        Sigma0::Auto => super::init_sigma(&cfg.x0, policy),
    };
    let mut seq_pos = match &controller {
        Controller::Periodic { sequence } => sequence.iter().position(|&k| k == sigma).unwrap_or(0),
        _ => 0,
    };
    if let Controller::Periodic { sequence } = &controller {
        sigma = sequence[seq_pos];
    }

    let plant = Plant::new(sys);
    let tol = 1e-12 * window.max(1.0);
    let mut xt = lift(&cfg.x0);
    let mut t = cfg.t0;
    let mut s = 0.0_f64;
    // steps taken since the last switch; `s = k·h` inside the dwell window
    let mut k = 0_usize;
    let mut cost = 0.0;
    let mut record = TrajectoryRecord::default();
    let push = |record: &mut TrajectoryRecord, t: f64, xt: &DVector<f64>, sigma: usize, v: f64, j: f64| {
        record.samples.push(Sample {
            t,
            x: xt.rows(0, n).into_owned(),
            sigma,
            v,
            j,
        });
    };
    push(&mut record, t, &xt, sigma, controller.value(sigma, s, k, &xt), cost);

    let t_tol = 1e-12 * cfg.t_end.abs().max(1.0);
    while t < cfg.t_end - t_tol {
        if s >= window - tol {
            let next = match &controller {
                Controller::Certified { cmp, .. } => cmp.decide(&xt, sigma),
                Controller::Periodic { sequence } => {
                    seq_pos = (seq_pos + 1) % sequence.len();
                    let k = sequence[seq_pos];
                    (k != sigma).then_some(k)
                }
            };
            if let Some(j) = next {
                let v_before = controller.value(sigma, s, k, &xt);
                let v_after = controller.value(j, 0.0, 0, &xt);
                record.switches.push(SwitchEvent {
                    t,
                    from: sigma,
                    to: j,
                    delta_v: v_after - v_before,
                });
                sigma = j;
                s = 0.0;
                k = 0;
                let last = record.samples.last_mut().expect("record starts with a sample");
                last.sigma = sigma;
                last.v = v_after;
                log::debug!("t = {t:.6}: switch to mode {}", j + 1);
                continue;
            } else if let Controller::Periodic { .. } = controller {
                // repeated mode in the sequence: restart the window
                s = 0.0;
                k = 0;
            }
        }

        let in_dwell = s < window - tol;
        let mut hstep = h.min(cfg.t_end - t);
        let mut ends_dwell = false;
        if in_dwell && window - s <= hstep {
            hstep = window - s;
            ends_dwell = true;
        }
        let full = hstep == h || ends_dwell;
        let (mut x_new, mut dj) = plant.step(sigma, &xt, hstep, full);

        if !in_dwell {
            if let Controller::Certified { cmp, .. } = &controller {
                if cmp.event(&x_new, sigma) < 0.0 {
                    let (mut lo, mut hi) = (0.0, hstep);
                    while hi - lo > EVENT_REL_TOL * h {
                        let mid = 0.5 * (lo + hi);
                        if cmp.event(&plant.flow(sigma, &xt, mid), sigma) < 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    if hi < hstep {
                        hstep = hi;
                        let (xn, c) = plant.step(sigma, &xt, hstep, false);
                        x_new = xn;
                        dj = c;
                    }
                }
            }
        }

        xt = x_new;
        cost += dj;
        t += hstep;
        k += 1;
        let aligned = ends_dwell || (in_dwell && hstep == h);
        s = if ends_dwell {
            window
        } else if aligned {
            k as f64 * h
        } else {
            s + hstep
        };
        // only grid-aligned dwell positions may share cached matrices
        let key = if aligned { k } else { usize::MAX };
        record.lift_drift = record.lift_drift.max((xt[n] - 1.0).abs());
        check_state(t, &xt)?;
        push(&mut record, t, &xt, sigma, controller.value(sigma, s, key, &xt), cost);
    }
    Ok(record)
}
