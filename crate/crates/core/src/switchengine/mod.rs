//! Closed-loop execution of the switching laws and audits of the recorded runs.

mod csvio;
mod policy;
mod simulate;

pub use csvio::{read_switches, read_trajectory, write_switches, write_trajectory};
pub use policy::{baseline_allerhand, init_sigma, propagate, should_switch, SwitchingPolicy};
pub use simulate::{
    simulate, EngineConfig, Sample, Sigma0, SwitchEvent, TrajectoryRecord, DIVERGENCE_NORM,
    EVENT_REL_TOL, GC_DEFAULT_STEP,
};

use crate::certdesign::CertificateSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub holds: bool,
    /// `max_t J(t) - bound(t)`; negative means slack everywhere, `-∞` for an empty record.
    pub max_violation: f64,
    pub offset: f64,
    pub slope: f64,
}

/// Checks `J(t) ≤ x₀'P_{σ(t₀)}(t₀)x₀ + slope·(t - t₀)` at every sample, with
/// `x₀` and `σ(t₀)` read from the first sample.
pub fn verify_bound(record: &TrajectoryRecord, certs: &CertificateSet) -> Result<BoundReport> {
    let Some(first) = record.samples.first() else {
        return Ok(BoundReport {
            holds: true,
            max_violation: f64::NEG_INFINITY,
            offset: f64::NAN,
            slope: f64::NAN,
        });
    };
    if first.x.len() != certs.n() {
        return Err(Error::Mismatch(format!(
            "trajectory has n = {}, certificates have n = {}",
            first.x.len(),
            certs.n()
        )));
    }
    let (offset, slope) = certs.cost_bound(&first.x, first.sigma)?;
    let max_violation = record
        .samples
        .iter()
        .map(|s| s.j - (offset + slope * (s.t - first.t)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundReport {
        holds: max_violation <= 0.0,
        max_violation,
        offset,
        slope,
    })
}

/// Average cost rate `(J(t_end) - J(t_a)) / (t_end - t_a)` over the tail
/// starting at the first sample with `t ≥ t_a`.
pub fn tail_cost_rate(record: &TrajectoryRecord, t_a: f64) -> Option<f64> {
    let last = record.samples.last()?;
    let k = record.samples.partition_point(|s| s.t < t_a);
    let start = record.samples.get(k)?;
    if last.t <= start.t {
        return None;
    }
    Some((last.j - start.j) / (last.t - start.t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitCycle {
    /// Mean time for one repetition of the switch pattern.
    pub period: f64,
    /// Target modes of one repetition, in order.
    pub pattern: Vec<usize>,
    /// Largest `‖x(t) - x(t + period)‖` over aligned samples in the window.
    pub max_return_distance: f64,
}

/// Minimum number of pattern repetitions inside the window.
const MIN_REPETITIONS: usize = 3;

/// Looks for a periodic switch pattern in `[t_end - window, t_end]`.
///
/// The pattern length `p` is the shortest shift under which the target-mode
/// sequence repeats; the period is the mean of `t_{k+p} - t_k` and must vary
/// by at most `tol`. Because the sample grid restarts at every switch, the
/// samples of segment `k` and segment `k + p` are compared index by index.
/// Returns `None` without switches, with fewer than three repetitions, or when
/// the switch times are not periodic.
pub fn detect_limit_cycle(record: &TrajectoryRecord, window: f64, tol: f64) -> Option<LimitCycle> {
    let t_end = record.samples.last()?.t;
    let t_a = t_end - window;
    let events: Vec<&SwitchEvent> = record.switches.iter().filter(|e| e.t >= t_a).collect();
    let seq: Vec<usize> = events.iter().map(|e| e.to).collect();
    let p = (1..=seq.len() / MIN_REPETITIONS).find(|&p| (p..seq.len()).all(|k| seq[k] == seq[k - p]))?;
    let gaps: Vec<f64> = (p..events.len()).map(|k| events[k].t - events[k - p].t).collect();
    let period = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let spread = gaps.iter().map(|g| (g - period).abs()).fold(0.0, f64::max);
    if spread > tol {
        return None;
    }

    // sample index ranges of each switch segment
    let seg_start: Vec<usize> = events
        .iter()
        .map(|e| record.samples.partition_point(|s| s.t < e.t))
        .collect();
    let mut max_dist: f64 = 0.0;
    for k in 0..events.len().saturating_sub(p + 1) {
        let (a0, a1) = (seg_start[k], seg_start[k + 1]);
        let b0 = seg_start[k + p];
        let b1 = seg_start[k + p + 1];
        let len = (a1 - a0).min(b1 - b0);
        for off in 0..len {
            let d = (&record.samples[a0 + off].x - &record.samples[b0 + off].x).norm();
            max_dist = max_dist.max(d);
        }
    }
    Some(LimitCycle {
        period,
        pattern: seq[seq.len() - p..].to_vec(),
        max_return_distance: max_dist,
    })
}
