use nalgebra::DVector;
use rayon::prelude::*;

use super::{design, CertificateSet, Law, MetzlerFamily};
use crate::error::{Error, Result};
use crate::sysmodel::SwitchedAffineSystem;

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1, "invalid log grid [{lo}, {hi}] x {n}");
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Initial guaranteed cost from `x0` with the argmin initial mode.
    CostBound,
    /// Persistent cost rate: `ε` for the affine law, `δ` for the shifted design.
    Epsilon,
}

#[derive(Debug, Clone)]
pub struct TuneProblem<'a> {
    pub sys: &'a SwitchedAffineSystem,
    pub family: MetzlerFamily,
    pub dwell: f64,
    pub law: Law,
    pub rho: Option<f64>,
    /// Optional margin grid searched jointly with `α`; overrides `rho`.
    pub rho_grid: Option<Vec<f64>>,
    pub eps_shift: Option<f64>,
    pub x0: DVector<f64>,
    pub objective: Objective,
    pub alphas: Vec<f64>,
}

impl<'a> TuneProblem<'a> {
    /// Default grid: 25 points on `[1e-2, 1e3]`.
    pub fn new(sys: &'a SwitchedAffineSystem, family: MetzlerFamily, dwell: f64, law: Law, x0: DVector<f64>) -> Self {
        Self {
            sys,
            family,
            dwell,
            law,
            rho: None,
            rho_grid: None,
            eps_shift: None,
            x0,
            objective: Objective::CostBound,
            alphas: log_grid(1e-2, 1e3, 25),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub alpha: f64,
    pub rho: f64,
    pub value: f64,
    pub certs: CertificateSet,
    /// Best objective per `α` in grid order; `None` where infeasible.
    pub evaluations: Vec<(f64, Option<f64>)>,
}

fn objective_value(p: &TuneProblem<'_>, certs: &CertificateSet) -> Result<f64> {
    match p.objective {
        Objective::CostBound => certs.initial_bound(&p.x0),
        Objective::Epsilon => match certs.law {
            Law::Thm2Affine => Ok(certs.epsilon),
            Law::Corollary1 => Ok(certs.delta),
            other => Err(Error::Invalid(format!(
                "the epsilon objective is undefined for law {other}"
            ))),
        },
    }
}

/// `ρ` values scanned by the joint search: `‖C'C‖₂ · 10^k`, `k = -6, -5.75, …, 4`.
pub fn default_rho_grid(sys: &SwitchedAffineSystem) -> Vec<f64> {
    let scale = super::default_rho(sys) * 1e6;
    log_grid(1e-6, 1e4, 41).into_iter().map(|r| r * scale).collect()
}

/// Grid search over `α` (and `ρ` when a margin grid is given). Grid points
/// are evaluated in parallel and merged in grid order; among minimizers the
/// smallest `α`, then the smallest `ρ`, wins.
pub fn tune_alpha(p: &TuneProblem<'_>) -> Result<TuneOutcome> {
    if p.alphas.is_empty() {
        return Err(Error::Invalid("empty alpha grid".into()));
    }
    if p.x0.len() != p.sys.n() {
        return Err(Error::Dimension(format!(
            "x0 has length {}, expected {}",
            p.x0.len(),
            p.sys.n()
        )));
    }
    let rhos: Vec<Option<f64>> = match &p.rho_grid {
        Some(g) if !g.is_empty() => g.iter().map(|&r| Some(r)).collect(),
        Some(_) => return Err(Error::Invalid("empty rho grid".into())),
        None => vec![p.rho],
    };
    let points: Vec<(f64, Option<f64>)> = p
        .alphas
        .iter()
        .flat_map(|&a| rhos.iter().map(move |&r| (a, r)))
        .collect();
    let results: Vec<Result<Option<(f64, CertificateSet)>>> = points
        .par_iter()
        .map(|&(alpha, rho)| {
            let pi = p.family.build(alpha, p.sys.mode_count())?;
            match design(p.sys, &pi, p.dwell, p.law, rho, p.eps_shift) {
                Ok(certs) => Ok(Some((objective_value(p, &certs)?, certs))),
                Err(Error::Infeasible { .. }) | Err(Error::ExistenceViolated(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut best: Option<(f64, f64, CertificateSet)> = None;
    let mut evaluations: Vec<(f64, Option<f64>)> = Vec::with_capacity(p.alphas.len());
    for (&(alpha, _), r) in points.iter().zip(results) {
        let r = r?;
        let v = r.as_ref().map(|(v, _)| *v);
        log::debug!("alpha = {alpha:.4e}: {v:?}");
        match evaluations.last_mut() {
            Some((a, slot)) if *a == alpha => {
                if let Some(v) = v {
                    *slot = Some(slot.map_or(v, |s: f64| s.min(v)));
                }
            }
            _ => evaluations.push((alpha, v)),
        }
        if let Some((v, certs)) = r {
            if best.as_ref().is_none_or(|(_, bv, _)| v < *bv) {
                best = Some((alpha, v, certs));
            }
        }
    }
    let (alpha, value, certs) = best.ok_or_else(|| Error::Infeasible {
        mode: 0,
        min_eigenvalue: f64::NAN,
        reason: format!("no feasible alpha among {} grid points", p.alphas.len()),
    })?;
    Ok(TuneOutcome {
        alpha,
        rho: certs.rho,
        value,
        certs,
        evaluations,
    })
}
