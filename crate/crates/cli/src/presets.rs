//! Ready-made scenarios for the four case studies.

use dwellswitch::certdesign::{default_rho_grid, log_grid, Law, MetzlerFamily, Objective};
use dwellswitch::sysmodel::{
    example_boost_boost, example_congestion, example_unstable_pair, BoostParams, SystemConfig,
};
use nalgebra::{DMatrix, DVector};

use crate::CliError;

pub const PRESET_NAMES: [&str; 4] = ["linear-unstable", "affine-unstable", "boost-boost", "congestion"];

pub const BOOST_WARNING: &str = "warning: the boost-boost component values (L1 = L2 = 10 mH, C1 = C2 = 100 uF, \
R1 = RL = 100 ohm) are illustrative defaults, not published design data; costs will not match \
any reference table";

/// Horizon of the boost-boost cost comparison.
pub const BOOST_COST_HORIZON: f64 = 0.4;

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    /// Document as written to disk; `x_e` marks the regulated operating point.
    pub config: SystemConfig,
    pub family: MetzlerFamily,
    /// Rate scale used when no tuning is requested.
    pub alpha: f64,
    /// Margin used with `alpha`; `None` selects the library default.
    pub rho: Option<f64>,
    pub alpha_grid: Vec<f64>,
    pub law: Law,
    pub objective: Objective,
    /// Search the margin jointly with `α` during tuning.
    pub joint_rho: bool,
    pub dwell: f64,
    /// Initial state in the coordinates of the regulated system.
    pub x0: DVector<f64>,
    pub t_end: f64,
    pub h_check: Option<f64>,
    pub warning: Option<&'static str>,
}

impl Preset {
    pub fn rho_grid(&self) -> Option<Vec<f64>> {
        if self.joint_rho {
            let sys = self.config.regulated_system().expect("preset systems are consistent");
            Some(default_rho_grid(&sys))
        } else {
            None
        }
    }
}

pub fn preset(name: &str) -> Result<Preset, CliError> {
    let default_grid = log_grid(1e-2, 1e3, 25);
    let p = match name {
        "linear-unstable" => Preset {
            name: "linear-unstable",
            config: SystemConfig::new("linear-unstable", example_unstable_pair(false)),
            family: MetzlerFamily::UniformPair,
            alpha: 1000.0,
            rho: None,
            alpha_grid: default_grid,
            law: Law::Thm1Linear,
            objective: Objective::CostBound,
            joint_rho: false,
            dwell: 0.1,
            x0: DVector::from_vec(vec![5.0, 10.0]),
            t_end: 15.0,
            h_check: None,
            warning: None,
        },
        "affine-unstable" => Preset {
            name: "affine-unstable",
            config: SystemConfig::new("affine-unstable", example_unstable_pair(true)),
            family: MetzlerFamily::UniformPair,
            alpha: 10.0,
            rho: Some(1.0),
            alpha_grid: default_grid,
            law: Law::Thm2Affine,
            objective: Objective::Epsilon,
            joint_rho: true,
            dwell: 0.1,
            x0: DVector::from_vec(vec![5.0, 10.0]),
            t_end: 15.0,
            h_check: None,
            warning: None,
        },
        "congestion" => Preset {
            name: "congestion",
            config: SystemConfig::new("congestion", example_congestion(1.0, 1.1)?),
            family: MetzlerFamily::Cyclic,
            alpha: 2.0,
            rho: Some(3.0),
            alpha_grid: default_grid,
            law: Law::Thm2Affine,
            objective: Objective::Epsilon,
            joint_rho: true,
            dwell: 2.1,
            x0: DVector::from_vec(vec![10.0, 10.0, 10.0]),
            t_end: 200.0,
            h_check: None,
            warning: None,
        },
        "boost-boost" => {
            let bb = example_boost_boost(BoostParams::default())?;
            let (x2, x4) = (24.0, 48.0);
            let xe = bb.equilibrium(x2, x4);
            let mut c = DMatrix::zeros(2, 4);
            c[(0, 1)] = 1.0 / x2;
            c[(1, 3)] = 1.0 / x4;
            let modes = bb.system.modes().to_vec();
            let labels = bb.system.labels().map(<[String]>::to_vec).unwrap_or_default();
            let system = dwellswitch::sysmodel::SwitchedAffineSystem::new(modes, c)?.with_labels(labels)?;
            let mut config = SystemConfig::new("boost-boost", system);
            config.units = Some("A, V; outputs normalized by the reference voltages".into());
            config.x_e = Some(xe.clone());
            let start = DVector::from_vec(vec![0.46, 2.40, 0.18, 4.80]);
            Preset {
                name: "boost-boost",
                config,
                family: MetzlerFamily::FromLambda(vec![0.25; 4]),
                alpha: 3e5,
                rho: Some(5e-3),
                alpha_grid: log_grid(1.0, 1e6, 25),
                law: Law::Thm2Affine,
                objective: Objective::Epsilon,
                joint_rho: true,
                dwell: 1e-5,
                x0: start - xe,
                t_end: 0.02,
                h_check: Some(1e-6),
                warning: Some(BOOST_WARNING),
            }
        }
        other => {
            return Err(CliError::input(format!(
                "unknown preset '{other}'; valid names: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}
