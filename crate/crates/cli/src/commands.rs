use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dwellswitch::certdesign::{
    affine_existence, audit, design, log_grid, tune_alpha, CertificateSet, Law, MetzlerFamily, Objective,
    TuneProblem,
};
use dwellswitch::switchengine::{
    read_trajectory, simulate, tail_cost_rate, verify_bound, write_switches, write_trajectory, EngineConfig,
    Sigma0, SwitchingPolicy, TrajectoryRecord,
};
use dwellswitch::sysmodel::{parse_config, serialize_config, SwitchedAffineSystem, SystemConfig};
use nalgebra::DVector;

use crate::pispec::PiSpec;
use crate::plot::plot_script;
use crate::presets::{preset, Preset, BOOST_COST_HORIZON};
use crate::{CliError, Outcome};

#[derive(Debug, Parser)]
#[command(name = "dwellswitch", version, about = "Dwell-time switching design and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Existence test for the coupled conditions at a given rate matrix and dwell time.
    Check(CheckArgs),
    /// Solve for certificates and write them as JSON.
    Design(DesignArgs),
    /// Run the closed loop and write trajectory, switch and plot files.
    Simulate(SimulateArgs),
    /// Check a trajectory against the guaranteed cost bound.
    Verify(VerifyArgs),
    /// Run check, design, simulate and verify for a bundled scenario.
    Example(ExampleArgs),
}

#[derive(Debug, Args)]
pub struct SystemArgs {
    /// System document (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled scenario: linear-unstable, affine-unstable, boost-boost, congestion.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Inline matrix, family object or file; defaults to the preset's.
    #[arg(long)]
    pub pi: Option<String>,
    #[arg(long)]
    pub dwell: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub pi: Option<String>,
    #[arg(long)]
    pub dwell: Option<f64>,
    /// thm1, thm2, cor1, gc0 or baseline.
    #[arg(long)]
    pub law: Option<String>,
    /// Strictness margin of the design equalities.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Shift of the cor1 design; bisected to the largest feasible value when absent.
    #[arg(long)]
    pub eps_shift: Option<f64>,
    /// Grid-search the rate scale of a family spec.
    #[arg(long)]
    pub tune_alpha: bool,
    /// `lo,hi,points` of the logarithmic alpha grid.
    #[arg(long, value_name = "LO,HI,N")]
    pub alpha_grid: Option<String>,
    /// cost-bound or epsilon.
    #[arg(long)]
    pub objective: Option<String>,
    /// Initial state used by the cost-bound objective and the printed bound.
    #[arg(long)]
    pub x0: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub certs: PathBuf,
    /// Comma-separated initial state.
    #[arg(long)]
    pub x0: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub h_check: Option<f64>,
    /// `auto` or a 1-based mode index.
    #[arg(long, default_value = "auto")]
    pub sigma0: String,
    /// Trajectory CSV; switch events and the plot script are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long)]
    pub certs: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExampleArgs {
    pub name: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Check(a) => cmd_check(&a),
        Command::Design(a) => cmd_design(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Example(a) => cmd_example(&a),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))
}

struct Loaded {
    config: SystemConfig,
    /// System in the regulated coordinates used by every command.
    sys: SwitchedAffineSystem,
    preset: Option<Preset>,
}

fn load(args: &SystemArgs) -> Result<Loaded, CliError> {
    let (config, preset) = match (&args.config, &args.preset) {
        (Some(path), _) => (parse_config(&read_text(path)?)?, None),
        (None, Some(name)) => {
            let p = preset(name)?;
            (p.config.clone(), Some(p))
        }
        (None, None) => return Err(CliError::input("either --config or --preset is required")),
    };
    let sys = config.regulated_system()?;
    Ok(Loaded { config, sys, preset })
}

pub fn parse_vector(arg: &str, n: usize) -> Result<DVector<f64>, CliError> {
    let v = arg
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::input(format!("'{s}' is not a finite number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if v.len() != n {
        return Err(CliError::input(format!("expected {n} comma-separated values, got {}", v.len())));
    }
    Ok(DVector::from_vec(v))
}

fn parse_sigma0(arg: &str, m: usize) -> Result<Sigma0, CliError> {
    if arg == "auto" {
        return Ok(Sigma0::Auto);
    }
    match arg.parse::<usize>() {
        Ok(k) if (1..=m).contains(&k) => Ok(Sigma0::Fixed(k - 1)),
        _ => Err(CliError::input(format!("--sigma0 must be 'auto' or a mode in 1..={m}, got '{arg}'"))),
    }
}

fn parse_objective(arg: &str) -> Result<Objective, CliError> {
    match arg {
        "cost-bound" => Ok(Objective::CostBound),
        "epsilon" => Ok(Objective::Epsilon),
        other => Err(CliError::input(format!("unknown objective '{other}' (cost-bound|epsilon)"))),
    }
}

fn parse_alpha_grid(arg: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = arg.split(',').map(str::trim).collect();
    let bad = || CliError::input(format!("--alpha-grid expects LO,HI,N with 0 < LO <= HI and N >= 1, got '{arg}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite() && n >= 1) {
        return Err(bad());
    }
    Ok(log_grid(lo, hi, n))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::input(format!("{name} must be positive, got {v}")))
    }
}

fn resolve_dwell(arg: Option<f64>, preset: Option<&Preset>, law: Law) -> Result<f64, CliError> {
    if law == Law::GcT0 {
        return Ok(0.0);
    }
    match (arg, preset) {
        (Some(t), _) => positive("--dwell", t),
        (None, Some(p)) => Ok(p.dwell),
        (None, None) => Err(CliError::input("--dwell is required")),
    }
}

fn resolve_pi_spec(arg: Option<&str>, preset: Option<&Preset>) -> Result<PiSpec, CliError> {
    match (arg, preset) {
        (Some(s), _) => PiSpec::parse(s),
        (None, Some(p)) => Ok(PiSpec::Family {
            family: p.family.clone(),
            alpha: Some(p.alpha),
        }),
        (None, None) => Err(CliError::input("--pi is required")),
    }
}

pub fn cmd_check(args: &CheckArgs) -> Result<Outcome, CliError> {
    let loaded = load(&args.system)?;
    let sys = &loaded.sys;
    let pi = resolve_pi_spec(args.pi.as_deref(), loaded.preset.as_ref())?.resolve(sys.mode_count())?;
    let dwell = match (args.dwell, &loaded.preset) {
        (Some(t), _) if t.is_finite() && t >= 0.0 => t,
        (Some(t), _) => return Err(CliError::input(format!("--dwell must be nonnegative, got {t}"))),
        (None, Some(p)) => p.dwell,
        (None, None) => return Err(CliError::input("--dwell is required")),
    };
    let rep = affine_existence(sys, &pi, dwell)?;
    let mut out = String::new();
    writeln!(out, "system: {} (n = {}, M = {})", loaded.config.name, sys.n(), sys.mode_count()).unwrap();
    writeln!(out, "J dimension: {}", rep.linear.j_dim).unwrap();
    writeln!(out, "spectral abscissa: {:.6e}", rep.linear.spectral_abscissa).unwrap();
    if !sys.is_linear() {
        writeln!(
            out,
            "extended J dimension: {} (abscissa {:.6e}; its zero eigenvalue comes from the constant coordinate)",
            rep.extended_dim, rep.extended_abscissa
        )
        .unwrap();
    }
    let verdict = if rep.linear.hurwitz { "Hurwitz" } else { "not Hurwitz" };
    writeln!(out, "verdict: {verdict}").unwrap();
    Ok(Outcome {
        code: if rep.linear.hurwitz { 0 } else { 2 },
        report: out,
    })
}

/// Everything the design stage needs, after flags and preset defaults are merged.
struct DesignPlan<'a> {
    sys: &'a SwitchedAffineSystem,
    law: Law,
    dwell: f64,
    rho: Option<f64>,
    eps_shift: Option<f64>,
    pi: PiSpec,
    tune: Option<TunePlan>,
}

struct TunePlan {
    family: MetzlerFamily,
    alphas: Vec<f64>,
    objective: Objective,
    rho_grid: Option<Vec<f64>>,
    x0: DVector<f64>,
}

struct Designed {
    certs: CertificateSet,
    alpha: Option<f64>,
}

fn run_design(plan: &DesignPlan<'_>) -> Result<Designed, CliError> {
    let sys = plan.sys;
    match &plan.tune {
        None => {
            let pi = plan.pi.resolve(sys.mode_count())?;
            let certs = design(sys, &pi, plan.dwell, plan.law, plan.rho, plan.eps_shift)?;
            Ok(Designed { certs, alpha: None })
        }
        Some(t) => {
            let mut p = TuneProblem::new(sys, t.family.clone(), plan.dwell, plan.law, t.x0.clone());
            p.rho = plan.rho;
            p.rho_grid = t.rho_grid.clone();
            p.eps_shift = plan.eps_shift;
            p.objective = t.objective;
            p.alphas = t.alphas.clone();
            let o = tune_alpha(&p)?;
            log::info!("tuned alpha = {:.6e}, rho = {:.6e}, objective = {:.6e}", o.alpha, o.rho, o.value);
            Ok(Designed {
                certs: o.certs,
                alpha: Some(o.alpha),
            })
        }
    }
}

fn design_summary(sys: &SwitchedAffineSystem, d: &Designed, x0: Option<&DVector<f64>>) -> Result<String, CliError> {
    let c = &d.certs;
    let mut out = String::new();
    writeln!(out, "law: {}", c.law).unwrap();
    if let Some(a) = d.alpha {
        writeln!(out, "tuned alpha: {a:.6e}").unwrap();
    }
    writeln!(out, "dwell T: {}", c.dwell).unwrap();
    writeln!(out, "rho: {:.6e}", c.rho).unwrap();
    let rep = audit(sys, c)?;
    for (i, (xe, re)) in rep.x_min_eig.iter().zip(&rep.residual_max_eig).enumerate() {
        writeln!(out, "mode {}: min eig X = {xe:.6e}, max eig residual = {re:.6e}", i + 1).unwrap();
    }
    match c.law {
        Law::Thm2Affine => writeln!(out, "epsilon: {:.6e}", c.epsilon).unwrap(),
        Law::Corollary1 => {
            writeln!(out, "eps_shift: {:.6e}", c.eps_shift).unwrap();
            writeln!(out, "delta: {:.6e}", c.delta).unwrap();
        }
        _ => {}
    }
    if let Some(x0) = x0 {
        if c.law != Law::AllerhandBaseline {
            let sigma0 = c.initial_mode(x0);
            let (offset, slope) = c.cost_bound(x0, sigma0)?;
            writeln!(
                out,
                "cost bound from x0 (initial mode {}): J(t) <= {offset:.6e} + {slope:.6e}*t",
                sigma0 + 1
            )
            .unwrap();
        }
    }
    if !rep.passes(c.rho) {
        return Err(CliError::failed(format!("certificate audit failed:\n{out}")));
    }
    Ok(out)
}

pub fn cmd_design(args: &DesignArgs) -> Result<Outcome, CliError> {
    let loaded = load(&args.system)?;
    let sys = &loaded.sys;
    let pre = loaded.preset.as_ref();
    let law: Law = match (&args.law, pre) {
        (Some(l), _) => l.parse()?,
        (None, Some(p)) => p.law,
        (None, None) => return Err(CliError::input("--law is required")),
    };
    let dwell = resolve_dwell(args.dwell, pre, law)?;
    if let Some(r) = args.rho {
        positive("--rho", r)?;
    }
    if let Some(e) = args.eps_shift {
        positive("--eps-shift", e)?;
    }
    let x0 = args.x0.as_deref().map(|s| parse_vector(s, sys.n())).transpose()?;
    let pi = resolve_pi_spec(args.pi.as_deref(), pre)?;
    let tune = if args.tune_alpha {
        let family = match &pi {
            PiSpec::Family { family, .. } => family.clone(),
            PiSpec::Matrix(_) => return Err(CliError::input("--tune-alpha needs a family pi spec")),
        };
        let alphas = match (&args.alpha_grid, pre) {
            (Some(g), _) => parse_alpha_grid(g)?,
            (None, Some(p)) => p.alpha_grid.clone(),
            (None, None) => log_grid(1e-2, 1e3, 25),
        };
        let objective = match (&args.objective, pre) {
            (Some(o), _) => parse_objective(o)?,
            (None, Some(p)) if p.law == law => p.objective,
            _ if matches!(law, Law::Thm2Affine | Law::Corollary1) && x0.is_none() => Objective::Epsilon,
            _ => Objective::CostBound,
        };
        let x0_tune = match (objective, &x0, pre) {
            (Objective::CostBound, Some(x), _) => x.clone(),
            (Objective::CostBound, None, Some(p)) => p.x0.clone(),
            (Objective::CostBound, None, None) => {
                return Err(CliError::input("the cost-bound objective needs --x0"));
            }
            (Objective::Epsilon, _, _) => DVector::zeros(sys.n()),
        };
        let rho_grid = if args.rho.is_none() && law == Law::Thm2Affine {
            Some(dwellswitch::certdesign::default_rho_grid(sys))
        } else {
            None
        };
        Some(TunePlan {
            family,
            alphas,
            objective,
            rho_grid,
            x0: x0_tune,
        })
    } else {
        None
    };
    let rho = args.rho.or_else(|| match (pre, &tune) {
        (Some(p), None) if p.law == law && args.pi.is_none() => p.rho,
        _ => None,
    });
    let plan = DesignPlan {
        sys,
        law,
        dwell,
        rho,
        eps_shift: args.eps_shift,
        pi,
        tune,
    };
    let designed = run_design(&plan)?;
    let x0_report = x0.or_else(|| pre.map(|p| p.x0.clone()));
    let report = design_summary(sys, &designed, x0_report.as_ref())?;
    write_text(&args.out, &designed.certs.to_json())?;
    Ok(Outcome::ok(format!("{report}certificates written to {}\n", args.out.display())))
}

/// Paths of the files written next to a trajectory CSV.
pub fn sidecar_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let dir = out.parent().unwrap_or(Path::new(""));
    (dir.join(format!("{stem}_switches.csv")), dir.join(format!("{stem}_plot.py")))
}

fn write_run(record: &TrajectoryRecord, out: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    let (sw, plot) = sidecar_paths(out);
    write_trajectory(record, create(out)?)?;
    write_switches(&record.switches, create(&sw)?)?;
    let name = |p: &Path| p.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    write_text(&plot, &plot_script(&name(out), &name(&sw)))?;
    Ok((sw, plot))
}

fn run_summary(record: &TrajectoryRecord) -> String {
    let mut out = String::new();
    if let Some(last) = record.samples.last() {
        writeln!(out, "samples: {}", record.samples.len()).unwrap();
        writeln!(out, "switches: {}", record.switches.len()).unwrap();
        writeln!(out, "final time: {}", last.t).unwrap();
        writeln!(out, "final |x|: {:.6e}", last.x.norm()).unwrap();
        writeln!(out, "final cost J: {:.6e}", last.j).unwrap();
    }
    out
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome, CliError> {
    let loaded = load(&args.system)?;
    let sys = &loaded.sys;
    let pre = loaded.preset.as_ref();
    let certs = CertificateSet::from_json(&read_text(&args.certs)?)?;
    let x0 = match (&args.x0, pre) {
        (Some(s), _) => parse_vector(s, sys.n())?,
        (None, Some(p)) => p.x0.clone(),
        (None, None) => return Err(CliError::input("--x0 is required")),
    };
    let t_end = match (args.t_end, pre) {
        (Some(t), _) => t,
        (None, Some(p)) => p.t_end,
        (None, None) => return Err(CliError::input("--t-end is required")),
    };
    let mut cfg = EngineConfig::new(x0, t_end);
    cfg.h_check = args.h_check.or_else(|| pre.and_then(|p| p.h_check));
    cfg.sigma0 = parse_sigma0(&args.sigma0, sys.mode_count())?;
    let policy = SwitchingPolicy::certified(certs)?;
    let record = simulate(sys, &policy, &cfg)?;
    let (sw, plot) = write_run(&record, &args.out)?;
    let mut report = run_summary(&record);
    writeln!(
        report,
        "wrote {}, {}, {}",
        args.out.display(),
        sw.display(),
        plot.display()
    )
    .unwrap();
    Ok(Outcome::ok(report))
}

fn verify_outcome(record: &TrajectoryRecord, certs: &CertificateSet) -> Result<Outcome, CliError> {
    let rep = verify_bound(record, certs)?;
    let mut out = String::new();
    if record.samples.is_empty() {
        writeln!(out, "empty trajectory: bound holds vacuously").unwrap();
    } else {
        writeln!(out, "bound: J(t) <= {:.6e} + {:.6e}*(t - t0)", rep.offset, rep.slope).unwrap();
        writeln!(out, "max violation: {:.6e}", rep.max_violation).unwrap();
        let (t0, t1) = (record.samples[0].t, record.samples.last().unwrap().t);
        match tail_cost_rate(record, 0.5 * (t0 + t1)) {
            Some(r) => writeln!(out, "tail cost rate (second half): {r:.6e} vs certified rate {:.6e}", rep.slope).unwrap(),
            None => writeln!(out, "tail cost rate: n/a").unwrap(),
        }
    }
    writeln!(out, "verdict: {}", if rep.holds { "bound holds" } else { "bound violated" }).unwrap();
    Ok(Outcome {
        code: if rep.holds { 0 } else { 2 },
        report: out,
    })
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Outcome, CliError> {
    let certs = CertificateSet::from_json(&read_text(&args.certs)?)?;
    let file = File::open(&args.traj)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.traj.display())))?;
    let record = read_trajectory(file)?;
    verify_outcome(&record, &certs)
}

pub fn cmd_example(args: &ExampleArgs) -> Result<Outcome, CliError> {
    let p = preset(&args.name)?;
    let mut out = String::new();
    if let Some(w) = p.warning {
        eprintln!("{w}");
    }
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", args.out.display())))?;
    let sys = p.config.regulated_system()?;
    write_text(&args.out.join("config.json"), &serialize_config(&p.config))?;

    // check: existence over the tuning grid
    let linear: Vec<bool> = p
        .alpha_grid
        .iter()
        .map(|&a| -> Result<bool, CliError> {
            let pi = p.family.build(a, sys.mode_count())?;
            Ok(affine_existence(&sys, &pi, p.dwell)?.linear.hurwitz)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.in_stage("check"))?;
    let passing = linear.iter().filter(|&&h| h).count();
    writeln!(out, "[check] {passing} of {} grid points pass the existence test", linear.len()).unwrap();
    if passing == 0 {
        return Err(CliError::failed("no grid point passes the existence test").in_stage("check"));
    }

    // design
    let plan = DesignPlan {
        sys: &sys,
        law: p.law,
        dwell: p.dwell,
        rho: None,
        eps_shift: None,
        pi: PiSpec::Family {
            family: p.family.clone(),
            alpha: None,
        },
        tune: Some(TunePlan {
            family: p.family.clone(),
            alphas: p.alpha_grid.clone(),
            objective: p.objective,
            rho_grid: p.rho_grid(),
            x0: p.x0.clone(),
        }),
    };
    let designed = run_design(&plan).map_err(|e| e.in_stage("design"))?;
    let summary = design_summary(&sys, &designed, Some(&p.x0)).map_err(|e| e.in_stage("design"))?;
    for line in summary.lines() {
        writeln!(out, "[design] {line}").unwrap();
    }
    let certs_path = args.out.join("certs.json");
    write_text(&certs_path, &designed.certs.to_json())?;

    // simulate
    let mut cfg = EngineConfig::new(p.x0.clone(), p.t_end);
    cfg.h_check = p.h_check;
    let policy = SwitchingPolicy::certified(designed.certs.clone()).map_err(|e| CliError::from(e).in_stage("simulate"))?;
    let record = simulate(&sys, &policy, &cfg).map_err(|e| CliError::from(e).in_stage("simulate"))?;
    let traj_path = args.out.join("trajectory.csv");
    write_run(&record, &traj_path).map_err(|e| e.in_stage("simulate"))?;
    for line in run_summary(&record).lines() {
        writeln!(out, "[simulate] {line}").unwrap();
    }

    // verify, from the files just written
    let file = File::open(&traj_path).map_err(|e| CliError::input(e.to_string()).in_stage("verify"))?;
    let reread = read_trajectory(file).map_err(|e| CliError::from(e).in_stage("verify"))?;
    let verified = verify_outcome(&reread, &designed.certs).map_err(|e| e.in_stage("verify"))?;
    for line in verified.report.lines() {
        writeln!(out, "[verify] {line}").unwrap();
    }

    if p.name == "boost-boost" {
        let mut long = EngineConfig::new(p.x0.clone(), BOOST_COST_HORIZON);
        long.h_check = p.h_check;
        let run = simulate(&sys, &policy, &long).map_err(|e| CliError::from(e).in_stage("cost"))?;
        writeln!(
            out,
            "[cost] J over [0, {BOOST_COST_HORIZON}] s with these parameters: {:.6e} ({} switches); \
             not comparable with published figures, which depend on unpublished component values",
            run.final_cost().unwrap_or(f64::NAN),
            run.switches.len()
        )
        .unwrap();
    }
    let file_summary = match p.warning {
        Some(w) => format!("{w}\n{out}"),
        None => out.clone(),
    };
    write_text(&args.out.join("summary.txt"), &file_summary)?;
    if verified.code != 0 {
        return Err(CliError {
            code: verified.code,
            message: format!("stage verify: bound violated\n{out}"),
        });
    }
    Ok(Outcome::ok(out))
}
