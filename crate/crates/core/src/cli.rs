//! Command-line front end: argument parsing, config resolution and the
//! subcommands. Each command writes its artifacts under the output directory
//! and a short summary to stdout.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::bounds::{certify_peak, certify_trajectory, pi_tilde, BoundQuery, CertificationReport, SweepRow};
use crate::config::{ConfigError, ProtocolConfig, Resolved, RunConfig};
use crate::dynamics::{lyapunov_value, simulate, Trajectory};
use crate::equilibrium::{budget_for_beta, endemic_full, optimal_allocation, transmission_grid};
use crate::error::{Error, ValidationErrors};
use crate::params::validate;
use crate::payoff::build_mechanism;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Simulation and peak-infection certification for epidemic population games.
///
/// Rates are per day, times in days, costs in cost units per day.
#[derive(Debug, Parser)]
#[command(name = "epg", version)]
pub struct Cli {
    /// TOML run configuration; the worked example is used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Print failures as JSON on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Recovery rate (1/day).
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Disease death rate (1/day).
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Natural death rate (1/day).
    #[arg(long, global = true)]
    pub zeta: Option<f64>,
    /// Birth rate (1/day).
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Immunity waning rate (1/day).
    #[arg(long, global = true)]
    pub psi: Option<f64>,
    /// Strategy transmission rates (1/day), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Strategy costs (cost units/day), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub costs: Option<Vec<f64>>,
    /// Budget c* (cost units/day).
    #[arg(long, global = true)]
    pub cstar: Option<f64>,
    /// Design gain.
    #[arg(long, global = true)]
    pub upsilon: Option<f64>,
    /// Smith protocol slope.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Smith protocol rate cap (1/day).
    #[arg(long, global = true)]
    pub cap: Option<f64>,
    /// Integration step (days).
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Simulation horizon (days).
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Record every N-th integration step.
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Number of equidistant transmission-rate grid points.
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every standing condition on the configuration.
    Validate,
    /// Optimal allocation, endemic optimum and an endemic sweep over the rate range.
    Equilibrium,
    /// Integrate the closed loop and certify its peak.
    Simulate,
    /// Bound-versus-gain sweep for the configured curve variants.
    Bounds {
        /// Gains to sweep, comma separated (overrides the config list).
        #[arg(long, value_delimiter = ',')]
        upsilons: Option<Vec<f64>>,
    },
    /// Check a trajectory's peak against the bound; simulates unless a CSV is given.
    Certify {
        /// Trajectory CSV previously written by `simulate`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Invalid(Error),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (kind, violations) = match self {
            CliError::Config(_) => ("config", None),
            CliError::Invalid(Error::Validation(v)) => ("validation", Some(v.clone())),
            CliError::Invalid(_) => ("validation", None),
            CliError::Runtime(_) => ("runtime", None),
        };
        json!({
            "error": kind,
            "exit_code": self.exit_code(),
            "message": self.to_string(),
            "violations": violations.map(|v: ValidationErrors| v.0),
        })
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Invalid(e) => write!(f, "{e}"),
            CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn version_string() -> String {
    match option_env!("EPG_GIT_DESCRIBE") {
        Some(d) => format!("{} {} ({d})", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        None => format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
    }
}

/// Loads the config file (if any) and applies flag overrides.
pub fn load_config(path: Option<&Path>, o: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    let m = &mut cfg.model;
    set(&mut m.gamma, o.gamma);
    set(&mut m.delta, o.delta);
    set(&mut m.zeta, o.zeta);
    set(&mut m.theta, o.theta);
    set(&mut m.psi, o.psi);
    if let Some(b) = &o.betas {
        cfg.strategies.betas = b.clone();
    }
    if let Some(c) = &o.costs {
        cfg.strategies.costs = c.clone();
    }
    set(&mut cfg.policy.cstar, o.cstar);
    set(&mut cfg.policy.upsilon, o.upsilon);
    let ProtocolConfig::Smith { lambda, cap } = &mut cfg.protocol;
    set(lambda, o.lambda);
    set(cap, o.cap);
    set(&mut cfg.integrator.step, o.step);
    set(&mut cfg.integrator.horizon, o.horizon);
    set(&mut cfg.integrator.stride, o.stride);
    set(&mut cfg.bounds.grid_points, o.grid_points);
    if let Some(d) = &o.out_dir {
        cfg.output.dir = d.clone();
    }
    Ok(cfg)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.config.as_deref(), &cli.overrides)?;
    let resolved = cfg.resolve().map_err(CliError::Invalid)?;
    match &cli.command {
        Command::Validate => cmd_validate(&cfg, &resolved),
        Command::Equilibrium => cmd_equilibrium(&cfg, &resolved),
        Command::Simulate => cmd_simulate(&cfg, &resolved),
        Command::Bounds { upsilons } => cmd_bounds(&cfg, &resolved, upsilons.as_deref()),
        Command::Certify { trajectory } => cmd_certify(&cfg, &resolved, trajectory.as_deref()),
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.output.dir)
        .map_err(|e| runtime(format!("cannot create {}: {e}", cfg.output.dir.display())))?;
    Ok(cfg.output.dir.join(name))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    fs::write(path, text + "\n").map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<fs::File, CliError> {
    fs::File::create(path).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn cmd_validate(cfg: &RunConfig, r: &Resolved) -> Result<(), CliError> {
    println!("configuration valid");
    println!("  n = {}, sigma = {}, omega = {}", r.model.n(), cfg.model.sigma(), cfg.model.omega());
    println!("  beta* = {}, x* = {:?}", r.alloc.betastar, r.alloc.xstar);
    Ok(())
}

fn cmd_equilibrium(cfg: &RunConfig, r: &Resolved) -> Result<(), CliError> {
    let a = &r.alloc;
    println!("x*      = {:?}", a.xstar);
    println!("beta*   = {}", a.betastar);
    println!("I*      = {:.6} ({:.2}%)", a.istar(), 100.0 * a.istar());
    println!("R*      = {:.6} ({:.2}%)", a.rstar(), 100.0 * a.rstar());
    println!("I_hat lower bound = {:.6e}", crate::equilibrium::ihat_lower_bound(&r.model));

    let path = out_path(cfg, "equilibrium.csv")?;
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["B", "I_hat", "R_hat", "a", "dI_dB", "dR_dB", "da_dB"]).map_err(runtime)?;
    for b in transmission_grid(r.model.strategies(), cfg.bounds.grid_points) {
        let eq = endemic_full(b, &r.model).map_err(runtime)?;
        let s = eq.sensitivity();
        let row = [b, eq.i_hat, eq.r_hat, eq.a, s.di_db, s.dr_db, s.da_db];
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    write_json(
        &out_path(cfg, "equilibrium.json")?,
        &json!({ "version": version_string(), "config": cfg, "allocation": a }),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Bound at the initial Lyapunov level `L(Y(0))`.
fn initial_bound(cfg: &RunConfig, r: &Resolved) -> Result<crate::bounds::BoundResult, CliError> {
    let alpha = lyapunov_value(&r.initial, &r.mechanism, &r.protocol).map_err(runtime)?;
    let q = BoundQuery::equidistant(&r.model, alpha, r.mechanism.upsilon, cfg.bounds.grid_points)
        .map_err(CliError::Invalid)?;
    pi_tilde(&q, &r.model, &r.alloc).map_err(runtime)
}

fn run_simulation(cfg: &RunConfig, r: &Resolved) -> Result<Trajectory, CliError> {
    simulate(&r.initial, &r.mechanism, &r.protocol, &cfg.integrator).map_err(runtime)
}

fn print_report(rep: &CertificationReport) {
    println!(
        "peak I = {:.6} at t = {:.2} d ({:.4} x I*), certified peak = {:.6} ({:.4} x I*): {}",
        rep.max_infectious,
        rep.time_of_max,
        rep.overshoot_ratio,
        rep.certified_peak,
        rep.bound_ratio,
        if rep.pass { "PASS" } else { "FAIL" }
    );
}

fn cmd_simulate(cfg: &RunConfig, r: &Resolved) -> Result<(), CliError> {
    let traj = run_simulation(cfg, r)?;
    let bound = initial_bound(cfg, r)?;
    let report = certify_trajectory(&traj, &bound);

    let csv_path = out_path(cfg, "trajectory.csv")?;
    traj.write_csv(create(&csv_path)?).map_err(runtime)?;
    let last = traj.last();
    let manifest = json!({
        "version": version_string(),
        "command": "simulate",
        "config": cfg,
        "protocol": format!("{:?}", r.protocol),
        "integrator": { "method": "rk4", "options": cfg.integrator },
        "outputs": { "trajectory": csv_path.file_name().map(|s| s.to_string_lossy()) },
        "summary": {
            "samples": traj.samples.len(),
            "max_projection": traj.max_projection,
            "terminal_state": last.state,
            "terminal_avg_cost": last.avg_cost,
            "terminal_cost": last.cost,
        },
        "certification": report,
    });
    write_json(&out_path(cfg, "manifest.json")?, &manifest)?;
    write_json(&out_path(cfg, "certification.json")?, &report)?;

    let st = &last.state;
    println!(
        "t = {} d: I = {:.6}, R = {:.6}, x = {:?}, q = {:.3e}, avg cost = {:.6}",
        last.t, st.i, st.r, st.x, st.q, last.avg_cost
    );
    print_report(&report);
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cmd_bounds(cfg: &RunConfig, r: &Resolved, upsilons: Option<&[f64]>) -> Result<(), CliError> {
    let upsilons = upsilons.unwrap_or(&cfg.bounds.upsilons);
    let mut rows: Vec<SweepRow> = Vec::new();
    for v in &cfg.bounds.variants {
        let mut params = cfg.model;
        params.delta = v.delta;
        let cstar = budget_for_beta(&cfg.strategies, v.beta_star).map_err(CliError::Invalid)?;
        for &upsilon in upsilons {
            let mut policy = cfg.policy;
            policy.cstar = cstar;
            policy.upsilon = upsilon;
            let model = validate(params, cfg.strategies.clone(), policy).map_err(|e| CliError::Invalid(e.into()))?;
            let alloc = optimal_allocation(&model).map_err(CliError::Invalid)?;
            let mech = build_mechanism(&alloc, &model);
            let init = cfg.initial_state(&model).map_err(CliError::Invalid)?;
            let alpha = lyapunov_value(&init, &mech, &r.protocol).map_err(runtime)?;
            let q =
                BoundQuery::equidistant(&model, alpha, upsilon, cfg.bounds.grid_points).map_err(CliError::Invalid)?;
            let res = pi_tilde(&q, &model, &alloc).map_err(runtime)?;
            rows.push(SweepRow { upsilon, beta_star: alloc.betastar, delta: v.delta, alpha, pi_tilde: res.pi_tilde });
        }
    }
    let path = out_path(cfg, "bounds.csv")?;
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["upsilon", "beta_star", "delta", "alpha", "pi_tilde"]).map_err(runtime)?;
    for row in &rows {
        let vals = [row.upsilon, row.beta_star, row.delta, row.alpha, row.pi_tilde];
        w.write_record(vals.iter().map(|v| format!("{v:e}"))).map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;

    let result = initial_bound(cfg, r)?;
    write_json(
        &out_path(cfg, "bounds.json")?,
        &json!({ "version": version_string(), "config": cfg, "result": result }),
    )?;
    println!(
        "configured run: alpha = {:.6e}, pi_tilde = {:.6}, certified peak = {:.6} (argmax B = {:.5})",
        result.alpha, result.pi_tilde, result.certified_peak, result.argmax_b
    );
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

fn cmd_certify(cfg: &RunConfig, r: &Resolved, trajectory: Option<&Path>) -> Result<(), CliError> {
    let bound = initial_bound(cfg, r)?;
    let report = match trajectory {
        Some(path) => {
            let (t, i) = peak_from_csv(path)?;
            certify_peak(i, t, &bound)
        }
        None => certify_trajectory(&run_simulation(cfg, r)?, &bound),
    };
    write_json(&out_path(cfg, "certification.json")?, &report)?;
    print_report(&report);
    Ok(())
}

/// `(t, I)` at the largest `I` in a trajectory CSV.
pub fn peak_from_csv(path: &Path) -> Result<(f64, f64), CliError> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    let headers = rd.headers().map_err(runtime)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| runtime(format!("{}: missing column {name}", path.display())))
    };
    let (ti, ii) = (col("t")?, col("I")?);
    let mut best: Option<(f64, f64)> = None;
    for rec in rd.records() {
        let rec = rec.map_err(runtime)?;
        let parse = |k: usize| rec[k].parse::<f64>().map_err(|e| runtime(format!("bad value {:?}: {e}", &rec[k])));
        let (t, i) = (parse(ti)?, parse(ii)?);
        if best.is_none_or(|(_, bi)| i > bi) {
            best = Some((t, i));
        }
    }
    best.ok_or_else(|| runtime(format!("{}: no samples", path.display())))
}
