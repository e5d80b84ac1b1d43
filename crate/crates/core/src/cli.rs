//! `evfair` command line: generate, solve, sweep, verify.
//!
//! Exit codes: 0 success, 1 audit violation (`verify`), 2 infeasible,
//! 3 unreadable or invalid input, 4 other failures. Errors from `solve` and
//! `sweep` are also printed to stderr as one JSON object.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::domain::{FairnessPolicy, Scenario, SolveMode};
use crate::metrics::feasibility_audit;
use crate::run::{
    parse_points, run_sweep, solve_scenario, Method, ParamOverrides, RunArtifact, RunError, SolveOptions, SweepParam,
    SweepSpec,
};
use crate::scenario::{generate, load_sell_prices, Case, GenConfig, RenewableProfile};
use crate::solver::Schedule;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_FAILURE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "evfair",
    version,
    about = "Fairness-aware EV charging, V2G and V2V scheduling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic residential or shopping-centre scenario.
    Generate(GenerateArgs),
    /// Solve one scenario and write the run record and schedule.
    Solve(SolveArgs),
    /// Solve a scenario across a range of fairness thresholds.
    Sweep(SweepArgs),
    /// Re-check a schedule against its scenario.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CaseArg {
    Residential,
    Shopping,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub case: CaseArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: PathBuf,
    /// EVs parked for the whole horizon (default 50 residential, 30 shopping).
    #[arg(long)]
    pub n_fixed: Option<usize>,
    /// EVs with random arrival and departure (default 50 residential, 70 shopping).
    #[arg(long)]
    pub n_random: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub slot_hours: f64,
    /// Aggregate grid import cap in kWh per slot.
    #[arg(long)]
    pub grid_cap: Option<f64>,
    /// Peak of a bell-shaped midday renewable profile, kW.
    #[arg(long)]
    pub renewable_peak_kw: Option<f64>,
    /// CSV of half-hourly wholesale prices (`timestamp,price_per_mwh`).
    #[arg(long)]
    pub sell_prices: Option<PathBuf>,
    #[arg(long, value_parser = SolveMode::parse_flag, default_value = "joint")]
    pub mode: SolveMode,
    #[arg(long, value_parser = FairnessPolicy::parse_flag, default_value = "none")]
    pub fairness: FairnessPolicy,
}

#[derive(Debug, Args)]
pub struct SolverFlags {
    /// exact, heuristic or auto.
    #[arg(long, env = "EVFAIR_METHOD")]
    pub method: Option<Method>,
    #[arg(long, env = "EVFAIR_GAP_TOL")]
    pub gap_tol: Option<f64>,
    #[arg(long, env = "EVFAIR_NODE_LIMIT")]
    pub node_limit: Option<usize>,
    #[arg(long, env = "EVFAIR_TOL")]
    pub tol: Option<f64>,
}

impl SolverFlags {
    fn overrides(&self) -> ParamOverrides {
        ParamOverrides {
            gap_tol: self.gap_tol,
            node_limit: self.node_limit,
            tol: self.tol,
            method: self.method,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub scenario: PathBuf,
    /// charging-only, v2g or joint; defaults to the scenario's own mode.
    #[arg(long, value_parser = SolveMode::parse_flag)]
    pub mode: Option<SolveMode>,
    /// none | hard:<zbar> | soft:<zbarc> | budget:<theta>,<D>; defaults to the scenario's policy.
    #[arg(long, value_parser = FairnessPolicy::parse_flag)]
    pub fairness: Option<FairnessPolicy>,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Run JSON destination; stdout when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Also write the per-EV cost table as CSV.
    #[arg(long)]
    pub costs_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub scenario: PathBuf,
    /// zbar, zbar_c, theta or budget.
    #[arg(long)]
    pub param: SweepParam,
    /// `start:stop:step` (inclusive) or a comma-separated list.
    #[arg(long)]
    pub range: String,
    /// Values of the other budget parameter (budget when sweeping theta, theta when sweeping budget).
    #[arg(long)]
    pub companion: Option<String>,
    #[arg(long, value_parser = SolveMode::parse_flag)]
    pub mode: Option<SolveMode>,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Continue past infeasible points instead of stopping at the first.
    #[arg(long)]
    pub keep_going: bool,
    /// Drop the wall_ms column so reruns are byte-identical.
    #[arg(long)]
    pub omit_timing: bool,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run JSON written by `solve`, or a bare schedule.
    pub schedule: PathBuf,
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            kind: "input",
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_FAILURE,
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let code = if e.is_infeasible() {
            EXIT_INFEASIBLE
        } else {
            match e {
                RunError::Model(_) | RunError::Config(_) => EXIT_INPUT,
                _ => EXIT_FAILURE,
            }
        };
        Self {
            code,
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let json_errors = matches!(cli.command, Command::Solve(_) | Command::Sweep(_));
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Verify(a) => cmd_verify(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            if json_errors {
                eprintln!(
                    "{}",
                    json!({"error": f.kind, "message": f.message, "exit_code": f.code})
                );
            } else {
                eprintln!("error: {}", f.message);
            }
            f.code
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| Failure::input(e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::io(path, e))
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<i32, Failure> {
    let case = match a.case {
        CaseArg::Residential => Case::Residential,
        CaseArg::Shopping => Case::Shopping,
    };
    let mut cfg = match case {
        Case::Residential => GenConfig::residential(a.seed),
        Case::Shopping => GenConfig::shopping(a.seed),
    };
    if let Some(n) = a.n_fixed {
        cfg.n_fixed = n;
    }
    if let Some(n) = a.n_random {
        cfg.n_random = n;
    }
    cfg.slot_hours = a.slot_hours;
    cfg.grid_cap_kwh_per_slot = a.grid_cap;
    if let Some(peak) = a.renewable_peak_kw {
        cfg.renewable_profile = RenewableProfile::Bell {
            peak_kw: peak,
            center_hour: 12.5,
            width_h: 3.0,
        };
    }
    let mut s = generate(&cfg).map_err(|e| Failure::input(e.to_string()))?;
    if let Some(path) = &a.sell_prices {
        let prices = load_sell_prices(path, &s.grid).map_err(|e| Failure::input(e.to_string()))?;
        log::info!("sell prices from {} ({})", prices.source, prices.resampling);
        s.tariff.sell_price = prices.values;
    }
    s.mode = a.mode;
    s.fairness = a.fairness.clone();
    s.save(&a.out).map_err(|e| Failure {
        code: EXIT_FAILURE,
        kind: "io",
        message: e.to_string(),
    })?;
    println!(
        "wrote {} ({} EVs, {} slots)",
        a.out.display(),
        s.fleet.len(),
        s.grid.slot_count
    );
    Ok(EXIT_OK)
}

pub fn cmd_solve(a: &SolveArgs) -> Result<i32, Failure> {
    let mut s = load_scenario(&a.scenario)?;
    if let Some(m) = a.mode {
        s.mode = m;
    }
    if let Some(f) = &a.fairness {
        s.fairness = f.clone();
    }
    let opts = SolveOptions::resolve(&s, &a.solver.overrides())?;
    let art = solve_scenario(&s, &opts)?;
    let text = serde_json::to_string_pretty(&art).expect("run artifact serializes");
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{text}")
                .and_then(|_| w.flush())
                .map_err(|e| Failure::io(path, e))?;
            let r = &art.record;
            println!(
                "{:?} objective {:.6} rel_gap {:.2e} jfi {:.4} nodes {} -> {}",
                r.status,
                r.objective,
                r.rel_gap,
                r.jfi,
                r.nodes_explored,
                path.display()
            );
        }
        None => println!("{text}"),
    }
    if let Some(path) = &a.costs_csv {
        art.record
            .cost
            .write_csv(create(path)?)
            .map_err(|e| Failure::io(path, e))?;
    }
    if !art.audit.pass {
        log::warn!("audit of the returned schedule failed: {:?}", art.audit.worst());
    }
    Ok(EXIT_OK)
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<i32, Failure> {
    let mut s = load_scenario(&a.scenario)?;
    if let Some(m) = a.mode {
        s.mode = m;
    }
    let points = parse_points(&a.range).map_err(Failure::input)?;
    let companion = match &a.companion {
        Some(c) => parse_points(c).map_err(Failure::input)?,
        None => Vec::new(),
    };
    let spec = SweepSpec {
        param: a.param,
        points,
        companion,
    };
    spec.validate().map_err(Failure::input)?;
    let opts = SolveOptions::resolve(&s, &a.solver.overrides())?;
    let report = match a.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Failure::input(e.to_string()))?
            .install(|| run_sweep(&s, &spec, &opts, a.keep_going)),
        None => run_sweep(&s, &spec, &opts, a.keep_going),
    }?;
    let mut w = create(&a.out)?;
    report
        .write_csv(&mut w, !a.omit_timing)
        .map_err(|e| Failure::io(&a.out, e))?;
    w.flush().map_err(|e| Failure::io(&a.out, e))?;
    for warning in &report.monotonicity_warnings {
        eprintln!("warning: {warning}");
    }
    if let Some(k) = report.aborted_at {
        let row = &report.rows[k];
        return Err(Failure {
            code: EXIT_INFEASIBLE,
            kind: "infeasible",
            message: format!(
                "sweep stopped at {} = {}: {}",
                spec.param,
                row.threshold,
                row.error.as_deref().unwrap_or("failed")
            ),
        });
    }
    println!("{} rows -> {}", report.rows.len(), a.out.display());
    Ok(EXIT_OK)
}

fn load_schedule(path: &Path) -> Result<Schedule, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    if let Ok(art) = serde_json::from_str::<RunArtifact>(&text) {
        return Ok(art.schedule);
    }
    serde_json::from_str::<Schedule>(&text)
        .map_err(|e| Failure::input(format!("{}: not a run file or schedule: {e}", path.display())))
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<i32, Failure> {
    let sched = load_schedule(&a.schedule)?;
    let mut s = load_scenario(&a.scenario)?;
    // the schedule records the mode and policy it was solved under
    s.mode = sched.mode;
    s.fairness = sched.fairness.clone();
    let fp = s.fingerprint();
    if fp != sched.scenario_fingerprint {
        return Err(Failure::input(format!(
            "schedule was produced for scenario {} but {} has fingerprint {fp}",
            sched.scenario_fingerprint,
            a.scenario.display()
        )));
    }
    let report = feasibility_audit(&sched, &s, a.tol);
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{:<20} {:>12}  location", "family", "max_residual");
    for f in &report.families {
        let flag = if f.max_residual <= a.tol { "" } else { "  VIOLATED" };
        let _ = writeln!(
            out,
            "{:<20} {:>12.3e}  {}{flag}",
            f.family,
            f.max_residual,
            f.location.as_deref().unwrap_or("-")
        );
    }
    let _ = writeln!(out, "{} at tol {:e}", if report.pass { "PASS" } else { "FAIL" }, a.tol);
    Ok(if report.pass { EXIT_OK } else { EXIT_VIOLATION })
}
