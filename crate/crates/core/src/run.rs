//! Scenario → model → solver → schedule → metrics, shared by the CLI and the C API.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{FairnessPolicy, Scenario, SolveMode};
use crate::metrics::{
    cost_breakdown, feasibility_audit, jain_index, AuditReport, CostBreakdown, FairnessReport, MetricsError,
};
use crate::model::{build, build_with, expand_pooled, pooling_is_exact, FlowLayout, ModelError};
use crate::solver::{
    schedule_from_x, solve_exact, solve_heuristic, MiqpSolution, MiqpStatus, Schedule, ScheduleError, SolverParams,
};

/// `auto` switches to the heuristic above this many exclusivity binaries.
pub const AUTO_EXACT_MAX_BINARIES: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Heuristic,
    #[default]
    Auto,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "heuristic" => Ok(Method::Heuristic),
            "auto" => Ok(Method::Auto),
            other => Err(format!("unknown method '{other}', expected exact|heuristic|auto")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Heuristic => "heuristic",
            Method::Auto => "auto",
        })
    }
}

/// Solver settings supplied from outside the scenario file (flags, environment).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamOverrides {
    pub gap_tol: Option<f64>,
    pub node_limit: Option<usize>,
    pub tol: Option<f64>,
    pub method: Option<Method>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub method: Method,
    pub params: SolverParams,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            params: SolverParams::default(),
        }
    }
}

impl SolveOptions {
    /// Defaults, then the scenario's `solver` block, then `overrides`.
    pub fn resolve(s: &Scenario, overrides: &ParamOverrides) -> Result<Self, RunError> {
        let mut o = Self::default();
        if let Some(v) = s.solver.gap_tol {
            o.params.gap_tol = v;
        }
        if let Some(v) = s.solver.node_limit {
            o.params.node_limit = v;
        }
        if let Some(v) = s.solver.tol {
            o.params.tol = v;
        }
        if let Some(m) = &s.solver.mode {
            o.method = m.parse().map_err(RunError::Config)?;
        }
        if let Some(v) = overrides.gap_tol {
            o.params.gap_tol = v;
        }
        if let Some(v) = overrides.node_limit {
            o.params.node_limit = v;
        }
        if let Some(v) = overrides.tol {
            o.params.tol = v;
        }
        if let Some(m) = overrides.method {
            o.method = m;
        }
        if !(o.params.gap_tol >= 0.0) || !(o.params.tol > 0.0) {
            return Err(RunError::Config("gap_tol must be ≥ 0 and tol > 0".into()));
        }
        Ok(o)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no feasible schedule: solver status {status:?} after {nodes} node(s)")]
    Infeasible { status: MiqpStatus, nodes: usize },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid solver settings: {0}")]
    Config(String),
}

impl RunError {
    /// Infeasibility, as opposed to bad input or an internal failure.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            RunError::Infeasible { .. } | RunError::Model(ModelError::InfeasibleTarget { .. })
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Model(ModelError::InfeasibleTarget { .. }) => "infeasible_target",
            RunError::Model(ModelError::Invalid(_)) => "validation",
            RunError::Model(_) => "model",
            RunError::Infeasible { .. } => "infeasible",
            RunError::Schedule(_) => "schedule",
            RunError::Metrics(_) => "metrics",
            RunError::Config(_) => "config",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverEcho {
    pub method: Method,
    pub layout: FlowLayout,
    pub gap_tol: f64,
    pub node_limit: usize,
    pub tol: f64,
}

/// Summary of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_fingerprint: String,
    pub mode: SolveMode,
    pub fairness: FairnessPolicy,
    pub solver: SolverEcho,
    pub status: MiqpStatus,
    pub objective: f64,
    pub bound: f64,
    pub rel_gap: f64,
    pub nodes_explored: usize,
    /// Largest KKT residual of the final fixed-binary QP.
    pub kkt_residual: f64,
    pub cost: CostBreakdown,
    pub jfi: f64,
    pub wall_ms: f64,
}

/// Everything `solve` writes: the record, the schedule and the derived reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub record: RunRecord,
    pub schedule: Schedule,
    pub fairness: FairnessReport,
    pub audit: AuditReport,
}

fn resolve_method(method: Method, binaries: usize) -> Method {
    match method {
        Method::Auto if binaries <= AUTO_EXACT_MAX_BINARIES => Method::Exact,
        Method::Auto => Method::Heuristic,
        m => m,
    }
}

/// Builds, solves and post-processes `s` under its own mode and fairness policy.
pub fn solve_scenario(s: &Scenario, opts: &SolveOptions) -> Result<RunArtifact, RunError> {
    let start = Instant::now();
    let (p, m) = build(s)?;
    let method = resolve_method(opts.method, p.binaries.len());
    let pooled = method == Method::Heuristic && s.mode.allows_v2v() && pooling_is_exact(s);
    let (sol, x, layout): (MiqpSolution, Vec<f64>, FlowLayout) = if pooled {
        let (pp, pm) = build_with(s, FlowLayout::Pooled)?;
        let sol = solve_heuristic(&pp, &opts.params);
        if !sol.has_solution() {
            return Err(RunError::Infeasible {
                status: sol.status,
                nodes: sol.nodes_explored,
            });
        }
        let x = expand_pooled(&sol.x, &pm, &m)?;
        (sol, x, FlowLayout::Pooled)
    } else {
        let sol = match method {
            Method::Heuristic => solve_heuristic(&p, &opts.params),
            _ => solve_exact(&p, &opts.params),
        };
        if !sol.has_solution() {
            return Err(RunError::Infeasible {
                status: sol.status,
                nodes: sol.nodes_explored,
            });
        }
        let x = sol.x.clone();
        (sol, x, FlowLayout::Pairwise)
    };
    let schedule = schedule_from_x(&x, &m, s)?;
    let cost = cost_breakdown(&schedule, &s.tariff, &s.fleet)?;
    let fairness = jain_index(&schedule);
    let audit = feasibility_audit(&schedule, s, opts.params.tol.max(1e-6));
    let objective = p.objective(&x);
    let record = RunRecord {
        scenario_fingerprint: s.fingerprint(),
        mode: s.mode,
        fairness: s.fairness.clone(),
        solver: SolverEcho {
            method,
            layout,
            gap_tol: opts.params.gap_tol,
            node_limit: opts.params.node_limit,
            tol: opts.params.tol,
        },
        status: sol.status,
        objective,
        bound: sol.bound,
        rel_gap: sol.rel_gap,
        nodes_explored: sol.nodes_explored,
        kkt_residual: sol.kkt.max(),
        cost,
        jfi: fairness.jfi,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(RunArtifact {
        record,
        schedule,
        fairness,
        audit,
    })
}

/// The fairness parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Hard per-slot cap.
    Zbar,
    /// Soft cumulative cap.
    ZbarC,
    /// Budget threshold; the companion is the budget.
    Theta,
    /// Budget size; the companion is the threshold.
    Budget,
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zbar" | "hard" => Ok(SweepParam::Zbar),
            "zbar_c" | "zbarc" | "soft" => Ok(SweepParam::ZbarC),
            "theta" => Ok(SweepParam::Theta),
            "budget" | "d" => Ok(SweepParam::Budget),
            other => Err(format!(
                "unknown sweep parameter '{other}', expected zbar|zbar_c|theta|budget"
            )),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Zbar => "zbar",
            SweepParam::ZbarC => "zbar_c",
            SweepParam::Theta => "theta",
            SweepParam::Budget => "budget",
        })
    }
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_points(spec: &str) -> Result<Vec<f64>, String> {
    let num = |v: &str| -> Result<f64, String> {
        let x: f64 = v.trim().parse().map_err(|_| format!("not a number: '{v}'"))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("not a finite number: '{v}'"))
        }
    };
    let pts = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range must be start:stop:step, got '{spec}'"));
        }
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) || b < a {
            return Err(format!("range '{spec}' needs step > 0 and stop ≥ start"));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize + 1;
        // round away accumulated binary noise, e.g. 0.30000000000000004
        (0..n).map(|k| ((a + k as f64 * h) * 1e12).round() / 1e12).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if pts.is_empty() {
        return Err("sweep has no points".into());
    }
    if pts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(format!("sweep points must be strictly increasing: {pts:?}"));
    }
    if pts.iter().any(|&v| v < 0.0) {
        return Err("sweep points must be nonnegative".into());
    }
    Ok(pts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub points: Vec<f64>,
    /// Values of the other budget parameter; required for `theta` and `budget`.
    /// Each value gives a full pass over `points`.
    #[serde(default)]
    pub companion: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.points.is_empty() {
            return Err("sweep has no points".into());
        }
        if self.points.windows(2).any(|w| w[1] <= w[0]) {
            return Err("sweep points must be strictly increasing".into());
        }
        let needs = matches!(self.param, SweepParam::Theta | SweepParam::Budget);
        if needs && self.companion.is_empty() {
            return Err(format!("sweeping {} needs companion values", self.param));
        }
        if !needs && !self.companion.is_empty() {
            return Err(format!("sweeping {} takes no companion values", self.param));
        }
        Ok(())
    }

    pub fn policy(&self, value: f64, companion: Option<f64>) -> FairnessPolicy {
        let c = companion.unwrap_or(0.0);
        match self.param {
            SweepParam::Zbar => FairnessPolicy::HardPerSlot { zbar: value },
            SweepParam::ZbarC => FairnessPolicy::SoftCumulative { zbar_c: value },
            SweepParam::Theta => FairnessPolicy::Budget {
                theta: value,
                budget_per_ev: c,
                overrides: Default::default(),
            },
            SweepParam::Budget => FairnessPolicy::Budget {
                theta: c,
                budget_per_ev: value,
                overrides: Default::default(),
            },
        }
    }

    /// (threshold, companion) pairs in row order: companion outer, threshold inner.
    pub fn grid(&self) -> Vec<(f64, Option<f64>)> {
        if self.companion.is_empty() {
            self.points.iter().map(|&v| (v, None)).collect()
        } else {
            self.companion
                .iter()
                .flat_map(|&c| self.points.iter().map(move |&v| (v, Some(c))))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub companion: Option<f64>,
    pub status: Option<MiqpStatus>,
    pub total_cost: Option<f64>,
    pub jfi: Option<f64>,
    pub rel_gap: Option<f64>,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    /// Steps where cost rose with the threshold by more than twice the gap tolerance.
    pub monotonicity_warnings: Vec<String>,
    /// Index of the first failed row when the sweep stopped there.
    pub aborted_at: Option<usize>,
}

impl SweepReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W, with_timing: bool) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let two_d = self.rows.iter().any(|r| r.companion.is_some());
        let mut header = vec!["threshold"];
        if two_d {
            header.push("companion");
        }
        header.extend(["total_cost", "jfi", "rel_gap"]);
        if with_timing {
            header.push("wall_ms");
        }
        out.write_record(&header)?;
        // `{:?}` is the shortest round-trip form, with exponents for tiny values
        let opt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![format!("{:?}", r.threshold)];
            if two_d {
                rec.push(opt(r.companion));
            }
            rec.extend([opt(r.total_cost), opt(r.jfi), opt(r.rel_gap)]);
            if with_timing {
                rec.push(format!("{:.3}", r.wall_ms));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Solves every sweep point (in parallel) and reports rows in sweep order.
///
/// Without `keep_going` the rows stop at the first failed point.
pub fn run_sweep(
    base: &Scenario,
    spec: &SweepSpec,
    opts: &SolveOptions,
    keep_going: bool,
) -> Result<SweepReport, RunError> {
    spec.validate().map_err(RunError::Config)?;
    let grid = spec.grid();
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&(v, c)| {
            let mut s = base.clone();
            s.fairness = spec.policy(v, c);
            let t = Instant::now();
            match solve_scenario(&s, opts) {
                Ok(a) => SweepRow {
                    threshold: v,
                    companion: c,
                    status: Some(a.record.status),
                    total_cost: Some(a.record.cost.total_cost),
                    jfi: Some(a.record.jfi),
                    rel_gap: Some(a.record.rel_gap),
                    wall_ms: t.elapsed().as_secs_f64() * 1e3,
                    error: None,
                },
                Err(e) => SweepRow {
                    threshold: v,
                    companion: c,
                    status: None,
                    total_cost: None,
                    jfi: None,
                    rel_gap: None,
                    wall_ms: t.elapsed().as_secs_f64() * 1e3,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut report = SweepReport {
        param: spec.param,
        rows,
        monotonicity_warnings: Vec::new(),
        aborted_at: None,
    };
    if !keep_going {
        if let Some(k) = report.rows.iter().position(|r| r.error.is_some()) {
            report.rows.truncate(k + 1);
            report.aborted_at = Some(k);
        }
    }
    let tol = 2.0 * opts.params.gap_tol;
    for w in report.rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.companion != b.companion {
            continue;
        }
        if let (Some(ca), Some(cb)) = (a.total_cost, b.total_cost) {
            if cb > ca + tol * ca.abs().max(1.0) {
                let msg = format!(
                    "cost rose from {ca} at {} = {} to {cb} at {}",
                    spec.param, a.threshold, b.threshold
                );
                log::warn!("{msg}");
                report.monotonicity_warnings.push(msg);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::tests::{ev, scenario};

    #[test]
    fn range_points() {
        let p = parse_points("0.1:1.5:0.1").unwrap();
        assert_eq!(p.len(), 15);
        assert_eq!(p[2], 0.3);
        assert_eq!(p[14], 1.5);
        assert_eq!(parse_points("1,2,4").unwrap(), vec![1.0, 2.0, 4.0]);
        assert!(parse_points("2,1").is_err());
        assert!(parse_points("1:0:1").is_err());
    }

    #[test]
    fn overrides_beat_scenario_block() {
        let mut s = scenario(1, vec![]);
        s.solver.gap_tol = Some(1e-3);
        s.solver.mode = Some("heuristic".into());
        let o = SolveOptions::resolve(&s, &ParamOverrides::default()).unwrap();
        assert_eq!((o.params.gap_tol, o.method), (1e-3, Method::Heuristic));
        let o = SolveOptions::resolve(
            &s,
            &ParamOverrides {
                gap_tol: Some(1e-5),
                method: Some(Method::Exact),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((o.params.gap_tol, o.method), (1e-5, Method::Exact));
    }

    #[test]
    fn flat_price_solve_costs_price_times_energy() {
        let mut a = ev("a", 0, 1);
        a.target_kwh = 14.0;
        let mut s = scenario(2, vec![a]);
        s.mode = SolveMode::ChargingOnly;
        let r = solve_scenario(&s, &SolveOptions::default()).unwrap();
        assert!((r.record.objective - 0.8).abs() < 1e-6);
        assert!((r.record.cost.total_cost - r.record.objective).abs() < 1e-6);
        assert!(r.audit.pass);
    }

    #[test]
    fn unreachable_target_is_infeasible() {
        let mut a = ev("a", 0, 0);
        a.target_kwh = 40.0;
        let e = solve_scenario(&scenario(1, vec![a]), &SolveOptions::default()).unwrap_err();
        assert!(e.is_infeasible());
    }

    #[test]
    fn budget_sweep_needs_companion() {
        let spec = SweepSpec {
            param: SweepParam::Budget,
            points: vec![1.0],
            companion: vec![],
        };
        assert!(spec.validate().is_err());
        let spec = SweepSpec {
            companion: vec![0.5, 1.0],
            ..spec
        };
        assert_eq!(spec.grid(), vec![(1.0, Some(0.5)), (1.0, Some(1.0))]);
    }
}
