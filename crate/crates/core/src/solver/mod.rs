//! Continuous QP engine, branch-and-bound, the relax-and-round heuristic,
//! a brute-force testing oracle and schedule extraction.

mod admm;
mod bnb;
pub mod ldl;
mod oracle;
mod schedule;

pub use admm::{kkt_residuals, solve_qp, solve_qp_bounded};
pub use bnb::{solve_exact, solve_heuristic};
pub use oracle::{brute_force_oracle, OracleError};
pub use schedule::{extract_schedule, schedule_from_x, EvTrajectory, FlowEntry, Schedule, ScheduleError};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal_infeas.max(self.dual_infeas).max(self.complementarity)
    }
}

/// Lagrange multipliers in the sign convention `Qx + c + A_eqᵀy_eq + A_inᵀy_in + y_bounds = 0`.
///
/// `ineq ≥ 0`; a bound multiplier is positive at an upper bound and negative at a lower one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Duals {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub kkt: KktResiduals,
    pub status: QpStatus,
    pub duals: Duals,
    pub iterations: usize,
}

/// Settings of the continuous QP engine.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSettings {
    /// Acceptance threshold on every KKT residual for `Optimal`.
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// ADMM stopping accuracy at which the first polish is attempted.
    pub eps_start: f64,
    pub polish: bool,
    pub check_every: usize,
    pub time_limit: Option<std::time::Duration>,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_start: 1e-4,
            polish: true,
            check_every: 25,
            time_limit: None,
        }
    }
}

impl QpSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiqpStatus {
    Optimal,
    Feasible,
    Infeasible,
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiqpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub rel_gap: f64,
    pub nodes_explored: usize,
    pub status: MiqpStatus,
    /// KKT residuals of the final fixed-binary QP.
    pub kkt: KktResiduals,
}

impl MiqpSolution {
    pub(crate) fn infeasible(nodes: usize) -> Self {
        Self {
            x: Vec::new(),
            objective: f64::INFINITY,
            bound: f64::INFINITY,
            rel_gap: 0.0,
            nodes_explored: nodes,
            status: MiqpStatus::Infeasible,
            kkt: KktResiduals::default(),
        }
    }

    pub fn has_solution(&self) -> bool {
        matches!(self.status, MiqpStatus::Optimal | MiqpStatus::Feasible)
            || (self.status == MiqpStatus::NodeLimit && !self.x.is_empty())
    }
}

pub(crate) fn rel_gap(objective: f64, bound: f64) -> f64 {
    ((objective - bound) / objective.abs().max(1.0)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub gap_tol: f64,
    pub node_limit: usize,
    pub tol: f64,
    pub int_tol: f64,
    /// Binaries the heuristic may flip while repairing an infeasible rounding.
    pub flip_budget: usize,
    pub qp: QpSettings,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            gap_tol: 1e-4,
            node_limit: 100_000,
            tol: 1e-6,
            int_tol: 1e-5,
            flip_budget: 20,
            qp: QpSettings::default(),
        }
    }
}

impl SolverParams {
    pub(crate) fn qp_settings(&self) -> QpSettings {
        QpSettings {
            tol: self.tol,
            ..self.qp.clone()
        }
    }
}
