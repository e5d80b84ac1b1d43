//! Translation of a [`Scenario`](crate::domain::Scenario) into a convex MIQP.
//!
//! Column layout, constraint rows and the objective live here; solving is the
//! job of [`crate::solver`].

mod assemble;
mod dump;
mod pooled;
mod qp;
mod varmap;

pub use assemble::{add_fairness, assemble, assemble_with, build, build_with, pooling_is_exact, FairnessWarning};
pub use dump::write_dump;
pub use pooled::expand_pooled;
pub use qp::{QpProblem, RowAudit, RowKind, RowTag};
pub use varmap::{ColumnInfo, FlowLayout, FlowVar, SlotVars, VarKind, VarMap};

use thiserror::Error;

use crate::domain::ValidationReport;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("departure target unreachable by pure charging for EV(s): {}", ev_ids.join(", "))]
    InfeasibleTarget { ev_ids: Vec<String> },
    #[error("{series} has {actual} entries, time grid has {expected} slots")]
    DimensionError {
        series: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("scenario failed validation:\n{0}")]
    Invalid(ValidationReport),
    #[error("no {kind:?} column for EV {ev} at slot {slot}{}", partner.map(|p| format!(" towards EV {p}")).unwrap_or_default())]
    NotAllocated {
        kind: VarKind,
        ev: usize,
        slot: usize,
        partner: Option<usize>,
    },
    #[error("expected a pooled source layout and a pairwise target layout")]
    LayoutMismatch,
}
