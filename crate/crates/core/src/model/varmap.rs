use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::domain::SolveMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Charge,
    Discharge,
    Grid,
    Renewable,
    V2g,
    Soc,
    /// Charge/discharge exclusivity binary: 0 = charging, 1 = discharging.
    Mode,
    /// Directed EV-to-EV transfer; the partner is the receiver.
    Flow,
    /// Discharge above the budget threshold in one slot.
    Excess,
    /// Pooled layout only: total V2V energy an EV sends in a slot.
    Send,
    /// Pooled layout only: total V2V energy an EV receives in a slot.
    Receive,
}

impl VarKind {
    pub fn symbol(self) -> &'static str {
        match self {
            VarKind::Charge => "p_ch",
            VarKind::Discharge => "p_dis",
            VarKind::Grid => "p_grid",
            VarKind::Renewable => "p_renew",
            VarKind::V2g => "p_v2g",
            VarKind::Soc => "p_avail",
            VarKind::Mode => "x_mode",
            VarKind::Flow => "f_v2v",
            VarKind::Excess => "z_excess",
            VarKind::Send => "s_v2v",
            VarKind::Receive => "r_v2v",
        }
    }
}

/// Columns owned by one EV in one slot of its parking window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotVars {
    pub charge: usize,
    pub discharge: Option<usize>,
    pub grid: usize,
    pub renewable: usize,
    pub v2g: Option<usize>,
    pub soc: usize,
    pub mode: Option<usize>,
    pub excess: Option<usize>,
    pub send: Option<usize>,
    pub receive: Option<usize>,
    /// Flow columns entering this EV in this slot.
    pub inflows: Vec<usize>,
    /// Flow columns leaving this EV in this slot.
    pub outflows: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnInfo {
    pub kind: VarKind,
    pub ev: usize,
    pub slot: usize,
    pub partner: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowVar {
    pub from: usize,
    pub to: usize,
    pub slot: usize,
    pub col: usize,
}

/// How V2V transfers are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowLayout {
    /// One column per ordered co-present pair and slot.
    #[default]
    Pairwise,
    /// One send and one receive column per EV and slot, tied by a per-slot
    /// conservation row. Pairwise flows are recovered afterwards.
    Pooled,
}

/// Column layout of an assembled model.
#[derive(Debug, Clone)]
pub struct VarMap {
    pub mode: SolveMode,
    pub layout: FlowLayout,
    arrivals: Vec<usize>,
    per_ev: Vec<Vec<SlotVars>>,
    flows: Vec<FlowVar>,
    flow_index: HashMap<(usize, usize, usize), usize>,
    columns: Vec<ColumnInfo>,
    ids: Vec<String>,
}

impl VarMap {
    pub(crate) fn new(mode: SolveMode, layout: FlowLayout, arrivals: Vec<usize>, ids: Vec<String>) -> Self {
        let n = arrivals.len();
        Self {
            mode,
            layout,
            arrivals,
            per_ev: vec![Vec::new(); n],
            flows: Vec::new(),
            flow_index: HashMap::new(),
            columns: Vec::new(),
            ids,
        }
    }

    /// Records a freshly allocated column; must be called in column order.
    pub(crate) fn register(&mut self, col: usize, info: ColumnInfo) {
        assert_eq!(col, self.columns.len(), "columns must be registered contiguously");
        self.columns.push(info);
    }

    pub(crate) fn push_slot(&mut self, ev: usize, vars: SlotVars) {
        self.per_ev[ev].push(vars);
    }

    pub(crate) fn slot_mut(&mut self, ev: usize, slot: usize) -> Option<&mut SlotVars> {
        let a = self.arrivals[ev];
        slot.checked_sub(a).and_then(move |k| self.per_ev[ev].get_mut(k))
    }

    pub(crate) fn push_flow(&mut self, flow: FlowVar) {
        self.flow_index.insert((flow.from, flow.to, flow.slot), flow.col);
        if let Some(v) = self.slot_mut(flow.from, flow.slot) {
            v.outflows.push(flow.col);
        }
        if let Some(v) = self.slot_mut(flow.to, flow.slot) {
            v.inflows.push(flow.col);
        }
        self.flows.push(flow);
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_evs(&self) -> usize {
        self.per_ev.len()
    }

    pub fn ev_id(&self, ev: usize) -> &str {
        &self.ids[ev]
    }

    pub fn column(&self, col: usize) -> &ColumnInfo {
        &self.columns[col]
    }

    pub fn columns(&self) -> &[ColumnInfo] {
        &self.columns
    }

    pub fn flows(&self) -> &[FlowVar] {
        &self.flows
    }

    /// Window slots of an EV with their columns, in slot order.
    pub fn ev_slots(&self, ev: usize) -> impl Iterator<Item = (usize, &SlotVars)> {
        let a = self.arrivals[ev];
        self.per_ev[ev].iter().enumerate().map(move |(k, v)| (a + k, v))
    }

    pub fn slot_vars(&self, ev: usize, slot: usize) -> Option<&SlotVars> {
        let a = *self.arrivals.get(ev)?;
        slot.checked_sub(a).and_then(|k| self.per_ev[ev].get(k))
    }

    /// Column of the requested variable, or `NotAllocated`.
    pub fn lookup(&self, kind: VarKind, ev: usize, slot: usize, partner: Option<usize>) -> Result<usize, ModelError> {
        let missing = || ModelError::NotAllocated {
            kind,
            ev,
            slot,
            partner,
        };
        if kind == VarKind::Flow {
            let to = partner.ok_or_else(missing)?;
            return self.flow_index.get(&(ev, to, slot)).copied().ok_or_else(missing);
        }
        let v = self.slot_vars(ev, slot).ok_or_else(missing)?;
        let col = match kind {
            VarKind::Charge => Some(v.charge),
            VarKind::Discharge => v.discharge,
            VarKind::Grid => Some(v.grid),
            VarKind::Renewable => Some(v.renewable),
            VarKind::V2g => v.v2g,
            VarKind::Soc => Some(v.soc),
            VarKind::Mode => v.mode,
            VarKind::Excess => v.excess,
            VarKind::Send => v.send,
            VarKind::Receive => v.receive,
            VarKind::Flow => unreachable!(),
        };
        col.ok_or_else(missing)
    }

    pub fn label(&self, col: usize) -> String {
        let c = &self.columns[col];
        match c.partner {
            Some(p) => format!("{}[{}->{},t{}]", c.kind.symbol(), self.ids[c.ev], self.ids[p], c.slot),
            None => format!("{}[{},t{}]", c.kind.symbol(), self.ids[c.ev], c.slot),
        }
    }
}
