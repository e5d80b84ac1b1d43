use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MiqpSolution, MiqpStatus};
use crate::domain::{FairnessPolicy, Scenario, SolveMode};
use crate::model::VarMap;

const CLAMP: f64 = 1e-9;
const SOC_TOL: f64 = 1e-6;
const EXCLUSIVITY_TOL: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("no schedule to extract: solver status {0:?}")]
    NoSolution(MiqpStatus),
    #[error("solution has {actual} columns, model has {expected}")]
    Dimension { expected: usize, actual: usize },
    #[error("EV {ev} slot {slot}: {what} off by {residual:.3e}")]
    InvariantViolation {
        ev: String,
        slot: usize,
        what: &'static str,
        residual: f64,
    },
}

/// Trajectories of one EV, indexed from its arrival slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvTrajectory {
    pub id: String,
    pub arrival: usize,
    pub departure: usize,
    pub charge_kwh: Vec<f64>,
    pub discharge_kwh: Vec<f64>,
    pub grid_kwh: Vec<f64>,
    pub renewable_kwh: Vec<f64>,
    pub v2g_kwh: Vec<f64>,
    pub soc_kwh: Vec<f64>,
    /// 1 while discharging, 0 while charging or idle.
    pub mode_flag: Vec<u8>,
}

impl EvTrajectory {
    /// Value of `series` at absolute slot `t`, zero outside the window.
    pub fn at(&self, series: &[f64], t: usize) -> f64 {
        t.checked_sub(self.arrival)
            .and_then(|k| series.get(k))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Directed V2V transfer between fleet positions `from` and `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub from: usize,
    pub to: usize,
    pub slot: usize,
    pub kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub scenario_fingerprint: String,
    pub mode: SolveMode,
    pub fairness: FairnessPolicy,
    /// Horizon length of the scenario.
    pub slot_count: usize,
    pub evs: Vec<EvTrajectory>,
    /// Only nonzero flows are listed.
    pub flows: Vec<FlowEntry>,
}

impl Schedule {
    pub fn sent_total(&self, ev: usize) -> f64 {
        self.flows.iter().filter(|f| f.from == ev).map(|f| f.kwh).sum()
    }

    pub fn received(&self, ev: usize, slot: usize) -> f64 {
        self.flows
            .iter()
            .filter(|f| f.to == ev && f.slot == slot)
            .map(|f| f.kwh)
            .sum()
    }

    pub fn sent(&self, ev: usize, slot: usize) -> f64 {
        self.flows
            .iter()
            .filter(|f| f.from == ev && f.slot == slot)
            .map(|f| f.kwh)
            .sum()
    }

    /// SOC recurrence, departure target and charge/discharge exclusivity.
    pub fn check_invariants(&self, s: &Scenario) -> Result<(), ScheduleError> {
        for (ev, tr) in s.fleet.iter().zip(&self.evs) {
            let mut prev = ev.initial_kwh;
            for k in 0..tr.soc_kwh.len() {
                let slot = tr.arrival + k;
                let expect = prev + ev.eff_charge * tr.charge_kwh[k] - tr.discharge_kwh[k] / ev.eff_discharge;
                let residual = (tr.soc_kwh[k] - expect).abs();
                if residual > SOC_TOL {
                    return Err(violation(ev.id.as_str(), slot, "battery dynamics", residual));
                }
                let product = tr.charge_kwh[k] * tr.discharge_kwh[k];
                let allowed = EXCLUSIVITY_TOL * ev.max_charge_kwh_per_slot * ev.max_discharge_kwh_per_slot;
                if product > allowed.max(1e-12) {
                    return Err(violation(ev.id.as_str(), slot, "charge/discharge exclusivity", product));
                }
                prev = tr.soc_kwh[k];
            }
            let residual = (prev - ev.target_kwh).abs();
            if residual > SOC_TOL {
                return Err(violation(ev.id.as_str(), ev.departure, "departure target", residual));
            }
        }
        Ok(())
    }
}

fn violation(ev: &str, slot: usize, what: &'static str, residual: f64) -> ScheduleError {
    ScheduleError::InvariantViolation {
        ev: ev.to_string(),
        slot,
        what,
        residual,
    }
}

fn clean(v: f64) -> f64 {
    if v.abs() < CLAMP {
        0.0
    } else {
        v
    }
}

/// Maps the solution columns back to named per-EV trajectories and checks them.
pub fn extract_schedule(sol: &MiqpSolution, m: &VarMap, s: &Scenario) -> Result<Schedule, ScheduleError> {
    if !sol.has_solution() {
        return Err(ScheduleError::NoSolution(sol.status));
    }
    schedule_from_x(&sol.x, m, s)
}

/// Same as [`extract_schedule`] for a bare column vector.
pub fn schedule_from_x(x: &[f64], m: &VarMap, s: &Scenario) -> Result<Schedule, ScheduleError> {
    if x.len() != m.num_columns() {
        return Err(ScheduleError::Dimension {
            expected: m.num_columns(),
            actual: x.len(),
        });
    }
    let val = |c: Option<usize>| c.map_or(0.0, |c| clean(x[c]));
    let mut evs = Vec::with_capacity(s.fleet.len());
    for (i, ev) in s.fleet.iter().enumerate() {
        let len = ev.window_len();
        let mut tr = EvTrajectory {
            id: ev.id.clone(),
            arrival: ev.arrival,
            departure: ev.departure,
            charge_kwh: Vec::with_capacity(len),
            discharge_kwh: Vec::with_capacity(len),
            grid_kwh: Vec::with_capacity(len),
            renewable_kwh: Vec::with_capacity(len),
            v2g_kwh: Vec::with_capacity(len),
            soc_kwh: Vec::with_capacity(len),
            mode_flag: Vec::with_capacity(len),
        };
        for (_, v) in m.ev_slots(i) {
            let dis = val(v.discharge);
            tr.charge_kwh.push(val(Some(v.charge)));
            tr.discharge_kwh.push(dis);
            tr.grid_kwh.push(val(Some(v.grid)));
            tr.renewable_kwh.push(val(Some(v.renewable)));
            tr.v2g_kwh.push(val(v.v2g));
            tr.soc_kwh.push(val(Some(v.soc)));
            let flag = match v.mode {
                Some(c) => x[c] >= 0.5,
                None => dis > 0.0,
            };
            tr.mode_flag.push(u8::from(flag));
        }
        evs.push(tr);
    }
    let flows = m
        .flows()
        .iter()
        .filter_map(|f| {
            let kwh = clean(x[f.col]);
            (kwh > 0.0).then_some(FlowEntry {
                from: f.from,
                to: f.to,
                slot: f.slot,
                kwh,
            })
        })
        .collect();
    let sched = Schedule {
        scenario_fingerprint: s.fingerprint(),
        mode: m.mode,
        fairness: s.fairness.clone(),
        slot_count: s.grid.slot_count,
        evs,
        flows,
    };
    sched.check_invariants(s)?;
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::tests::{ev, scenario};
    use crate::model::{assemble, VarKind};

    fn at_target() -> Scenario {
        let mut a = ev("a", 0, 2);
        a.target_kwh = a.initial_kwh;
        let mut b = ev("b", 0, 2);
        b.target_kwh = b.initial_kwh;
        scenario(3, vec![a, b])
    }

    #[test]
    fn zero_solution_gives_idle_schedule() {
        let s = at_target();
        let (_, m) = assemble(&s).unwrap();
        let mut x = vec![0.0; m.num_columns()];
        for i in 0..2 {
            for t in 0..3 {
                x[m.lookup(VarKind::Soc, i, t, None).unwrap()] = 10.0;
            }
        }
        let sched = schedule_from_x(&x, &m, &s).unwrap();
        assert!(sched.flows.is_empty());
        for tr in &sched.evs {
            assert_eq!(tr.soc_kwh, vec![10.0; 3]);
            assert!(tr.charge_kwh.iter().chain(&tr.discharge_kwh).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn flow_shows_up_as_receipt() {
        let s = at_target();
        let (_, m) = assemble(&s).unwrap();
        let mut x = vec![0.0; m.num_columns()];
        for i in 0..2 {
            for t in 0..3 {
                x[m.lookup(VarKind::Soc, i, t, None).unwrap()] = 10.0;
            }
        }
        // a sends 1.2 to b in slot 1, b sends it back in slot 2
        let set = |x: &mut Vec<f64>, k, i, t, v| x[m.lookup(k, i, t, None).unwrap()] = v;
        x[m.lookup(VarKind::Flow, 0, 1, Some(1)).unwrap()] = 1.2;
        set(&mut x, VarKind::Discharge, 0, 1, 1.2);
        set(&mut x, VarKind::Mode, 0, 1, 1.0);
        set(&mut x, VarKind::Soc, 0, 1, 8.8);
        set(&mut x, VarKind::Charge, 1, 1, 1.2);
        set(&mut x, VarKind::Soc, 1, 1, 11.2);
        x[m.lookup(VarKind::Flow, 1, 2, Some(0)).unwrap()] = 1.2;
        set(&mut x, VarKind::Discharge, 1, 2, 1.2);
        set(&mut x, VarKind::Mode, 1, 2, 1.0);
        set(&mut x, VarKind::Charge, 0, 2, 1.2);
        let sched = schedule_from_x(&x, &m, &s).unwrap();
        assert_eq!(sched.received(1, 1), 1.2);
        assert_eq!(
            sched.evs[1].charge_kwh[1] - sched.evs[1].grid_kwh[1] - sched.evs[1].renewable_kwh[1],
            1.2
        );
        assert_eq!(sched.evs[0].mode_flag, vec![0, 1, 0]);
    }

    #[test]
    fn broken_recurrence_rejected() {
        let s = at_target();
        let (_, m) = assemble(&s).unwrap();
        let mut x = vec![0.0; m.num_columns()];
        for i in 0..2 {
            for t in 0..3 {
                x[m.lookup(VarKind::Soc, i, t, None).unwrap()] = 10.0;
            }
        }
        x[m.lookup(VarKind::Soc, 1, 1, None).unwrap()] = 10.5;
        match schedule_from_x(&x, &m, &s) {
            Err(ScheduleError::InvariantViolation {
                ev,
                slot,
                what,
                residual,
            }) => {
                assert_eq!((ev.as_str(), slot, what), ("b", 1, "battery dynamics"));
                assert!((residual - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
