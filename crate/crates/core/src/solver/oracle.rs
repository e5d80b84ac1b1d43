//! Exhaustive search over a discretized action lattice, for cross-checking the
//! MIQP solver on tiny instances.
//!
//! Works directly from the [`Scenario`], never from the assembled model, so it
//! shares no code path with the optimizer it checks. Per slot, every EV either
//! charges at a lattice level or discharges a lattice amount split between V2G
//! and each co-parked partner. A dynamic program over (per-EV SOC, fairness
//! accumulators) keeps the cheapest way to reach each state.

use std::collections::HashMap;

use thiserror::Error;

use crate::domain::{FairnessPolicy, Scenario, SolveMode};

/// Upper limit on the joint per-slot action count.
pub const MAX_CHOICES: f64 = 1e7;
const FEAS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("enumeration needs {choices:.3e} joint choices in one slot (limit 1e7)")]
    TooLarge { choices: f64 },
    #[error("no lattice point satisfies every constraint")]
    NoFeasiblePoint,
    #[error("step must be positive, got {0}")]
    BadStep(f64),
}

#[derive(Clone)]
struct Choice {
    ch: f64,
    v2g: f64,
    /// Amount sent to each present EV (indexed like the slot's present list).
    sends: Vec<f64>,
}

impl Choice {
    fn discharge(&self) -> f64 {
        self.v2g + self.sends.iter().sum::<f64>()
    }
}

fn levels(cap: f64, step: f64) -> Vec<f64> {
    let k = (cap / step + 1e-9).floor().max(0.0) as usize;
    (0..=k).map(|i| i as f64 * step).collect()
}

fn key(v: f64) -> i64 {
    (v * 1e9).round() as i64
}

/// Cheapest objective over the lattice `{0, step, 2·step, …}` of every
/// per-slot decision, or an error if none is feasible.
pub fn brute_force_oracle(s: &Scenario, step_kwh: f64) -> Result<f64, OracleError> {
    if !(step_kwh > 0.0 && step_kwh.is_finite()) {
        return Err(OracleError::BadStep(step_kwh));
    }
    let n = s.fleet.len();
    let h = s.grid.slot_count;

    // state: soc per EV followed by one fairness accumulator per EV
    let mut states: HashMap<Vec<i64>, (Vec<f64>, f64)> = HashMap::new();
    let init: Vec<f64> = s
        .fleet
        .iter()
        .map(|e| e.initial_kwh)
        .chain(std::iter::repeat(0.0).take(n))
        .collect();
    states.insert(init.iter().map(|&v| key(v)).collect(), (init, 0.0));

    for t in 0..h {
        let present: Vec<usize> = (0..n).filter(|&i| s.fleet[i].is_present(t)).collect();
        if present.is_empty() {
            continue;
        }
        let actions = slot_actions(s, t, &present, step_kwh)?;
        let mut next: HashMap<Vec<i64>, (Vec<f64>, f64)> = HashMap::with_capacity(states.len());
        for (state, cost) in states.values() {
            'act: for a in &actions {
                let mut st = state.clone();
                for (k, &i) in present.iter().enumerate() {
                    let ev = &s.fleet[i];
                    let soc = st[i] + a.delta[k];
                    if soc < ev.min_kwh - FEAS || soc > ev.capacity_kwh + FEAS {
                        continue 'act;
                    }
                    if t == ev.departure && (soc - ev.target_kwh).abs() > step_kwh / 2.0 {
                        continue 'act;
                    }
                    st[i] = soc;
                    let acc = st[n + i] + a.track[k];
                    let limit = match &s.fairness {
                        FairnessPolicy::SoftCumulative { zbar_c } => *zbar_c,
                        FairnessPolicy::Budget { .. } => s.fairness.budget_for(&ev.id).unwrap_or(f64::INFINITY),
                        _ => f64::INFINITY,
                    };
                    if acc > limit + FEAS {
                        continue 'act;
                    }
                    st[n + i] = acc;
                }
                let c = cost + a.cost;
                let k: Vec<i64> = st.iter().map(|&v| key(v)).collect();
                match next.get_mut(&k) {
                    Some(entry) if entry.1 <= c => {}
                    Some(entry) => *entry = (st, c),
                    None => {
                        next.insert(k, (st, c));
                    }
                }
            }
        }
        states = next;
        if states.is_empty() {
            return Err(OracleError::NoFeasiblePoint);
        }
    }
    states
        .values()
        .map(|(_, c)| *c)
        .min_by(f64::total_cmp)
        .ok_or(OracleError::NoFeasiblePoint)
}

/// A joint action reduced to what the dynamic program needs.
struct Action {
    delta: Vec<f64>,
    track: Vec<f64>,
    cost: f64,
}

fn ev_choices(s: &Scenario, i: usize, present: &[usize], step: f64) -> Vec<Choice> {
    let ev = &s.fleet[i];
    let np = present.len();
    let mut out: Vec<Choice> = levels(ev.max_charge_kwh_per_slot, step)
        .into_iter()
        .map(|ch| Choice {
            ch,
            v2g: 0.0,
            sends: vec![0.0; np],
        })
        .collect();
    if !s.mode.allows_discharge() || ev.max_discharge_kwh_per_slot <= 0.0 {
        return out;
    }
    let dis_cap = match s.fairness {
        FairnessPolicy::HardPerSlot { zbar } => ev.max_discharge_kwh_per_slot.min(zbar),
        _ => ev.max_discharge_kwh_per_slot,
    };
    let me = present.iter().position(|&j| j == i).expect("EV is present");
    // partial choices: v2g first, then one partner at a time
    let mut partial = vec![Choice {
        ch: 0.0,
        v2g: 0.0,
        sends: vec![0.0; np],
    }];
    let v2g_levels = levels(ev.v2g_cap_kwh_per_slot, step);
    partial = partial
        .into_iter()
        .flat_map(|c| v2g_levels.iter().map(move |&v| Choice { v2g: v, ..c.clone() }))
        .filter(|c| c.discharge() <= dis_cap + FEAS)
        .collect();
    if s.mode == SolveMode::Joint {
        let pair_levels = levels(ev.v2v_pair_cap_kwh_per_slot, step);
        for k in 0..np {
            if k == me {
                continue;
            }
            partial = partial
                .into_iter()
                .flat_map(|c| {
                    pair_levels.iter().map(move |&f| {
                        let mut c = c.clone();
                        c.sends[k] = f;
                        c
                    })
                })
                .filter(|c| c.discharge() <= dis_cap + FEAS)
                .collect();
        }
    }
    out.extend(partial.into_iter().filter(|c| c.discharge() > 0.0));
    out
}

/// Number of choices `ev_choices` would produce, without building them.
fn count_choices(s: &Scenario, i: usize, np: usize, step: f64) -> f64 {
    let ev = &s.fleet[i];
    let units = |cap: f64| (cap / step + 1e-9).floor().max(0.0) as usize;
    let charge = (units(ev.max_charge_kwh_per_slot) + 1) as f64;
    if !s.mode.allows_discharge() || ev.max_discharge_kwh_per_slot <= 0.0 {
        return charge;
    }
    let dis_cap = match s.fairness {
        FairnessPolicy::HardPerSlot { zbar } => ev.max_discharge_kwh_per_slot.min(zbar),
        _ => ev.max_discharge_kwh_per_slot,
    };
    let k = units(dis_cap + FEAS);
    let mut parts = vec![units(ev.v2g_cap_kwh_per_slot)];
    if s.mode == SolveMode::Joint {
        parts.extend(std::iter::repeat(units(ev.v2v_pair_cap_kwh_per_slot)).take(np.saturating_sub(1)));
    }
    // ways[u]: tuples of per-part levels summing to u lattice units
    let mut ways = vec![0.0f64; k + 1];
    ways[0] = 1.0;
    for cap in parts {
        let mut next = vec![0.0f64; k + 1];
        for (u, &w) in ways.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for l in 0..=cap.min(k - u) {
                next[u + l] += w;
            }
        }
        ways = next;
    }
    charge + ways[1..].iter().sum::<f64>()
}

fn slot_actions(s: &Scenario, t: usize, present: &[usize], step: f64) -> Result<Vec<Action>, OracleError> {
    let total: f64 = present
        .iter()
        .map(|&i| count_choices(s, i, present.len(), step))
        .product();
    if total > MAX_CHOICES {
        return Err(OracleError::TooLarge { choices: total });
    }
    let per_ev: Vec<Vec<Choice>> = present.iter().map(|&i| ev_choices(s, i, present, step)).collect();
    let np = present.len();
    let buy = s.tariff.buy_price[t];
    let sell = s.tariff.sell_price[t];
    let renew = s.supply.renewable_kwh[t];
    let grid_cap = s.supply.grid_cap_kwh_per_slot;

    let mut best: HashMap<Vec<i64>, Action> = HashMap::new();
    let mut idx = vec![0usize; np];
    loop {
        let picks: Vec<&Choice> = (0..np).map(|k| &per_ev[k][idx[k]]).collect();
        if let Some(a) = evaluate(s, present, &picks, buy, sell, renew, grid_cap) {
            let k: Vec<i64> = a.delta.iter().chain(&a.track).map(|&v| key(v)).collect();
            match best.get(&k) {
                Some(b) if b.cost <= a.cost => {}
                _ => {
                    best.insert(k, a);
                }
            }
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == np {
                let mut out: Vec<(Vec<i64>, Action)> = best.into_iter().collect();
                out.sort_by(|a, b| a.0.cmp(&b.0));
                return Ok(out.into_iter().map(|(_, a)| a).collect());
            }
            idx[k] += 1;
            if idx[k] < per_ev[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn evaluate(
    s: &Scenario,
    present: &[usize],
    picks: &[&Choice],
    buy: f64,
    sell: f64,
    renew: f64,
    grid_cap: f64,
) -> Option<Action> {
    let np = present.len();
    let mut need = 0.0;
    let mut cost = 0.0;
    let mut delta = Vec::with_capacity(np);
    let mut track = Vec::with_capacity(np);
    for k in 0..np {
        let received: f64 = picks.iter().map(|c| c.sends[k]).sum();
        let c = picks[k];
        // a receiving EV must be charging, and receipts count toward its charge
        if received > c.ch + FEAS {
            return None;
        }
        need += c.ch - received;
        let ev = &s.fleet[present[k]];
        let dis = c.discharge();
        cost += ev.degradation_coeff * dis * dis - sell * c.v2g;
        delta.push(ev.eff_charge * c.ch - dis / ev.eff_discharge);
        track.push(match s.fairness {
            FairnessPolicy::SoftCumulative { .. } => dis,
            FairnessPolicy::Budget { theta, .. } => (dis - theta).max(0.0),
            _ => 0.0,
        });
    }
    let grid = (need - renew).max(0.0);
    if grid > grid_cap + FEAS {
        return None;
    }
    cost += buy * grid;
    Some(Action { delta, track, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::tests::{ev, scenario};

    #[test]
    fn single_slot_charge() {
        let mut e = ev("a", 0, 0);
        e.target_kwh = e.initial_kwh + 2.0;
        let mut s = scenario(1, vec![e]);
        s.tariff.buy_price = vec![0.3];
        assert!((brute_force_oracle(&s, 1.0).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn idle_when_degradation_dominates() {
        let mut e = ev("a", 0, 3);
        e.target_kwh = e.initial_kwh;
        e.degradation_coeff = 10.0;
        let mut s = scenario(4, vec![e]);
        s.mode = SolveMode::V2gOnly;
        assert_eq!(brute_force_oracle(&s, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn unreachable_target() {
        let mut e = ev("a", 0, 1);
        e.target_kwh = e.initial_kwh + 10.0;
        let s = scenario(2, vec![e]);
        assert_eq!(brute_force_oracle(&s, 0.5), Err(OracleError::NoFeasiblePoint));
    }

    #[test]
    fn too_large_is_refused() {
        let fleet = (0..6).map(|k| ev(&format!("e{k}"), 0, 0)).collect();
        let s = scenario(1, fleet);
        assert!(matches!(
            brute_force_oracle(&s, 0.01),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn v2v_beats_grid_when_cheaper() {
        // b needs 1 kWh in slot 0; a has spare energy and can send it for only degradation cost
        let mut a = ev("a", 0, 0);
        a.target_kwh = a.initial_kwh - 1.0;
        a.degradation_coeff = 0.01;
        let mut b = ev("b", 0, 0);
        b.target_kwh = b.initial_kwh + 1.0;
        let mut s = scenario(1, vec![a, b]);
        s.tariff.sell_price = vec![0.0];
        let v = brute_force_oracle(&s, 0.5).unwrap();
        assert!((v - 0.01).abs() < 1e-12, "{v}");
    }
}
