use super::{ColumnInfo, FlowLayout, FlowVar, ModelError, QpProblem, RowTag, SlotVars, VarKind, VarMap};
use crate::domain::{reachability_check, validate_scenario, FairnessPolicy, Scenario, SolveMode};

/// Raised when a fairness policy is attached to a model that has no discharge.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessWarning {
    pub policy: FairnessPolicy,
    pub mode: SolveMode,
}

impl std::fmt::Display for FairnessWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "fairness policy {} ignored: mode {} has no discharge",
            self.policy, self.mode
        )
    }
}

/// Builds the MIQP for `s` without any fairness rows.
pub fn assemble(s: &Scenario) -> Result<(QpProblem, VarMap), ModelError> {
    assemble_with(s, FlowLayout::Pairwise)
}

/// True when no pairwise V2V cap can bind, so the pooled layout has the
/// same optimal value as the pairwise one.
///
/// A single flow never exceeds its sender's discharge, so a pair cap at or
/// above the sender's discharge rate is slack.
pub fn pooling_is_exact(s: &Scenario) -> bool {
    s.fleet
        .iter()
        .all(|ev| ev.v2v_pair_cap_kwh_per_slot >= ev.max_discharge_kwh_per_slot)
}

/// [`assemble`] with a choice of V2V representation.
pub fn assemble_with(s: &Scenario, layout: FlowLayout) -> Result<(QpProblem, VarMap), ModelError> {
    let h = s.grid.slot_count;
    for (series, actual) in [
        ("tariff.buy_price", s.tariff.buy_price.len()),
        ("tariff.sell_price", s.tariff.sell_price.len()),
        ("supply.renewable_kwh", s.supply.renewable_kwh.len()),
    ] {
        if actual != h {
            return Err(ModelError::DimensionError {
                series,
                expected: h,
                actual,
            });
        }
    }
    let report = validate_scenario(s);
    if !report.is_valid() {
        return Err(ModelError::Invalid(report));
    }
    let unreachable: Vec<String> = s
        .fleet
        .iter()
        .filter(|ev| reachability_check(ev, &s.grid) < -1e-9)
        .map(|ev| ev.id.clone())
        .collect();
    if !unreachable.is_empty() {
        return Err(ModelError::InfeasibleTarget { ev_ids: unreachable });
    }

    let mode = s.mode;
    let mut p = QpProblem::new();
    let mut m = VarMap::new(
        mode,
        layout,
        s.fleet.iter().map(|ev| ev.arrival).collect(),
        s.fleet.iter().map(|ev| ev.id.clone()).collect(),
    );
    let mut quad = Vec::new();
    let pooled = layout == FlowLayout::Pooled && mode.allows_v2v();
    let present_count: Vec<usize> = (0..h)
        .map(|t| s.fleet.iter().filter(|ev| ev.is_present(t)).count())
        .collect();

    for (i, ev) in s.fleet.iter().enumerate() {
        for t in ev.slots() {
            let mut col = |p: &mut QpProblem, kind, lo, hi, cost| {
                let c = p.add_var(lo, hi, cost);
                m.register(
                    c,
                    ColumnInfo {
                        kind,
                        ev: i,
                        slot: t,
                        partner: None,
                    },
                );
                c
            };
            let charge = col(&mut p, VarKind::Charge, 0.0, ev.max_charge_kwh_per_slot, 0.0);
            let discharge = mode
                .allows_discharge()
                .then(|| col(&mut p, VarKind::Discharge, 0.0, ev.max_discharge_kwh_per_slot, 0.0));
            let grid = col(&mut p, VarKind::Grid, 0.0, f64::INFINITY, s.tariff.buy_price[t]);
            let renewable = col(&mut p, VarKind::Renewable, 0.0, f64::INFINITY, 0.0);
            let v2g = mode.allows_discharge().then(|| {
                col(
                    &mut p,
                    VarKind::V2g,
                    0.0,
                    ev.v2g_cap_kwh_per_slot,
                    -s.tariff.sell_price[t],
                )
            });
            let soc = col(&mut p, VarKind::Soc, ev.min_kwh, ev.capacity_kwh, 0.0);
            // an EV alone on site has nobody to trade with
            let peer = present_count[t] > 1;
            let send = pooled.then(|| {
                let cap = if peer { ev.max_discharge_kwh_per_slot } else { 0.0 };
                col(&mut p, VarKind::Send, 0.0, cap, 0.0)
            });
            let receive = pooled.then(|| {
                let cap = if peer { ev.max_charge_kwh_per_slot } else { 0.0 };
                col(&mut p, VarKind::Receive, 0.0, cap, 0.0)
            });
            // exclusivity is vacuous when either direction is capped at zero
            let needs_mode =
                mode.allows_discharge() && ev.max_charge_kwh_per_slot > 0.0 && ev.max_discharge_kwh_per_slot > 0.0;
            let mode_col = needs_mode.then(|| {
                let c = p.add_binary();
                m.register(
                    c,
                    ColumnInfo {
                        kind: VarKind::Mode,
                        ev: i,
                        slot: t,
                        partner: None,
                    },
                );
                c
            });
            if let Some(d) = discharge {
                if ev.degradation_coeff > 0.0 {
                    quad.push((d, d, 2.0 * ev.degradation_coeff));
                }
            }
            m.push_slot(
                i,
                SlotVars {
                    charge,
                    discharge,
                    grid,
                    renewable,
                    v2g,
                    soc,
                    mode: mode_col,
                    excess: None,
                    send,
                    receive,
                    inflows: receive.into_iter().collect(),
                    outflows: send.into_iter().collect(),
                },
            );
        }
    }

    if mode.allows_v2v() && !pooled {
        for t in 0..h {
            let present: Vec<usize> = (0..s.fleet.len()).filter(|&i| s.fleet[i].is_present(t)).collect();
            for &from in &present {
                for &to in &present {
                    if from == to {
                        continue;
                    }
                    let c = p.add_var(0.0, s.fleet[from].v2v_pair_cap_kwh_per_slot, 0.0);
                    m.register(
                        c,
                        ColumnInfo {
                            kind: VarKind::Flow,
                            ev: from,
                            slot: t,
                            partner: Some(to),
                        },
                    );
                    m.push_flow(FlowVar {
                        from,
                        to,
                        slot: t,
                        col: c,
                    });
                }
            }
        }
    }
    p.set_quadratic(&quad);

    for (i, ev) in s.fleet.iter().enumerate() {
        let mut prev_soc: Option<usize> = None;
        let slots: Vec<(usize, SlotVars)> = m.ev_slots(i).map(|(t, v)| (t, v.clone())).collect();
        for (_t, v) in &slots {
            // soc_t − soc_{t−1} − λc·ch + dis/λd = 0, with soc_{a−1} = initial
            let mut row = vec![(v.soc, 1.0), (v.charge, -ev.eff_charge)];
            if let Some(d) = v.discharge {
                row.push((d, 1.0 / ev.eff_discharge));
            }
            let rhs = match prev_soc {
                Some(ps) => {
                    row.push((ps, -1.0));
                    0.0
                }
                None => ev.initial_kwh,
            };
            p.add_eq(&row, rhs, RowTag::BatteryDynamics);
            prev_soc = Some(v.soc);

            if let Some(x) = v.mode {
                p.add_le(
                    &[(v.charge, 1.0), (x, ev.max_charge_kwh_per_slot)],
                    ev.max_charge_kwh_per_slot,
                    RowTag::ChargeExclusivity,
                );
                let d = v.discharge.expect("mode binary implies a discharge column");
                p.add_le(
                    &[(d, 1.0), (x, -ev.max_discharge_kwh_per_slot)],
                    0.0,
                    RowTag::DischargeExclusivity,
                );
            }

            // ch = grid + renew + Σ inflows
            let mut row = vec![(v.charge, 1.0), (v.grid, -1.0), (v.renewable, -1.0)];
            row.extend(v.inflows.iter().map(|&f| (f, -1.0)));
            p.add_eq(&row, 0.0, RowTag::ChargeBalance);

            // dis = v2g + Σ outflows
            if let Some(d) = v.discharge {
                let mut row = vec![(d, 1.0)];
                if let Some(g) = v.v2g {
                    row.push((g, -1.0));
                }
                row.extend(v.outflows.iter().map(|&f| (f, -1.0)));
                p.add_eq(&row, 0.0, RowTag::DischargeBalance);
            }
        }
        let last = slots.last().expect("window has at least one slot");
        p.add_eq(&[(last.1.soc, 1.0)], ev.target_kwh, RowTag::DepartureTarget);
    }

    for t in 0..h {
        let present: Vec<&SlotVars> = (0..s.fleet.len()).filter_map(|i| m.slot_vars(i, t)).collect();
        if present.is_empty() {
            continue;
        }
        let grid_row: Vec<(usize, f64)> = present.iter().map(|v| (v.grid, 1.0)).collect();
        p.add_le(&grid_row, s.supply.grid_cap_kwh_per_slot, RowTag::GridSupplyCap);
        let ren_row: Vec<(usize, f64)> = present.iter().map(|v| (v.renewable, 1.0)).collect();
        p.add_le(&ren_row, s.supply.renewable_kwh[t], RowTag::RenewableSupplyCap);
        if pooled && present.len() > 1 {
            let mut row: Vec<(usize, f64)> = present.iter().filter_map(|v| v.send).map(|c| (c, 1.0)).collect();
            row.extend(present.iter().filter_map(|v| v.receive).map(|c| (c, -1.0)));
            p.add_eq(&row, 0.0, RowTag::V2vConservation);
        }
    }

    Ok((p, m))
}

/// Adds the rows or bound changes of `policy`.
///
/// On a charging-only model any non-trivial policy is ignored and a warning returned.
pub fn add_fairness(mut p: QpProblem, m: &mut VarMap, policy: &FairnessPolicy) -> (QpProblem, Option<FairnessWarning>) {
    if policy.is_unconstrained() {
        return (p, None);
    }
    if !m.mode.allows_discharge() {
        let w = FairnessWarning {
            policy: policy.clone(),
            mode: m.mode,
        };
        log::warn!("{w}");
        return (p, Some(w));
    }
    let n_evs = m.num_evs();
    match policy {
        FairnessPolicy::Unconstrained => {}
        FairnessPolicy::HardPerSlot { zbar } => {
            for ev in 0..n_evs {
                let cols: Vec<usize> = m.ev_slots(ev).filter_map(|(_, v)| v.discharge).collect();
                for d in cols {
                    p.upper[d] = p.upper[d].min(*zbar);
                }
            }
        }
        FairnessPolicy::SoftCumulative { zbar_c } => {
            for ev in 0..n_evs {
                let row: Vec<(usize, f64)> = m
                    .ev_slots(ev)
                    .filter_map(|(_, v)| v.discharge)
                    .map(|d| (d, 1.0))
                    .collect();
                if !row.is_empty() {
                    p.add_le(&row, *zbar_c, RowTag::FairCumulativeLimit);
                }
            }
        }
        FairnessPolicy::Budget { theta, .. } => {
            for ev in 0..n_evs {
                let budget = policy.budget_for(m.ev_id(ev)).unwrap_or(0.0);
                let slots: Vec<(usize, usize)> = m
                    .ev_slots(ev)
                    .filter_map(|(t, v)| v.discharge.map(|d| (t, d)))
                    .collect();
                let mut excess_cols = Vec::with_capacity(slots.len());
                for (t, d) in slots {
                    // z ≥ 0 is carried by the column bound
                    let z = p.add_var(0.0, f64::INFINITY, 0.0);
                    m.register(
                        z,
                        ColumnInfo {
                            kind: VarKind::Excess,
                            ev,
                            slot: t,
                            partner: None,
                        },
                    );
                    if let Some(v) = m.slot_mut(ev, t) {
                        v.excess = Some(z);
                    }
                    p.add_le(&[(d, 1.0), (z, -1.0)], *theta, RowTag::FairExcessHinge);
                    excess_cols.push((z, 1.0));
                }
                if !excess_cols.is_empty() {
                    p.add_le(&excess_cols, budget, RowTag::FairExcessBudget);
                }
            }
        }
    }
    (p, None)
}

/// `assemble` followed by the scenario's own fairness policy.
pub fn build(s: &Scenario) -> Result<(QpProblem, VarMap), ModelError> {
    build_with(s, FlowLayout::Pairwise)
}

/// [`build`] with a choice of V2V representation.
pub fn build_with(s: &Scenario, layout: FlowLayout) -> Result<(QpProblem, VarMap), ModelError> {
    let (p, mut m) = assemble_with(s, layout)?;
    let (p, _) = add_fairness(p, &mut m, &s.fairness);
    Ok((p, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::tests::scenario;
    use crate::domain::EvSpec;

    // reachable from any window of one slot or more
    fn ev(id: &str, a: usize, d: usize) -> EvSpec {
        let mut e = crate::domain::tests::ev(id, a, d);
        e.target_kwh = e.initial_kwh + 1.0;
        e
    }

    #[test]
    fn charging_only_single_ev_has_eight_columns() {
        let mut s = scenario(2, vec![ev("a", 0, 1)]);
        s.mode = SolveMode::ChargingOnly;
        let (p, m) = assemble(&s).unwrap();
        assert_eq!(p.num_vars(), 8);
        assert!(p.binaries.is_empty());
        assert_eq!(m.num_columns(), 8);
        for kind in [VarKind::Discharge, VarKind::V2g, VarKind::Mode] {
            assert!(matches!(
                m.lookup(kind, 0, 0, None),
                Err(ModelError::NotAllocated { .. })
            ));
        }
    }

    #[test]
    fn two_copresent_evs_get_two_flows_and_two_binaries() {
        let s = scenario(1, vec![ev("a", 0, 0), ev("b", 0, 0)]);
        let (p, m) = assemble(&s).unwrap();
        assert_eq!(m.flows().len(), 2);
        assert_eq!(p.binaries.len(), 2);
        let f01 = m.lookup(VarKind::Flow, 0, 0, Some(1)).unwrap();
        let f10 = m.lookup(VarKind::Flow, 1, 0, Some(0)).unwrap();
        assert_ne!(f01, f10);
        assert!(m.lookup(VarKind::Flow, 0, 0, Some(0)).is_err());
    }

    #[test]
    fn flows_only_between_parked_evs() {
        let s = scenario(4, vec![ev("a", 0, 1), ev("b", 1, 3), ev("c", 3, 3)]);
        let (_, m) = assemble(&s).unwrap();
        // slot 1: a<->b, slot 3: b<->c
        assert_eq!(m.flows().len(), 4);
        assert!(m.lookup(VarKind::Flow, 0, 3, Some(1)).is_err());
        assert!(m.lookup(VarKind::Flow, 1, 3, Some(2)).is_ok());
    }

    #[test]
    fn columns_are_contiguous() {
        let s = scenario(5, vec![ev("a", 0, 4), ev("b", 1, 3)]);
        let (p, mut m) = assemble(&s).unwrap();
        let (p, _) = add_fairness(
            p,
            &mut m,
            &FairnessPolicy::Budget {
                theta: 0.5,
                budget_per_ev: 1.0,
                overrides: Default::default(),
            },
        );
        assert_eq!(p.num_vars(), m.num_columns());
        let mut seen = vec![false; p.num_vars()];
        for i in 0..2 {
            for (t, v) in m.ev_slots(i) {
                for c in [
                    Some(v.charge),
                    v.discharge,
                    Some(v.grid),
                    Some(v.renewable),
                    v.v2g,
                    Some(v.soc),
                    v.mode,
                    v.excess,
                ]
                .into_iter()
                .flatten()
                {
                    assert!(!seen[c], "column {c} reused");
                    seen[c] = true;
                    assert_eq!(m.column(c).slot, t);
                }
            }
        }
        for f in m.flows() {
            assert!(!seen[f.col]);
            seen[f.col] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn unreachable_target_rejected_at_assembly() {
        let mut e = ev("slow", 0, 9);
        e.initial_kwh = 10.0;
        e.target_kwh = 45.0;
        e.eff_charge = 0.95;
        let s = scenario(10, vec![e.clone()]);
        // same numbers as the reachability arithmetic: surplus = −1.75
        assert!((reachability_check(&e, &s.grid) + 1.75).abs() < 1e-12);
        match assemble(&s) {
            Err(ModelError::InfeasibleTarget { ev_ids }) => assert_eq!(ev_ids, vec!["slow".to_string()]),
            other => panic!("expected InfeasibleTarget, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_reported() {
        let mut s = scenario(3, vec![ev("a", 0, 2)]);
        s.tariff.sell_price.push(0.0);
        assert!(matches!(
            assemble(&s),
            Err(ModelError::DimensionError {
                series: "tariff.sell_price",
                expected: 3,
                actual: 4
            })
        ));
    }

    #[test]
    fn degradation_on_discharge_diagonal() {
        let s = scenario(2, vec![ev("a", 0, 1)]);
        let (p, m) = assemble(&s).unwrap();
        for t in 0..2 {
            let d = m.lookup(VarKind::Discharge, 0, t, None).unwrap();
            let entries: Vec<_> = p.quad.col(d).collect();
            assert_eq!(entries, vec![(d, 0.02)]);
        }
        assert_eq!(p.quad.nnz(), 2);
    }

    #[test]
    fn zero_rate_skips_binary() {
        let mut e = ev("a", 0, 2);
        e.max_discharge_kwh_per_slot = 0.0;
        let (p, m) = assemble(&scenario(3, vec![e])).unwrap();
        assert!(p.binaries.is_empty());
        assert!(m.lookup(VarKind::Mode, 0, 1, None).is_err());
        assert!(m.lookup(VarKind::Discharge, 0, 1, None).is_ok());
    }

    #[test]
    fn hard_limit_tightens_discharge_bounds() {
        let s = scenario(3, vec![ev("a", 0, 2)]);
        let (p, mut m) = assemble(&s).unwrap();
        let rows = p.num_rows();
        let (p, w) = add_fairness(p, &mut m, &FairnessPolicy::HardPerSlot { zbar: 0.5 });
        assert!(w.is_none());
        assert_eq!(p.num_rows(), rows);
        for t in 0..3 {
            assert_eq!(p.upper[m.lookup(VarKind::Discharge, 0, t, None).unwrap()], 0.5);
        }
    }

    #[test]
    fn soft_limit_adds_one_row_per_ev() {
        let s = scenario(10, vec![ev("a", 0, 9)]);
        let (p, mut m) = assemble(&s).unwrap();
        let before = p.ineq.nrows();
        let (p, _) = add_fairness(p, &mut m, &FairnessPolicy::SoftCumulative { zbar_c: 4.0 });
        assert_eq!(p.ineq.nrows(), before + 1);
        let r = p.ineq.nrows() - 1;
        assert_eq!(p.ineq_tags[r], RowTag::FairCumulativeLimit);
        assert_eq!(p.ineq_rhs[r], 4.0);
        let coefs: Vec<_> = p.ineq.row(r).collect();
        assert_eq!(coefs.len(), 10);
        assert!(coefs.iter().all(|&(_, v)| v == 1.0));
    }

    #[test]
    fn budget_adds_slack_columns_and_rows() {
        let s = scenario(3, vec![ev("a", 0, 2)]);
        let (p, mut m) = assemble(&s).unwrap();
        let (n0, r0) = (p.num_vars(), p.ineq.nrows());
        let (p, _) = add_fairness(
            p,
            &mut m,
            &FairnessPolicy::Budget {
                theta: 0.5,
                budget_per_ev: 2.0,
                overrides: Default::default(),
            },
        );
        assert_eq!(p.num_vars(), n0 + 3);
        let tags = &p.ineq_tags[r0..];
        assert_eq!(tags.iter().filter(|&&t| t == RowTag::FairExcessHinge).count(), 3);
        assert_eq!(tags.iter().filter(|&&t| t == RowTag::FairExcessBudget).count(), 1);

        // discharges (1.5, 0.5, 0) with slacks (1, 0, 0): hinge sum 1.0 ≤ 2
        let mut x = vec![0.0; p.num_vars()];
        for (t, d) in [1.5, 0.5, 0.0].into_iter().enumerate() {
            x[m.lookup(VarKind::Discharge, 0, t, None).unwrap()] = d;
            x[m.lookup(VarKind::Excess, 0, t, None).unwrap()] = (d - 0.5f64).max(0.0);
        }
        for r in r0..p.ineq.nrows() {
            assert!(p.ineq.row_dot(r, &x) <= p.ineq_rhs[r] + 1e-12);
        }
        for z in (0..3).map(|t| m.lookup(VarKind::Excess, 0, t, None).unwrap()) {
            assert_eq!(p.lower[z], 0.0);
        }
    }

    #[test]
    fn charging_only_ignores_policy_with_warning() {
        let mut s = scenario(3, vec![ev("a", 0, 2)]);
        s.mode = SolveMode::ChargingOnly;
        let (p, mut m) = assemble(&s).unwrap();
        let before = p.clone();
        let (p, w) = add_fairness(p, &mut m, &FairnessPolicy::HardPerSlot { zbar: 0.1 });
        assert!(w.is_some());
        assert_eq!(p, before);
    }

    #[test]
    fn every_row_is_tagged() {
        let mut s = scenario(4, vec![ev("a", 0, 3), ev("b", 1, 2)]);
        s.fairness = FairnessPolicy::Budget {
            theta: 0.2,
            budget_per_ev: 1.0,
            overrides: Default::default(),
        };
        let (p, _) = build(&s).unwrap();
        let audit = p.row_audit();
        assert_eq!(audit.len(), p.num_rows());
        assert!(audit.iter().all(|r| r.tag != RowTag::Generic));
        let dyn_rows = audit.iter().filter(|r| r.tag == RowTag::BatteryDynamics).count();
        assert_eq!(dyn_rows, 4 + 2);
    }

    #[test]
    fn v2g_only_has_no_flows() {
        let mut s = scenario(2, vec![ev("a", 0, 1), ev("b", 0, 1)]);
        s.mode = SolveMode::V2gOnly;
        let (p, m) = assemble(&s).unwrap();
        assert!(m.flows().is_empty());
        assert_eq!(p.binaries.len(), 4);
    }
}
