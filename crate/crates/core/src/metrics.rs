//! Fairness index, cost decomposition, independent feasibility audit and run
//! comparison.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{EvSpec, FairnessPolicy, Scenario, Tariff};
use crate::solver::Schedule;

/// An EV counts as a V2V participant when its total sends exceed this.
pub const PARTICIPATION_KWH: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{what}: expected {expected}, got {actual}")]
    DimensionError {
        what: String,
        expected: usize,
        actual: usize,
    },
    #[error("baseline total cost is zero; a relative reduction is undefined")]
    ZeroBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub jfi: f64,
    pub participant_count: usize,
    /// Mean V2V sends per slot of the horizon, one entry per EV (0 for non-participants).
    pub mean_v2v_kwh: Vec<f64>,
    pub policy: FairnessPolicy,
}

/// Jain's index `(Σx)² / (R Σx²)` over the participating values; 1 when at most one participates.
pub fn jain_index_of(values: &[f64]) -> f64 {
    let xs: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    if xs.len() <= 1 {
        return 1.0;
    }
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|v| v * v).sum();
    // equal shares can round to 1 + ε
    ((sum * sum) / (xs.len() as f64 * sq)).min(1.0)
}

/// Jain's index of the per-EV mean V2V sends, averaged over the full horizon.
pub fn jain_index(sched: &Schedule) -> FairnessReport {
    let slots = sched.slot_count.max(1) as f64;
    let mut mean = vec![0.0; sched.evs.len()];
    for (i, m) in mean.iter_mut().enumerate() {
        let total = sched.sent_total(i);
        if total > PARTICIPATION_KWH {
            *m = total / slots;
        }
    }
    FairnessReport {
        jfi: jain_index_of(&mean),
        participant_count: mean.iter().filter(|&&v| v > 0.0).count(),
        mean_v2v_kwh: mean,
        policy: sched.fairness.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvCost {
    pub id: String,
    pub grid_cost: f64,
    pub degradation_cost: f64,
    pub v2g_revenue: f64,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub per_ev: Vec<EvCost>,
    pub grid_cost: f64,
    pub degradation_cost: f64,
    pub v2g_revenue: f64,
    pub total_cost: f64,
}

impl CostBreakdown {
    /// One row per EV followed by a `total` row.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["ev_id", "grid_cost", "degradation_cost", "v2g_revenue", "total_cost"])?;
        let rows = self.per_ev.iter().map(|e| {
            (
                e.id.as_str(),
                e.grid_cost,
                e.degradation_cost,
                e.v2g_revenue,
                e.total_cost,
            )
        });
        let totals = std::iter::once((
            "total",
            self.grid_cost,
            self.degradation_cost,
            self.v2g_revenue,
            self.total_cost,
        ));
        for (id, g, d, r, t) in rows.chain(totals) {
            out.write_record([
                id.to_string(),
                format!("{g:?}"),
                format!("{d:?}"),
                format!("{r:?}"),
                format!("{t:?}"),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Grid purchases, quadratic wear and V2G revenue per EV, summed slot by slot.
pub fn cost_breakdown(sched: &Schedule, tariff: &Tariff, fleet: &[EvSpec]) -> Result<CostBreakdown, MetricsError> {
    if fleet.len() != sched.evs.len() {
        return Err(MetricsError::DimensionError {
            what: "fleet size".into(),
            expected: sched.evs.len(),
            actual: fleet.len(),
        });
    }
    for (what, len) in [
        ("buy price series", tariff.buy_price.len()),
        ("sell price series", tariff.sell_price.len()),
    ] {
        if len != sched.slot_count {
            return Err(MetricsError::DimensionError {
                what: what.into(),
                expected: sched.slot_count,
                actual: len,
            });
        }
    }
    let mut per_ev = Vec::with_capacity(fleet.len());
    for (ev, tr) in fleet.iter().zip(&sched.evs) {
        if tr.departure >= sched.slot_count || tr.grid_kwh.len() != tr.departure + 1 - tr.arrival {
            return Err(MetricsError::DimensionError {
                what: format!("trajectory of EV {}", tr.id),
                expected: ev.window_len(),
                actual: tr.grid_kwh.len(),
            });
        }
        let mut grid = 0.0;
        let mut wear = 0.0;
        let mut revenue = 0.0;
        for k in 0..tr.grid_kwh.len() {
            let t = tr.arrival + k;
            grid += tariff.buy_price[t] * tr.grid_kwh[k];
            wear += tr.discharge_kwh[k] * tr.discharge_kwh[k];
            revenue += tariff.sell_price[t] * tr.v2g_kwh[k];
        }
        let wear = ev.degradation_coeff * wear;
        per_ev.push(EvCost {
            id: tr.id.clone(),
            grid_cost: grid,
            degradation_cost: wear,
            v2g_revenue: revenue,
            total_cost: grid + wear - revenue,
        });
    }
    let sum = |f: fn(&EvCost) -> f64| per_ev.iter().map(f).sum::<f64>();
    let (g, d, r) = (
        sum(|e| e.grid_cost),
        sum(|e| e.degradation_cost),
        sum(|e| e.v2g_revenue),
    );
    Ok(CostBreakdown {
        grid_cost: g,
        degradation_cost: d,
        v2g_revenue: r,
        total_cost: g + d - r,
        per_ev,
    })
}

/// Percentage by which `b` is cheaper than `a`.
pub fn compare_costs(a: &CostBreakdown, b: &CostBreakdown) -> Result<f64, MetricsError> {
    compare_totals(a.total_cost, b.total_cost)
}

/// `100 (a − b) / a`.
pub fn compare_totals(a: f64, b: f64) -> Result<f64, MetricsError> {
    if a == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(100.0 * (a - b) / a)
}

/// Largest violation found in one constraint family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyResidual {
    pub family: String,
    pub max_residual: f64,
    /// Where the largest violation sits, e.g. `EV R003 slot 17`.
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub tol: f64,
    pub pass: bool,
    pub families: Vec<FamilyResidual>,
}

impl AuditReport {
    pub fn residual(&self, family: &str) -> Option<f64> {
        self.families
            .iter()
            .find(|f| f.family == family)
            .map(|f| f.max_residual)
    }

    pub fn worst(&self) -> Option<&FamilyResidual> {
        self.families
            .iter()
            .max_by(|a, b| a.max_residual.total_cmp(&b.max_residual))
    }
}

struct Audit {
    families: Vec<FamilyResidual>,
}

impl Audit {
    fn family(&mut self, name: &str) -> usize {
        match self.families.iter().position(|f| f.family == name) {
            Some(k) => k,
            None => {
                self.families.push(FamilyResidual {
                    family: name.to_string(),
                    max_residual: 0.0,
                    location: None,
                });
                self.families.len() - 1
            }
        }
    }

    fn record(&mut self, name: &str, residual: f64, at: impl FnOnce() -> String) {
        let k = self.family(name);
        let f = &mut self.families[k];
        // NaN counts as a violation
        if residual > f.max_residual || (residual.is_nan() && !f.max_residual.is_nan()) {
            f.max_residual = residual;
            f.location = Some(at());
        }
    }

    /// Excess of `v` outside `[lo, hi]`.
    fn bound(&mut self, name: &str, v: f64, lo: f64, hi: f64, at: impl FnOnce() -> String) {
        let r = if v.is_nan() {
            f64::NAN
        } else {
            (lo - v).max(v - hi).max(0.0)
        };
        self.record(name, r, at);
    }
}

/// Re-checks every constraint of `s` directly on the schedule's trajectories.
///
/// Families: battery dynamics, variable bounds, departure target, grid and
/// renewable supply caps, V2G cap, V2V caps and presence, charge and
/// discharge balances, the charge-discharge product, solve-mode restrictions
/// and the active fairness family. The budget family evaluates
/// `Σ_t max(dis − θ, 0)` itself rather than trusting excess columns.
pub fn feasibility_audit(sched: &Schedule, s: &Scenario, tol: f64) -> AuditReport {
    let mut a = Audit { families: Vec::new() };
    for name in [
        "structure",
        "dynamics",
        "bounds",
        "target",
        "grid_cap",
        "renewable_cap",
        "v2g_cap",
        "v2v_cap",
        "charge_balance",
        "discharge_balance",
        "exclusivity",
        "mode",
    ] {
        a.family(name);
    }
    let h = s.grid.slot_count;
    if sched.evs.len() != s.fleet.len() || sched.slot_count != h {
        a.record("structure", f64::INFINITY, || {
            format!(
                "schedule has {} EVs over {} slots, scenario {} over {}",
                sched.evs.len(),
                sched.slot_count,
                s.fleet.len(),
                h
            )
        });
        return finish(a, tol);
    }
    let mut grid_use = vec![0.0; h];
    let mut ren_use = vec![0.0; h];
    let mut sent = vec![vec![0.0; h]; s.fleet.len()];
    let mut recv = vec![vec![0.0; h]; s.fleet.len()];
    for f in &sched.flows {
        let ok = f.from < s.fleet.len() && f.to < s.fleet.len() && f.slot < h && f.from != f.to;
        if !ok {
            a.record("structure", f64::INFINITY, || {
                format!("flow {}->{} at slot {} is out of range", f.from, f.to, f.slot)
            });
            continue;
        }
        let (src, dst) = (&s.fleet[f.from], &s.fleet[f.to]);
        let at = || format!("flow {}->{} slot {}", src.id, dst.id, f.slot);
        if !(src.is_present(f.slot) && dst.is_present(f.slot)) {
            a.record("v2v_cap", f.kwh.abs(), at);
        } else {
            a.bound("v2v_cap", f.kwh, 0.0, src.v2v_pair_cap_kwh_per_slot, at);
        }
        if !s.mode.allows_v2v() {
            a.record("mode", f.kwh.abs(), || {
                format!("flow {}->{} slot {} in mode {}", src.id, dst.id, f.slot, s.mode)
            });
        }
        sent[f.from][f.slot] += f.kwh;
        recv[f.to][f.slot] += f.kwh;
    }

    for (i, (ev, tr)) in s.fleet.iter().zip(&sched.evs).enumerate() {
        let len = ev.window_len();
        let lens = [
            tr.charge_kwh.len(),
            tr.discharge_kwh.len(),
            tr.grid_kwh.len(),
            tr.renewable_kwh.len(),
            tr.v2g_kwh.len(),
            tr.soc_kwh.len(),
        ];
        if tr.id != ev.id || tr.arrival != ev.arrival || tr.departure != ev.departure || lens.iter().any(|&l| l != len)
        {
            a.record("structure", f64::INFINITY, || {
                format!("trajectory of EV {} does not match its parking window", ev.id)
            });
            continue;
        }
        let mut prev = ev.initial_kwh;
        for k in 0..len {
            let t = ev.arrival + k;
            let at = || format!("EV {} slot {t}", ev.id);
            let (ch, dis) = (tr.charge_kwh[k], tr.discharge_kwh[k]);
            let (g, r, v2g, soc) = (tr.grid_kwh[k], tr.renewable_kwh[k], tr.v2g_kwh[k], tr.soc_kwh[k]);
            let expect = prev + ev.eff_charge * ch - dis / ev.eff_discharge;
            a.record("dynamics", (soc - expect).abs(), at);
            prev = soc;
            a.bound("bounds", soc, ev.min_kwh, ev.capacity_kwh, at);
            a.bound("bounds", ch, 0.0, ev.max_charge_kwh_per_slot, at);
            a.bound("bounds", dis, 0.0, ev.max_discharge_kwh_per_slot, at);
            a.bound("bounds", g, 0.0, f64::INFINITY, at);
            a.bound("bounds", r, 0.0, f64::INFINITY, at);
            a.bound("v2g_cap", v2g, 0.0, ev.v2g_cap_kwh_per_slot, at);
            a.record("charge_balance", (ch - g - r - recv[i][t]).abs(), at);
            a.record("discharge_balance", (dis - v2g - sent[i][t]).abs(), at);
            a.record("exclusivity", (ch * dis).max(0.0), at);
            if !s.mode.allows_discharge() {
                a.record("mode", dis.abs().max(v2g.abs()), at);
            }
            grid_use[t] += g;
            ren_use[t] += r;
        }
        a.record("target", (prev - ev.target_kwh).abs(), || {
            format!("EV {} departure", ev.id)
        });
    }
    for t in 0..h {
        a.record(
            "grid_cap",
            (grid_use[t] - s.supply.grid_cap_kwh_per_slot).max(0.0),
            || format!("slot {t}"),
        );
        a.record(
            "renewable_cap",
            (ren_use[t] - s.supply.renewable_kwh[t]).max(0.0),
            || format!("slot {t}"),
        );
    }

    match &s.fairness {
        FairnessPolicy::Unconstrained => {}
        FairnessPolicy::HardPerSlot { zbar } => {
            a.family("fairness_hard");
            for tr in &sched.evs {
                for (k, &d) in tr.discharge_kwh.iter().enumerate() {
                    a.record("fairness_hard", (d - zbar).max(0.0), || {
                        format!("EV {} slot {}", tr.id, tr.arrival + k)
                    });
                }
            }
        }
        FairnessPolicy::SoftCumulative { zbar_c } => {
            a.family("fairness_soft");
            for tr in &sched.evs {
                let total: f64 = tr.discharge_kwh.iter().sum();
                a.record("fairness_soft", (total - zbar_c).max(0.0), || format!("EV {}", tr.id));
            }
        }
        FairnessPolicy::Budget { theta, .. } => {
            a.family("fairness_budget");
            for tr in &sched.evs {
                let hinge: f64 = tr.discharge_kwh.iter().map(|&d| (d - theta).max(0.0)).sum();
                let budget = s.fairness.budget_for(&tr.id).unwrap_or(0.0);
                a.record("fairness_budget", (hinge - budget).max(0.0), || format!("EV {}", tr.id));
            }
        }
    }
    finish(a, tol)
}

fn finish(a: Audit, tol: f64) -> AuditReport {
    let pass = a.families.iter().all(|f| f.max_residual <= tol);
    AuditReport {
        tol,
        pass,
        families: a.families,
    }
}
