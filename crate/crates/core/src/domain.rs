//! Scenario value types, instance validation and the JSON scenario format.
//!
//! Every power-like quantity is stored as energy per slot (kWh). A 7 kW
//! charger on a half-hour grid therefore has `max_charge_kwh_per_slot = 3.5`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioIoError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario JSON in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub slot_count: usize,
    pub slot_hours: f64,
    /// Clock time of slot 0, informational only.
    #[serde(default = "default_start_label")]
    pub start_label: String,
}

fn default_start_label() -> String {
    "00:00".to_string()
}

impl TimeGrid {
    pub fn new(slot_count: usize, slot_hours: f64) -> Self {
        Self {
            slot_count,
            slot_hours,
            start_label: default_start_label(),
        }
    }

    pub fn horizon_hours(&self) -> f64 {
        self.slot_count as f64 * self.slot_hours
    }

    /// Converts a charger power rating into the per-slot energy limit.
    pub fn kw_to_kwh_per_slot(&self, kw: f64) -> f64 {
        kw * self.slot_hours
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvSpec {
    pub id: String,
    /// First slot the EV is plugged in (inclusive).
    pub arrival: usize,
    /// Last slot the EV is plugged in (inclusive). SOC at the end of this slot must hit the target.
    pub departure: usize,
    pub capacity_kwh: f64,
    pub min_kwh: f64,
    pub initial_kwh: f64,
    pub target_kwh: f64,
    pub max_charge_kwh_per_slot: f64,
    pub max_discharge_kwh_per_slot: f64,
    pub v2g_cap_kwh_per_slot: f64,
    /// Applied to every ordered pair this EV sends to.
    pub v2v_pair_cap_kwh_per_slot: f64,
    pub eff_charge: f64,
    pub eff_discharge: f64,
    /// Battery wear cost, $ per kWh² of discharge in a slot.
    pub degradation_coeff: f64,
}

impl EvSpec {
    pub fn window_len(&self) -> usize {
        self.departure + 1 - self.arrival
    }

    pub fn is_present(&self, slot: usize) -> bool {
        self.arrival <= slot && slot <= self.departure
    }

    pub fn slots(&self) -> std::ops::RangeInclusive<usize> {
        self.arrival..=self.departure
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    /// Grid purchase price per slot, $/kWh.
    pub buy_price: Vec<f64>,
    /// V2G sell price per slot, $/kWh. May be negative.
    pub sell_price: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyLimits {
    /// Aggregate grid purchase limit across the site, kWh per slot.
    pub grid_cap_kwh_per_slot: f64,
    /// Aggregate renewable availability per slot, kWh.
    pub renewable_kwh: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FairnessPolicy {
    #[default]
    Unconstrained,
    /// Per-slot discharge cap applied to every EV.
    HardPerSlot { zbar: f64 },
    /// Cap on each EV's discharge summed over its stay.
    SoftCumulative { zbar_c: f64 },
    /// Discharge above `theta` in a slot counts as excess; each EV's summed
    /// excess must stay within its budget.
    Budget {
        theta: f64,
        budget_per_ev: f64,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        overrides: BTreeMap<String, f64>,
    },
}

impl FairnessPolicy {
    pub fn budget_for(&self, ev_id: &str) -> Option<f64> {
        match self {
            FairnessPolicy::Budget {
                budget_per_ev,
                overrides,
                ..
            } => Some(overrides.get(ev_id).copied().unwrap_or(*budget_per_ev)),
            _ => None,
        }
    }

    pub fn is_unconstrained(&self) -> bool {
        matches!(self, FairnessPolicy::Unconstrained)
    }

    /// Parses the flag grammar `none | hard:<zbar> | soft:<zbarc> | budget:<theta>,<D>`.
    pub fn parse_flag(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("none") {
            return Ok(FairnessPolicy::Unconstrained);
        }
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| format!("expected none|hard:<zbar>|soft:<zbarc>|budget:<theta>,<D>, got '{s}'"))?;
        let num = |v: &str| -> Result<f64, String> {
            let x: f64 = v.trim().parse().map_err(|_| format!("not a number: '{v}'"))?;
            if !x.is_finite() || x < 0.0 {
                return Err(format!("threshold must be a nonnegative number, got '{v}'"));
            }
            Ok(x)
        };
        match kind.trim().to_ascii_lowercase().as_str() {
            "hard" => Ok(FairnessPolicy::HardPerSlot { zbar: num(args)? }),
            "soft" => Ok(FairnessPolicy::SoftCumulative { zbar_c: num(args)? }),
            "budget" => {
                let (theta, budget) = args
                    .split_once(',')
                    .ok_or_else(|| format!("budget needs '<theta>,<D>', got '{args}'"))?;
                Ok(FairnessPolicy::Budget {
                    theta: num(theta)?,
                    budget_per_ev: num(budget)?,
                    overrides: BTreeMap::new(),
                })
            }
            other => Err(format!("unknown fairness kind '{other}'")),
        }
    }
}

impl fmt::Display for FairnessPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FairnessPolicy::Unconstrained => write!(f, "none"),
            FairnessPolicy::HardPerSlot { zbar } => write!(f, "hard:{zbar}"),
            FairnessPolicy::SoftCumulative { zbar_c } => write!(f, "soft:{zbar_c}"),
            FairnessPolicy::Budget {
                theta, budget_per_ev, ..
            } => write!(f, "budget:{theta},{budget_per_ev}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Grid and renewable charging only; no discharge of any kind.
    ChargingOnly,
    /// Charging plus selling back to the grid; no EV-to-EV transfer.
    V2gOnly,
    /// Charging, V2G and V2V together.
    #[default]
    Joint,
}

impl SolveMode {
    pub fn allows_discharge(self) -> bool {
        !matches!(self, SolveMode::ChargingOnly)
    }

    pub fn allows_v2v(self) -> bool {
        matches!(self, SolveMode::Joint)
    }

    pub fn parse_flag(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "charging-only" | "charging" => Ok(SolveMode::ChargingOnly),
            "v2g" | "v2g-only" => Ok(SolveMode::V2gOnly),
            "joint" | "v2v" => Ok(SolveMode::Joint),
            other => Err(format!("unknown mode '{other}' (charging-only|v2g|joint)")),
        }
    }
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMode::ChargingOnly => "charging-only",
            SolveMode::V2gOnly => "v2g",
            SolveMode::Joint => "joint",
        })
    }
}

/// Optional solver settings embedded in a scenario file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// `exact`, `heuristic` or `auto`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

impl SolverConfig {
    fn is_empty(&self) -> bool {
        self == &SolverConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: TimeGrid,
    pub fleet: Vec<EvSpec>,
    pub tariff: Tariff,
    pub supply: SupplyLimits,
    #[serde(default)]
    pub fairness: FairnessPolicy,
    #[serde(default)]
    pub mode: SolveMode,
    #[serde(default, skip_serializing_if = "SolverConfig::is_empty")]
    pub solver: SolverConfig,
}

impl Scenario {
    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioIoError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioIoError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text).map_err(|source| ScenarioIoError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioIoError> {
        let path = path.as_ref();
        let mut text = self.to_json_string();
        text.push('\n');
        std::fs::write(path, text).map_err(|source| ScenarioIoError::Write {
            path: path.display().to_string(),
            source,
        })
    }

    /// SHA-256 over the compact JSON encoding of the problem data.
    ///
    /// The embedded solver block is excluded, so tweaking solver settings in a
    /// file does not orphan previously written schedules.
    pub fn fingerprint(&self) -> String {
        let mut stripped = self.clone();
        stripped.solver = SolverConfig::default();
        let bytes = serde_json::to_vec(&stripped).expect("scenario serialization is infallible");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn ev_index(&self, id: &str) -> Option<usize> {
        self.fleet.iter().position(|ev| ev.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    /// `None` for scenario-level problems (grid, tariff, supply, policy).
    pub ev_id: Option<String>,
    pub field: String,
    pub slot: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.ev_id, self.slot) {
            (Some(id), Some(t)) => write!(f, "EV {id} slot {t}: {}: {}", self.field, self.message),
            (Some(id), None) => write!(f, "EV {id}: {}: {}", self.field, self.message),
            (None, Some(t)) => write!(f, "slot {t}: {}: {}", self.field, self.message),
            (None, None) => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, ev: Option<&str>, field: &str, slot: Option<usize>, message: impl Into<String>) {
        self.0.push(Violation {
            ev_id: ev.map(str::to_string),
            field: field.to_string(),
            slot,
            message: message.into(),
        });
    }

    fn nonneg(&mut self, ev: Option<&str>, field: &str, value: f64) {
        if !value.is_finite() || value < 0.0 {
            self.push(
                ev,
                field,
                None,
                format!("must be a finite nonnegative number, got {value}"),
            );
        }
    }
}

/// Returns every violated invariant, sorted by (EV id, field).
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut c = Collector(Vec::new());
    let h = s.grid.slot_count;

    if h == 0 {
        c.push(None, "grid.slot_count", None, "must be at least 1");
    }
    if !(s.grid.slot_hours.is_finite() && s.grid.slot_hours > 0.0) {
        c.push(
            None,
            "grid.slot_hours",
            None,
            format!("must be positive, got {}", s.grid.slot_hours),
        );
    }

    if s.tariff.buy_price.len() != h {
        c.push(
            None,
            "tariff.buy_price",
            None,
            format!("length {} does not match slot_count {h}", s.tariff.buy_price.len()),
        );
    }
    if s.tariff.sell_price.len() != h {
        c.push(
            None,
            "tariff.sell_price",
            None,
            format!("length {} does not match slot_count {h}", s.tariff.sell_price.len()),
        );
    }
    for (t, &p) in s.tariff.buy_price.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            c.push(
                None,
                "tariff.buy_price",
                Some(t),
                format!("must be finite and nonnegative, got {p}"),
            );
        }
    }
    for (t, &p) in s.tariff.sell_price.iter().enumerate() {
        if !p.is_finite() {
            c.push(None, "tariff.sell_price", Some(t), "must be finite");
        }
    }

    c.nonneg(None, "supply.grid_cap_kwh_per_slot", s.supply.grid_cap_kwh_per_slot);
    if s.supply.renewable_kwh.len() != h {
        c.push(
            None,
            "supply.renewable_kwh",
            None,
            format!("length {} does not match slot_count {h}", s.supply.renewable_kwh.len()),
        );
    }
    for (t, &r) in s.supply.renewable_kwh.iter().enumerate() {
        if !r.is_finite() || r < 0.0 {
            c.push(
                None,
                "supply.renewable_kwh",
                Some(t),
                format!("must be finite and nonnegative, got {r}"),
            );
        }
    }

    match &s.fairness {
        FairnessPolicy::Unconstrained => {}
        FairnessPolicy::HardPerSlot { zbar } => c.nonneg(None, "fairness.zbar", *zbar),
        FairnessPolicy::SoftCumulative { zbar_c } => c.nonneg(None, "fairness.zbar_c", *zbar_c),
        FairnessPolicy::Budget {
            theta,
            budget_per_ev,
            overrides,
        } => {
            c.nonneg(None, "fairness.theta", *theta);
            c.nonneg(None, "fairness.budget_per_ev", *budget_per_ev);
            for (id, &d) in overrides {
                c.nonneg(Some(id), "fairness.overrides", d);
                if s.ev_index(id).is_none() {
                    c.push(
                        Some(id),
                        "fairness.overrides",
                        None,
                        "override names an EV not in the fleet",
                    );
                }
            }
        }
    }

    let mut seen = BTreeSet::new();
    for ev in &s.fleet {
        let id = Some(ev.id.as_str());
        if !seen.insert(ev.id.as_str()) {
            c.push(id, "id", None, "duplicate EV id");
        }
        if ev.arrival > ev.departure {
            c.push(
                id,
                "arrival",
                None,
                format!("arrival after departure ({} > {})", ev.arrival, ev.departure),
            );
        }
        if h > 0 && (ev.departure >= h || ev.arrival >= h) {
            c.push(
                id,
                "departure",
                None,
                format!(
                    "parking window [{}, {}] outside the time grid of {h} slots",
                    ev.arrival, ev.departure
                ),
            );
        }
        for (field, v) in [
            ("capacity_kwh", ev.capacity_kwh),
            ("min_kwh", ev.min_kwh),
            ("initial_kwh", ev.initial_kwh),
            ("target_kwh", ev.target_kwh),
            ("max_charge_kwh_per_slot", ev.max_charge_kwh_per_slot),
            ("max_discharge_kwh_per_slot", ev.max_discharge_kwh_per_slot),
            ("v2g_cap_kwh_per_slot", ev.v2g_cap_kwh_per_slot),
            ("v2v_pair_cap_kwh_per_slot", ev.v2v_pair_cap_kwh_per_slot),
            ("degradation_coeff", ev.degradation_coeff),
        ] {
            c.nonneg(id, field, v);
        }
        if ev.min_kwh > ev.capacity_kwh {
            c.push(id, "min_kwh", None, "minimum SOC exceeds capacity");
        }
        if ev.initial_kwh < ev.min_kwh {
            c.push(id, "initial_kwh", None, "initial SOC below minimum");
        }
        if ev.initial_kwh > ev.capacity_kwh {
            c.push(id, "initial_kwh", None, "initial SOC exceeds capacity");
        }
        if ev.target_kwh < ev.min_kwh {
            c.push(id, "target_kwh", None, "target below minimum SOC");
        }
        if ev.target_kwh > ev.capacity_kwh {
            c.push(
                id,
                "target_kwh",
                None,
                format!("target exceeds capacity ({} > {})", ev.target_kwh, ev.capacity_kwh),
            );
        }
        if !(0.0..=1.0).contains(&ev.eff_charge) {
            c.push(
                id,
                "eff_charge",
                None,
                format!("must lie in [0, 1], got {}", ev.eff_charge),
            );
        }
        if !(ev.eff_discharge > 0.0 && ev.eff_discharge <= 1.0) {
            c.push(
                id,
                "eff_discharge",
                None,
                format!("must lie in (0, 1], got {}", ev.eff_discharge),
            );
        }
    }

    let mut violations = c.0;
    violations.sort();
    ValidationReport { violations }
}

/// Slack between the best pure-charging SOC at departure and the target.
///
/// Negative means the departure target cannot be met even charging at full
/// rate for the whole stay.
pub fn reachability_check(ev: &EvSpec, _grid: &TimeGrid) -> f64 {
    let window = (ev.departure as f64 - ev.arrival as f64 + 1.0).max(0.0);
    ev.initial_kwh + ev.eff_charge * ev.max_charge_kwh_per_slot * window - ev.target_kwh
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn ev(id: &str, arrival: usize, departure: usize) -> EvSpec {
        EvSpec {
            id: id.to_string(),
            arrival,
            departure,
            capacity_kwh: 50.0,
            min_kwh: 0.0,
            initial_kwh: 10.0,
            target_kwh: 20.0,
            max_charge_kwh_per_slot: 3.5,
            max_discharge_kwh_per_slot: 3.5,
            v2g_cap_kwh_per_slot: 3.5,
            v2v_pair_cap_kwh_per_slot: 3.5,
            eff_charge: 1.0,
            eff_discharge: 1.0,
            degradation_coeff: 0.01,
        }
    }

    pub fn scenario(slots: usize, fleet: Vec<EvSpec>) -> Scenario {
        Scenario {
            grid: TimeGrid::new(slots, 0.5),
            fleet,
            tariff: Tariff {
                buy_price: vec![0.2; slots],
                sell_price: vec![0.1; slots],
            },
            supply: SupplyLimits {
                grid_cap_kwh_per_slot: 100.0,
                renewable_kwh: vec![0.0; slots],
            },
            fairness: FairnessPolicy::Unconstrained,
            mode: SolveMode::Joint,
            solver: SolverConfig::default(),
        }
    }

    #[test]
    fn valid_scenario_has_empty_report() {
        let s = scenario(10, vec![ev("a", 0, 9), ev("b", 2, 5)]);
        assert!(validate_scenario(&s).is_valid());
    }

    #[test]
    fn target_above_capacity_is_reported() {
        let mut e = ev("a", 0, 9);
        e.target_kwh = 60.0;
        let report = validate_scenario(&scenario(10, vec![e]));
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!(v.ev_id.as_deref(), Some("a"));
        assert!(v.message.contains("target exceeds capacity"));
    }

    #[test]
    fn arrival_after_departure_is_reported() {
        let report = validate_scenario(&scenario(12, vec![ev("a", 10, 5)]));
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].message.contains("arrival after departure"));
    }

    #[test]
    fn report_is_sorted_and_repeatable() {
        let mut a = ev("b", 0, 20);
        a.eff_discharge = 0.0;
        let mut b = ev("a", 3, 1);
        b.initial_kwh = -1.0;
        let mut s = scenario(10, vec![a, b, ev("a", 0, 1)]);
        s.tariff.buy_price.pop();
        let r1 = validate_scenario(&s);
        let r2 = validate_scenario(&s);
        assert_eq!(r1, r2);
        let keys: Vec<_> = r1
            .violations
            .iter()
            .map(|v| (v.ev_id.clone(), v.field.clone()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(r1.violations[0].ev_id, None);
        assert!(r1.violations.iter().any(|v| v.field == "id"));
    }

    #[test]
    fn reachability_arithmetic() {
        let g = TimeGrid::new(48, 0.5);
        let mut e = ev("a", 0, 9);
        e.initial_kwh = 10.0;
        e.target_kwh = 10.0;
        e.eff_charge = 0.9;
        assert!((reachability_check(&e, &g) - 0.9 * 3.5 * 10.0).abs() < 1e-12);

        e.target_kwh = 45.0;
        e.eff_charge = 1.0;
        assert!(reachability_check(&e, &g).abs() < 1e-12);

        e.eff_charge = 0.95;
        assert!((reachability_check(&e, &g) + 1.75).abs() < 1e-12);
    }

    #[test]
    fn seven_kw_on_half_hour_grid_is_three_and_a_half_kwh() {
        assert_eq!(TimeGrid::new(48, 0.5).kw_to_kwh_per_slot(7.0), 3.5);
    }

    #[test]
    fn fairness_flag_grammar() {
        assert_eq!(
            FairnessPolicy::parse_flag("none").unwrap(),
            FairnessPolicy::Unconstrained
        );
        assert_eq!(
            FairnessPolicy::parse_flag("hard:0.5").unwrap(),
            FairnessPolicy::HardPerSlot { zbar: 0.5 }
        );
        assert_eq!(
            FairnessPolicy::parse_flag("soft:4").unwrap(),
            FairnessPolicy::SoftCumulative { zbar_c: 4.0 }
        );
        assert_eq!(
            FairnessPolicy::parse_flag("budget:0.5,2").unwrap(),
            FairnessPolicy::Budget {
                theta: 0.5,
                budget_per_ev: 2.0,
                overrides: BTreeMap::new()
            }
        );
        assert!(FairnessPolicy::parse_flag("hard:-1").is_err());
        assert!(FairnessPolicy::parse_flag("budget:1").is_err());
        assert!(FairnessPolicy::parse_flag("fair:1").is_err());
        let p = FairnessPolicy::parse_flag("budget:0.25,3").unwrap();
        assert_eq!(FairnessPolicy::parse_flag(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn json_round_trip_and_stable_fingerprint() {
        let mut s = scenario(4, vec![ev("a", 0, 3)]);
        s.fairness = FairnessPolicy::Budget {
            theta: 0.5,
            budget_per_ev: 2.0,
            overrides: [("a".to_string(), 1.0)].into_iter().collect(),
        };
        let text = s.to_json_string();
        let back = Scenario::from_json_str(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.fingerprint(), s.fingerprint());
        assert_eq!(back.to_json_string(), text);

        let mut tweaked = s.clone();
        tweaked.solver.gap_tol = Some(1e-3);
        assert_eq!(tweaked.fingerprint(), s.fingerprint());
        tweaked.fleet[0].target_kwh += 1.0;
        assert_ne!(tweaked.fingerprint(), s.fingerprint());
    }
}
