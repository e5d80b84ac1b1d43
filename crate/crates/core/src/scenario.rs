//! Synthetic residential and shopping-centre instances, time-of-use tariffs
//! and wholesale sell prices read from CSV.
//!
//! Every number in here that is not a plain unit conversion is a configurable
//! default, not data: arrival patterns, tariff levels and the sell-price
//! profile are placeholders for site-specific inputs.

use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    reachability_check, validate_scenario, EvSpec, FairnessPolicy, Scenario, SolveMode, SolverConfig, SupplyLimits,
    Tariff, TimeGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Residential,
    Shopping,
}

impl Case {
    pub fn horizon_hours(self) -> f64 {
        match self {
            Case::Residential => 24.0,
            Case::Shopping => 9.0,
        }
    }

    pub fn start_hour(self) -> f64 {
        match self {
            Case::Residential => 0.0,
            Case::Shopping => 9.0,
        }
    }
}

/// Gaussian arrival time and stay length, in clock hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModel {
    pub arrival_mean_h: f64,
    pub arrival_sd_h: f64,
    pub duration_mean_h: f64,
    pub duration_sd_h: f64,
}

impl ArrivalModel {
    pub fn for_case(case: Case) -> Self {
        match case {
            Case::Residential => Self {
                arrival_mean_h: 18.0,
                arrival_sd_h: 2.0,
                duration_mean_h: 10.0,
                duration_sd_h: 3.0,
            },
            Case::Shopping => Self {
                arrival_mean_h: 11.0,
                arrival_sd_h: 1.5,
                duration_mean_h: 2.5,
                duration_sd_h: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RenewableProfile {
    None,
    /// Daytime bell centred on `center_hour`, `peak_kw` at the top.
    Bell {
        peak_kw: f64,
        center_hour: f64,
        width_h: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouLevels {
    pub offpeak: f64,
    pub shoulder: f64,
    pub peak: f64,
}

impl Default for TouLevels {
    fn default() -> Self {
        Self {
            offpeak: 0.10,
            shoulder: 0.20,
            peak: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TouLevel {
    Offpeak,
    Shoulder,
    Peak,
}

impl TouLevels {
    pub fn price(&self, level: TouLevel) -> f64 {
        match level {
            TouLevel::Offpeak => self.offpeak,
            TouLevel::Shoulder => self.shoulder,
            TouLevel::Peak => self.peak,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub case: Case,
    pub n_fixed: usize,
    pub n_random: usize,
    pub seed: u64,
    pub capacity_kwh: f64,
    pub charger_kw: f64,
    pub slot_hours: f64,
    pub target_fraction_range: (f64, f64),
    /// (fraction of capacity, weight) pairs.
    pub initial_soc_distribution: Vec<(f64, f64)>,
    pub min_soc_fraction: f64,
    pub eff_charge: f64,
    pub eff_discharge: f64,
    pub degradation_coeff: f64,
    /// `None`: number of EVs × one charger's energy per slot.
    pub grid_cap_kwh_per_slot: Option<f64>,
    pub renewable_profile: RenewableProfile,
    pub arrivals: ArrivalModel,
    pub tou: TouLevels,
    pub max_retries: usize,
}

impl GenConfig {
    pub fn new(case: Case, n_fixed: usize, n_random: usize, seed: u64) -> Self {
        Self {
            case,
            n_fixed,
            n_random,
            seed,
            capacity_kwh: 50.0,
            charger_kw: 7.0,
            slot_hours: 0.5,
            target_fraction_range: (0.70, 1.00),
            initial_soc_distribution: vec![(0.2, 0.25), (0.3, 0.25), (0.4, 0.25), (0.5, 0.25)],
            min_soc_fraction: 0.1,
            eff_charge: 0.95,
            eff_discharge: 0.95,
            degradation_coeff: 0.01,
            grid_cap_kwh_per_slot: None,
            renewable_profile: RenewableProfile::None,
            arrivals: ArrivalModel::for_case(case),
            tou: TouLevels::default(),
            max_retries: 1000,
        }
    }

    /// 50 EVs home all day, 50 coming and going.
    pub fn residential(seed: u64) -> Self {
        Self::new(Case::Residential, 50, 50, seed)
    }

    /// 30 staff EVs for the whole opening hours, 70 customers.
    pub fn shopping(seed: u64) -> Self {
        Self::new(Case::Shopping, 30, 70, seed)
    }

    pub fn time_grid(&self) -> TimeGrid {
        let slots = (self.case.horizon_hours() / self.slot_hours).round().max(1.0) as usize;
        TimeGrid {
            slot_count: slots,
            slot_hours: self.slot_hours,
            start_label: clock_label(self.case.start_hour()),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("EV {index}: no reachable draw after {retries} attempts")]
    Unreachable { index: usize, retries: usize },
}

fn clock_label(hour: f64) -> String {
    let minutes = (hour * 60.0).round() as i64;
    format!("{:02}:{:02}", (minutes / 60).rem_euclid(24), minutes.rem_euclid(60))
}

fn check_config(cfg: &GenConfig) -> Result<(), GenError> {
    let bad = |m: &str| Err(GenError::Config(m.to_string()));
    let (lo, hi) = cfg.target_fraction_range;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return bad("target_fraction_range must be an ordered sub-interval of [0, 1]");
    }
    if cfg.initial_soc_distribution.is_empty() {
        return bad("initial_soc_distribution is empty");
    }
    let total: f64 = cfg.initial_soc_distribution.iter().map(|&(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-9
        || cfg
            .initial_soc_distribution
            .iter()
            .any(|&(f, w)| w < 0.0 || !(0.0..=1.0).contains(&f))
    {
        return bad("initial_soc_distribution weights must be nonnegative and sum to 1");
    }
    if !(cfg.slot_hours > 0.0) || !(cfg.capacity_kwh > 0.0) || cfg.charger_kw < 0.0 {
        return bad("slot_hours and capacity_kwh must be positive, charger_kw nonnegative");
    }
    let h = cfg.case.horizon_hours() / cfg.slot_hours;
    if (h - h.round()).abs() > 1e-9 || h.round() < 2.0 {
        return bad("slot_hours must divide the horizon into at least two slots");
    }
    Ok(())
}

/// Residential instance: 24 h from midnight.
pub fn generate_residential(cfg: &GenConfig) -> Result<Scenario, GenError> {
    if cfg.case != Case::Residential {
        return Err(GenError::Config("generate_residential needs case = residential".into()));
    }
    generate(cfg)
}

/// Shopping-centre instance: 09:00 to 18:00.
pub fn generate_shopping(cfg: &GenConfig) -> Result<Scenario, GenError> {
    if cfg.case != Case::Shopping {
        return Err(GenError::Config("generate_shopping needs case = shopping".into()));
    }
    generate(cfg)
}

/// Dispatches on `cfg.case`.
pub fn generate(cfg: &GenConfig) -> Result<Scenario, GenError> {
    check_config(cfg)?;
    let grid = cfg.time_grid();
    let h = grid.slot_count;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rate = grid.kw_to_kwh_per_slot(cfg.charger_kw);
    let (arr_n, dur_n) = (
        Normal::new(cfg.arrivals.arrival_mean_h, cfg.arrivals.arrival_sd_h.max(0.0))
            .map_err(|e| GenError::Config(e.to_string()))?,
        Normal::new(cfg.arrivals.duration_mean_h, cfg.arrivals.duration_sd_h.max(0.0))
            .map_err(|e| GenError::Config(e.to_string()))?,
    );
    let start = cfg.case.start_hour();
    let horizon = cfg.case.horizon_hours();

    let total = cfg.n_fixed + cfg.n_random;
    let mut fleet = Vec::with_capacity(total);
    for index in 0..total {
        let fixed = index < cfg.n_fixed;
        let id = if fixed {
            format!("F{index:03}")
        } else {
            format!("R{:03}", index - cfg.n_fixed)
        };
        let mut accepted = None;
        for _ in 0..cfg.max_retries.max(1) {
            let (arrival, departure) = if fixed {
                (0, h - 1)
            } else {
                draw_window(&mut rng, &arr_n, &dur_n, start, horizon, cfg.slot_hours, h)
            };
            let initial = cfg.capacity_kwh * draw_discrete(&mut rng, &cfg.initial_soc_distribution);
            let (lo, hi) = cfg.target_fraction_range;
            let frac = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let target = (cfg.capacity_kwh * frac).max(initial);
            let ev = EvSpec {
                id: id.clone(),
                arrival,
                departure,
                capacity_kwh: cfg.capacity_kwh,
                min_kwh: cfg.capacity_kwh * cfg.min_soc_fraction,
                initial_kwh: initial,
                target_kwh: target,
                max_charge_kwh_per_slot: rate,
                max_discharge_kwh_per_slot: rate,
                v2g_cap_kwh_per_slot: rate,
                v2v_pair_cap_kwh_per_slot: rate,
                eff_charge: cfg.eff_charge,
                eff_discharge: cfg.eff_discharge,
                degradation_coeff: cfg.degradation_coeff,
            };
            if reachability_check(&ev, &grid) >= 0.0 && ev.initial_kwh >= ev.min_kwh {
                accepted = Some(ev);
                break;
            }
        }
        match accepted {
            Some(ev) => fleet.push(ev),
            None => {
                return Err(GenError::Unreachable {
                    index,
                    retries: cfg.max_retries,
                })
            }
        }
    }

    let buy =
        build_tou_tariff(&cfg.tou, &default_tou_windows(&grid, start), &grid).expect("default windows cover the grid");
    let sell = synthetic_sell_prices(&grid, start);
    let renewable = renewable_series(&cfg.renewable_profile, &grid, start);
    let s = Scenario {
        supply: SupplyLimits {
            grid_cap_kwh_per_slot: cfg.grid_cap_kwh_per_slot.unwrap_or(total as f64 * rate),
            renewable_kwh: renewable,
        },
        grid,
        fleet,
        tariff: Tariff {
            buy_price: buy,
            sell_price: sell,
        },
        fairness: FairnessPolicy::Unconstrained,
        mode: SolveMode::Joint,
        solver: SolverConfig::default(),
    };
    let report = validate_scenario(&s);
    if !report.is_valid() {
        return Err(GenError::Config(report.to_string()));
    }
    Ok(s)
}

fn draw_discrete(rng: &mut ChaCha8Rng, dist: &[(f64, f64)]) -> f64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(v, w) in dist {
        acc += w;
        if u < acc {
            return v;
        }
    }
    dist.last().map(|&(v, _)| v).unwrap_or(0.0)
}

/// Truncated-Gaussian arrival and stay, converted to an inclusive slot window.
fn draw_window(
    rng: &mut ChaCha8Rng,
    arr: &Normal<f64>,
    dur: &Normal<f64>,
    start: f64,
    horizon: f64,
    slot_hours: f64,
    h: usize,
) -> (usize, usize) {
    let mut rel = f64::NAN;
    for _ in 0..64 {
        let a = arr.sample(rng) - start;
        if (0.0..horizon).contains(&a) {
            rel = a;
            break;
        }
    }
    if rel.is_nan() {
        rel = (arr.mean() - start).clamp(0.0, horizon - slot_hours);
    }
    let arrival = ((rel / slot_hours).floor() as usize).min(h - 2);
    let mut stay = f64::NAN;
    for _ in 0..64 {
        let d = dur.sample(rng);
        if d > 0.0 {
            stay = d;
            break;
        }
    }
    if stay.is_nan() {
        stay = slot_hours;
    }
    let slots = ((stay / slot_hours).round() as usize).max(1);
    let departure = (arrival + slots).min(h - 1);
    (arrival, departure)
}

#[derive(Debug, Error, PartialEq)]
pub enum CoverageError {
    #[error("slot {0} is not covered by any tariff window")]
    Uncovered(usize),
    #[error("slot {0} is covered by more than one tariff window")]
    Overlap(usize),
    #[error("window {start}..{end} extends past the {slots}-slot grid")]
    OutOfRange { start: usize, end: usize, slots: usize },
}

/// Per-slot buy price from half-open slot windows that must tile the grid.
pub fn build_tou_tariff(
    levels: &TouLevels,
    windows: &[(Range<usize>, TouLevel)],
    grid: &TimeGrid,
) -> Result<Vec<f64>, CoverageError> {
    let h = grid.slot_count;
    let mut out: Vec<Option<f64>> = vec![None; h];
    for (r, level) in windows {
        if r.end > h {
            return Err(CoverageError::OutOfRange {
                start: r.start,
                end: r.end,
                slots: h,
            });
        }
        for t in r.clone() {
            if out[t].is_some() {
                return Err(CoverageError::Overlap(t));
            }
            out[t] = Some(levels.price(*level));
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(t, v)| v.ok_or(CoverageError::Uncovered(t)))
        .collect()
}

/// Shoulder 07:00–17:00, peak 17:00–22:00, off-peak otherwise, by slot midpoint.
pub fn default_tou_windows(grid: &TimeGrid, start_hour: f64) -> Vec<(Range<usize>, TouLevel)> {
    let level_at = |t: usize| {
        let clock = (start_hour + (t as f64 + 0.5) * grid.slot_hours).rem_euclid(24.0);
        if (17.0..22.0).contains(&clock) {
            TouLevel::Peak
        } else if (7.0..17.0).contains(&clock) {
            TouLevel::Shoulder
        } else {
            TouLevel::Offpeak
        }
    };
    let mut out: Vec<(Range<usize>, TouLevel)> = Vec::new();
    for t in 0..grid.slot_count {
        let l = level_at(t);
        match out.last_mut() {
            Some((r, last)) if *last == l => r.end = t + 1,
            _ => out.push((t..t + 1, l)),
        }
    }
    out
}

/// Half-hourly synthetic wholesale price ($/kWh) at clock hour `hour`.
fn wholesale_profile(hour: f64) -> f64 {
    let bump = |centre: f64, width: f64| (-((hour - centre) / width).powi(2)).exp();
    0.05 + 0.03 * bump(8.0, 1.5) + 0.13 * bump(18.5, 1.5)
}

/// Default sell price: the synthetic half-hourly profile mean-pooled to the grid.
pub fn synthetic_sell_prices(grid: &TimeGrid, start_hour: f64) -> Vec<f64> {
    let per_slot = (grid.slot_hours / 0.5).round().max(1.0) as usize;
    (0..grid.slot_count)
        .map(|t| {
            let sum: f64 = (0..per_slot)
                .map(|k| {
                    let clock = start_hour + t as f64 * grid.slot_hours + (k as f64 + 0.5) * 0.5;
                    wholesale_profile(clock.rem_euclid(24.0))
                })
                .sum();
            sum / per_slot as f64
        })
        .collect()
}

fn renewable_series(profile: &RenewableProfile, grid: &TimeGrid, start_hour: f64) -> Vec<f64> {
    match *profile {
        RenewableProfile::None => vec![0.0; grid.slot_count],
        RenewableProfile::Bell {
            peak_kw,
            center_hour,
            width_h,
        } => (0..grid.slot_count)
            .map(|t| {
                let clock = start_hour + (t as f64 + 0.5) * grid.slot_hours;
                peak_kw * grid.slot_hours * (-((clock - center_hour) / width_h).powi(2)).exp()
            })
            .collect(),
    }
}

/// Sell prices aligned to a time grid, with where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub values: Vec<f64>,
    pub source: String,
    pub column: String,
    pub resampling: String,
}

#[derive(Debug, Error)]
pub enum PriceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("{0}")]
    Alignment(String),
}

/// Reads `timestamp,price_per_mwh` rows (half-hourly, chronological) and
/// converts them to $/kWh per grid slot.
///
/// Half-hour slots take the rows as they are; longer slots average the
/// half-hour rows they contain.
pub fn load_sell_prices(path: impl AsRef<Path>, grid: &TimeGrid) -> Result<PriceSeries, PriceError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| PriceError::Io {
        path: name.clone(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers().map_err(|e| PriceError::Parse {
        path: name.clone(),
        line: 1,
        message: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "price_per_mwh" {
        return Err(PriceError::Parse {
            path: name,
            line: 1,
            message: format!(
                "expected header 'timestamp,price_per_mwh', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| PriceError::Parse {
            path: name.clone(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |message: String| PriceError::Parse {
            path: name.clone(),
            line,
            message,
        };
        if rec.len() != 2 || rec[0].is_empty() {
            return Err(parse_err("expected 'timestamp,price_per_mwh'".into()));
        }
        let v: f64 = rec[1]
            .parse()
            .map_err(|_| parse_err(format!("price '{}' is not a number", &rec[1])))?;
        if !v.is_finite() {
            return Err(parse_err("price must be finite".into()));
        }
        rows.push(v / 1000.0);
    }
    let ratio = grid.slot_hours / 0.5;
    if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 {
        return Err(PriceError::Alignment(format!(
            "half-hourly rows cannot be aligned to {} h slots",
            grid.slot_hours
        )));
    }
    let k = ratio.round() as usize;
    if rows.len() != grid.slot_count * k {
        return Err(PriceError::Alignment(format!(
            "{} rows cannot tile {} slots of {} h ({} rows expected)",
            rows.len(),
            grid.slot_count,
            grid.slot_hours,
            grid.slot_count * k
        )));
    }
    let values = rows.chunks(k).map(|c| c.iter().sum::<f64>() / k as f64).collect();
    Ok(PriceSeries {
        values,
        source: name,
        column: "price_per_mwh".into(),
        resampling: if k == 1 {
            "half-hourly rows used as-is, $/MWh / 1000".into()
        } else {
            format!("mean of {k} half-hourly rows per slot, $/MWh / 1000")
        },
    })
}
