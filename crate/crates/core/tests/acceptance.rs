//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the report prints in order and the
//! timing-bound criteria do not compete with each other for cores.

use std::panic::{self, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evfair::domain::{EvSpec, FairnessPolicy, Scenario, SolveMode, SolverConfig, SupplyLimits, Tariff, TimeGrid};
use evfair::metrics::{compare_totals, jain_index_of};
use evfair::model::build;
use evfair::run::{parse_points, run_sweep, solve_scenario, Method, RunArtifact, SolveOptions, SweepParam, SweepSpec};
use evfair::scenario::{generate, Case, GenConfig};
use evfair::solver::{brute_force_oracle, solve_exact, MiqpStatus, SolverParams};

type Outcome = Result<String, String>;

type Criterion = (&'static str, fn() -> Outcome);

type Series = Vec<(Option<f64>, Vec<(f64, f64)>)>;

const GAP_TOL: f64 = 1e-4;

/// Worst KKT residual and worst |cost − objective| over every solve made by the suite.
struct Ledger {
    solves: usize,
    optimal: usize,
    worst_kkt: f64,
    worst_cost_gap: f64,
}

static LEDGER: Mutex<Ledger> = Mutex::new(Ledger {
    solves: 0,
    optimal: 0,
    worst_kkt: 0.0,
    worst_cost_gap: 0.0,
});

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn opts(method: Method) -> SolveOptions {
    SolveOptions {
        method,
        params: SolverParams {
            gap_tol: GAP_TOL,
            ..SolverParams::default()
        },
    }
}

fn solve(s: &Scenario, method: Method) -> Result<RunArtifact, String> {
    let a = solve_scenario(s, &opts(method)).map_err(|e| e.to_string())?;
    let mut l = LEDGER.lock().unwrap();
    l.solves += 1;
    if a.record.status == MiqpStatus::Optimal {
        l.optimal += 1;
        l.worst_kkt = l.worst_kkt.max(a.record.kkt_residual);
    }
    l.worst_cost_gap = l
        .worst_cost_gap
        .max((a.record.cost.total_cost - a.record.objective).abs());
    Ok(a)
}

fn with(s: &Scenario, mode: SolveMode, fairness: FairnessPolicy) -> Scenario {
    let mut s = s.clone();
    s.mode = mode;
    s.fairness = fairness;
    s
}

/// 10 EVs (5 fixed, 5 random) over 12 two-hour slots.
fn small_residential(seed: u64) -> Scenario {
    let mut c = GenConfig::new(Case::Residential, 5, 5, seed);
    c.slot_hours = 2.0;
    generate(&c).expect("generator")
}

fn ev(id: &str, initial: f64, target: f64, rate: f64) -> EvSpec {
    EvSpec {
        id: id.into(),
        arrival: 0,
        departure: 0,
        capacity_kwh: 50.0,
        min_kwh: 0.0,
        initial_kwh: initial,
        target_kwh: target,
        max_charge_kwh_per_slot: rate,
        max_discharge_kwh_per_slot: rate,
        v2g_cap_kwh_per_slot: rate,
        v2v_pair_cap_kwh_per_slot: rate,
        eff_charge: 1.0,
        eff_discharge: 1.0,
        degradation_coeff: 0.01,
    }
}

fn hand_scenario(buy: Vec<f64>, sell: Vec<f64>, renewable: Vec<f64>, grid_cap: f64, fleet: Vec<EvSpec>) -> Scenario {
    Scenario {
        grid: TimeGrid::new(buy.len(), 1.0),
        fleet,
        tariff: Tariff {
            buy_price: buy,
            sell_price: sell,
        },
        supply: SupplyLimits {
            grid_cap_kwh_per_slot: grid_cap,
            renewable_kwh: renewable,
        },
        fairness: FairnessPolicy::Unconstrained,
        mode: SolveMode::Joint,
        solver: SolverConfig::default(),
    }
}

fn oracle_instance() -> Scenario {
    let mut a = ev("a", 6.0, 4.0, 2.0);
    a.departure = 2;
    a.degradation_coeff = 0.1;
    let mut b = ev("b", 2.0, 5.0, 2.0);
    b.departure = 2;
    b.degradation_coeff = 0.1;
    hand_scenario(
        vec![0.10, 0.30, 0.25],
        vec![0.05, 0.28, 0.12],
        vec![0.0, 1.0, 0.5],
        3.0,
        vec![a, b],
    )
}

fn oracle_equivalence() -> Outcome {
    let s = oracle_instance();
    let exact = solve(&s, Method::Exact)?;
    ensure(exact.record.status == MiqpStatus::Optimal, || {
        format!("exact status {:?}", exact.record.status)
    })?;
    let z = exact.record.objective;
    let mut gaps = Vec::new();
    for step in [0.5, 0.25, 0.125] {
        let o = brute_force_oracle(&s, step).map_err(|e| format!("oracle at step {step}: {e}"))?;
        gaps.push((step, o - z));
    }
    ensure(gaps[1].1 >= -1e-6, || {
        format!("exact {z} exceeds oracle(0.25) by {}", -gaps[1].1)
    })?;
    for w in gaps.windows(2) {
        ensure(w[1].1 <= w[0].1 + 1e-12, || {
            format!("gap grew from {:.3e} to {:.3e}", w[0].1, w[1].1)
        })?;
    }
    let shown: Vec<String> = gaps.iter().map(|(h, g)| format!("{h}→{g:.2e}")).collect();
    Ok(format!("exact {z:.6}, oracle gaps {}", shown.join(", ")))
}

fn nested_modes() -> Outcome {
    let mut strict = 0;
    for seed in 0..20u64 {
        let base = small_residential(seed);
        let cost = |mode| -> Result<f64, String> {
            let a = solve(&with(&base, mode, FairnessPolicy::Unconstrained), Method::Exact)?;
            ensure(a.record.status == MiqpStatus::Optimal, || {
                format!("seed {seed} {mode:?}: {:?}", a.record.status)
            })?;
            Ok(a.record.cost.total_cost)
        };
        let ch = cost(SolveMode::ChargingOnly)?;
        let g = cost(SolveMode::V2gOnly)?;
        let j = cost(SolveMode::Joint)?;
        let slack = |c: f64| GAP_TOL * c.abs().max(1.0);
        ensure(j <= g + slack(g), || format!("seed {seed}: joint {j} > v2g {g}"))?;
        ensure(g <= ch + slack(ch), || {
            format!("seed {seed}: v2g {g} > charging-only {ch}")
        })?;
        if ch - j > ch - g + 1e-6 {
            strict += 1;
        }
    }
    ensure(strict >= 18, || {
        format!("joint strictly better on only {strict}/20 seeds")
    })?;
    Ok(format!(
        "ordering holds on 20/20 seeds, joint strictly better on {strict}/20"
    ))
}

fn check_nonincreasing(label: &str, spec: SweepSpec, base: &Scenario) -> Result<usize, String> {
    let report = run_sweep(base, &spec, &opts(Method::Exact), false).map_err(|e| format!("{label}: {e}"))?;
    let mut series: Series = Vec::new();
    for r in &report.rows {
        let c = r
            .total_cost
            .ok_or_else(|| format!("{label}: no cost at {}", r.threshold))?;
        match series.last_mut() {
            Some((comp, pts)) if *comp == r.companion => pts.push((r.threshold, c)),
            _ => series.push((r.companion, vec![(r.threshold, c)])),
        }
    }
    for (comp, pts) in &series {
        for w in pts.windows(2) {
            let tol = 2.0 * GAP_TOL * w[0].1.abs().max(1.0);
            ensure(w[1].1 <= w[0].1 + tol, || {
                format!(
                    "{label} (companion {comp:?}): cost rose {} → {} between {} and {}",
                    w[0].1, w[1].1, w[0].0, w[1].0
                )
            })?;
        }
    }
    ensure(report.monotonicity_warnings.is_empty(), || {
        format!("{label}: {:?}", report.monotonicity_warnings)
    })?;
    Ok(report.rows.len())
}

fn fairness_monotonicity() -> Outcome {
    let base = small_residential(7);
    let pts = |s: &str| parse_points(s).unwrap();
    let mut rows = 0;
    rows += check_nonincreasing(
        "hard",
        SweepSpec {
            param: SweepParam::Zbar,
            points: pts("0:14:1"),
            companion: vec![],
        },
        &base,
    )?;
    rows += check_nonincreasing(
        "soft",
        SweepSpec {
            param: SweepParam::ZbarC,
            points: pts("0:60:5"),
            companion: vec![],
        },
        &base,
    )?;
    rows += check_nonincreasing(
        "budget θ",
        SweepSpec {
            param: SweepParam::Theta,
            points: pts("0:14:2"),
            companion: vec![0.0, 5.0, 20.0],
        },
        &base,
    )?;
    rows += check_nonincreasing(
        "budget D",
        SweepSpec {
            param: SweepParam::Budget,
            points: pts("0:40:5"),
            companion: vec![1.0, 4.0],
        },
        &base,
    )?;
    Ok(format!("hard, soft, θ and D sweeps nonincreasing over {rows} points"))
}

fn hard_limits() -> Outcome {
    let base = with(&small_residential(3), SolveMode::Joint, FairnessPolicy::Unconstrained);
    let free = solve(&base, Method::Exact)?;
    let peak = free
        .schedule
        .evs
        .iter()
        .flat_map(|e| e.discharge_kwh.iter().copied())
        .fold(0.0, f64::max);
    let most = free
        .schedule
        .evs
        .iter()
        .map(|e| e.discharge_kwh.iter().sum::<f64>())
        .fold(0.0, f64::max);

    let zbar = 0.5 * peak;
    let a = solve(
        &with(&base, SolveMode::Joint, FairnessPolicy::HardPerSlot { zbar }),
        Method::Exact,
    )?;
    let got = a
        .schedule
        .evs
        .iter()
        .flat_map(|e| e.discharge_kwh.iter().copied())
        .fold(0.0, f64::max);
    ensure(got <= zbar + 1e-6, || format!("hard: discharge {got} > {zbar}"))?;

    let zbar_c = 0.5 * most;
    let a = solve(
        &with(&base, SolveMode::Joint, FairnessPolicy::SoftCumulative { zbar_c }),
        Method::Exact,
    )?;
    let got = a
        .schedule
        .evs
        .iter()
        .map(|e| e.discharge_kwh.iter().sum::<f64>())
        .fold(0.0, f64::max);
    ensure(got <= zbar_c + 1e-6, || format!("soft: cumulative {got} > {zbar_c}"))?;

    let (theta, d) = (0.25 * peak, 0.5 * peak);
    let policy = FairnessPolicy::Budget {
        theta,
        budget_per_ev: d,
        overrides: Default::default(),
    };
    let a = solve(&with(&base, SolveMode::Joint, policy), Method::Exact)?;
    let hinge = a
        .schedule
        .evs
        .iter()
        .map(|e| e.discharge_kwh.iter().map(|&z| (z - theta).max(0.0)).sum::<f64>())
        .fold(0.0, f64::max);
    ensure(hinge <= d + 1e-6, || format!("budget: hinge sum {hinge} > {d}"))?;
    let audited = a
        .audit
        .residual("fairness_budget")
        .ok_or("audit has no fairness_budget family")?;
    ensure(audited <= 1e-6, || format!("budget: audit residual {audited:.3e}"))?;
    Ok(format!(
        "unconstrained peak {peak:.3} kWh, hard {zbar:.3}, soft {zbar_c:.3}, budget θ={theta:.3} D={d:.3}; worst hinge {hinge:.4}"
    ))
}

fn kkt_and_gradient() -> Outcome {
    let s = small_residential(1);
    let (p, _) = build(&s).map_err(|e| e.to_string())?;
    let sol = solve_exact(&p, &opts(Method::Exact).params);
    ensure(sol.status == MiqpStatus::Optimal, || format!("status {:?}", sol.status))?;
    ensure(sol.kkt.max() <= 1e-6, || {
        format!("direct solve KKT {:.3e}", sol.kkt.max())
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = p.num_vars();
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
    let g = p.gradient(&x);
    let h = 1e-4;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let at = |t: f64| {
            let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            p.objective(&y)
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let an: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - an).abs() / an.abs().max(1.0));
    }
    ensure(worst <= 1e-5, || format!("gradient mismatch {worst:.3e}"))?;

    let l = LEDGER.lock().unwrap();
    ensure(l.worst_kkt <= 1e-6, || {
        format!("worst KKT over {} optimal solves: {:.3e}", l.optimal, l.worst_kkt)
    })?;
    Ok(format!(
        "worst KKT {:.2e} over {} optimal solves, gradient rel. error {worst:.2e} on 100 directions",
        l.worst_kkt.max(sol.kkt.max()),
        l.optimal + 1
    ))
}

fn metric_identities() -> Outcome {
    // two identical donors pinned to the hard limit every slot, two identical receivers
    let donor = |id: &str| {
        let mut e = ev(id, 40.0, 32.0, 7.0);
        e.departure = 3;
        e
    };
    let taker = |id: &str| {
        let mut e = ev(id, 5.0, 30.0, 7.0);
        e.departure = 3;
        e
    };
    let mut s = hand_scenario(
        vec![0.3; 4],
        vec![0.0; 4],
        vec![0.0; 4],
        100.0,
        vec![donor("d1"), donor("d2"), taker("r1"), taker("r2")],
    );
    s.fairness = FairnessPolicy::HardPerSlot { zbar: 2.0 };
    let a = solve(&s, Method::Exact)?;
    ensure(a.fairness.participant_count == 2, || {
        format!("{} participants", a.fairness.participant_count)
    })?;
    ensure((a.fairness.jfi - 1.0).abs() <= 1e-9, || {
        format!("symmetric JFI {}", a.fairness.jfi)
    })?;
    let pair = jain_index_of(&[2.0, 1.0]);
    ensure(pair == 0.9, || format!("jain(2, 1) = {pair}"))?;
    let l = LEDGER.lock().unwrap();
    ensure(l.worst_cost_gap <= 1e-6, || {
        format!("cost vs objective off by {:.3e}", l.worst_cost_gap)
    })?;
    Ok(format!(
        "symmetric JFI {}, jain(2,1) = {pair}, |cost − objective| ≤ {:.2e} over {} solves",
        a.fairness.jfi, l.worst_cost_gap, l.solves
    ))
}

fn arithmetic() -> Outcome {
    let r = compare_totals(289.01, 252.65).map_err(|e| e.to_string())?;
    ensure((r - 12.58).abs() <= 0.01, || format!("compare = {r}"))?;
    Ok(format!("compare_costs(289.01, 252.65) = {r:.4}%"))
}

fn scale() -> Outcome {
    let s = generate(&GenConfig::residential(1)).map_err(|e| e.to_string())?;
    ensure(s.fleet.len() == 100 && s.grid.slot_count == 48, || {
        "unexpected generated size".into()
    })?;
    let t = Instant::now();
    let a = solve(&s, Method::Heuristic)?;
    let big = t.elapsed().as_secs_f64();
    ensure(a.audit.pass && a.audit.tol <= 1e-6, || {
        format!("audit failed: {:?}", a.audit.worst())
    })?;
    ensure(big < 60.0, || format!("heuristic took {big:.1}s"))?;

    let mut c = GenConfig::new(Case::Residential, 2, 2, 11);
    c.slot_hours = 2.0;
    let s = generate(&c).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let a = solve(&s, Method::Exact)?;
    let small = t.elapsed().as_secs_f64();
    ensure(a.record.status == MiqpStatus::Optimal, || {
        format!("exact status {:?}", a.record.status)
    })?;
    ensure(small < 60.0, || format!("exact took {small:.1}s"))?;
    Ok(format!(
        "100×48 heuristic {big:.1}s (audit pass), 4×12 exact {:.0}ms",
        small * 1e3
    ))
}

fn determinism() -> Outcome {
    let cfg = {
        let mut c = GenConfig::new(Case::Residential, 5, 5, 5);
        c.slot_hours = 2.0;
        c
    };
    let s1 = generate(&cfg).map_err(|e| e.to_string())?;
    let s2 = generate(&cfg).map_err(|e| e.to_string())?;
    ensure(s1.to_json_string() == s2.to_json_string(), || {
        "generator output differs".into()
    })?;

    let a = solve(&s1, Method::Exact)?;
    let b = solve(&s1, Method::Exact)?;
    ensure(a.record.objective.to_bits() == b.record.objective.to_bits(), || {
        "objective differs".into()
    })?;
    let json = |x: &RunArtifact| serde_json::to_string(&x.schedule).unwrap();
    ensure(json(&a) == json(&b), || "schedule differs".into())?;

    let spec = SweepSpec {
        param: SweepParam::Zbar,
        points: parse_points("0:10:2").unwrap(),
        companion: vec![],
    };
    let csv = || -> Result<Vec<u8>, String> {
        let r = run_sweep(&s1, &spec, &opts(Method::Exact), false).map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        r.write_csv(&mut out, false).map_err(|e| e.to_string())?;
        Ok(out)
    };
    ensure(csv()? == csv()?, || "sweep CSV differs".into())?;
    let o = |h| brute_force_oracle(&oracle_instance(), h).map(f64::to_bits);
    ensure(o(0.25) == o(0.25), || "oracle differs".into())?;
    Ok("generator, schedule, objective, sweep CSV and oracle repeat bit for bit".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("nested-mode monotonicity", nested_modes),
        ("fairness-threshold monotonicity", fairness_monotonicity),
        ("hard-limit enforcement", hard_limits),
        ("scale and runtime", scale),
        ("determinism", determinism),
        ("cost-comparison arithmetic", arithmetic),
        // these two also summarise every solve above
        ("metric identities", metric_identities),
        ("KKT and gradient checks", kkt_and_gradient),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let out = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{secs:.1}s]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
