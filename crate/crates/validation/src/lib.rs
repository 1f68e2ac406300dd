//! Acceptance criteria, one function per criterion.

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use aoii::baselines::{
    aoi_mm11, aoii_mm11_noiseless, aos_mm11_noiseless, comparison_report, BaselineParams,
};
use aoii::collision::{
    build_collision_model, collision_stationary, corollary3_closed_form, corollary3_via_system,
    CollisionParams,
};
use aoii::noisy::{
    aos_noisy, build_noisy_model, corollary1_average, corollary1_simplified, corollary2_average,
    noisy_stationary, NoisyParams, NoisyScheme, Scheme1Slopes, Scheme2Constants,
};
use aoii::shs::{average_aoii, expected_age_vectors, stationary_distribution, ShsModel};
use aoii::sim::{replicate, simulate, SimConfig, SimulationResult};
use aoii::stability::{
    generic_check, noisy_det_c, symmetric_k2_bound, theorem2_check, theorem3_check, StabilityStatus,
};
use aoii::Execution;
use aoii_cli::{run, Cli};
use clap::Parser;

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn engine_average(model: &ShsModel) -> f64 {
    let pi = stationary_distribution(model).expect("stationary distribution");
    average_aoii(&expected_age_vectors(model, &pi).expect("stable age system"))
}

/// Uniform on (0, hi].
fn open_unit(rng: &mut StdRng, hi: f64) -> f64 {
    hi * (1.0 - rng.random::<f64>())
}

/// 0 < λ < μ ≤ 10.
fn rates(rng: &mut StdRng) -> (f64, f64) {
    loop {
        let mu = open_unit(rng, 10.0);
        let lambda = mu * rng.random::<f64>();
        if lambda > 0.0 && lambda < mu {
            return (lambda, mu);
        }
    }
}

fn noisy_tuple(rng: &mut StdRng) -> NoisyParams {
    let (lambda, mu) = rates(rng);
    NoisyParams::new(lambda, mu, open_unit(rng, 1.0), 0.9 * rng.random::<f64>()).unwrap()
}

fn stable_scheme2(rng: &mut StdRng) -> (NoisyParams, Scheme2Constants) {
    loop {
        let params = noisy_tuple(rng);
        let k1 = open_unit(rng, params.lambda);
        let k2 = k1 + (params.mu - k1) * rng.random::<f64>();
        let Ok(consts) = Scheme2Constants::new(k1, k2) else {
            continue;
        };
        if theorem2_check(&params, &consts).status == StabilityStatus::Stable {
            return (params, consts);
        }
    }
}

fn collision_sufficient(rng: &mut StdRng, symmetric: bool) -> (CollisionParams, Scheme2Constants) {
    loop {
        let (lambda, mu) = rates(rng);
        let (lambda_c, mu_c) = if symmetric {
            (lambda, mu)
        } else {
            (open_unit(rng, 10.0), open_unit(rng, 10.0))
        };
        let params = CollisionParams::new(lambda, lambda_c, mu, mu_c, open_unit(rng, 1.0)).unwrap();
        let k1 = open_unit(rng, lambda);
        let k2 = k1 + (mu - k1) * rng.random::<f64>();
        let Ok(consts) = Scheme2Constants::new(k1, k2) else {
            continue;
        };
        if theorem3_check(&params, &consts).status == StabilityStatus::StableSufficient {
            return (params, consts);
        }
    }
}

fn ms(d: Duration) -> String {
    format!("{:.0} ms", d.as_secs_f64() * 1e3)
}

// 1
pub fn scheme1_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let params = noisy_tuple(&mut rng);
        let m1 = 1.0 + 9.0 * rng.random::<f64>();
        let m2 = m1 + (10.0 - m1) * rng.random::<f64>();
        let slopes = Scheme1Slopes::new(m1, m2).unwrap();
        let engine = engine_average(&build_noisy_model(&params, slopes).unwrap());
        worst = worst.max(rel(engine, corollary1_average(&params, &slopes)));
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && t < Duration::from_secs(1),
        format!(
            "1000 tuples, max rel diff {worst:.2e} (tol 1e-9), {}",
            ms(t)
        ),
    )
}

// 2
pub fn scheme2_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let tuples: Vec<_> = (0..1000).map(|_| stable_scheme2(&mut rng)).collect();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (params, consts) in &tuples {
        let engine = engine_average(&build_noisy_model(params, *consts).unwrap());
        worst = worst.max(rel(engine, corollary2_average(params, consts).unwrap()));
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && t < Duration::from_secs(1),
        format!(
            "1000 stable tuples, max rel diff {worst:.2e} (tol 1e-9), {}",
            ms(t)
        ),
    )
}

// 3
pub fn collision_three_way() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    let tuples: Vec<_> = (0..500)
        .map(|i| collision_sufficient(&mut rng, i % 5 == 0))
        .collect();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (params, consts) in &tuples {
        let engine = engine_average(&build_collision_model(params, consts).unwrap());
        let closed = corollary3_closed_form(params, consts).unwrap();
        let reduced = corollary3_via_system(params, consts).unwrap();
        worst = worst
            .max(rel(engine, closed))
            .max(rel(engine, reduced))
            .max(rel(closed, reduced));
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-8 && t < Duration::from_secs(5),
        format!(
            "500 stable tuples, max pairwise rel diff {worst:.2e} (tol 1e-8), {}",
            ms(t)
        ),
    )
}

// 4
pub fn reductions() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let unit = Scheme1Slopes::new(1.0, 1.0).unwrap();
    let (mut unit_slopes, mut noiseless, mut sync): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..200 {
        let params = noisy_tuple(&mut rng);
        unit_slopes = unit_slopes.max(rel(
            corollary1_simplified(&params),
            corollary1_average(&params, &unit),
        ));

        let clean = NoisyParams { p_e: 0.0, ..params };
        let b = BaselineParams::new(params.lambda, params.mu, 0.0, params.p).unwrap();
        noiseless = noiseless.max(rel(corollary1_simplified(&clean), aoii_mm11_noiseless(&b)));

        let m1 = 1.0 + 9.0 * rng.random::<f64>();
        let slopes = Scheme1Slopes::new(m1, m1 + (10.0 - m1) * rng.random::<f64>()).unwrap();
        let certain = NoisyParams { p: 1.0, ..params };
        let (general, unit_aos) = aos_noisy(&params, &slopes);
        sync = sync
            .max(rel(corollary1_average(&certain, &slopes), general))
            .max(rel(corollary1_average(&certain, &unit), unit_aos))
            .max(rel(aos_noisy(&clean, &unit).1, aos_mm11_noiseless(&b)));
    }
    let worst = unit_slopes.max(noiseless).max(sync);
    outcome(
        worst <= 1e-12,
        format!(
            "200 tuples, max rel diff: unit slopes {unit_slopes:.2e}, noiseless {noiseless:.2e}, \
             p = 1 {sync:.2e} (tol 1e-12)"
        ),
    )
}

// 5
pub fn comparisons() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let mut failures = 0;
    for _ in 0..1000 {
        let (lambda, mu) = rates(&mut rng);
        let b = BaselineParams::new(
            lambda,
            mu,
            5.0 * rng.random::<f64>(),
            open_unit(&mut rng, 1.0),
        )
        .unwrap();
        let r = comparison_report(&b).unwrap();
        if !(r.identity && r.preempt_dominates && r.blocking_dominates) {
            failures += 1;
        }
    }
    let spot_aoi = aoi_mm11(&BaselineParams::new(1.0, 1.0, 0.0, 0.5).unwrap());
    let spot_aoii = aoii_mm11_noiseless(&BaselineParams::new(1.0, 2.0, 0.0, 1.0).unwrap());
    let spots = (spot_aoi - 2.5).abs() <= 1e-12 && (spot_aoii - 1.0 / 6.0).abs() <= 1e-12;
    outcome(
        failures == 0 && spots,
        format!(
            "{failures}/1000 tuples violate identity (4 ulp) or inequalities; \
             spot values {spot_aoi} and {spot_aoii}"
        ),
    )
}

// 6
pub fn noisy_stability_iff() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let band = 1e-6;
    let (mut checked, mut stable, mut disagree) = (0, 0, 0);
    while checked < 1000 {
        let params = noisy_tuple(&mut rng);
        let k1 = open_unit(&mut rng, 1.5 * params.lambda);
        let k2 = k1 + (1.5 * params.mu - k1) * rng.random::<f64>();
        let Ok(consts) = Scheme2Constants::new(k1, k2) else {
            continue;
        };
        let det = noisy_det_c(&params, &consts);
        let near = |a: f64, b: f64| (a - b).abs() <= band * a.abs().max(b.abs());
        if det.abs() <= band || near(k1, params.lambda) || near(k2, params.mu) || near(k1, k2) {
            continue;
        }
        checked += 1;
        let exact = theorem2_check(&params, &consts).is_stable();
        let numeric = generic_check(&build_noisy_model(&params, consts).unwrap()).is_stable();
        stable += exact as usize;
        disagree += (exact != numeric) as usize;
    }

    let pair = NoisyParams::new(1.0, 2.0, 0.5, 0.1).unwrap();
    let worked = [(1.0, true, 0.6), (1.9, false, -3.0)]
        .iter()
        .all(|&(k2, ok, det)| {
            let consts = Scheme2Constants::new(0.5, k2).unwrap();
            let v = theorem2_check(&pair, &consts);
            let g = generic_check(&build_noisy_model(&pair, consts).unwrap());
            v.is_stable() == ok
                && g.is_stable() == ok
                && (v.determinant.unwrap() - det).abs() <= 1e-12
        });
    outcome(
        disagree == 0 && worked,
        format!(
            "{disagree} disagreements over 1000 tuples ({stable} stable); worked pair {}",
            if worked { "ok" } else { "wrong" }
        ),
    )
}

// 7
pub fn collision_sufficiency() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let mut misses = 0;
    for i in 0..500 {
        let (params, consts) = collision_sufficient(&mut rng, i % 2 == 0);
        if !generic_check(&build_collision_model(&params, &consts).unwrap()).is_stable() {
            misses += 1;
        }
    }
    let bound = symmetric_k2_bound(1.0, 10.0, 0.5);
    let expected = 10f64.min(-85.0 / -5.75);
    let spot = (bound - expected).abs() <= 1e-9;
    outcome(
        misses == 0 && spot,
        format!(
            "{misses}/500 sufficient tuples not stable numerically; bound {bound} vs {expected}"
        ),
    )
}

pub struct SimCase {
    pub name: String,
    pub model: ShsModel,
    pub analytic: f64,
    pub pi: Vec<f64>,
}

pub fn coverage_cases() -> Vec<SimCase> {
    let mut cases = Vec::new();
    let noisy: [(f64, f64, f64, f64, NoisyScheme); 10] = [
        (
            1.0,
            2.0,
            0.5,
            0.0,
            Scheme1Slopes::new(1.0, 1.0).unwrap().into(),
        ),
        (
            1.0,
            2.0,
            1.0,
            0.1,
            Scheme1Slopes::new(1.0, 2.0).unwrap().into(),
        ),
        (
            0.5,
            1.0,
            0.7,
            0.3,
            Scheme1Slopes::new(2.0, 4.0).unwrap().into(),
        ),
        (
            2.0,
            5.0,
            0.3,
            0.2,
            Scheme1Slopes::new(1.5, 3.0).unwrap().into(),
        ),
        (
            3.0,
            4.0,
            0.9,
            0.5,
            Scheme1Slopes::new(1.0, 1.0).unwrap().into(),
        ),
        (
            1.0,
            2.0,
            0.5,
            0.1,
            Scheme2Constants::new(0.2, 0.4).unwrap().into(),
        ),
        (
            1.0,
            3.0,
            0.8,
            0.2,
            Scheme2Constants::new(0.1, 0.3).unwrap().into(),
        ),
        (
            2.0,
            5.0,
            0.5,
            0.1,
            Scheme2Constants::new(0.3, 0.6).unwrap().into(),
        ),
        (
            0.5,
            2.0,
            1.0,
            0.05,
            Scheme2Constants::new(0.1, 0.2).unwrap().into(),
        ),
        (
            4.0,
            8.0,
            0.6,
            0.2,
            Scheme2Constants::new(0.5, 1.0).unwrap().into(),
        ),
    ];
    for (lambda, mu, p, p_e, scheme) in noisy {
        let params = NoisyParams::new(lambda, mu, p, p_e).unwrap();
        let analytic = match scheme {
            NoisyScheme::Constant(s) => corollary1_average(&params, &s),
            NoisyScheme::Linear(c) => corollary2_average(&params, &c).unwrap(),
        };
        cases.push(SimCase {
            name: format!("noisy {lambda},{mu},{p},{p_e} {scheme:?}"),
            model: build_noisy_model(&params, scheme).unwrap(),
            analytic,
            pi: noisy_stationary(&params).as_slice().to_vec(),
        });
    }
    let collision = [
        (2.0, 2.0, 10.0, 10.0, 1.0, 1.0, 5.0),
        (1.0, 1.0, 10.0, 10.0, 0.5, 0.2, 1.0),
        (1.0, 2.0, 5.0, 4.0, 0.8, 0.2, 0.5),
        (0.5, 0.5, 3.0, 3.0, 1.0, 0.1, 0.3),
        (2.0, 1.0, 6.0, 8.0, 0.3, 0.3, 1.0),
        (1.5, 0.5, 5.0, 5.0, 0.6, 0.2, 0.8),
        (3.0, 3.0, 10.0, 10.0, 0.9, 0.5, 2.0),
        (1.0, 3.0, 4.0, 6.0, 0.7, 0.1, 0.4),
        (0.8, 1.2, 5.0, 2.0, 0.4, 0.1, 0.5),
        (2.0, 2.0, 8.0, 8.0, 0.2, 0.4, 1.5),
    ];
    for (lambda, lambda_c, mu, mu_c, p, k1, k2) in collision {
        let params = CollisionParams::new(lambda, lambda_c, mu, mu_c, p).unwrap();
        let consts = Scheme2Constants::new(k1, k2).unwrap();
        cases.push(SimCase {
            name: format!("collision {lambda},{lambda_c},{mu},{mu_c},{p} k={k1},{k2}"),
            model: build_collision_model(&params, &consts).unwrap(),
            analytic: corollary3_closed_form(&params, &consts).unwrap(),
            pi: collision_stationary(&params).as_slice().to_vec(),
        });
    }
    cases
}

pub struct SimRun {
    pub case: SimCase,
    pub result: SimulationResult,
    pub elapsed: Duration,
}

pub fn coverage_runs() -> Vec<SimRun> {
    coverage_cases()
        .into_iter()
        .enumerate()
        .map(|(i, case)| {
            let cfg = SimConfig {
                seed: 1000 + i as u64,
                max_events: 100_000,
                replications: 16,
                ..SimConfig::default()
            };
            let start = Instant::now();
            let result = replicate(&case.model, &cfg).unwrap();
            SimRun {
                case,
                result,
                elapsed: start.elapsed(),
            }
        })
        .collect()
}

// 8
pub fn coverage(runs: &[SimRun]) -> Outcome {
    let covered = runs
        .iter()
        .filter(|r| !r.result.diverged && r.result.covers(r.case.analytic))
        .count();
    let slowest = runs.iter().map(|r| r.elapsed).max().unwrap();
    let missed: Vec<&str> = runs
        .iter()
        .filter(|r| !r.result.covers(r.case.analytic))
        .map(|r| r.case.name.as_str())
        .collect();
    outcome(
        covered >= 17 && slowest < Duration::from_secs(10),
        format!(
            "{covered}/20 intervals cover (need 17), slowest set {}; missed: [{}]",
            ms(slowest),
            missed.join("; ")
        ),
    )
}

// 9
pub fn occupancy(runs: &[SimRun]) -> Outcome {
    let (mut total, mut outside) = (0, Vec::new());
    let mut worst: f64 = 0.0;
    for r in runs {
        for (q, &pi) in r.case.pi.iter().enumerate() {
            let (emp, se) = (r.result.occupancy[q], r.result.occupancy_se[q]);
            total += 1;
            let z = if se > 0.0 {
                (emp - pi).abs() / se
            } else if emp == pi {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
            let within = emp == pi || (emp - pi).abs() <= 3.0 * se;
            if !within {
                outside.push(format!("{} state {}", r.case.name, r.case.model.label(q)));
            }
        }
    }
    outcome(
        outside.is_empty(),
        format!(
            "{}/{total} state fractions outside 3 pooled SE, max |z| {worst:.2}{}",
            outside.len(),
            if outside.is_empty() {
                String::new()
            } else {
                format!(": [{}]", outside.join("; "))
            }
        ),
    )
}

fn divergence_runs(model: &ShsModel) -> Vec<SimulationResult> {
    Execution::default().map_indices(10, |i| {
        let cfg = SimConfig {
            seed: 2000 + i as u64,
            max_events: 10_000_000,
            ..SimConfig::default()
        };
        simulate(model, &cfg).unwrap()
    })
}

// 10
pub fn divergence() -> Outcome {
    let params = NoisyParams::new(1.0, 2.0, 0.5, 0.1).unwrap();
    let unstable = build_noisy_model(&params, Scheme2Constants::new(0.5, 1.9).unwrap()).unwrap();
    let stable = build_noisy_model(&params, Scheme2Constants::new(0.5, 1.0).unwrap()).unwrap();
    let caught = divergence_runs(&unstable)
        .iter()
        .filter(|r| r.diverged)
        .count();
    let false_alarms = divergence_runs(&stable)
        .iter()
        .filter(|r| r.diverged)
        .count();
    outcome(
        caught >= 9 && false_alarms == 0,
        format!(
            "det(C) = -3 runs diverged in {caught}/10 seeds (need 9); \
             det(C) = 0.6 runs diverged in {false_alarms}/10 (need 0); 1e7 events, threshold 1e12"
        ),
    )
}

fn sweep_csv(args: &[&str]) -> Vec<csv::StringRecord> {
    let mut argv = vec!["aoii", "sweep"];
    argv.extend_from_slice(args);
    let cli = Cli::try_parse_from(argv).expect("sweep arguments");
    let mut out = Vec::new();
    run(cli, &mut out).expect("sweep runs");
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(out.as_slice())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn column(rows: &[csv::StringRecord], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

fn grid(from: f64, step: f64, n: usize) -> String {
    (0..n)
        .map(|i| format!("{}", ((from + step * i as f64) * 1e6).round() / 1e6))
        .collect::<Vec<_>>()
        .join(",")
}

// 11
pub fn sweeps() -> Outcome {
    const ANALYTIC: usize = 4;
    const AOI: usize = 8;
    const AOI_PREEMPT: usize = 9;
    let mut problems = Vec::new();

    let lambdas = grid(0.05, 0.05, 19);
    for p in ["0.2", "0.6", "1"] {
        let rows = sweep_csv(&[
            "baselines",
            "--mu",
            "1",
            "--p",
            p,
            "--vary",
            "lambda",
            "--values",
            &lambdas,
        ]);
        if !increasing(&column(&rows, ANALYTIC)) {
            problems.push(format!("aoi sweep p={p}: AoII not increasing"));
        }
        for c in [AOI, AOI_PREEMPT] {
            let mut v = column(&rows, c);
            v.reverse();
            if !increasing(&v) {
                problems.push(format!("aoi sweep p={p}: column {c} not decreasing"));
            }
        }
    }

    let pes = grid(0.0, 0.05, 20);
    let mut limits = Vec::new();
    for rho in ["0.2", "0.5", "0.9"] {
        let lambda = format!("{}", rho.parse::<f64>().unwrap() * 10.0);
        for p in ["0.6", "0.8", "1"] {
            let rows = sweep_csv(&[
                "noisy-s2", "--lambda", &lambda, "--mu", "10", "--p", p, "--k1", "1", "--k2",
                "1.5", "--vary", "pe", "--values", &pes,
            ]);
            let ok = rows.iter().take_while(|r| &r[3] == "OK").count();
            let rest_unstable = rows[ok..].iter().all(|r| &r[3] == "UNSTABLE");
            if ok == rows.len() || !rest_unstable {
                problems.push(format!(
                    "noise sweep rho={rho} p={p}: no clean stability boundary"
                ));
            }
            if !increasing(&column(&rows[..ok], ANALYTIC)) {
                problems.push(format!(
                    "noise sweep rho={rho} p={p}: AoII not increasing in pe"
                ));
            }
            if p == "1" {
                limits.push(format!("rho={rho}: pe <= {}", &rows[ok - 1][2]));
            }
        }
    }

    let ps = grid(0.1, 0.1, 10);
    let by_rho: Vec<Vec<csv::StringRecord>> = ["2", "5", "9"]
        .iter()
        .map(|lambda| {
            sweep_csv(&[
                "collision-s3",
                "--lambda",
                lambda,
                "--lambdac",
                lambda,
                "--mu",
                "10",
                "--muc",
                "10",
                "--k1",
                "1",
                "--k2",
                "5",
                "--vary",
                "p",
                "--values",
                &ps,
            ])
        })
        .collect();
    if by_rho.iter().flatten().any(|r| &r[3] != "OK") {
        problems.push("collision sweep: unstable rows".into());
    } else {
        let cols: Vec<Vec<f64>> = by_rho.iter().map(|rows| column(rows, ANALYTIC)).collect();
        for i in 0..cols[0].len() {
            if !increasing(&[cols[0][i], cols[1][i], cols[2][i]]) {
                problems.push(format!(
                    "collision sweep: not increasing in rho at p={}",
                    &by_rho[0][i][2]
                ));
            }
        }
    }

    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "sweeps monotone; stable ranges at p=1: {}",
                limits.join(", ")
            )
        } else {
            problems.join("; ")
        },
    )
}

// 12
pub fn recurrence(runs: &[SimRun]) -> Outcome {
    let mut worst_rate: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    let mut bad = Vec::new();
    for r in runs {
        let [a, b] = &r.result.recurrence.halves;
        let d_rate = rel(a.rate(), b.rate());
        let d_mean = rel(a.mean(), b.mean());
        worst_rate = worst_rate.max(d_rate);
        worst_mean = worst_mean.max(d_mean);
        if !(d_rate < 0.05 && d_mean < 0.05 && a.count > 0 && b.count > 0) {
            bad.push(r.case.name.clone());
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "20 stable runs, max half-to-half change: rate {:.2}%, mean {:.2}% (tol 5%){}",
            100.0 * worst_rate,
            100.0 * worst_mean,
            if bad.is_empty() {
                String::new()
            } else {
                format!("; failing: [{}]", bad.join("; "))
            }
        ),
    )
}
