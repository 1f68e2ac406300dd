//! Event-driven Monte Carlo of an [`ShsModel`].
//!
//! Each run starts in state 0 with a zero age vector. The holding time in a
//! state is exponential with the total exit rate (self-loops included), after
//! which one outgoing transition is picked with probability proportional to
//! its rate and its reset is applied. Ages are integrated exactly between
//! jumps, so the only error is statistical.
//!
//! Confidence intervals come from batch means over equal event counts, with a
//! ratio estimator since batches cover unequal amounts of time. Independent
//! replications use separate ChaCha12 streams whose seeds are derived by
//! [`stream_seed`].

mod flow;
mod stats;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::shs::ShsModel;

pub use flow::{advance, integrate_segment};
pub use stats::{mean_se, ratio_batch_means, t_975};

/// Identifies the generator and seed-splitting rule in output metadata.
pub const RNG_ID: &str = "chacha12+splitmix64";

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub max_events: u64,
    /// Fraction of events discarded before measuring, in `[0, 1)`.
    pub warmup_fraction: f64,
    pub batches: usize,
    /// A run stops and is flagged diverged when the monitored age exceeds this.
    pub divergence_threshold: f64,
    pub replications: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            max_events: 1_000_000,
            warmup_fraction: 0.1,
            batches: 20,
            divergence_threshold: 1e12,
            replications: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidParameter(s));
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad(format!(
                "warmup fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            ));
        }
        if self.batches < 10 {
            return bad(format!(
                "at least 10 batches are required, got {}",
                self.batches
            ));
        }
        if self.measured_events() < self.batches as u64 {
            return bad(format!(
                "{} events after warmup cannot fill {} batches",
                self.measured_events(),
                self.batches
            ));
        }
        if !(self.divergence_threshold > 0.0) {
            return bad(format!(
                "divergence threshold must be positive, got {}",
                self.divergence_threshold
            ));
        }
        if self.replications == 0 {
            return bad("at least one replication is required".into());
        }
        Ok(())
    }

    pub fn warmup_events(&self) -> u64 {
        (self.warmup_fraction * self.max_events as f64).floor() as u64
    }

    pub fn measured_events(&self) -> u64 {
        self.max_events - self.warmup_events().min(self.max_events)
    }
}

/// Returns to state 0 with a zero monitored age, split by run half.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RecurrencePart {
    /// Entries observed.
    pub count: u64,
    /// Completed intervals between consecutive entries.
    pub intervals: u64,
    pub interval_sum: f64,
    /// Simulated time covered.
    pub time: f64,
}

impl RecurrencePart {
    pub fn mean(&self) -> f64 {
        self.interval_sum / self.intervals as f64
    }

    /// Entries per unit of simulated time.
    pub fn rate(&self) -> f64 {
        self.count as f64 / self.time
    }

    fn merge(&mut self, o: &RecurrencePart) {
        self.count += o.count;
        self.intervals += o.intervals;
        self.interval_sum += o.interval_sum;
        self.time += o.time;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RecurrenceStats {
    pub halves: [RecurrencePart; 2],
}

impl RecurrenceStats {
    pub fn total(&self) -> RecurrencePart {
        let mut t = self.halves[0];
        t.merge(&self.halves[1]);
        t
    }

    pub fn count(&self) -> u64 {
        self.total().count
    }

    /// Mean time between returns, NaN if fewer than two returns were seen.
    pub fn mean(&self) -> f64 {
        self.total().mean()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// Time-average monitored age over the measured part of the run.
    pub time_average: f64,
    /// Half-width of the 95% confidence interval; NaN when undefined.
    pub ci_half_width95: f64,
    /// Simulated time over the whole run, warmup included.
    pub total_time: f64,
    /// Simulated time that was measured.
    pub measured_time: f64,
    pub events: u64,
    pub diverged: bool,
    /// Fraction of measured time spent in each state.
    pub occupancy: Vec<f64>,
    /// Standard error of each occupancy fraction, from batch means.
    pub occupancy_se: Vec<f64>,
    pub recurrence: RecurrenceStats,
    pub replications: usize,
}

impl SimulationResult {
    pub fn recurrence_mean(&self) -> f64 {
        self.recurrence.mean()
    }

    pub fn recurrence_count(&self) -> u64 {
        self.recurrence.count()
    }

    /// Whether `value` lies inside the 95% interval.
    pub fn covers(&self, value: f64) -> bool {
        (self.time_average - value).abs() <= self.ci_half_width95
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `i` derived from a master seed:
/// `splitmix64(seed ^ splitmix64(i))`.
pub fn stream_seed(seed: u64, i: u64) -> u64 {
    splitmix64(seed ^ splitmix64(i))
}

/// One run on stream 0 of `cfg.seed`. `cfg.replications` is ignored.
pub fn simulate(model: &ShsModel, cfg: &SimConfig) -> Result<SimulationResult> {
    cfg.validate()?;
    run(model, cfg, stream_seed(cfg.seed, 0))
}

/// Runs `cfg.replications` independent streams with the default execution.
pub fn replicate(model: &ShsModel, cfg: &SimConfig) -> Result<SimulationResult> {
    replicate_with(model, cfg, Execution::default())
}

/// Runs `cfg.replications` independent streams and pools them.
///
/// The mean is the average of replication means with a Student-t interval on
/// `R − 1` degrees of freedom. A single replication is returned unchanged.
pub fn replicate_with(
    model: &ShsModel,
    cfg: &SimConfig,
    exec: Execution,
) -> Result<SimulationResult> {
    cfg.validate()?;
    let runs: Vec<SimulationResult> = exec
        .map_indices(cfg.replications, |i| {
            run(model, cfg, stream_seed(cfg.seed, i as u64))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(pool(runs))
}

fn pool(mut runs: Vec<SimulationResult>) -> SimulationResult {
    if runs.len() == 1 {
        return runs.pop().expect("one run");
    }
    let r = runs.len();
    let means: Vec<f64> = runs.iter().map(|s| s.time_average).collect();
    let (time_average, se) = mean_se(&means);
    let states = runs[0].occupancy.len();
    let mut occupancy = Vec::with_capacity(states);
    let mut occupancy_se = Vec::with_capacity(states);
    for q in 0..states {
        let xs: Vec<f64> = runs.iter().map(|s| s.occupancy[q]).collect();
        occupancy.push(mean_se(&xs).0);
        // Within-run batch variances pooled over the independent replications.
        let var: f64 = runs.iter().map(|s| s.occupancy_se[q].powi(2)).sum();
        occupancy_se.push(var.sqrt() / r as f64);
    }
    let mut recurrence = RecurrenceStats::default();
    for s in &runs {
        for h in 0..2 {
            recurrence.halves[h].merge(&s.recurrence.halves[h]);
        }
    }
    SimulationResult {
        time_average,
        ci_half_width95: t_975(r - 1) * se,
        total_time: runs.iter().map(|s| s.total_time).sum(),
        measured_time: runs.iter().map(|s| s.measured_time).sum(),
        events: runs.iter().map(|s| s.events).sum(),
        diverged: runs.iter().any(|s| s.diverged),
        occupancy,
        occupancy_se,
        recurrence,
        replications: r,
    }
}

/// Outgoing transitions of one state, flattened for sampling.
struct Exits {
    total: f64,
    cumulative: Vec<f64>,
    to: Vec<usize>,
    reset: Vec<usize>,
}

fn run(model: &ShsModel, cfg: &SimConfig, seed: u64) -> Result<SimulationResult> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let s = model.num_states();
    let n = model.dimension();
    let last = n - 1;

    let exits: Vec<Exits> = (0..s)
        .map(|q| {
            let mut acc = 0.0;
            let mut e = Exits {
                total: model.total_out_rate(q),
                cumulative: Vec::new(),
                to: Vec::new(),
                reset: Vec::new(),
            };
            for &l in model.outgoing(q) {
                let t = &model.transitions()[l];
                acc += t.rate;
                e.cumulative.push(acc);
                e.to.push(t.to);
                e.reset.push(l);
            }
            e
        })
        .collect();
    let growth: Vec<_> = (0..s).map(|q| model.growth(q)).collect();

    let warmup = cfg.warmup_events();
    let measured = cfg.measured_events();
    let batches = cfg.batches;
    let half_at = warmup + measured / 2;

    let mut batch_area = vec![0.0; batches];
    let mut batch_time = vec![0.0; batches];
    let mut batch_state_time = vec![0.0; batches * s];
    let mut recurrence = RecurrenceStats::default();
    let mut last_entry: Option<f64> = None;

    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut q = 0usize;
    let mut clock = 0.0;
    let mut run_area = 0.0;
    let mut events = 0u64;
    let mut diverged = false;

    while events < cfg.max_events {
        let ex = &exits[q];
        if ex.cumulative.is_empty() {
            return Err(Error::NoOutgoingTransitions { state: q });
        }
        let u: f64 = rng.sample(Exp1);
        let dt = u / ex.total;
        let area = flow::advance(&mut x, growth[q], dt);
        clock += dt;
        run_area += area;

        let measuring = events >= warmup;
        let half = usize::from(events >= half_at);
        if measuring {
            let b = ((events - warmup) as u128 * batches as u128 / measured as u128) as usize;
            batch_area[b] += area;
            batch_time[b] += dt;
            batch_state_time[b * s + q] += dt;
            recurrence.halves[half].time += dt;
        }
        events += 1;

        if !(x[last] <= cfg.divergence_threshold) {
            diverged = true;
            break;
        }

        let pick = rng.random::<f64>() * ex.total;
        let k = ex
            .cumulative
            .iter()
            .position(|&c| pick < c)
            .unwrap_or(ex.cumulative.len() - 1);
        let reset = &model.transitions()[ex.reset[k]].reset;
        reset.apply_into(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
        let from = q;
        q = ex.to[k];

        if measuring && q == 0 && from != 0 && x[last] == 0.0 {
            let part = &mut recurrence.halves[half];
            part.count += 1;
            if let Some(prev) = last_entry {
                part.intervals += 1;
                part.interval_sum += clock - prev;
            }
            last_entry = Some(clock);
        }
    }

    let measured_time: f64 = batch_time.iter().sum();
    let (time_average, se) = if diverged {
        let avg = if measured_time > 0.0 {
            batch_area.iter().sum::<f64>() / measured_time
        } else {
            run_area / clock
        };
        (avg, f64::NAN)
    } else {
        ratio_batch_means(&batch_area, &batch_time)
    };

    let mut occupancy = Vec::with_capacity(s);
    let mut occupancy_se = Vec::with_capacity(s);
    for st in 0..s {
        let per_batch: Vec<f64> = (0..batches).map(|b| batch_state_time[b * s + st]).collect();
        let (f, e) = if diverged {
            (per_batch.iter().sum::<f64>() / measured_time, f64::NAN)
        } else {
            ratio_batch_means(&per_batch, &batch_time)
        };
        occupancy.push(f);
        occupancy_se.push(e);
    }

    Ok(SimulationResult {
        time_average,
        ci_half_width95: t_975(batches - 1) * se,
        total_time: clock,
        measured_time,
        events,
        diverged,
        occupancy,
        occupancy_se,
        recurrence,
        replications: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisy::{build_noisy_model, NoisyParams, Scheme1Slopes, Scheme2Constants};

    fn cfg(events: u64, seed: u64) -> SimConfig {
        SimConfig {
            seed,
            max_events: events,
            ..SimConfig::default()
        }
    }

    fn aos_model() -> ShsModel {
        build_noisy_model(
            &NoisyParams::new(1.0, 2.0, 1.0, 0.0).unwrap(),
            Scheme1Slopes::new(1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn no_content_change_means_zero_age() {
        let m = build_noisy_model(
            &NoisyParams::new(1.0, 2.0, 0.0, 0.3).unwrap(),
            Scheme2Constants::new(0.5, 1.0).unwrap(),
        )
        .unwrap();
        let r = simulate(&m, &cfg(10_000, 3)).unwrap();
        assert_eq!(r.time_average, 0.0);
        assert!(!r.diverged);
        assert_eq!(r.occupancy[0], 1.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let m = aos_model();
        let a = simulate(&m, &cfg(50_000, 11)).unwrap();
        let b = simulate(&m, &cfg(50_000, 11)).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, &cfg(50_000, 12)).unwrap();
        assert_ne!(a.time_average, c.time_average);
    }

    #[test]
    fn single_replication_is_simulate() {
        let m = aos_model();
        let c = cfg(20_000, 5);
        assert_eq!(simulate(&m, &c).unwrap(), replicate(&m, &c).unwrap());
    }

    #[test]
    fn execution_strategies_agree() {
        let m = aos_model();
        let c = SimConfig {
            replications: 6,
            ..cfg(20_000, 9)
        };
        assert_eq!(
            replicate_with(&m, &c, Execution::Sequential).unwrap(),
            replicate_with(&m, &c, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn aos_example_is_covered() {
        let r = simulate(&aos_model(), &cfg(1_000_000, 2024)).unwrap();
        assert!(!r.diverged);
        assert!(
            r.covers(1.0 / 6.0),
            "{} ± {}",
            r.time_average,
            r.ci_half_width95
        );
        assert!(r.recurrence_count() > 1000);
    }

    #[test]
    fn rejects_bad_config() {
        let m = aos_model();
        for c in [
            SimConfig {
                batches: 5,
                ..SimConfig::default()
            },
            SimConfig {
                warmup_fraction: 1.0,
                ..SimConfig::default()
            },
            SimConfig {
                replications: 0,
                ..SimConfig::default()
            },
            SimConfig {
                max_events: 5,
                ..SimConfig::default()
            },
        ] {
            assert!(matches!(simulate(&m, &c), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn stream_seeds_differ() {
        let seeds: Vec<u64> = (0..100).map(|i| stream_seed(42, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }
}
