use std::fmt;

use clap::{Args, ValueEnum};

use aoii::baselines::BaselineParams;
use aoii::collision::CollisionParams;
use aoii::noisy::{NoisyParams, Scheme1Slopes, Scheme2Constants};
use aoii::sim::SimConfig;
use aoii::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Noisy channel, constant growth slopes m1 and m2.
    #[value(name = "noisy-s1")]
    NoisyS1,
    /// Noisy channel, linear growth constants k1 and k2.
    #[value(name = "noisy-s2")]
    NoisyS2,
    /// Two sources over a collision channel, linear growth constants k1 and k2.
    #[value(name = "collision-s3")]
    CollisionS3,
    /// Classical M/M/1/1 age formulas.
    #[value(name = "baselines")]
    Baselines,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::NoisyS1 => "noisy-s1",
            Scenario::NoisyS2 => "noisy-s2",
            Scenario::CollisionS3 => "collision-s3",
            Scenario::Baselines => "baselines",
        })
    }
}

/// Model parameters. Anything left out takes its default.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Arrival rate of the tracked source [default: 1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Service rate of the tracked source [default: 2]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Probability that an arrival changes the content [default: 0.5]
    #[arg(long)]
    pub p: Option<f64>,
    /// Decoding error probability [default: 0]
    #[arg(long)]
    pub pe: Option<f64>,
    /// Arrival rate of the contending source [default: lambda]
    #[arg(long)]
    pub lambdac: Option<f64>,
    /// Service rate of the contending source [default: mu]
    #[arg(long)]
    pub muc: Option<f64>,
    /// Growth slope while idle with a wrong estimate [default: 1]
    #[arg(long)]
    pub m1: Option<f64>,
    /// Growth slope while serving a stale update [default: 1]
    #[arg(long)]
    pub m2: Option<f64>,
    /// Lower linear growth constant [default: 0.5]
    #[arg(long)]
    pub k1: Option<f64>,
    /// Upper linear growth constant [default: 1]
    #[arg(long)]
    pub k2: Option<f64>,
    /// Abandonment rate for the baseline formulas [default: 0]
    #[arg(long)]
    pub alpha: Option<f64>,
}

pub const PARAM_NAMES: [&str; 12] = [
    "lambda", "mu", "p", "pe", "lambdac", "muc", "m1", "m2", "k1", "k2", "alpha", "rho",
];

/// Fully resolved parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub lambda: f64,
    pub mu: f64,
    pub p: f64,
    pub pe: f64,
    lambdac: Option<f64>,
    muc: Option<f64>,
    pub m1: f64,
    pub m2: f64,
    pub k1: f64,
    pub k2: f64,
    pub alpha: f64,
}

impl Default for Params {
    fn default() -> Self {
        ParamArgs::default().resolve()
    }
}

impl ParamArgs {
    pub fn resolve(&self) -> Params {
        Params {
            lambda: self.lambda.unwrap_or(1.0),
            mu: self.mu.unwrap_or(2.0),
            p: self.p.unwrap_or(0.5),
            pe: self.pe.unwrap_or(0.0),
            lambdac: self.lambdac,
            muc: self.muc,
            m1: self.m1.unwrap_or(1.0),
            m2: self.m2.unwrap_or(1.0),
            k1: self.k1.unwrap_or(0.5),
            k2: self.k2.unwrap_or(1.0),
            alpha: self.alpha.unwrap_or(0.0),
        }
    }

    /// Whether a parameter was given explicitly on the command line.
    pub fn is_set(&self, name: &str) -> bool {
        match name {
            "lambda" => self.lambda.is_some(),
            "mu" => self.mu.is_some(),
            "p" => self.p.is_some(),
            "pe" => self.pe.is_some(),
            "lambdac" => self.lambdac.is_some(),
            "muc" => self.muc.is_some(),
            "m1" => self.m1.is_some(),
            "m2" => self.m2.is_some(),
            "k1" => self.k1.is_some(),
            "k2" => self.k2.is_some(),
            "alpha" => self.alpha.is_some(),
            "rho" => self.lambda.is_some(),
            _ => false,
        }
    }
}

impl Params {
    pub fn lambdac(&self) -> f64 {
        self.lambdac.unwrap_or(self.lambda)
    }

    pub fn muc(&self) -> f64 {
        self.muc.unwrap_or(self.mu)
    }

    /// Sets one parameter by name. `rho` sets `lambda = rho·mu`, and the
    /// contender follows unless its rates were given explicitly.
    pub fn set(&mut self, name: &str, v: f64) -> std::result::Result<(), String> {
        match name {
            "lambda" => self.lambda = v,
            "mu" => self.mu = v,
            "p" => self.p = v,
            "pe" => self.pe = v,
            "lambdac" => self.lambdac = Some(v),
            "muc" => self.muc = Some(v),
            "m1" => self.m1 = v,
            "m2" => self.m2 = v,
            "k1" => self.k1 = v,
            "k2" => self.k2 = v,
            "alpha" => self.alpha = v,
            "rho" => {
                self.lambda = v * self.mu;
                if let (Some(_), Some(muc)) = (self.lambdac, self.muc) {
                    self.lambdac = Some(v * muc);
                }
            }
            _ => {
                return Err(format!(
                    "unknown parameter '{name}' (expected one of {})",
                    PARAM_NAMES.join(", ")
                ))
            }
        }
        Ok(())
    }

    pub fn noisy(&self) -> Result<NoisyParams> {
        NoisyParams::new(self.lambda, self.mu, self.p, self.pe)
    }

    pub fn slopes(&self) -> Result<Scheme1Slopes> {
        Scheme1Slopes::new(self.m1, self.m2)
    }

    pub fn consts(&self) -> Result<Scheme2Constants> {
        Scheme2Constants::new(self.k1, self.k2)
    }

    pub fn collision(&self) -> Result<CollisionParams> {
        CollisionParams::new(self.lambda, self.lambdac(), self.mu, self.muc(), self.p)
    }

    pub fn baseline(&self) -> Result<BaselineParams> {
        BaselineParams::new(self.lambda, self.mu, self.alpha, self.p)
    }

    /// `name=value` pairs of the parameters a scenario uses, in a fixed order.
    pub fn describe(&self, scenario: Scenario) -> Vec<(&'static str, f64)> {
        let mut v = vec![("lambda", self.lambda), ("mu", self.mu), ("p", self.p)];
        match scenario {
            Scenario::NoisyS1 => v.extend([("pe", self.pe), ("m1", self.m1), ("m2", self.m2)]),
            Scenario::NoisyS2 => v.extend([("pe", self.pe), ("k1", self.k1), ("k2", self.k2)]),
            Scenario::CollisionS3 => v.extend([
                ("lambdac", self.lambdac()),
                ("muc", self.muc()),
                ("k1", self.k1),
                ("k2", self.k2),
            ]),
            Scenario::Baselines => v.push(("alpha", self.alpha)),
        }
        v
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Master seed; replication i uses a stream derived from it
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Events per replication
    #[arg(long, default_value_t = 1_000_000)]
    pub events: u64,
    /// Independent replications
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Fraction of events discarded as warmup
    #[arg(long, default_value_t = 0.1)]
    pub warmup: f64,
    /// Batches for the batch-means interval
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
    /// Age above which a run is declared diverged
    #[arg(long, default_value_t = 1e12)]
    pub threshold: f64,
    /// Run replications on one thread
    #[arg(long)]
    pub sequential: bool,
}

impl Default for SimArgs {
    fn default() -> Self {
        let c = SimConfig::default();
        Self {
            seed: c.seed,
            events: c.max_events,
            reps: c.replications,
            warmup: c.warmup_fraction,
            batches: c.batches,
            threshold: c.divergence_threshold,
            sequential: false,
        }
    }
}

impl SimArgs {
    pub fn config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            max_events: self.events,
            warmup_fraction: self.warmup,
            batches: self.batches,
            divergence_threshold: self.threshold,
            replications: self.reps,
        }
    }

    pub fn execution(&self) -> aoii::Execution {
        if self.sequential {
            aoii::Execution::Sequential
        } else {
            aoii::Execution::default()
        }
    }
}
