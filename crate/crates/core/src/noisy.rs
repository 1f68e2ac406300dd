//! Preemptive M/M/1/1 queue monitored over a noisy channel.
//!
//! Discrete states, in index order:
//!
//! | index | label | meaning                                        |
//! |-------|-------|------------------------------------------------|
//! | 0     | `0_c` | idle, monitor estimate correct                 |
//! | 1     | `1_m` | busy, estimate wrong, update in service fixes it |
//! | 2     | `0_e` | idle, estimate wrong                           |
//! | 3     | `1_u` | busy, estimate wrong, update in service is stale |
//!
//! Arrivals occur at rate `λ` and change the content with probability `p`.
//! A delivered update is decoded with probability `p_c = 1 − p_e`.

use crate::error::{Error, Result};
use crate::shs::{build_model, GrowthRate, ResetMap, ShsModel, StationaryDistribution, Transition};
use crate::stability::{theorem2_check, StabilityStatus};

pub const STATE_LABELS: [&str; 4] = ["0_c", "1_m", "0_e", "1_u"];
pub const S_0C: usize = 0;
pub const S_1M: usize = 1;
pub const S_0E: usize = 2;
pub const S_1U: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyParams {
    pub lambda: f64,
    pub mu: f64,
    pub p: f64,
    pub p_e: f64,
}

impl NoisyParams {
    pub fn new(lambda: f64, mu: f64, p: f64, p_e: f64) -> Result<Self> {
        let params = Self { lambda, mu, p, p_e };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_rate("lambda", self.lambda)?;
        check_rate("mu", self.mu)?;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!(
                "p must lie in [0, 1], got {}",
                self.p
            )));
        }
        if !(0.0..1.0).contains(&self.p_e) {
            return Err(Error::InvalidParameter(format!(
                "p_e must lie in [0, 1), got {}",
                self.p_e
            )));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn p_c(&self) -> f64 {
        1.0 - self.p_e
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn a(&self) -> f64 {
        self.p + self.p * self.rho() + self.p_c() * self.q()
    }

    /// Same parameters with every rate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            lambda: self.lambda * c,
            mu: self.mu * c,
            ..*self
        }
    }
}

pub(crate) fn check_rate(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Constant slopes for the two wrong-estimate levels: `1 ≤ m1 ≤ m2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scheme1Slopes {
    pub m1: f64,
    pub m2: f64,
}

impl Scheme1Slopes {
    pub fn new(m1: f64, m2: f64) -> Result<Self> {
        if !(m1 >= 1.0 && m2 >= m1 && m2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "slopes must satisfy 1 <= m1 <= m2 < inf, got m1={m1}, m2={m2}"
            )));
        }
        Ok(Self { m1, m2 })
    }
}

/// Linear growth constants: `0 < k1 ≤ k2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scheme2Constants {
    pub k1: f64,
    pub k2: f64,
}

impl Scheme2Constants {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        if !(k1 > 0.0 && k2 >= k1 && k2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "growth constants must satisfy 0 < k1 <= k2 < inf, got k1={k1}, k2={k2}"
            )));
        }
        Ok(Self { k1, k2 })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            k1: self.k1 * c,
            k2: self.k2 * c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoisyScheme {
    Constant(Scheme1Slopes),
    Linear(Scheme2Constants),
}

impl From<Scheme1Slopes> for NoisyScheme {
    fn from(s: Scheme1Slopes) -> Self {
        NoisyScheme::Constant(s)
    }
}

impl From<Scheme2Constants> for NoisyScheme {
    fn from(k: Scheme2Constants) -> Self {
        NoisyScheme::Linear(k)
    }
}

/// Builds the four-state model. Transitions whose rate is zero are dropped.
pub fn build_noisy_model(params: &NoisyParams, scheme: impl Into<NoisyScheme>) -> Result<ShsModel> {
    params.validate()?;
    let NoisyParams { lambda, mu, p, p_e } = *params;
    let (q, p_c) = (params.q(), params.p_c());
    let z = ResetMap::zeros(2);
    let keep = ResetMap::keep_last(2);
    let copy = ResetMap::broadcast_last(2);

    let rows = [
        (S_0C, S_0C, q * lambda, &z),
        (S_0C, S_1M, p * lambda, &keep),
        (S_1M, S_0C, p_c * mu, &z),
        (S_1M, S_1M, q * lambda, &keep),
        (S_1M, S_0E, p_e * mu, &copy),
        (S_1M, S_1U, p * lambda, &keep),
        (S_1U, S_0C, p_c * mu, &z),
        (S_1U, S_1U, lambda, &keep),
        (S_1U, S_0E, p_e * mu, &copy),
        (S_0E, S_1U, lambda, &keep),
    ];
    let transitions = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.2 > 0.0)
        .map(|(l, &(from, to, rate, reset))| Transition::new(l, from, to, rate, reset.clone()))
        .collect();

    let growth = match scheme.into() {
        NoisyScheme::Constant(s) => vec![
            GrowthRate::Zero,
            GrowthRate::Constant(1.0),
            GrowthRate::Constant(s.m1),
            GrowthRate::Constant(s.m2),
        ],
        NoisyScheme::Linear(k) => vec![
            GrowthRate::Zero,
            GrowthRate::Constant(1.0),
            GrowthRate::LinearInX(k.k1),
            GrowthRate::LinearInX(k.k2),
        ],
    };

    build_model(
        STATE_LABELS.iter().map(|s| s.to_string()).collect(),
        growth,
        transitions,
        2,
    )
}

/// Closed-form stationary distribution over `(0_c, 1_m, 0_e, 1_u)`.
pub fn noisy_stationary(params: &NoisyParams) -> StationaryDistribution {
    let NoisyParams { p, p_e, .. } = *params;
    let (p_c, rho, a) = (params.p_c(), params.rho(), params.a());
    let busy = a * (p + 1.0 / rho);
    StationaryDistribution::new(vec![
        p_c / a,
        p * p_c / busy,
        p * p_e / a,
        (p * p * rho + p * p_e) / busy,
    ])
}

/// Average AoII with constant slopes `m1`, `m2`.
pub fn corollary1_average(params: &NoisyParams, slopes: &Scheme1Slopes) -> f64 {
    let NoisyParams { lambda, p, p_e, .. } = *params;
    let (p_c, rho, a) = (params.p_c(), params.rho(), params.a());
    let Scheme1Slopes { m1, m2 } = *slopes;
    m1 * p * p_e * (1.0 + rho) / (a * lambda * p_c)
        + (p_e + rho) * (p * p_c + m2 * (p * p * rho + p * p_e))
            / (a * lambda * p_c * (p + 1.0 / rho))
}

/// Average AoII with unit slopes everywhere.
pub fn corollary1_simplified(params: &NoisyParams) -> f64 {
    let NoisyParams { mu, p, p_e, .. } = *params;
    let (p_c, rho, a) = (params.p_c(), params.rho(), params.a());
    p * (p_e / rho + 2.0 * p_e + rho) / (a * p_c * mu)
}

/// Average age of synchronization, i.e. the AoII with `p = 1`.
///
/// Returns `(general slopes, unit slopes)`. The input `p` is ignored.
pub fn aos_noisy(params: &NoisyParams, slopes: &Scheme1Slopes) -> (f64, f64) {
    let NoisyParams {
        lambda, mu, p_e, ..
    } = *params;
    let (p_c, rho) = (params.p_c(), params.rho());
    let Scheme1Slopes { m1, m2 } = *slopes;
    let general = m1 * p_e / (lambda * p_c)
        + (p_c * (p_e + rho) + m2 * (p_e + rho) * (p_e + rho))
            / (lambda * p_c * (1.0 + rho) * (1.0 + 1.0 / rho));
    let unit = (p_e / rho + 2.0 * p_e + rho) / (p_c * mu * (1.0 + rho));
    (general, unit)
}

/// Average AoII with linear growth constants `k1`, `k2`.
///
/// Fails with [`Error::UnstableParameters`] outside the stable region.
pub fn corollary2_average(params: &NoisyParams, consts: &Scheme2Constants) -> Result<f64> {
    let verdict = theorem2_check(params, consts);
    if verdict.status != StabilityStatus::Stable {
        return Err(Error::UnstableParameters(verdict.detail));
    }
    let NoisyParams { lambda, mu, p, p_e } = *params;
    let (p_c, rho, a) = (params.p_c(), params.rho(), params.a());
    let Scheme2Constants { k1, k2 } = *consts;
    let busy = p + 1.0 / rho;
    Ok(p * p_c * (p_e * mu + lambda - k1) * (p * lambda + mu - k2)
        / (a * lambda * busy * busy * ((lambda - k1) * (mu - k2) - lambda * mu * p_e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shs::{average_aoii, expected_age_vectors, stationary_distribution};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn engine(params: &NoisyParams, scheme: impl Into<NoisyScheme>) -> Result<f64> {
        let m = build_noisy_model(params, scheme)?;
        let pi = stationary_distribution(&m)?;
        Ok(average_aoii(&expected_age_vectors(&m, &pi)?))
    }

    fn unit() -> Scheme1Slopes {
        Scheme1Slopes::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn full_model_has_ten_transitions() {
        let m = build_noisy_model(&NoisyParams::new(1.0, 2.0, 0.5, 0.1).unwrap(), unit()).unwrap();
        assert_eq!(m.transitions().len(), 10);
        assert_eq!(m.recurrent_states(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn zero_rates_are_dropped() {
        let m = build_noisy_model(&NoisyParams::new(1.0, 2.0, 0.5, 0.0).unwrap(), unit()).unwrap();
        let ids: Vec<usize> = m.transitions().iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 5, 6, 7, 9]);
        assert!(!m.is_recurrent(S_0E));

        let m = build_noisy_model(&NoisyParams::new(1.0, 2.0, 1.0, 0.3).unwrap(), unit()).unwrap();
        assert!(m.transitions().iter().all(|t| t.id != 0 && t.id != 3));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(NoisyParams::new(0.0, 1.0, 0.5, 0.1).is_err());
        assert!(NoisyParams::new(1.0, 1.0, 1.5, 0.1).is_err());
        assert!(NoisyParams::new(1.0, 1.0, 0.5, 1.0).is_err());
        assert!(Scheme1Slopes::new(0.5, 1.0).is_err());
        assert!(Scheme1Slopes::new(2.0, 1.0).is_err());
        assert!(Scheme2Constants::new(0.0, 1.0).is_err());
        assert!(Scheme2Constants::new(2.0, 1.0).is_err());
    }

    #[test]
    fn stationary_examples() {
        let pi = noisy_stationary(&NoisyParams::new(1.0, 1.0, 1.0, 0.0).unwrap());
        assert_eq!(pi.as_slice(), &[0.5, 0.25, 0.0, 0.25]);

        let pi = noisy_stationary(&NoisyParams::new(1.0, 2.0, 0.0, 0.3).unwrap());
        assert_eq!(pi.as_slice(), &[1.0, 0.0, 0.0, 0.0]);

        let params = NoisyParams::new(1.0, 2.0, 0.5, 0.0).unwrap();
        let expect = [0.8, 0.16, 0.0, 0.04];
        for (got, e) in noisy_stationary(&params).as_slice().iter().zip(expect) {
            assert_relative_eq!(*got, e, max_relative = 1e-14);
        }
        let m = build_noisy_model(&params, unit()).unwrap();
        for (got, e) in stationary_distribution(&m)
            .unwrap()
            .as_slice()
            .iter()
            .zip(expect)
        {
            assert!((got - e).abs() < 1e-12);
        }
    }

    #[test]
    fn engine_at_p_zero_is_identically_zero() {
        let params = NoisyParams::new(1.0, 2.0, 0.0, 0.2).unwrap();
        let m = build_noisy_model(&params, unit()).unwrap();
        let pi = stationary_distribution(&m).unwrap();
        assert_eq!(pi.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        let v = expected_age_vectors(&m, &pi).unwrap();
        for q in 0..4 {
            assert_eq!(v.state(q), &[0.0, 0.0]);
        }
        let k = Scheme2Constants::new(0.5, 1.0).unwrap();
        assert_eq!(engine(&params, k).unwrap(), 0.0);
    }

    #[test]
    fn scheme1_worked_example() {
        let params = NoisyParams::new(1.0, 2.0, 0.5, 0.0).unwrap();
        assert_relative_eq!(engine(&params, unit()).unwrap(), 0.1, max_relative = 1e-13);
        assert_relative_eq!(corollary1_simplified(&params), 0.1, max_relative = 1e-15);
        assert_relative_eq!(
            corollary1_average(&params, &unit()),
            0.1,
            max_relative = 1e-15
        );
    }

    #[test]
    fn simplified_examples() {
        assert_eq!(
            corollary1_simplified(&NoisyParams::new(1.0, 2.0, 0.0, 0.3).unwrap()),
            0.0
        );
        assert_relative_eq!(
            corollary1_simplified(&NoisyParams::new(1.0, 2.0, 1.0, 0.0).unwrap()),
            1.0 / 6.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn aos_examples() {
        let (_, x) = aos_noisy(&NoisyParams::new(1.0, 2.0, 0.3, 0.0).unwrap(), &unit());
        assert_relative_eq!(x, 1.0 / 6.0, max_relative = 1e-15);
        let (g, x) = aos_noisy(&NoisyParams::new(1.0, 1.0, 0.3, 0.5).unwrap(), &unit());
        assert_relative_eq!(x, 2.5, max_relative = 1e-15);
        assert_relative_eq!(g, 2.5, max_relative = 1e-15);
    }

    #[test]
    fn scheme2_worked_examples() {
        let params = NoisyParams::new(1.0, 2.0, 0.5, 0.1).unwrap();
        let ok = Scheme2Constants::new(0.5, 1.0).unwrap();
        assert_relative_eq!(
            corollary2_average(&params, &ok).unwrap(),
            engine(&params, ok).unwrap(),
            max_relative = 1e-9
        );
        let bad = Scheme2Constants::new(0.5, 1.9).unwrap();
        assert!(matches!(
            corollary2_average(&params, &bad),
            Err(Error::UnstableParameters(_))
        ));
        assert!(matches!(engine(&params, bad), Err(Error::Unstable(_))));
        let zero = NoisyParams::new(1.0, 2.0, 0.0, 0.1).unwrap();
        assert_eq!(corollary2_average(&zero, &ok).unwrap(), 0.0);
    }

    #[test]
    fn constant_slopes_continuous_at_equal_slopes() {
        let params = NoisyParams::new(1.3, 3.1, 0.6, 0.25).unwrap();
        let at =
            |m1: f64, m2: f64| corollary1_average(&params, &Scheme1Slopes::new(m1, m2).unwrap());
        let base = at(2.0, 2.0);
        assert!((at(2.0, 2.0 + 1e-9) - base).abs() < 1e-8);
        assert!((at(2.0 - 1e-9, 2.0) - base).abs() < 1e-8);
    }

    fn noisy_params() -> impl Strategy<Value = NoisyParams> {
        (0.01f64..10.0, 0.01f64..1.0, 0.0f64..=1.0, 0.0f64..=0.9).prop_map(|(mu, r, p, p_e)| {
            NoisyParams {
                lambda: mu * r,
                mu,
                p: p.max(1e-3),
                p_e,
            }
        })
    }

    fn stable_linear() -> impl Strategy<Value = (NoisyParams, Scheme2Constants)> {
        (noisy_params(), 0.01f64..0.99, 0.01f64..0.99, 0.0f64..1.0).prop_filter_map(
            "unstable",
            |(params, a, b, pe_frac)| {
                let k1 = a * params.lambda;
                let k2 = k1 + b * (params.mu - k1);
                let consts = Scheme2Constants::new(k1, k2).ok()?;
                // Keep p_e inside the region where the determinant is positive.
                let pe_max = (params.lambda - k1) * (params.mu - k2) / (params.lambda * params.mu);
                let params = NoisyParams {
                    p_e: pe_frac * pe_max * 0.999,
                    ..params
                };
                (theorem2_check(&params, &consts).status == StabilityStatus::Stable)
                    .then_some((params, consts))
            },
        )
    }

    proptest! {
        #[test]
        fn stationary_matches_engine(params in noisy_params()) {
            let m = build_noisy_model(&params, unit()).unwrap();
            let pi = stationary_distribution(&m).unwrap();
            let closed = noisy_stationary(&params);
            for q in 0..4 {
                prop_assert!((pi.get(q) - closed.get(q)).abs() <= 1e-12);
            }
            prop_assert!(pi.balance_residual(&m) <= 1e-12);
        }

        #[test]
        fn scheme1_matches_engine(params in noisy_params(), m1 in 1.0f64..10.0, dm in 0.0f64..1.0) {
            let slopes = Scheme1Slopes::new(m1, m1 + dm * (10.0 - m1)).unwrap();
            let e = engine(&params, slopes).unwrap();
            let c = corollary1_average(&params, &slopes);
            prop_assert!((e - c).abs() <= 1e-9 * c.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn scheme2_matches_engine((params, consts) in stable_linear()) {
            let e = engine(&params, consts).unwrap();
            let c = corollary2_average(&params, &consts).unwrap();
            prop_assert!((e - c).abs() <= 1e-9 * c.abs());
        }

        #[test]
        fn scale_covariance((params, consts) in stable_linear(), c in 0.1f64..10.0) {
            let base = engine(&params, consts).unwrap();
            let scaled = engine(&params.scaled(c), consts.scaled(c)).unwrap();
            prop_assert!((scaled * c - base).abs() <= 1e-9 * base.abs());
        }

        #[test]
        fn scheme2_increasing_in_pe((params, consts) in stable_linear(), t in 0.01f64..0.99) {
            let lo = NoisyParams { p_e: params.p_e * t, ..params };
            let a = corollary2_average(&lo, &consts).unwrap();
            let b = corollary2_average(&params, &consts).unwrap();
            prop_assert!(params.p_e == 0.0 || b > a);
        }
    }
}
