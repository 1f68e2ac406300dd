//! Classical age formulas for the M/M/1/1 family and how they compare with
//! the noiseless AoII of the preemptive queue.

use crate::error::{Error, Result};
use crate::noisy::check_rate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    pub lambda: f64,
    pub mu: f64,
    /// Abandonment rate of the update in service.
    pub alpha: f64,
    pub p: f64,
}

impl BaselineParams {
    pub fn new(lambda: f64, mu: f64, alpha: f64, p: f64) -> Result<Self> {
        check_rate("lambda", lambda)?;
        check_rate("mu", mu)?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be nonnegative and finite, got {alpha}"
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "p must lie in [0, 1], got {p}"
            )));
        }
        Ok(Self {
            lambda,
            mu,
            alpha,
            p,
        })
    }
}

/// AoI of the M/M/1/1 queue that blocks arrivals while busy.
pub fn aoi_mm11(b: &BaselineParams) -> f64 {
    1.0 / b.lambda + 2.0 / b.mu - 1.0 / (b.lambda + b.mu)
}

/// AoI of the M/M/1/1 queue where arrivals preempt the update in service.
pub fn aoi_mm11_preempt(b: &BaselineParams) -> f64 {
    1.0 / b.lambda + 1.0 / b.mu
}

/// AoI of the blocking M/M/1/1 queue whose update in service is abandoned at rate `α`.
pub fn aoi_mm11_abandon(b: &BaselineParams) -> f64 {
    let BaselineParams {
        lambda: l,
        mu,
        alpha: a,
        ..
    } = *b;
    1.0 / l + 1.0 / mu + l / ((mu + a) * (l + mu + a)) + a / (l * mu)
}

/// AoII of the preemptive queue over an error-free channel: `pλ / ((pλ + μ)μ)`.
pub fn aoii_mm11_noiseless(b: &BaselineParams) -> f64 {
    let pl = b.p * b.lambda;
    pl / ((pl + b.mu) * b.mu)
}

/// Age of synchronization of the same queue: `λ / ((λ + μ)μ)`.
pub fn aos_mm11_noiseless(b: &BaselineParams) -> f64 {
    b.lambda / ((b.lambda + b.mu) * b.mu)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    pub aoi: f64,
    pub aoi_preempt: f64,
    pub aoi_abandon: f64,
    pub aoii: f64,
    pub aos: f64,
    /// `Δ = Δ^p + x_AoS` to within 4 ulps.
    pub identity: bool,
    /// `Δ^p > 4·x_AoS ≥ 4·x_a`.
    pub preempt_dominates: bool,
    /// `Δ > 5·x_AoS`.
    pub blocking_dominates: bool,
    /// `x_AoS < 1/μ`.
    pub aos_below_generate_at_will: bool,
    /// `x_AoS < 1/(2μ)`.
    pub aos_below_half_service: bool,
    /// `Δ^p > 2/μ`.
    pub preempt_above_two_services: bool,
}

impl ComparisonReport {
    pub fn all_hold(&self) -> bool {
        self.identity
            && self.preempt_dominates
            && self.blocking_dominates
            && self.aos_below_generate_at_will
            && self.aos_below_half_service
            && self.preempt_above_two_services
    }
}

/// Distance between two finite doubles of the same sign, in units in the last place.
pub fn ulp_distance(a: f64, b: f64) -> u64 {
    if a == b {
        return 0;
    }
    if a.is_sign_negative() != b.is_sign_negative() {
        return u64::MAX;
    }
    a.to_bits().abs_diff(b.to_bits())
}

/// Evaluates all five formulas and the relations between them.
///
/// Fails with [`Error::DomainViolation`] unless `λ < μ`.
pub fn comparison_report(b: &BaselineParams) -> Result<ComparisonReport> {
    if !(b.lambda < b.mu) {
        return Err(Error::DomainViolation(format!(
            "the comparison requires lambda < mu, got lambda={}, mu={}",
            b.lambda, b.mu
        )));
    }
    let aoi = aoi_mm11(b);
    let aoi_preempt = aoi_mm11_preempt(b);
    let aoii = aoii_mm11_noiseless(b);
    let aos = aos_mm11_noiseless(b);
    Ok(ComparisonReport {
        aoi,
        aoi_preempt,
        aoi_abandon: aoi_mm11_abandon(b),
        aoii,
        aos,
        identity: ulp_distance(aoi, aoi_preempt + aos) <= 4,
        preempt_dominates: aoi_preempt > 4.0 * aos && 4.0 * aos >= 4.0 * aoii,
        blocking_dominates: aoi > 5.0 * aos,
        aos_below_generate_at_will: aos < 1.0 / b.mu,
        aos_below_half_service: aos < 1.0 / (2.0 * b.mu),
        preempt_above_two_services: aoi_preempt > 2.0 / b.mu,
    })
}
