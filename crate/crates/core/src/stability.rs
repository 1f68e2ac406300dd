//! Stability verdicts for the linear-growth schemes.
//!
//! With exponential age growth the expected ages are finite only if resets
//! outpace growth. The noisy model has an exact criterion, the collision model
//! a sufficient one, and [`generic_check`] works on any model numerically.

use std::fmt;

use crate::collision::{self, CollisionParams};
use crate::noisy::{NoisyParams, Scheme2Constants};
use crate::shs::{expected_age_vectors, stationary_distribution, system_matrix, ShsModel};

/// Relative tolerance for treating the collision parameters as symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityStatus {
    Stable,
    Unstable,
    /// A sufficient condition holds.
    StableSufficient,
    /// A sufficient condition fails; the system may still be stable.
    Unknown,
}

impl fmt::Display for StabilityStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityStatus::Stable => "Stable",
            StabilityStatus::Unstable => "Unstable",
            StabilityStatus::StableSufficient => "StableSufficient",
            StabilityStatus::Unknown => "Unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub status: StabilityStatus,
    pub detail: String,
    /// The determinant the verdict rests on, when there is one.
    pub determinant: Option<f64>,
}

impl StabilityVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(
            self.status,
            StabilityStatus::Stable | StabilityStatus::StableSufficient
        )
    }
}

/// Exact verdict for the noisy model with linear growth.
///
/// Stable iff `det(C) = 1 − p_e·λ·μ / ((k1 − λ)(k2 − μ)) > 0`,
/// `0 < k1 < λ < μ` and `0 < k1 < k2 < μ`.
pub fn theorem2_check(params: &NoisyParams, consts: &Scheme2Constants) -> StabilityVerdict {
    let NoisyParams {
        lambda, mu, p_e, ..
    } = *params;
    let Scheme2Constants { k1, k2 } = *consts;
    let det = noisy_det_c(params, consts);

    let mut failed = Vec::new();
    if !(det > 0.0) {
        failed.push(format!("det(C) > 0 violated (det(C) = {det})"));
    }
    if !(0.0 < k1 && k1 < lambda) {
        failed.push("0 < k1 < lambda violated".to_string());
    }
    if !(lambda < mu) {
        failed.push("lambda < mu violated".to_string());
    }
    if !(k1 < k2) {
        failed.push("k1 < k2 violated".to_string());
    }
    if !(k2 < mu) {
        failed.push("k2 < mu violated".to_string());
    }
    let _ = p_e;

    if failed.is_empty() {
        StabilityVerdict {
            status: StabilityStatus::Stable,
            detail: format!("all conditions hold (det(C) = {det})"),
            determinant: Some(det),
        }
    } else {
        StabilityVerdict {
            status: StabilityStatus::Unstable,
            detail: failed.join("; "),
            determinant: Some(det),
        }
    }
}

/// `det(C) = 1 − p_e·λ·μ / ((k1 − λ)(k2 − μ))`.
pub fn noisy_det_c(params: &NoisyParams, consts: &Scheme2Constants) -> f64 {
    let NoisyParams {
        lambda, mu, p_e, ..
    } = *params;
    1.0 - p_e * lambda * mu / ((consts.k1 - lambda) * (consts.k2 - mu))
}

/// Upper limit on `k2` in the symmetric collision case
/// (`λ = λ_c`, `μ = μ_c`): `min{μ, N/D}` with
/// `N = 2k1μ² + 4k1λμ − 2k1²μ − 2λμ²` and `D = (3λ + μ)k1 − k1² − λμ − 2λ²`.
pub fn symmetric_k2_bound(lambda: f64, mu: f64, k1: f64) -> f64 {
    let num =
        2.0 * k1 * mu * mu + 4.0 * k1 * lambda * mu - 2.0 * k1 * k1 * mu - 2.0 * lambda * mu * mu;
    mu.min(num / collision::symmetric_d(lambda, mu, k1))
}

fn is_symmetric(params: &CollisionParams) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= SYMMETRY_TOLERANCE * a.abs().max(b.abs());
    close(params.lambda, params.lambda_c) && close(params.mu, params.mu_c)
}

/// Sufficient verdict for the collision model. Never returns `Unstable`.
pub fn theorem3_check(params: &CollisionParams, consts: &Scheme2Constants) -> StabilityVerdict {
    let CollisionParams { lambda, mu, .. } = *params;
    let Scheme2Constants { k1, k2 } = *consts;
    let pi = collision::pi_determinant(params, consts);

    let mut failed = Vec::new();
    if is_symmetric(params) {
        let bound = symmetric_k2_bound(lambda, mu, k1);
        if !(0.0 < k1 && k1 < lambda) {
            failed.push("k1 < lambda violated".to_string());
        }
        if !(lambda < mu) {
            failed.push("lambda < mu violated".to_string());
        }
        if !(k2 < bound) {
            failed.push(format!("k2 < {bound} violated"));
        }
        return verdict3(failed, "symmetric", pi);
    }

    let det_d = collision::det_d(params, consts);
    if !(det_d > 0.0) {
        failed.push(format!("det(D) > 0 violated (det(D) = {det_d})"));
    }
    if !(0.0 < k1 && k1 < lambda) {
        failed.push("k1 < lambda violated".to_string());
    }
    if !(k1 < k2) {
        failed.push("k1 < k2 violated".to_string());
    }
    if !(k2 < mu) {
        failed.push("k2 < mu violated".to_string());
    }
    verdict3(failed, "general", pi)
}

fn verdict3(failed: Vec<String>, case: &str, pi: f64) -> StabilityVerdict {
    if failed.is_empty() {
        StabilityVerdict {
            status: StabilityStatus::StableSufficient,
            detail: format!("{case} case: sufficient conditions hold (Pi = {pi})"),
            determinant: Some(pi),
        }
    } else {
        StabilityVerdict {
            status: StabilityStatus::Unknown,
            detail: format!("{case} case: {}", failed.join("; ")),
            determinant: Some(pi),
        }
    }
}

/// Numeric verdict from the assembled age system: stable iff it is
/// nonsingular and its solution is nonnegative.
///
/// The reported determinant is that of the reduced system after dividing each
/// row by its diagonal.
pub fn generic_check(model: &ShsModel) -> StabilityVerdict {
    let pi = match stationary_distribution(model) {
        Ok(pi) => pi,
        Err(e) => {
            return StabilityVerdict {
                status: StabilityStatus::Unstable,
                detail: e.to_string(),
                determinant: None,
            }
        }
    };
    let det = system_matrix(model, &pi)
        .without_pinned()
        .normalized()
        .determinant();
    let determinant = det.is_finite().then_some(det);
    match expected_age_vectors(model, &pi) {
        Ok(_) => StabilityVerdict {
            status: StabilityStatus::Stable,
            detail: "age system is invertible with a nonnegative solution".into(),
            determinant,
        },
        Err(e) => StabilityVerdict {
            status: StabilityStatus::Unstable,
            detail: e.to_string(),
            determinant,
        },
    }
}
