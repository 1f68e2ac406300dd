//! Two preemptive M/M/1/1 sources sharing a collision channel.
//!
//! The tracked source transmits at rate `λ`/`μ`; the contender at
//! `λ_c`/`μ_c`. When both are in service the first to finish is lost and the
//! survivor is decoded. Discrete states, in index order:
//!
//! | index | label | tracked source             | contender |
//! |-------|-------|----------------------------|-----------|
//! | 0     | `0_c` | idle, estimate correct     | idle      |
//! | 1     | `0_e` | idle, estimate wrong       | idle      |
//! | 2     | `1_c` | idle, estimate correct     | busy      |
//! | 3     | `1_m` | busy, update fixes estimate | idle     |
//! | 4     | `1_u` | busy, update is stale      | idle      |
//! | 5     | `1_e` | idle, estimate wrong       | busy      |
//! | 6     | `2_m` | busy, update fixes estimate | busy     |
//! | 7     | `2_u` | busy, update is stale      | busy      |

use crate::error::{Error, Result};
use crate::linalg::{solve_dense, DenseMatrix};
use crate::noisy::{check_rate, Scheme2Constants};
use crate::shs::{
    build_model, GrowthRate, ResetMap, ShsModel, StationaryDistribution, Transition,
    NEGATIVE_TOLERANCE,
};
use crate::stability::{generic_check, theorem3_check};

pub const STATE_LABELS: [&str; 8] = ["0_c", "0_e", "1_c", "1_m", "1_u", "1_e", "2_m", "2_u"];
pub const S_0C: usize = 0;
pub const S_0E: usize = 1;
pub const S_1C: usize = 2;
pub const S_1M: usize = 3;
pub const S_1U: usize = 4;
pub const S_1E: usize = 5;
pub const S_2M: usize = 6;
pub const S_2U: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionParams {
    pub lambda: f64,
    pub lambda_c: f64,
    pub mu: f64,
    pub mu_c: f64,
    pub p: f64,
}

impl CollisionParams {
    pub fn new(lambda: f64, lambda_c: f64, mu: f64, mu_c: f64, p: f64) -> Result<Self> {
        let params = Self {
            lambda,
            lambda_c,
            mu,
            mu_c,
            p,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_rate("lambda", self.lambda)?;
        check_rate("lambda_c", self.lambda_c)?;
        check_rate("mu", self.mu)?;
        check_rate("mu_c", self.mu_c)?;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!(
                "p must lie in [0, 1], got {}",
                self.p
            )));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    /// `m = λ + λ_c + μ + μ_c`.
    pub fn m(&self) -> f64 {
        self.lambda + self.lambda_c + self.mu + self.mu_c
    }

    /// `b = p(mλ + λ_c·μ)(m − qλ) + m·μ·μ_c`.
    pub fn b(&self) -> f64 {
        let m = self.m();
        self.p * (m * self.lambda + self.lambda_c * self.mu) * (m - self.q() * self.lambda)
            + m * self.mu * self.mu_c
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            lambda: self.lambda * c,
            lambda_c: self.lambda_c * c,
            mu: self.mu * c,
            mu_c: self.mu_c * c,
            p: self.p,
        }
    }
}

/// Quantities shared by the closed-form average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionAuxiliary {
    /// Expected AoII in state `1_m`.
    pub c1: f64,
    /// Expected AoII in state `2_m`.
    pub c2: f64,
    pub a: f64,
    pub b: f64,
    /// Numerator of `det(D)`; see [`pi_determinant`].
    pub pi: f64,
}

/// Builds the eight-state model. Transitions whose rate is zero are dropped;
/// composite self-loop rates are kept as single transitions.
pub fn build_collision_model(
    params: &CollisionParams,
    consts: &Scheme2Constants,
) -> Result<ShsModel> {
    params.validate()?;
    let CollisionParams {
        lambda: l,
        lambda_c: lc,
        mu,
        mu_c: mc,
        p,
    } = *params;
    let q = params.q();
    let z = ResetMap::zeros(2);
    let keep = ResetMap::keep_last(2);
    let copy = ResetMap::broadcast_last(2);

    let rows = [
        (S_0C, S_0C, q * l, &z),
        (S_0C, S_1C, lc, &z),
        (S_0C, S_1M, p * l, &keep),
        (S_0E, S_1E, lc, &copy),
        (S_0E, S_1U, l, &keep),
        (S_1C, S_0C, mc, &z),
        (S_1C, S_1C, lc + q * l, &z),
        (S_1C, S_2M, p * l, &copy),
        (S_1M, S_0C, mu, &z),
        (S_1M, S_1M, q * l, &keep),
        (S_1M, S_2M, lc, &copy),
        (S_1M, S_1U, p * l, &keep),
        (S_1U, S_0C, mu, &z),
        (S_1U, S_1U, l, &keep),
        (S_1U, S_2U, lc, &copy),
        (S_1E, S_0E, mc, &copy),
        (S_1E, S_1E, lc, &copy),
        (S_1E, S_2U, l, &copy),
        (S_2M, S_1M, mc, &keep),
        (S_2M, S_1E, mu, &copy),
        (S_2M, S_2M, lc + q * l, &copy),
        (S_2M, S_2U, p * l, &copy),
        (S_2U, S_1U, mc, &keep),
        (S_2U, S_1E, mu, &copy),
        (S_2U, S_2U, lc + l, &copy),
    ];
    let transitions = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.2 > 0.0)
        .map(|(id, &(from, to, rate, reset))| Transition::new(id, from, to, rate, reset.clone()))
        .collect();

    let Scheme2Constants { k1, k2 } = *consts;
    let mut growth = vec![GrowthRate::LinearInX(k1); 8];
    growth[S_0C] = GrowthRate::Zero;
    growth[S_1C] = GrowthRate::Zero;
    growth[S_1M] = GrowthRate::Constant(1.0);
    growth[S_2M] = GrowthRate::Constant(1.0);
    growth[S_2U] = GrowthRate::LinearInX(k2);

    build_model(
        STATE_LABELS.iter().map(|s| s.to_string()).collect(),
        growth,
        transitions,
        2,
    )
}

/// Closed-form stationary distribution in [`STATE_LABELS`] order.
///
/// The mass of `2_u` is the complement of the others.
pub fn collision_stationary(params: &CollisionParams) -> StationaryDistribution {
    let CollisionParams {
        lambda: l,
        lambda_c: lc,
        mu,
        mu_c: mc,
        p,
    } = *params;
    let q = params.q();
    let m = params.m();
    let mq = m - q * l;
    let d = params.b() * (lc + mc);
    let d2 = d * (p * l + mu) * mq;

    let p0c = m * mu * mc * (p * l + mc) / d;
    let p1c = m * lc * mu * mc / d;
    let p0e = p * lc * mu * mc * mq / d;
    let p1e = p * lc * mu * (lc + l) * mq / d;
    let p1m = m * p * l * mu * mc * ((p * l + mu + mc) * (p * l + mc) + lc * mc) / d2;
    let p2m = (m * p * lc * l * mu * mc * mq + m * p * p * lc * l * l * mu * mc) / d2;
    let p1u = m * p * l * mc * ((p * l * (p * l + lc + mc) + lc * mu) * mq + p * lc * l * mu) / d2;
    let p2u = 1.0 - (p0c + p0e + p1c + p1m + p1u + p1e + p2m);

    StationaryDistribution::new(vec![p0c, p0e, p1c, p1m, p1u, p1e, p2m, p2u])
}

/// Expected AoII `(c1, c2)` in states `1_m` and `2_m`.
pub fn matched_constants(params: &CollisionParams) -> (f64, f64) {
    let CollisionParams {
        lambda: l,
        lambda_c: lc,
        mu,
        mu_c: mc,
        p,
    } = *params;
    let pi = collision_stationary(params);
    let (p1m, p2m) = (pi.get(S_1M), pi.get(S_2M));
    let den = (p * l + lc + mu) * (p * l + mu + mc) - lc * mc;
    let c1 = ((p * l + mu + mc) * p1m + mc * p2m) / den;
    let c2 = ((p * l + lc + mu) * p2m + lc * p1m) / den;
    (c1, c2)
}

/// Polynomial `Π` with `det(D) = Π / [(λ+μ_c−k1)(λ+λ_c−k1)(λ_c+μ−k1)(μ+μ_c−k2)]`.
pub fn pi_determinant(params: &CollisionParams, consts: &Scheme2Constants) -> f64 {
    let CollisionParams {
        lambda: l,
        lambda_c: lc,
        mu,
        mu_c: mc,
        ..
    } = *params;
    let Scheme2Constants { k1, k2 } = *consts;
    let m = params.m();
    l * mu * mu * mc
        + (l * mu * mc - k2 * l * mu - k2 * l * lc) * (l + lc + mc)
        + (k2 - mu - mc) * k1 * k1 * k1
        + (mu * m + (mu + mc) * (lc + mc - k2) + 2.0 * l * (mc - k2) - 2.0 * k2 * lc) * k1 * k1
        - ((lc + mu + mc - k2) * (l * mu + l * mc + lc * mu + mu * mc) + l * (l + mu) * (mc - k2)
            - k2 * lc * (3.0 * l + lc + mc))
            * k1
}

/// Product of the four row scales that turn `Π` into `det(D)`.
pub fn det_d_denominator(params: &CollisionParams, consts: &Scheme2Constants) -> f64 {
    let CollisionParams {
        lambda: l,
        lambda_c: lc,
        mu,
        mu_c: mc,
        ..
    } = *params;
    let Scheme2Constants { k1, k2 } = *consts;
    (l + mc - k1) * (l + lc - k1) * (lc + mu - k1) * (mu + mc - k2)
}

pub fn det_d(params: &CollisionParams, consts: &Scheme2Constants) -> f64 {
    pi_determinant(params, consts) / det_d_denominator(params, consts)
}

/// `A = (k2 − pλ − μ − μ_c)k1 − (λ_c + μ)k2 + (λ_c + μ + μ_c)μ + (λ_c + μ)pλ`.
pub fn constant_a(params: &CollisionParams, consts: &Scheme2Constants) -> f64 {
    let CollisionParams {
        lambda: l,
        lambda_c: lc,
        mu,
        mu_c: mc,
        p,
    } = *params;
    let Scheme2Constants { k1, k2 } = *consts;
    (k2 - p * l - mu - mc) * k1 - (lc + mu) * k2 + (lc + mu + mc) * mu + (lc + mu) * p * l
}

/// `B = k1² − (2λ + λ_c + μ_c)k1 + mλ`.
pub fn constant_b(params: &CollisionParams, consts: &Scheme2Constants) -> f64 {
    let CollisionParams {
        lambda: l,
        lambda_c: lc,
        mu_c: mc,
        ..
    } = *params;
    let k1 = consts.k1;
    k1 * k1 - (2.0 * l + lc + mc) * k1 + params.m() * l
}

/// Symmetric-case constant `C`, with `Π = (λ + μ − k1)·C` when `λ = λ_c`, `μ = μ_c`.
pub fn symmetric_c(lambda: f64, mu: f64, consts: &Scheme2Constants) -> f64 {
    let (l, Scheme2Constants { k1, k2 }) = (lambda, *consts);
    2.0 * mu * mu * (l - k1) + 2.0 * k1 * k1 * mu
        - (4.0 * l - k2) * k1 * mu
        - (2.0 * l - k1) * (l - k1) * k2
        - k2 * l * mu
}

/// Symmetric-case parabola `D = −k1² + (3λ + μ)k1 − λμ − 2λ²`.
pub fn symmetric_d(lambda: f64, mu: f64, k1: f64) -> f64 {
    -k1 * k1 + (3.0 * lambda + mu) * k1 - lambda * mu - 2.0 * lambda * lambda
}

pub fn collision_auxiliary(
    params: &CollisionParams,
    consts: &Scheme2Constants,
) -> CollisionAuxiliary {
    let (c1, c2) = matched_constants(params);
    CollisionAuxiliary {
        c1,
        c2,
        a: constant_a(params, consts),
        b: constant_b(params, consts),
        pi: pi_determinant(params, consts),
    }
}

fn require_stable(params: &CollisionParams, consts: &Scheme2Constants) -> Result<()> {
    let sufficient = theorem3_check(params, consts);
    if sufficient.is_stable() {
        return Ok(());
    }
    let generic = generic_check(&build_collision_model(params, consts)?);
    if generic.is_stable() {
        Ok(())
    } else {
        Err(Error::UnstableParameters(format!(
            "{}; age system: {}",
            sufficient.detail, generic.detail
        )))
    }
}

/// Closed-form average AoII: `c1 + c2` plus the four linear-growth states.
pub fn corollary3_closed_form(params: &CollisionParams, consts: &Scheme2Constants) -> Result<f64> {
    params.validate()?;
    require_stable(params, consts)?;
    let CollisionParams {
        lambda: l,
        lambda_c: lc,
        mu,
        mu_c: mc,
        p,
    } = *params;
    let Scheme2Constants { k1, k2 } = *consts;
    let CollisionAuxiliary { c1, c2, a, b, pi } = collision_auxiliary(params, consts);
    let m = params.m();
    let g = lc + mu - k1;

    let v0e = c2 * mu * mc * a + c1 * p * l * lc * mu * mc;
    let v1e = c2 * mu * (l + lc - k1) * a + c1 * p * l * lc * mu * (l + lc - k1);
    let v1u = c2 * l * mu * mc * (m - k1 - k2)
        + (c2 * p * l * mc + c1 * p * l * lc * mc / g) * b
        + c1 * p * l * pi / g;
    let v2u = c2 * l * mu * (lc * (m - 2.0 * k1) + (l - k1) * (mu - k1))
        + p * l * (l - k1) * (l + lc + mc - k1) * (c1 * lc + c2 * g);

    Ok(c1 + c2 + (v0e + v1e + v1u + v2u) / pi)
}

/// Average AoII by solving the 4×4 system for states `0_e`, `1_e`, `1_u`, `2_u`.
pub fn corollary3_via_system(params: &CollisionParams, consts: &Scheme2Constants) -> Result<f64> {
    params.validate()?;
    let CollisionParams {
        lambda: l,
        lambda_c: lc,
        mu,
        mu_c: mc,
        p,
    } = *params;
    let Scheme2Constants { k1, k2 } = *consts;
    let (c1, c2) = matched_constants(params);

    let d = DenseMatrix::from_rows(&[
        [1.0, mc / (k1 - l - lc), 0.0, 0.0],
        [lc / (k1 - l - mc), 1.0, 0.0, mu / (k1 - l - mc)],
        [l / (k1 - lc - mu), 0.0, 1.0, mc / (k1 - lc - mu)],
        [0.0, l / (k2 - mu - mc), lc / (k2 - mu - mc), 1.0],
    ]);
    let b3 = [
        0.0,
        mu * c2 / (l + mc - k1),
        p * l * c1 / (lc + mu - k1),
        p * l * c2 / (mu + mc - k2),
    ];
    let v = solve_dense(&d, &b3)
        .map_err(|e| Error::UnstableParameters(format!("matrix D is singular ({e})")))?;
    if let Some(bad) = v
        .iter()
        .find(|&&x| !x.is_finite() || x < NEGATIVE_TOLERANCE)
    {
        return Err(Error::UnstableParameters(format!(
            "matrix D yields a negative expected age ({bad})"
        )));
    }
    Ok(c1 + c2 + v.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shs::{
        average_aoii, expected_age_vectors, stationary_distribution, system_matrix, Unknown,
    };
    use crate::stability::{theorem3_check, StabilityStatus};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn k(k1: f64, k2: f64) -> Scheme2Constants {
        Scheme2Constants::new(k1, k2).unwrap()
    }

    fn fig8() -> (CollisionParams, Scheme2Constants) {
        (
            CollisionParams::new(2.0, 2.0, 10.0, 10.0, 1.0).unwrap(),
            k(1.0, 5.0),
        )
    }

    fn engine(params: &CollisionParams, consts: &Scheme2Constants) -> Result<f64> {
        let m = build_collision_model(params, consts)?;
        let pi = stationary_distribution(&m)?;
        Ok(average_aoii(&expected_age_vectors(&m, &pi)?))
    }

    #[test]
    fn model_shape() {
        let full = CollisionParams::new(1.0, 2.0, 3.0, 4.0, 0.5).unwrap();
        let m = build_collision_model(&full, &k(0.5, 1.0)).unwrap();
        assert_eq!(m.transitions().len(), 25);
        assert_eq!(m.recurrent_states().len(), 8);

        let (p1, consts) = fig8();
        let m = build_collision_model(&p1, &consts).unwrap();
        assert_eq!(m.transitions().len(), 23);
        assert!(m.transitions().iter().all(|t| t.id != 0 && t.id != 9));
        let t6 = m.transitions().iter().find(|t| t.id == 6).unwrap();
        assert_eq!(t6.rate, 2.0);
    }

    #[test]
    fn pi_corrected_value() {
        let (params, consts) = fig8();
        assert_relative_eq!(
            pi_determinant(&params, &consts),
            825.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn pi_matches_numeric_det_d() {
        let params = CollisionParams::new(1.3, 0.7, 6.0, 4.5, 0.4).unwrap();
        let consts = k(0.6, 2.2);
        let m = build_collision_model(&params, &consts).unwrap();
        let pi = stationary_distribution(&m).unwrap();
        let (c1, c2) = matched_constants(&params);
        let keep: Vec<Unknown> = [S_0E, S_1E, S_1U, S_2U, S_1M, S_2M]
            .iter()
            .map(|&s| Unknown::new(s, 1))
            .collect();
        let d = system_matrix(&m, &pi)
            .restrict(&keep)
            .substitute(&[(Unknown::new(S_1M, 1), c1), (Unknown::new(S_2M, 1), c2)])
            .normalized();
        assert_eq!(d.size(), 4);
        assert_relative_eq!(
            d.determinant(),
            det_d(&params, &consts),
            max_relative = 1e-10
        );
        // The reduced system reproduces the 4x4 route exactly.
        let v = d.solve().unwrap();
        assert_relative_eq!(
            c1 + c2 + v.iter().sum::<f64>(),
            corollary3_via_system(&params, &consts).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn symmetric_pi_factorizes() {
        let (l, mu) = (1.7, 8.0);
        let params = CollisionParams::new(l, l, mu, mu, 0.3).unwrap();
        let consts = k(0.9, 4.0);
        assert_relative_eq!(
            pi_determinant(&params, &consts),
            (l + mu - 0.9) * symmetric_c(l, mu, &consts),
            max_relative = 1e-12
        );
    }

    #[test]
    fn three_way_at_symmetric_point() {
        let (params, consts) = fig8();
        let e = engine(&params, &consts).unwrap();
        assert_relative_eq!(
            corollary3_closed_form(&params, &consts).unwrap(),
            e,
            max_relative = 1e-8
        );
        assert_relative_eq!(
            corollary3_via_system(&params, &consts).unwrap(),
            e,
            max_relative = 1e-8
        );
    }

    #[test]
    fn p_zero_gives_zero() {
        let params = CollisionParams::new(2.0, 2.0, 10.0, 10.0, 0.0).unwrap();
        let consts = k(1.0, 5.0);
        assert_eq!(matched_constants(&params), (0.0, 0.0));
        assert_eq!(corollary3_closed_form(&params, &consts).unwrap(), 0.0);
        assert_eq!(corollary3_via_system(&params, &consts).unwrap(), 0.0);
        assert_eq!(engine(&params, &consts).unwrap(), 0.0);
    }

    #[test]
    fn small_p_concentrates_on_contender_chain() {
        let params = CollisionParams::new(1.5, 2.0, 4.0, 3.0, 1e-12).unwrap();
        let pi = collision_stationary(&params);
        assert!((pi.get(S_0C) - 3.0 / 5.0).abs() < 1e-9);
        assert!((pi.get(S_1C) - 2.0 / 5.0).abs() < 1e-9);
    }

    #[test]
    fn past_symmetric_bound_is_unstable() {
        // λ = 9, μ = 10, k1 = 1 has a symmetric k2 bound of about 5.83.
        let params = CollisionParams::new(9.0, 9.0, 10.0, 10.0, 0.5).unwrap();
        let bound = crate::stability::symmetric_k2_bound(9.0, 10.0, 1.0);
        assert!(bound < 10.0);
        assert!(corollary3_via_system(&params, &k(1.0, bound * 0.99)).is_ok());
        assert!(matches!(
            corollary3_via_system(&params, &k(1.0, bound * 1.01)),
            Err(Error::UnstableParameters(_))
        ));
    }

    #[test]
    fn utilization_monotonicity_spot_check() {
        for p in [0.2, 0.5, 1.0] {
            let vals: Vec<f64> = [0.2, 0.5, 0.9]
                .iter()
                .map(|rho| {
                    let params =
                        CollisionParams::new(rho * 10.0, rho * 10.0, 10.0, 10.0, p).unwrap();
                    corollary3_closed_form(&params, &k(1.0, 5.0)).unwrap()
                })
                .collect();
            assert!(vals[0] < vals[1] && vals[1] < vals[2], "p = {p}: {vals:?}");
        }
    }

    fn stable_tuple() -> impl Strategy<Value = (CollisionParams, Scheme2Constants)> {
        (
            0.1f64..10.0,
            0.05f64..0.95,
            0.1f64..10.0,
            0.1f64..10.0,
            0.01f64..=1.0,
            0.05f64..0.95,
            0.05f64..0.95,
        )
            .prop_filter_map("not sufficient", |(mu, r, lc, mc, p, a, b)| {
                let params = CollisionParams::new(mu * r, lc, mu, mc, p).ok()?;
                let k1 = a * params.lambda;
                let consts = Scheme2Constants::new(k1, k1 + b * (mu - k1)).ok()?;
                (theorem3_check(&params, &consts).status == StabilityStatus::StableSufficient)
                    .then_some((params, consts))
            })
    }

    proptest! {
        #[test]
        fn stationary_matches_engine(
            l in 0.1f64..10.0, lc in 0.1f64..10.0, mu in 0.1f64..10.0, mc in 0.1f64..10.0, p in 0.0f64..=1.0,
        ) {
            let params = CollisionParams::new(l, lc, mu, mc, p).unwrap();
            let m = build_collision_model(&params, &k(0.1, 0.1)).unwrap();
            let num = stationary_distribution(&m).unwrap();
            let closed = collision_stationary(&params);
            for s in 0..8 {
                prop_assert!((num.get(s) - closed.get(s)).abs() <= 1e-10);
                prop_assert!(closed.get(s) >= -1e-15);
            }
        }

        #[test]
        fn three_way_agreement((params, consts) in stable_tuple()) {
            let e = engine(&params, &consts).unwrap();
            let c = corollary3_closed_form(&params, &consts).unwrap();
            let s = corollary3_via_system(&params, &consts).unwrap();
            prop_assert!((c - e).abs() <= 1e-8 * e.abs());
            prop_assert!((s - e).abs() <= 1e-8 * e.abs());
        }

        #[test]
        fn auxiliary_positivity((params, consts) in stable_tuple()) {
            let aux = collision_auxiliary(&params, &consts);
            prop_assert!(aux.c1 > 0.0 && aux.c2 > 0.0);
            if params.lambda < params.mu {
                prop_assert!(aux.a > 0.0 && aux.b > 0.0);
            }
        }

        #[test]
        fn scale_covariance((params, consts) in stable_tuple(), c in 0.1f64..10.0) {
            let base = engine(&params, &consts).unwrap();
            let scaled = engine(&params.scaled(c), &consts.scaled(c)).unwrap();
            prop_assert!((scaled * c - base).abs() <= 1e-9 * base);
        }
    }
}
