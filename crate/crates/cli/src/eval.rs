use std::fmt;

use aoii::baselines::{
    aoi_mm11, aoi_mm11_abandon, aoi_mm11_preempt, aoii_mm11_noiseless, aos_mm11_noiseless,
};
use aoii::collision::{build_collision_model, corollary3_closed_form, pi_determinant};
use aoii::noisy::{
    build_noisy_model, corollary1_average, corollary2_average, NoisyParams, Scheme1Slopes,
};
use aoii::shs::ShsModel;
use aoii::sim::{replicate_with, SimConfig, SimulationResult};
use aoii::stability::{theorem2_check, StabilityStatus};
use aoii::{Error, Execution, Result};

use crate::params::{Params, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Unstable,
    Diverged,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "OK",
            Status::Unstable => "UNSTABLE",
            Status::Diverged => "DIVERGED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineValues {
    pub aoi: f64,
    pub aoi_preempt: f64,
    pub aoi_abandon: f64,
    pub aos: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub status: Status,
    pub analytic: Option<f64>,
    /// det(C) for the noisy linear scheme, Π for the collision model.
    pub determinant: Option<f64>,
    pub detail: String,
    pub baselines: Option<BaselineValues>,
    pub sim: Option<SimulationResult>,
}

/// The simulation model of a scenario. The baseline scenario maps to the
/// noiseless queue with unit slopes.
pub fn scenario_model(scenario: Scenario, p: &Params) -> Result<ShsModel> {
    match scenario {
        Scenario::NoisyS1 => build_noisy_model(&p.noisy()?, p.slopes()?),
        Scenario::NoisyS2 => build_noisy_model(&p.noisy()?, p.consts()?),
        Scenario::CollisionS3 => build_collision_model(&p.collision()?, &p.consts()?),
        Scenario::Baselines => build_noisy_model(
            &NoisyParams::new(p.lambda, p.mu, p.p, 0.0)?,
            Scheme1Slopes::new(1.0, 1.0)?,
        ),
    }
}

/// Closed-form evaluation. Only invalid parameters are errors; failed
/// stability conditions give [`Status::Unstable`].
pub fn analytic(scenario: Scenario, p: &Params) -> Result<Evaluation> {
    let mut ev = Evaluation {
        status: Status::Ok,
        analytic: None,
        determinant: None,
        detail: String::new(),
        baselines: None,
        sim: None,
    };
    match scenario {
        Scenario::NoisyS1 => {
            ev.analytic = Some(corollary1_average(&p.noisy()?, &p.slopes()?));
        }
        Scenario::NoisyS2 => {
            let (params, consts) = (p.noisy()?, p.consts()?);
            let verdict = theorem2_check(&params, &consts);
            ev.determinant = verdict.determinant;
            ev.detail = verdict.detail;
            if verdict.status == StabilityStatus::Stable {
                ev.analytic = Some(corollary2_average(&params, &consts)?);
            } else {
                ev.status = Status::Unstable;
            }
        }
        Scenario::CollisionS3 => {
            let (params, consts) = (p.collision()?, p.consts()?);
            ev.determinant = Some(pi_determinant(&params, &consts));
            match corollary3_closed_form(&params, &consts) {
                Ok(v) => ev.analytic = Some(v),
                Err(Error::UnstableParameters(d)) => {
                    ev.status = Status::Unstable;
                    ev.detail = d;
                }
                Err(e) => return Err(e),
            }
        }
        Scenario::Baselines => {
            let b = p.baseline()?;
            ev.analytic = Some(aoii_mm11_noiseless(&b));
            ev.baselines = Some(BaselineValues {
                aoi: aoi_mm11(&b),
                aoi_preempt: aoi_mm11_preempt(&b),
                aoi_abandon: aoi_mm11_abandon(&b),
                aos: aos_mm11_noiseless(&b),
            });
        }
    }
    Ok(ev)
}

/// Closed form, plus a simulation when `sim` is given and the parameters are stable.
pub fn evaluate(
    scenario: Scenario,
    p: &Params,
    sim: Option<(&SimConfig, Execution)>,
) -> Result<Evaluation> {
    let mut ev = analytic(scenario, p)?;
    if let (Some((cfg, exec)), Status::Ok) = (sim, ev.status) {
        let r = replicate_with(&scenario_model(scenario, p)?, cfg, exec)?;
        if r.diverged {
            ev.status = Status::Diverged;
        }
        ev.sim = Some(r);
    }
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> Params {
        let mut p = Params::default();
        for &(k, v) in pairs {
            p.set(k, v).unwrap();
        }
        p
    }

    #[test]
    fn noisy_unstable_row() {
        let p = params(&[("pe", 0.1), ("k1", 0.5), ("k2", 1.9)]);
        let ev = analytic(Scenario::NoisyS2, &p).unwrap();
        assert_eq!(ev.status, Status::Unstable);
        assert_eq!(ev.analytic, None);
        assert!((ev.determinant.unwrap() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_row_has_extra_values() {
        let ev = analytic(Scenario::Baselines, &params(&[("p", 1.0)])).unwrap();
        assert!((ev.analytic.unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((ev.baselines.unwrap().aoi - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_are_errors() {
        assert!(analytic(Scenario::NoisyS1, &params(&[("pe", 1.0)])).is_err());
    }
}
