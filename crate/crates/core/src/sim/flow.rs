use crate::shs::GrowthRate;

/// Below this value of `k·dt` the linear-growth area uses a two-term series.
const SERIES_CUTOFF: f64 = 1e-8;

/// Advances `x` by `dt` under `growth` and returns the exact integral of the
/// last component over the segment.
pub fn advance(x: &mut [f64], growth: GrowthRate, dt: f64) -> f64 {
    let last = x.len() - 1;
    let x2 = x[last];
    match growth {
        GrowthRate::Zero => x2 * dt,
        GrowthRate::Constant(m) => {
            for v in x.iter_mut() {
                *v += m * dt;
            }
            x2 * dt + 0.5 * m * dt * dt
        }
        GrowthRate::LinearInX(k) => {
            let kdt = k * dt;
            if x.iter().all(|&v| v == 0.0) {
                return 0.0;
            }
            let g = kdt.exp();
            for v in x.iter_mut() {
                *v *= g;
            }
            if kdt < SERIES_CUTOFF {
                x2 * dt * (1.0 + 0.5 * kdt)
            } else {
                x2 * kdt.exp_m1() / k
            }
        }
    }
}

/// Age vector after `dt` and the integral of its last component.
pub fn integrate_segment(x: &[f64], growth: GrowthRate, dt: f64) -> (Vec<f64>, f64) {
    let mut out = x.to_vec();
    let area = advance(&mut out, growth, dt);
    (out, area)
}
