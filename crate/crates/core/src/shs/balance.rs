use super::model::ShsModel;
use crate::error::{Error, Result};

/// Long-run fraction of time spent in each discrete state.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pi: Vec<f64>,
}

impl StationaryDistribution {
    pub fn new(pi: Vec<f64>) -> Self {
        Self { pi }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn get(&self, q: usize) -> f64 {
        self.pi[q]
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// Largest per-state violation of global balance, self-loops excluded.
    pub fn balance_residual(&self, model: &ShsModel) -> f64 {
        let s = model.num_states();
        let mut net = vec![0.0; s];
        for t in model.transitions().iter().filter(|t| !t.is_self_loop()) {
            let flow = self.pi[t.from] * t.rate;
            net[t.from] += flow;
            net[t.to] -= flow;
        }
        net.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Solves global balance with `Σπ = 1`.
///
/// Uses Grassmann–Taksar–Heyman elimination on the recurrent class, which
/// involves no subtractions and so returns nonnegative probabilities to full
/// relative accuracy. Transient states get exactly zero mass.
pub fn stationary_distribution(model: &ShsModel) -> Result<StationaryDistribution> {
    let rec = model.recurrent_states();
    let r = rec.len();
    let mut pos = vec![usize::MAX; model.num_states()];
    for (i, &q) in rec.iter().enumerate() {
        pos[q] = i;
    }

    let mut rates = vec![vec![0.0; r]; r];
    for t in model.transitions().iter().filter(|t| !t.is_self_loop()) {
        let (i, j) = (pos[t.from], pos[t.to]);
        if i != usize::MAX && j != usize::MAX {
            rates[i][j] += t.rate;
        }
    }

    let mut exit = vec![0.0; r];
    for k in (1..r).rev() {
        let s: f64 = rates[k][..k].iter().sum();
        if !(s > 0.0) {
            return Err(Error::SingularBalance);
        }
        exit[k] = s;
        for i in 0..k {
            let f = rates[i][k] / s;
            if f != 0.0 {
                for j in 0..k {
                    let add = f * rates[k][j];
                    rates[i][j] += add;
                }
            }
        }
    }

    let mut x = vec![0.0; r];
    x[0] = 1.0;
    for k in 1..r {
        x[k] = (0..k).map(|i| x[i] * rates[i][k]).sum::<f64>() / exit[k];
    }
    let total: f64 = x.iter().sum();

    let mut pi = vec![0.0; model.num_states()];
    for (i, &q) in rec.iter().enumerate() {
        pi[q] = x[i] / total;
    }
    Ok(StationaryDistribution { pi })
}
