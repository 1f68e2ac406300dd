use super::balance::StationaryDistribution;
use super::model::{GrowthRate, ShsModel};
use crate::error::{Error, Result};
use crate::linalg::{solve_dense, DenseMatrix};

/// Solved components below this are treated as a sign of instability.
pub const NEGATIVE_TOLERANCE: f64 = -1e-9;

/// Expected age vector per discrete state.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeVectorSet {
    n: usize,
    v: Vec<Vec<f64>>,
}

impl AgeVectorSet {
    pub fn new(v: Vec<Vec<f64>>) -> Self {
        let n = v.first().map_or(0, Vec::len);
        Self { n, v }
    }

    pub fn zeros(states: usize, n: usize) -> Self {
        Self {
            n,
            v: vec![vec![0.0; n]; states],
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn num_states(&self) -> usize {
        self.v.len()
    }

    pub fn state(&self, q: usize) -> &[f64] {
        &self.v[q]
    }

    /// Component `j` of every state.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.v.iter().map(|v| v[j]).collect()
    }
}

/// Sum over states of the last (monitored) age component.
pub fn average_aoii(ages: &AgeVectorSet) -> f64 {
    if ages.n == 0 {
        return 0.0;
    }
    ages.v.iter().map(|v| v[ages.n - 1]).sum()
}

/// Identifies one scalar unknown `v^component_state`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Unknown {
    pub state: usize,
    pub component: usize,
}

impl Unknown {
    pub fn new(state: usize, component: usize) -> Self {
        Self { state, component }
    }
}

/// Assembled expected-age linear system `M·v = rhs`.
///
/// Rows and columns are indexed by [`Unknown`]s. Unknowns whose rows have a
/// zero right-hand side and couple only to each other are reported by
/// [`pinned`](Self::pinned); their solution is exactly zero.
#[derive(Debug, Clone)]
pub struct SystemMatrix {
    matrix: DenseMatrix,
    rhs: Vec<f64>,
    unknowns: Vec<Unknown>,
    pinned: Vec<bool>,
}

impl SystemMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn unknowns(&self) -> &[Unknown] {
        &self.unknowns
    }

    pub fn size(&self) -> usize {
        self.unknowns.len()
    }

    pub fn index_of(&self, u: Unknown) -> Option<usize> {
        self.unknowns.iter().position(|&w| w == u)
    }

    pub fn pinned(&self) -> Vec<Unknown> {
        self.select(|i| self.pinned[i])
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        solve_dense(&self.matrix, &self.rhs)
    }

    /// The system with the pinned unknowns removed.
    pub fn without_pinned(&self) -> SystemMatrix {
        self.restrict(&self.select(|i| !self.pinned[i]))
    }

    /// The block coupling pinned unknowns to each other.
    pub fn pinned_block(&self) -> SystemMatrix {
        self.restrict(&self.pinned())
    }

    /// Principal subsystem on `keep`, in the given order. Couplings to dropped
    /// unknowns are discarded, so this is exact only when those are zero or
    /// the kept block is decoupled from them.
    pub fn restrict(&self, keep: &[Unknown]) -> SystemMatrix {
        let idx: Vec<usize> = keep
            .iter()
            .map(|&u| self.index_of(u).expect("unknown not in system"))
            .collect();
        SystemMatrix {
            matrix: self.matrix.principal(&idx),
            rhs: idx.iter().map(|&i| self.rhs[i]).collect(),
            unknowns: keep.to_vec(),
            pinned: idx.iter().map(|&i| self.pinned[i]).collect(),
        }
    }

    /// Moves known unknowns to the right-hand side and removes them.
    pub fn substitute(&self, known: &[(Unknown, f64)]) -> SystemMatrix {
        let mut rhs = self.rhs.clone();
        let known_idx: Vec<(usize, f64)> = known
            .iter()
            .map(|&(u, val)| (self.index_of(u).expect("unknown not in system"), val))
            .collect();
        for (r, b) in rhs.iter_mut().enumerate() {
            for &(c, val) in &known_idx {
                *b -= self.matrix[(r, c)] * val;
            }
        }
        let keep: Vec<Unknown> = (0..self.size())
            .filter(|i| !known_idx.iter().any(|&(c, _)| c == *i))
            .map(|i| self.unknowns[i])
            .collect();
        let mut out = SystemMatrix {
            rhs,
            ..self.clone()
        };
        out = out.restrict(&keep);
        out
    }

    /// Divides every row by its diagonal entry.
    pub fn normalized(&self) -> SystemMatrix {
        let mut out = self.clone();
        for r in 0..out.size() {
            let d = out.matrix[(r, r)];
            for v in out.matrix.row_mut(r) {
                *v /= d;
            }
            out.rhs[r] /= d;
        }
        out
    }

    fn select(&self, f: impl Fn(usize) -> bool) -> Vec<Unknown> {
        (0..self.size())
            .filter(|&i| f(i))
            .map(|i| self.unknowns[i])
            .collect()
    }
}

/// Assembles the full expected-age system over every (state, component) pair.
///
/// Row `(q, j)` reads
/// `(Σ_out λ_l − k_q)·v^j_q − Σ_in λ_l·Σ_i v^i_{from}·A_l[i][j] = m_q·π_q`,
/// with self-loops on both sides.
pub fn system_matrix(model: &ShsModel, pi: &StationaryDistribution) -> SystemMatrix {
    let s = model.num_states();
    let n = model.dimension();
    let size = s * n;
    let row = |q: usize, j: usize| q * n + j;

    let mut matrix = DenseMatrix::zeros(size, size);
    let mut rhs = vec![0.0; size];
    for q in 0..s {
        let g = model.growth(q);
        let diag = model.total_out_rate(q) - g.linear_constant();
        for j in 0..n {
            matrix[(row(q, j), row(q, j))] += diag;
            rhs[row(q, j)] = g.slope() * pi.get(q);
        }
    }
    for t in model.transitions() {
        for j in 0..n {
            for i in 0..n {
                let a = t.reset.entry(i, j);
                if a != 0.0 {
                    matrix[(row(t.to, j), row(t.from, i))] -= t.rate * a;
                }
            }
        }
    }

    let unknowns = (0..s)
        .flat_map(|q| (0..n).map(move |j| Unknown::new(q, j)))
        .collect();
    let pinned = pinned_set(&matrix, &rhs);
    SystemMatrix {
        matrix,
        rhs,
        unknowns,
        pinned,
    }
}

/// Largest set of rows with zero right-hand side whose nonzero couplings stay
/// inside the set.
fn pinned_set(m: &DenseMatrix, rhs: &[f64]) -> Vec<bool> {
    let size = rhs.len();
    let mut pinned: Vec<bool> = rhs.iter().map(|&b| b == 0.0).collect();
    loop {
        let mut changed = false;
        for r in 0..size {
            if pinned[r] && (0..size).any(|c| !pinned[c] && m[(r, c)] != 0.0) {
                pinned[r] = false;
                changed = true;
            }
        }
        if !changed {
            return pinned;
        }
    }
}

/// Solves for the expected age vector of every state.
///
/// Fails with [`Error::Unstable`] if either the pinned or the reduced block is
/// singular, if a linear-growth state has `Σ_out λ − k = 0`, or if any solved
/// component falls below [`NEGATIVE_TOLERANCE`].
pub fn expected_age_vectors(model: &ShsModel, pi: &StationaryDistribution) -> Result<AgeVectorSet> {
    if pi.len() != model.num_states() {
        return Err(Error::BadDimension(format!(
            "distribution has {} entries for {} states",
            pi.len(),
            model.num_states()
        )));
    }
    let full = system_matrix(model, pi);
    let free = full.without_pinned();

    for u in free.unknowns() {
        if let GrowthRate::LinearInX(k) = model.growth(u.state) {
            if model.total_out_rate(u.state) - k == 0.0 {
                return Err(Error::Unstable(format!(
                    "exit rate of state {} equals its growth constant",
                    model.label(u.state)
                )));
            }
        }
    }

    let pinned = full.pinned_block();
    if pinned.size() > 0 {
        pinned.solve().map_err(|e| {
            Error::Unstable(format!("zero block of the age system is singular ({e})"))
        })?;
    }
    let x = free
        .solve()
        .map_err(|e| Error::Unstable(format!("age system is singular ({e})")))?;

    let n = model.dimension();
    let mut v = vec![vec![0.0; n]; model.num_states()];
    for (u, &val) in free.unknowns().iter().zip(&x) {
        if !val.is_finite() || val < NEGATIVE_TOLERANCE {
            return Err(Error::Unstable(format!(
                "component {} of state {} solved to {val}",
                u.component + 1,
                model.label(u.state)
            )));
        }
        v[u.state][u.component] = val;
    }
    Ok(AgeVectorSet { n, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shs::balance::stationary_distribution;
    use crate::shs::model::{build_model, ResetMap, Transition};

    fn trivial() -> ShsModel {
        build_model(
            vec!["only".into()],
            vec![GrowthRate::Zero],
            vec![Transition::new(0, 0, 0, 2.0, ResetMap::zeros(1))],
            1,
        )
        .unwrap()
    }

    #[test]
    fn trivial_model_system() {
        let m = trivial();
        let pi = stationary_distribution(&m).unwrap();
        let sm = system_matrix(&m, &pi);
        assert_eq!(sm.size(), 1);
        assert_eq!(sm.matrix()[(0, 0)], 2.0);
        assert_eq!(sm.rhs(), &[0.0]);
        assert_eq!(sm.pinned(), vec![Unknown::new(0, 0)]);
        let v = expected_age_vectors(&m, &pi).unwrap();
        assert_eq!(average_aoii(&v), 0.0);
    }

    #[test]
    fn empty_ages_average_zero() {
        assert_eq!(average_aoii(&AgeVectorSet::zeros(4, 2)), 0.0);
    }

    // Age of a single source with constant growth reset by Poisson(μ) events:
    // the stationary mean is 1/μ.
    #[test]
    fn renewal_age() {
        let mu = 4.0;
        let m = build_model(
            vec!["a".into()],
            vec![GrowthRate::Constant(1.0)],
            vec![Transition::new(0, 0, 0, mu, ResetMap::zeros(1))],
            1,
        )
        .unwrap();
        let pi = stationary_distribution(&m).unwrap();
        let v = expected_age_vectors(&m, &pi).unwrap();
        assert!((average_aoii(&v) - 1.0 / mu).abs() < 1e-15);
    }

    // Linear growth k with resets at rate μ: E[x] diverges for k ≥ μ.
    #[test]
    fn linear_growth_instability() {
        let build = |k: f64| {
            build_model(
                vec!["grow".into(), "rest".into()],
                vec![GrowthRate::LinearInX(k), GrowthRate::Constant(1.0)],
                vec![
                    Transition::new(0, 0, 1, 3.0, ResetMap::identity(1)),
                    Transition::new(1, 1, 0, 1.0, ResetMap::identity(1)),
                    Transition::new(2, 1, 1, 2.0, ResetMap::zeros(1)),
                ],
                1,
            )
            .unwrap()
        };
        let ok = build(1.0);
        let pi = stationary_distribution(&ok).unwrap();
        assert!(expected_age_vectors(&ok, &pi).is_ok());
        let bad = build(4.0);
        let pi = stationary_distribution(&bad).unwrap();
        assert!(matches!(
            expected_age_vectors(&bad, &pi),
            Err(Error::Unstable(_))
        ));
        let edge = build(3.0);
        let pi = stationary_distribution(&edge).unwrap();
        assert!(matches!(
            expected_age_vectors(&edge, &pi),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn substitute_moves_columns_to_rhs() {
        let m = trivial();
        let pi = stationary_distribution(&m).unwrap();
        let sm = system_matrix(&m, &pi);
        let reduced = sm.substitute(&[(Unknown::new(0, 0), 1.0)]);
        assert_eq!(reduced.size(), 0);
    }
}
