use crate::error::{Error, Result};

/// Per-state age dynamics between jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthRate {
    /// The age vector is frozen.
    Zero,
    /// Every component grows with the given slope.
    Constant(f64),
    /// `dx/dt = k·x`, so ages grow exponentially.
    LinearInX(f64),
}

impl GrowthRate {
    fn validate(&self, state: usize) -> Result<()> {
        let bad = |detail: String| Err(Error::InvalidGrowth { state, detail });
        match *self {
            GrowthRate::Zero => Ok(()),
            GrowthRate::Constant(m) if !(m > 0.0 && m.is_finite()) => bad(format!(
                "constant slope must be positive and finite, got {m}"
            )),
            GrowthRate::LinearInX(k) if !(k > 0.0 && k.is_finite()) => bad(format!(
                "growth constant must be positive and finite, got {k}"
            )),
            _ => Ok(()),
        }
    }

    /// Constant slope `m`, or 0 for the other variants.
    pub fn slope(&self) -> f64 {
        match *self {
            GrowthRate::Constant(m) => m,
            _ => 0.0,
        }
    }

    /// Linear growth constant `k`, or 0 for the other variants.
    pub fn linear_constant(&self) -> f64 {
        match *self {
            GrowthRate::LinearInX(k) => k,
            _ => 0.0,
        }
    }
}

/// Reset matrix applied at a jump as the row-vector product `x⁺ = x·A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetMap {
    n: usize,
    a: Vec<f64>,
}

impl ResetMap {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut a = Vec::with_capacity(n * n);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::BadDimension(format!(
                    "reset row {i} has {} entries, expected {n}",
                    r.len()
                )));
            }
            a.extend_from_slice(r);
        }
        Ok(Self { n, a })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    /// Keeps the last component and clears the others.
    pub fn keep_last(n: usize) -> Self {
        let mut m = Self::zeros(n);
        m.a[n * n - 1] = 1.0;
        m
    }

    /// Copies the last component into every component.
    pub fn broadcast_last(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            m.a[(n - 1) * n + j] = 1.0;
        }
        m
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Entry `A[i][j]`: contribution of pre-jump component `i` to post-jump component `j`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|&v| v == 0.0)
    }

    /// Writes `x·A` into `out`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (j, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|i| x[i] * self.a[i * n + j]).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_into(x, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub rate: f64,
    pub reset: ResetMap,
}

impl Transition {
    pub fn new(id: usize, from: usize, to: usize, rate: f64, reset: ResetMap) -> Self {
        Self {
            id,
            from,
            to,
            rate,
            reset,
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.from == self.to
    }
}

/// A validated stochastic hybrid system with a single recurrent class.
#[derive(Debug, Clone)]
pub struct ShsModel {
    labels: Vec<String>,
    growth: Vec<GrowthRate>,
    transitions: Vec<Transition>,
    n: usize,
    outgoing: Vec<Vec<usize>>,
    total_out: Vec<f64>,
    recurrent: Vec<bool>,
}

impl ShsModel {
    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Index of the monitored age component (the last one).
    pub fn aoii_component(&self) -> usize {
        self.n - 1
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, q: usize) -> &str {
        &self.labels[q]
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn growth(&self, q: usize) -> GrowthRate {
        self.growth[q]
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Indices into [`transitions`](Self::transitions) leaving `q`, self-loops included.
    pub fn outgoing(&self, q: usize) -> &[usize] {
        &self.outgoing[q]
    }

    /// Total exit rate of `q`, self-loops included.
    pub fn total_out_rate(&self, q: usize) -> f64 {
        self.total_out[q]
    }

    /// Whether `q` belongs to the closed communicating class.
    pub fn is_recurrent(&self, q: usize) -> bool {
        self.recurrent[q]
    }

    pub fn recurrent_states(&self) -> Vec<usize> {
        (0..self.num_states())
            .filter(|&q| self.recurrent[q])
            .collect()
    }
}

/// Validates and assembles a model.
///
/// States that cannot be reached from the recurrent class are allowed as long
/// as exactly one closed class exists; they carry zero stationary mass.
pub fn build_model(
    labels: Vec<String>,
    growth: Vec<GrowthRate>,
    transitions: Vec<Transition>,
    n: usize,
) -> Result<ShsModel> {
    let s = labels.len();
    if s == 0 {
        return Err(Error::EmptyModel);
    }
    if n == 0 {
        return Err(Error::BadDimension(
            "continuous dimension must be positive".into(),
        ));
    }
    if growth.len() != s {
        return Err(Error::BadDimension(format!(
            "{} growth rates for {s} states",
            growth.len()
        )));
    }
    for (q, g) in growth.iter().enumerate() {
        g.validate(q)?;
    }
    for t in &transitions {
        if t.from >= s || t.to >= s {
            return Err(Error::BadDimension(format!(
                "transition {} connects {} -> {} but there are {s} states",
                t.id, t.from, t.to
            )));
        }
        if t.reset.dimension() != n {
            let d = t.reset.dimension();
            return Err(Error::BadDimension(format!(
                "transition {} reset is {d}x{d}, model dimension is {n}",
                t.id
            )));
        }
        if !(t.rate > 0.0 && t.rate.is_finite()) {
            return Err(Error::NonpositiveRate {
                id: t.id,
                rate: t.rate,
            });
        }
    }

    let mut outgoing = vec![Vec::new(); s];
    let mut total_out = vec![0.0; s];
    for (i, t) in transitions.iter().enumerate() {
        outgoing[t.from].push(i);
        total_out[t.from] += t.rate;
    }

    let recurrent = closed_class(s, &transitions)?;

    Ok(ShsModel {
        labels,
        growth,
        transitions,
        n,
        outgoing,
        total_out,
        recurrent,
    })
}

/// Finds the unique closed communicating class, failing if there is none or several.
fn closed_class(s: usize, transitions: &[Transition]) -> Result<Vec<bool>> {
    // reach[i][j]: j reachable from i in zero or more steps.
    let mut reach = vec![vec![false; s]; s];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for t in transitions {
        reach[t.from][t.to] = true;
    }
    for k in 0..s {
        for i in 0..s {
            if reach[i][k] {
                for j in 0..s {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    // i is recurrent iff everything it reaches can reach it back.
    let recurrent: Vec<bool> = (0..s)
        .map(|i| (0..s).all(|j| !reach[i][j] || reach[j][i]))
        .collect();
    let mut classes: Vec<usize> = Vec::new();
    for i in (0..s).filter(|&i| recurrent[i]) {
        if !classes.iter().any(|&c| reach[c][i]) {
            classes.push(i);
        }
    }
    match classes.len() {
        1 => Ok(recurrent),
        0 => Err(Error::NotIrreducible("no closed class".into())),
        k => Err(Error::NotIrreducible(format!(
            "{k} closed classes (states {classes:?} are in different ones)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn one_state_self_loop() {
        let m = build_model(
            labels(1),
            vec![GrowthRate::Zero],
            vec![Transition::new(0, 0, 0, 1.5, ResetMap::zeros(2))],
            2,
        )
        .unwrap();
        assert_eq!(m.total_out_rate(0), 1.5);
        assert!(m.is_recurrent(0));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            build_model(vec![], vec![], vec![], 2).unwrap_err(),
            Error::EmptyModel
        );
        let err = build_model(
            labels(2),
            vec![GrowthRate::Zero; 2],
            vec![Transition::new(7, 0, 1, 0.0, ResetMap::zeros(2))],
            2,
        )
        .unwrap_err();
        assert_eq!(err, Error::NonpositiveRate { id: 7, rate: 0.0 });
        let err = build_model(
            labels(1),
            vec![GrowthRate::Zero],
            vec![Transition::new(0, 0, 0, 1.0, ResetMap::zeros(3))],
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BadDimension(_)));
        let err = build_model(labels(1), vec![GrowthRate::Constant(0.0)], vec![], 2).unwrap_err();
        assert!(matches!(err, Error::InvalidGrowth { state: 0, .. }));
    }

    #[test]
    fn two_closed_classes_rejected() {
        let err = build_model(
            labels(3),
            vec![GrowthRate::Zero; 3],
            vec![
                Transition::new(0, 0, 1, 1.0, ResetMap::zeros(1)),
                Transition::new(1, 0, 2, 1.0, ResetMap::zeros(1)),
            ],
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotIrreducible(_)));
    }

    #[test]
    fn transient_states_detected() {
        let m = build_model(
            labels(3),
            vec![GrowthRate::Zero; 3],
            vec![
                Transition::new(0, 2, 0, 1.0, ResetMap::zeros(1)),
                Transition::new(1, 0, 1, 1.0, ResetMap::zeros(1)),
                Transition::new(2, 1, 0, 2.0, ResetMap::zeros(1)),
            ],
            1,
        )
        .unwrap();
        assert_eq!(m.recurrent_states(), vec![0, 1]);
    }

    #[test]
    fn reset_is_row_vector_product() {
        let x = ResetMap::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(x.apply(&[3.0, 5.0]), vec![5.0, 5.0]);
        let k = ResetMap::from_rows(&[[0.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(k.apply(&[3.0, 5.0]), vec![0.0, 5.0]);
        assert!(ResetMap::zeros(2).is_zero());
        assert_eq!(ResetMap::identity(2).apply(&[3.0, 5.0]), vec![3.0, 5.0]);
    }
}
