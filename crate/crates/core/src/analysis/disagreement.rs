use rand::Rng;

use crate::communication::{build_weight_matrix, count_disjoint_g_events, ActiveSet, CommModel, SpanningTreePair};
use crate::error::{Error, Result};
use crate::iteration::Trace;
use crate::matrix::SquareMatrix;
use crate::rng;
use crate::Scalar;

/// `Φ(k, s) = A(s) A(s+1) ... A(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix<S> {
    pub matrix: SquareMatrix<S>,
    pub s: usize,
    pub k: usize,
}

impl<S: Scalar> TransitionMatrix<S> {
    pub fn is_doubly_stochastic(&self, tol: S) -> bool {
        self.matrix.is_doubly_stochastic(tol)
    }
}

fn check_span(s: usize, k: usize, len: usize) -> Result<()> {
    if s > k || k >= len {
        return Err(Error::OutOfRange(format!("span ({s}, {k}) invalid for a trace of length {len}")));
    }
    Ok(())
}

/// Left-to-right product over the recorded or reconstructed matrices.
pub fn transition<S: Scalar>(trace: &Trace<S>, k: usize, s: usize) -> Result<TransitionMatrix<S>> {
    check_span(s, k, trace.len())?;
    let mut phi = trace.weight_matrix(s)?.matrix().clone();
    for r in s + 1..=k {
        phi = phi.matmul(trace.weight_matrix(r)?.matrix());
    }
    Ok(TransitionMatrix { matrix: phi, s, k })
}

/// Same as [`transition`] from an activation history.
pub fn transition_from_history<S: Scalar>(
    model: &CommModel<S>,
    history: &[ActiveSet],
    k: usize,
    s: usize,
) -> Result<TransitionMatrix<S>> {
    check_span(s, k, history.len())?;
    let mut phi = build_weight_matrix(model, &history[s])?.matrix().clone();
    for active in &history[s + 1..=k] {
        phi = phi.matmul(build_weight_matrix(model, active)?.matrix());
    }
    Ok(TransitionMatrix { matrix: phi, s, k })
}

/// `max_ij |Φ_ij - 1/m|`
pub fn rho<S: Scalar>(phi: &TransitionMatrix<S>) -> S {
    let m = phi.matrix.size();
    let uniform = S::one() / S::from_usize(m).unwrap();
    phi.matrix.entries().iter().fold(S::zero(), |acc, &v| acc.max((v - uniform).abs()))
}

/// `ρ(k, s)` for `k = s..=k_max` at a fixed anchor `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisagreementSeries<S> {
    pub s: usize,
    pub values: Vec<S>,
}

/// Streams `Φ(k, s) - J/m` by right-multiplication. Every factor is doubly
/// stochastic, so `(Φ - J/m) A = Φ A - J/m` and the deviation never has to
/// be recovered by cancellation against `1/m`. Row and column sums of the
/// deviation are zero; re-centering after each product keeps rounding from
/// leaking into the non-decaying all-ones direction, so `ρ` stays
/// resolvable far below machine epsilon.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationTracker<S> {
    deviation: SquareMatrix<S>,
    s: usize,
    k: usize,
}

impl<S: Scalar> DeviationTracker<S> {
    /// Starts at `Φ(s, s) = A(s)`.
    pub fn new(first: &SquareMatrix<S>, s: usize) -> Self {
        let m = first.size();
        let uniform = S::one() / S::from_usize(m).unwrap();
        let mut deviation = first.clone();
        for i in 0..m {
            for j in 0..m {
                deviation.set(i, j, first.get(i, j) - uniform);
            }
        }
        center(&mut deviation);
        Self { deviation, s, k: s }
    }

    pub fn push(&mut self, next: &SquareMatrix<S>) {
        self.deviation = self.deviation.matmul(next);
        center(&mut self.deviation);
        self.k += 1;
    }

    pub fn span(&self) -> (usize, usize) {
        (self.s, self.k)
    }

    pub fn rho(&self) -> S {
        self.deviation.entries().iter().fold(S::zero(), |acc, &v| acc.max(v.abs()))
    }
}

/// `D <- (I - J/m) D (I - J/m)`
fn center<S: Scalar>(d: &mut SquareMatrix<S>) {
    let m = d.size();
    let inv = S::one() / S::from_usize(m).unwrap();
    let rows: Vec<S> = d.row_sums().into_iter().map(|v| v * inv).collect();
    let cols: Vec<S> = d.col_sums().into_iter().map(|v| v * inv).collect();
    let total = rows.iter().fold(S::zero(), |acc, &v| acc + v) * inv;
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            d.set(i, j, d.get(i, j) - r - c + total);
        }
    }
}

/// Keeps a single `m x m` matrix in memory.
pub fn disagreement_series<S: Scalar>(
    model: &CommModel<S>,
    history: &[ActiveSet],
    s: usize,
    k_max: usize,
) -> Result<DisagreementSeries<S>> {
    check_span(s, k_max, history.len())?;
    let mut values = Vec::with_capacity(k_max - s + 1);
    let mut tracker = DeviationTracker::new(build_weight_matrix(model, &history[s])?.matrix(), s);
    values.push(tracker.rho());
    for active in &history[s + 1..=k_max] {
        tracker.push(build_weight_matrix(model, active)?.matrix());
        values.push(tracker.rho());
    }
    Ok(DisagreementSeries { s, values })
}

/// `2 (1 + γ^{-2(m-1)}) (1 - γ^{2(m-1)})^t`
pub fn lemma3_bound<S: Scalar>(m: usize, gamma: S, t: usize) -> S {
    let g = gamma.powi(2 * (m as i32 - 1));
    S::of(2.0) * (S::one() + S::one() / g) * (S::one() - g).powi(t as i32)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lemma3Verdict<S> {
    pub s: usize,
    pub k: usize,
    /// Number of disjoint activation events found in `(s, k)`.
    pub events: usize,
    pub bound: S,
    pub rho: S,
    pub holds: bool,
}

pub fn lemma3_verdict_from_history<S: Scalar>(
    model: &CommModel<S>,
    history: &[ActiveSet],
    trees: &SpanningTreePair,
    s: usize,
    k: usize,
    tol: S,
) -> Result<Lemma3Verdict<S>> {
    let phi = transition_from_history(model, history, k, s)?;
    let events = count_disjoint_g_events(trees, history, s, k);
    let bound = lemma3_bound(model.num_agents(), model.params().gamma, events);
    let value = rho(&phi);
    Ok(Lemma3Verdict { s, k, events, bound, rho: value, holds: value <= bound + tol })
}

pub fn lemma3_verdict<S: Scalar>(
    trace: &Trace<S>,
    trees: &SpanningTreePair,
    s: usize,
    k: usize,
    tol: S,
) -> Result<Lemma3Verdict<S>> {
    lemma3_verdict_from_history(&trace.model, &trace.activation_history(), trees, s, k, tol)
}

/// `count` spans `s < k` drawn uniformly from `0..len`, reproducible from
/// `seed`.
pub fn random_spans(len: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    if len < 2 {
        return Vec::new();
    }
    let mut rng = rng::stream(seed, u64::MAX);
    (0..count)
        .map(|_| {
            let s = rng.gen_range(0..len - 1);
            let k = rng.gen_range(s + 1..len);
            (s, k)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::communication::{build_spanning_trees, BackboneGraph, CommParams, Topology};
    use crate::iteration::{run, RunOptions, StepSchedule};
    use crate::problems::{builtin, ProblemParams, COMMON_BOX_QUADRATIC};

    fn tm(rows: &[Vec<f64>]) -> TransitionMatrix<f64> {
        TransitionMatrix { matrix: SquareMatrix::from_rows(rows).unwrap(), s: 0, k: 0 }
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(&tm(&[vec![1.0 / 3.0; 3], vec![1.0 / 3.0; 3], vec![1.0 / 3.0; 3]])), 0.0);
        assert_eq!(rho(&tm(&[vec![1.0, 0.0], vec![0.0, 1.0]])), 0.5);
        assert_eq!(rho(&tm(&[vec![0.625, 0.375], vec![0.375, 0.625]])), 0.125);
    }

    #[test]
    fn lemma3_bound_values() {
        assert_eq!(lemma3_bound(2, 0.5, 3), 4.21875);
        assert!(lemma3_bound(5, 0.2, 0) >= 2.0);
        assert!((lemma3_bound(2, 0.5, 4) - 10.0 * 0.75f64.powi(4)).abs() < 1e-12);
    }

    fn pair_model(gamma: f64) -> CommModel<f64> {
        CommModel::new(
            BackboneGraph::topology(Topology::Path, 2).unwrap(),
            CommParams::new(gamma, 1.0, 1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn always_active_pair() {
        let model = pair_model(0.5);
        let graph = model.graph().clone();
        let history = vec![ActiveSet::all(&graph); 12];
        let trees = build_spanning_trees(&graph, 0).unwrap();
        let v = lemma3_verdict_from_history(&model, &history, &trees, 0, 9, 1e-10).unwrap();
        assert_eq!(v.events, 4);
        assert!((v.bound - 10.0 * 0.75f64.powi(4)).abs() < 1e-12);
        assert_eq!(v.rho, 0.0);
        assert!(v.holds);
        let phi = transition_from_history(&model, &history, 1, 0).unwrap();
        assert_eq!(phi.matrix.rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn quarter_weight_product() {
        let model = pair_model(0.25);
        let history = vec![ActiveSet::all(model.graph()); 2];
        let phi = transition_from_history(&model, &history, 1, 0).unwrap();
        assert_eq!(phi.matrix.rows(), vec![vec![0.625, 0.375], vec![0.375, 0.625]]);
        assert_eq!(transition_from_history(&model, &history, 0, 0).unwrap().matrix.rows(), vec![
            vec![0.75, 0.25],
            vec![0.25, 0.75]
        ]);
        assert!(transition_from_history(&model, &history, 2, 0).is_err());
        assert!(transition_from_history(&model, &history, 0, 1).is_err());
    }

    #[test]
    fn semigroup_and_series_agree() {
        let prob = builtin::<f64>(COMMON_BOX_QUADRATIC, &ProblemParams::default()).unwrap();
        let model = CommModel::new(
            BackboneGraph::topology(Topology::Ring, 3).unwrap(),
            CommParams::new(0.25, 0.5, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let trace = run(&prob, &model, &StepSchedule::HarmonicLog, 60, 11, RunOptions::default()).unwrap();
        for (s, r, k) in [(0, 10, 40), (5, 5, 6), (3, 30, 59)] {
            let whole = transition(&trace, k, s).unwrap();
            let left = transition(&trace, r, s).unwrap();
            let right = transition(&trace, k, r + 1).unwrap();
            assert!(whole.matrix.max_abs_diff(&left.matrix.matmul(&right.matrix)) <= 1e-10);
            assert!(whole.is_doubly_stochastic(1e-8));
            let v = rho(&whole);
            assert!((0.0..=1.0 - 1.0 / 3.0).contains(&v));
        }
        let series = disagreement_series(&model, &trace.activation_history(), 4, 59).unwrap();
        assert_eq!(series.values.len(), 56);
        for (offset, &v) in series.values.iter().enumerate() {
            assert!((v - rho(&transition(&trace, 4 + offset, 4).unwrap())).abs() < 1e-12);
        }
        let trees = build_spanning_trees(model.graph(), 0).unwrap();
        for (s, k) in random_spans(trace.len(), 20, 3) {
            assert!(lemma3_verdict(&trace, &trees, s, k, 1e-10).unwrap().holds);
        }
    }

    #[test]
    fn deviation_resolves_below_epsilon() {
        // All links on: A - J/3 = (1 - 3γ)(I - J/3), so ρ(k, 0) = (2/3) (1 - 3γ)^(k+1).
        let model = CommModel::new(
            BackboneGraph::topology(Topology::Complete, 3).unwrap(),
            CommParams::new(0.25, 1.0, 1e9, 1.0).unwrap(),
        )
        .unwrap();
        let history = vec![ActiveSet::all(model.graph()); 41];
        let series = disagreement_series(&model, &history, 0, 40).unwrap();
        for (k, &v) in series.values.iter().enumerate() {
            let exact = 2.0 / 3.0 * 0.25f64.powi(k as i32 + 1);
            assert!((v - exact).abs() <= 1e-12 * exact, "k={k}: {v} vs {exact}");
        }
    }

    #[test]
    fn spans_are_ordered_and_reproducible() {
        let a = random_spans(100, 20, 5);
        assert_eq!(a, random_spans(100, 20, 5));
        assert!(a.iter().all(|&(s, k)| s < k && k < 100));
        assert!(random_spans(1, 5, 0).is_empty());
    }
}
