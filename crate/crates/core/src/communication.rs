//! State-dependent random link activation, symmetric doubly stochastic
//! weights, and the spanning-tree activation events used to certify
//! information spread.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::Point;
use crate::matrix::SquareMatrix;
use crate::Scalar;

/// Undirected edge with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    lo: usize,
    hi: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(invalid(format!("self-loop at node {a}")));
        }
        Ok(Self { lo: a.min(b), hi: a.max(b) })
    }

    pub fn endpoints(self) -> (usize, usize) {
        (self.lo, self.hi)
    }
}

/// Named backbone families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Complete,
    Path,
    Ring,
    /// Star centered at node 0.
    Star,
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Self::Complete),
            "path" => Ok(Self::Path),
            "ring" => Ok(Self::Ring),
            "star" => Ok(Self::Star),
            other => Err(invalid(format!("unknown topology `{other}`"))),
        }
    }
}

/// Connected undirected graph of agents that attempt to communicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackboneGraph {
    m: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl BackboneGraph {
    pub fn new(m: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if m < 2 {
            return Err(invalid("backbone needs at least two agents"));
        }
        let mut edges = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a >= m || b >= m {
                return Err(invalid(format!("edge ({a}, {b}) references an agent outside 0..{m}")));
            }
            edges.push(Edge::new(a, b)?);
        }
        edges.sort_unstable();
        edges.dedup();
        let mut adjacency = vec![Vec::new(); m];
        for e in &edges {
            adjacency[e.lo].push(e.hi);
            adjacency[e.hi].push(e.lo);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let graph = Self { m, edges, adjacency };
        if graph.bfs_parents(0).iter().any(Option::is_none) {
            return Err(invalid("backbone graph is not connected"));
        }
        Ok(graph)
    }

    pub fn topology(kind: Topology, m: usize) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = match kind {
            Topology::Complete => (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect(),
            Topology::Path => (1..m).map(|i| (i - 1, i)).collect(),
            Topology::Ring => {
                let mut p: Vec<_> = (1..m).map(|i| (i - 1, i)).collect();
                if m > 2 {
                    p.push((m - 1, 0));
                }
                p
            }
            Topology::Star => (1..m).map(|i| (0, i)).collect(),
        };
        Self::new(m, &pairs)
    }

    pub fn num_agents(&self) -> usize {
        self.m
    }

    /// Edges in ascending `(lo, hi)` order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.m).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    /// BFS parent pointers from `root`; `root` maps to itself.
    fn bfs_parents(&self, root: usize) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.m];
        parent[root] = Some(root);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if parent[v].is_none() {
                    parent[v] = Some(u);
                    queue.push_back(v);
                }
            }
        }
        parent
    }
}

/// Link-law and weight parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommParams<S> {
    /// Weight placed on every activated link.
    pub gamma: S,
    /// Cap on the activation probability.
    pub delta: S,
    /// Scale of the distance-decay term.
    pub k: S,
    /// Exponent of the distance-decay term.
    pub c: S,
}

impl<S: Scalar> CommParams<S> {
    pub fn new(gamma: S, delta: S, k: S, c: S) -> Result<Self> {
        if !(gamma > S::zero() && gamma <= S::one()) {
            return Err(invalid("gamma must lie in (0, 1]"));
        }
        if !(delta > S::zero() && delta <= S::one()) {
            return Err(invalid("delta must lie in (0, 1]"));
        }
        if !(k > S::zero()) || !(c > S::zero()) {
            return Err(invalid("K and C must be positive"));
        }
        Ok(Self { gamma, delta, k, c })
    }
}

/// Backbone plus parameters, validated so that `gamma <= 1/(max_degree+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CommModel<S> {
    graph: BackboneGraph,
    params: CommParams<S>,
}

impl<S: Scalar> CommModel<S> {
    pub fn new(graph: BackboneGraph, params: CommParams<S>) -> Result<Self> {
        let cap = S::one() / S::from_usize(graph.max_degree() + 1).unwrap();
        if params.gamma > cap {
            return Err(invalid(format!(
                "gamma = {} violates gamma <= 1/(max_degree + 1) = {} for a backbone with max degree {}",
                params.gamma,
                cap,
                graph.max_degree()
            )));
        }
        Ok(Self { graph, params })
    }

    pub fn graph(&self) -> &BackboneGraph {
        &self.graph
    }

    pub fn params(&self) -> &CommParams<S> {
        &self.params
    }

    pub fn num_agents(&self) -> usize {
        self.graph.m
    }
}

/// Sorted set of activated backbone edges at one step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActiveSet(Vec<Edge>);

impl ActiveSet {
    pub fn new(mut edges: Vec<Edge>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        Self(edges)
    }

    pub fn all(graph: &BackboneGraph) -> Self {
        Self(graph.edges.clone())
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.0.binary_search(&e).is_ok()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `min{delta, K / ||xi - xj||^C}`, equal to `delta` at zero distance.
pub fn link_probability<S: Scalar>(params: &CommParams<S>, xi: &Point<S>, xj: &Point<S>) -> Result<S> {
    check_dim(xi.dim(), xj.dim())?;
    let dist = xi.distance_to(xj);
    if dist == S::zero() {
        return Ok(params.delta);
    }
    let decay = params.k / dist.powf(params.c);
    Ok(if decay.is_nan() { params.delta } else { params.delta.min(decay) })
}

/// Independently activates each backbone edge with its link probability.
/// Exactly one uniform draw is consumed per edge, in ascending edge order.
pub fn sample_activations<S: Scalar, R: Rng + ?Sized>(
    model: &CommModel<S>,
    state: &[Point<S>],
    rng: &mut R,
) -> Result<ActiveSet> {
    check_dim(model.num_agents(), state.len())?;
    let mut active = Vec::new();
    for &e in model.graph.edges() {
        let p = link_probability(&model.params, &state[e.lo], &state[e.hi])?.as_f64();
        let u: f64 = rng.gen();
        if u < p {
            active.push(e);
        }
    }
    Ok(ActiveSet(active))
}

/// Symmetric doubly stochastic `A(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix<S>(SquareMatrix<S>);

impl<S: Scalar> WeightMatrix<S> {
    pub fn matrix(&self) -> &SquareMatrix<S> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.0.get(i, j)
    }

    pub fn size(&self) -> usize {
        self.0.size()
    }

    /// Checks double stochasticity at `tol`, exact symmetry, diagonal
    /// `>= gamma` and support on backbone edges. Returns the first violation.
    pub fn validate(&self, graph: &BackboneGraph, gamma: S, tol: S) -> std::result::Result<(), String> {
        let a = &self.0;
        if a.size() != graph.num_agents() {
            return Err("matrix size differs from agent count".into());
        }
        if !a.is_doubly_stochastic(tol) {
            return Err("matrix is not doubly stochastic".into());
        }
        if !a.is_symmetric(S::zero()) {
            return Err("matrix is not symmetric".into());
        }
        for i in 0..a.size() {
            if a.get(i, i) < gamma - tol {
                return Err(format!("diagonal entry {i} is below gamma"));
            }
            for j in 0..a.size() {
                if i != j && a.get(i, j) != S::zero() && !graph.contains(Edge { lo: i.min(j), hi: i.max(j) }) {
                    return Err(format!("entry ({i}, {j}) is off the backbone"));
                }
            }
        }
        Ok(())
    }
}

/// `a_ij = a_ji = gamma` on active edges, zero elsewhere off the diagonal,
/// and `a_ii = 1 - gamma * active_degree(i)`.
pub fn build_weight_matrix<S: Scalar>(model: &CommModel<S>, active: &ActiveSet) -> Result<WeightMatrix<S>> {
    let m = model.num_agents();
    let gamma = model.params.gamma;
    let mut a = SquareMatrix::zeros(m);
    let mut degree = vec![0usize; m];
    for &e in active.edges() {
        if !model.graph.contains(e) {
            return Err(invalid(format!("active edge {:?} is not a backbone edge", e.endpoints())));
        }
        a.set(e.lo, e.hi, gamma);
        a.set(e.hi, e.lo, gamma);
        degree[e.lo] += 1;
        degree[e.hi] += 1;
    }
    for (i, &d) in degree.iter().enumerate() {
        a.set(i, i, S::one() - gamma * S::from_usize(d).unwrap());
    }
    let w = WeightMatrix(a);
    w.validate(&model.graph, gamma, S::of(1e-9)).map_err(Error::Internal)?;
    Ok(w)
}

/// Directed tree edge `from -> to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
}

impl Arc {
    pub fn edge(self) -> Edge {
        Edge { lo: self.from.min(self.to), hi: self.from.max(self.to) }
    }
}

/// In-tree and out-tree rooted at the same node, each with `m - 1` labeled
/// arcs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningTreePair {
    pub root: usize,
    /// Arcs toward the root; along any path to the root labels increase.
    pub in_tree: Vec<Arc>,
    /// Arcs away from the root, labeled root-to-leaf path by path.
    pub out_tree: Vec<Arc>,
}

impl SpanningTreePair {
    pub fn num_agents(&self) -> usize {
        self.in_tree.len() + 1
    }

    /// Steps spanned by one activation event.
    pub fn window(&self) -> usize {
        2 * self.in_tree.len()
    }
}

/// BFS spanning tree of the backbone, oriented toward and away from `root`.
///
/// In-tree labels come from repeated leaf peeling (leaves in ascending id
/// order each round). Out-tree labels follow root-to-leaf paths for leaves in
/// ascending id order, labeling unlabeled arcs from the root down.
pub fn build_spanning_trees(graph: &BackboneGraph, root: usize) -> Result<SpanningTreePair> {
    let m = graph.num_agents();
    if root >= m {
        return Err(invalid(format!("root {root} is not an agent")));
    }
    let parent: Vec<usize> = graph
        .bfs_parents(root)
        .into_iter()
        .map(|p| p.ok_or_else(|| invalid("graph is disconnected")))
        .collect::<Result<_>>()?;
    let mut children = vec![Vec::new(); m];
    for v in (0..m).filter(|&v| v != root) {
        children[parent[v]].push(v);
    }

    let mut in_tree = Vec::with_capacity(m - 1);
    let mut remaining_children: Vec<usize> = children.iter().map(Vec::len).collect();
    let mut removed = vec![false; m];
    while in_tree.len() < m - 1 {
        let leaves: Vec<usize> =
            (0..m).filter(|&v| v != root && !removed[v] && remaining_children[v] == 0).collect();
        for &leaf in &leaves {
            in_tree.push(Arc { from: leaf, to: parent[leaf] });
        }
        for &leaf in &leaves {
            removed[leaf] = true;
            remaining_children[parent[leaf]] -= 1;
        }
    }

    let mut out_tree = Vec::with_capacity(m - 1);
    let mut labeled = vec![false; m];
    for leaf in (0..m).filter(|&v| v != root && children[v].is_empty()) {
        let mut path = Vec::new();
        let mut v = leaf;
        while v != root {
            path.push(v);
            v = parent[v];
        }
        for &v in path.iter().rev() {
            if !labeled[v] {
                labeled[v] = true;
                out_tree.push(Arc { from: parent[v], to: v });
            }
        }
    }
    Ok(SpanningTreePair { root, in_tree, out_tree })
}

/// Whether arc `e_l` is active at step `k + l - 1` and arc `f_l` at step
/// `k + (m - 1) + l - 1` for every `l = 1..m-1`.
pub fn detect_g_event(trees: &SpanningTreePair, history: &[ActiveSet], k: usize) -> Result<bool> {
    let span = trees.num_agents() - 1;
    if history.len() < k + 2 * span {
        return Err(invalid(format!(
            "activation history of length {} does not cover steps {k}..{}",
            history.len(),
            k + 2 * span
        )));
    }
    Ok(g_event_at(trees, history, k))
}

fn g_event_at(trees: &SpanningTreePair, history: &[ActiveSet], k: usize) -> bool {
    let span = trees.in_tree.len();
    trees.in_tree.iter().enumerate().all(|(l, arc)| history[k + l].contains(arc.edge()))
        && trees.out_tree.iter().enumerate().all(|(l, arc)| history[k + span + l].contains(arc.edge()))
}

/// Greedy count of G-events at positions `p >= s + 1` spaced at least
/// `2(m - 1)` apart whose windows end strictly before `k`. Windows past the
/// end of `history` are not counted.
pub fn count_disjoint_g_events(trees: &SpanningTreePair, history: &[ActiveSet], s: usize, k: usize) -> usize {
    let window = trees.window();
    let end = k.min(history.len());
    let mut count = 0;
    let mut p = s + 1;
    while p + window <= end {
        if g_event_at(trees, history, p) {
            count += 1;
            p += window;
        } else {
            p += 1;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(c: &[f64]) -> Point<f64> {
        Point::from_f64(c).unwrap()
    }

    fn arc(from: usize, to: usize) -> Arc {
        Arc { from, to }
    }

    #[test]
    fn link_probability_examples() {
        let params = CommParams::new(0.5, 0.5, 1.0, 2.0).unwrap();
        assert_eq!(link_probability(&params, &p(&[3.0]), &p(&[3.0])).unwrap(), 0.5);
        assert!((link_probability(&params, &p(&[0.0]), &p(&[10.0])).unwrap() - 0.01).abs() < 1e-15);
        let linear = CommParams::new(0.5, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(link_probability(&linear, &p(&[0.0]), &p(&[1.0])).unwrap(), 0.5);
    }

    #[test]
    fn probability_nonincreasing_in_distance() {
        let params = CommParams::new(0.25, 0.8, 2.0, 1.5).unwrap();
        let mut last = 1.0;
        for i in 0..200 {
            let pr = link_probability(&params, &p(&[0.0]), &p(&[i as f64 * 0.1])).unwrap();
            assert!(pr <= last);
            last = pr;
        }
    }

    #[test]
    fn saturated_and_vanishing_links() {
        let graph = BackboneGraph::topology(Topology::Complete, 4).unwrap();
        let state: Vec<_> = (0..4).map(|i| p(&[i as f64 * 5.0])).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let always = CommModel::new(graph.clone(), CommParams::new(0.25, 1.0, 1e12, 1.0).unwrap()).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_activations(&always, &state, &mut rng).unwrap().len(), 6);
        }
        let never = CommModel::new(graph, CommParams::new(0.25, 1.0, 1e-300, 4.0).unwrap()).unwrap();
        for _ in 0..100 {
            assert!(sample_activations(&never, &state, &mut rng).unwrap().is_empty());
        }
    }

    #[test]
    fn two_agent_weights() {
        let graph = BackboneGraph::topology(Topology::Path, 2).unwrap();
        let model = CommModel::new(graph.clone(), CommParams::new(0.5, 0.5, 1.0, 2.0).unwrap()).unwrap();
        let w = build_weight_matrix(&model, &ActiveSet::all(&graph)).unwrap();
        assert_eq!(w.matrix().rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let id = build_weight_matrix(&model, &ActiveSet::default()).unwrap();
        assert_eq!(id.matrix(), &SquareMatrix::identity(2));
    }

    #[test]
    fn path_weights() {
        let graph = BackboneGraph::topology(Topology::Path, 3).unwrap();
        let model = CommModel::new(graph.clone(), CommParams::new(0.25, 0.5, 1.0, 1.0).unwrap()).unwrap();
        let w = build_weight_matrix(&model, &ActiveSet::all(&graph)).unwrap();
        assert_eq!(
            w.matrix().rows(),
            vec![vec![0.75, 0.25, 0.0], vec![0.25, 0.5, 0.25], vec![0.0, 0.25, 0.75]]
        );
    }

    #[test]
    fn off_backbone_activation_rejected() {
        let graph = BackboneGraph::topology(Topology::Path, 3).unwrap();
        let model = CommModel::new(graph, CommParams::new(0.25, 0.5, 1.0, 1.0).unwrap()).unwrap();
        let bogus = ActiveSet::new(vec![Edge::new(0, 2).unwrap()]);
        assert!(build_weight_matrix(&model, &bogus).is_err());
    }

    #[test]
    fn gamma_cap_enforced() {
        let star = BackboneGraph::topology(Topology::Star, 4).unwrap();
        let err = CommModel::new(star, CommParams::new(0.9, 0.5, 1.0, 1.0).unwrap()).unwrap_err();
        assert!(err.to_string().contains("gamma"));
    }

    #[test]
    fn graph_validation() {
        assert!(BackboneGraph::new(3, &[(0, 1)]).is_err());
        assert!(BackboneGraph::new(2, &[(0, 0)]).is_err());
        assert!(BackboneGraph::new(2, &[(0, 5)]).is_err());
        let ring = BackboneGraph::topology(Topology::Ring, 5).unwrap();
        assert_eq!(ring.edges().len(), 5);
        assert_eq!(ring.max_degree(), 2);
    }

    #[test]
    fn trees_on_single_edge() {
        let graph = BackboneGraph::topology(Topology::Path, 2).unwrap();
        let t = build_spanning_trees(&graph, 0).unwrap();
        assert_eq!(t.in_tree, vec![arc(1, 0)]);
        assert_eq!(t.out_tree, vec![arc(0, 1)]);
    }

    #[test]
    fn trees_on_path_rooted_in_middle() {
        let graph = BackboneGraph::topology(Topology::Path, 3).unwrap();
        let t = build_spanning_trees(&graph, 1).unwrap();
        assert_eq!(t.in_tree, vec![arc(0, 1), arc(2, 1)]);
        assert_eq!(t.out_tree, vec![arc(1, 0), arc(1, 2)]);
    }

    #[test]
    fn trees_on_star() {
        let graph = BackboneGraph::topology(Topology::Star, 4).unwrap();
        let t = build_spanning_trees(&graph, 0).unwrap();
        assert_eq!(t.in_tree, vec![arc(1, 0), arc(2, 0), arc(3, 0)]);
        assert_eq!(t.out_tree, vec![arc(0, 1), arc(0, 2), arc(0, 3)]);
    }

    #[test]
    fn in_tree_labels_increase_toward_root() {
        let graph = BackboneGraph::topology(Topology::Path, 6).unwrap();
        let t = build_spanning_trees(&graph, 0).unwrap();
        // Path 5 -> 4 -> ... -> 0: the arc leaving node v must come before the
        // arc leaving its parent.
        let label = |from: usize| t.in_tree.iter().position(|a| a.from == from).unwrap();
        for v in 2..6 {
            assert!(label(v) < label(v - 1));
        }
        let out_label = |to: usize| t.out_tree.iter().position(|a| a.to == to).unwrap();
        for v in 2..6 {
            assert!(out_label(v - 1) < out_label(v));
        }
    }

    fn always(graph: &BackboneGraph, len: usize) -> Vec<ActiveSet> {
        vec![ActiveSet::all(graph); len]
    }

    #[test]
    fn g_event_two_agents() {
        let graph = BackboneGraph::topology(Topology::Path, 2).unwrap();
        let t = build_spanning_trees(&graph, 0).unwrap();
        let on = ActiveSet::all(&graph);
        let off = ActiveSet::default();
        let hist = vec![on.clone(), on.clone(), off.clone(), on.clone()];
        assert!(detect_g_event(&t, &hist, 0).unwrap());
        assert!(!detect_g_event(&t, &hist, 1).unwrap());
        assert!(!detect_g_event(&t, &hist, 2).unwrap());
        assert!(detect_g_event(&t, &hist, 3).is_err());
    }

    #[test]
    fn g_event_full_activation_and_gaps() {
        let graph = BackboneGraph::topology(Topology::Ring, 5).unwrap();
        let t = build_spanning_trees(&graph, 2).unwrap();
        let mut hist = always(&graph, 30);
        for k in 0..=30 - t.window() {
            assert!(detect_g_event(&t, &hist, k).unwrap());
        }
        let needed = t.in_tree[1].edge();
        hist[4] = ActiveSet::new(graph.edges().iter().copied().filter(|&e| e != needed).collect());
        assert!(!detect_g_event(&t, &hist, 3).unwrap());
    }

    #[test]
    fn disjoint_event_counting() {
        let graph = BackboneGraph::topology(Topology::Path, 2).unwrap();
        let t = build_spanning_trees(&graph, 0).unwrap();
        assert_eq!(count_disjoint_g_events(&t, &always(&graph, 20), 0, 9), 4);
        assert_eq!(count_disjoint_g_events(&t, &vec![ActiveSet::default(); 20], 0, 9), 0);
        let mut hist = vec![ActiveSet::default(); 20];
        hist[5] = ActiveSet::all(&graph);
        hist[6] = ActiveSet::all(&graph);
        assert_eq!(count_disjoint_g_events(&t, &hist, 0, 12), 1);
    }

    #[test]
    fn activation_frequency_matches_law() {
        let graph = BackboneGraph::topology(Topology::Path, 2).unwrap();
        let model = CommModel::new(graph, CommParams::new(0.5, 0.5, 1.0, 2.0).unwrap()).unwrap();
        let state = vec![p(&[0.0]), p(&[10.0])];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let hits = (0..n).filter(|_| !sample_activations(&model, &state, &mut rng).unwrap().is_empty()).count();
        let freq = hits as f64 / n as f64;
        let sigma = (0.01f64 * 0.99 / n as f64).sqrt();
        assert!((freq - 0.01).abs() <= 3.0 * sigma, "freq {freq}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn history(graph: &BackboneGraph, bits: &[bool]) -> Vec<ActiveSet> {
            let e = graph.edges().len();
            bits.chunks(e)
                .map(|c| ActiveSet::new(graph.edges().iter().zip(c).filter(|(_, &b)| b).map(|(&e, _)| e).collect()))
                .collect()
        }

        proptest! {
            #[test]
            fn adding_activations_never_removes_events(
                bits in prop::collection::vec(any::<bool>(), 5 * 24),
                extra in prop::collection::vec(any::<bool>(), 5 * 24),
                k in 0usize..16,
            ) {
                let graph = BackboneGraph::topology(Topology::Ring, 5).unwrap();
                let t = build_spanning_trees(&graph, 0).unwrap();
                let base = history(&graph, &bits);
                let merged: Vec<bool> = bits.iter().zip(&extra).map(|(a, b)| *a || *b).collect();
                let more = history(&graph, &merged);
                if detect_g_event(&t, &base, k).unwrap() {
                    prop_assert!(detect_g_event(&t, &more, k).unwrap());
                }
            }

            #[test]
            fn sampled_weights_are_valid(
                coords in prop::collection::vec(-20.0..20.0f64, 6),
                seed in any::<u64>(),
            ) {
                let graph = BackboneGraph::topology(Topology::Ring, 6).unwrap();
                let model = CommModel::new(graph.clone(), CommParams::new(1.0 / 3.0, 0.7, 2.0, 1.0).unwrap()).unwrap();
                let state: Vec<_> = coords.iter().map(|&c| p(&[c])).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let active = sample_activations(&model, &state, &mut rng).unwrap();
                let w = build_weight_matrix(&model, &active).unwrap();
                prop_assert!(w.validate(&graph, 1.0 / 3.0, 1e-9).is_ok());
            }
        }
    }
}
