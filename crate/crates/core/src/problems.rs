//! Multi-agent problem instances with known optima.

use rayon::prelude::*;

use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::{ConvexSet, Objective, Point};
use crate::Scalar;

/// Catalog entries understood by [`builtin`].
pub const CATALOG: &[(&str, &str)] = &[
    (
        COUNTEREXAMPLE,
        "two agents on [0, inf): f1 = -x, f2 = 2x; diverges under a constant stepsize",
    ),
    (
        COMMON_BOX_QUADRATIC,
        "m agents, shared box, f_i = ||x - c_i||^2 with distinct centers (params: m, n, half_width, centers)",
    ),
    (
        DISTINCT_BOXES_ABS,
        "3 agents in R^2 with different compact boxes, weighted-abs plus linear objectives",
    ),
];

pub const COUNTEREXAMPLE: &str = "counterexample_prop1";
pub const COMMON_BOX_QUADRATIC: &str = "common_box_quadratic";
pub const DISTINCT_BOXES_ABS: &str = "distinct_boxes_abs";

/// One agent's private data: local objective, local constraint, start point.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentSpec<S> {
    pub objective: Objective<S>,
    pub constraint: ConvexSet<S>,
    pub initial_point: Point<S>,
}

impl<S: Scalar> AgentSpec<S> {
    /// Agent starting at the constraint set's anchor point.
    pub fn anchored(objective: Objective<S>, constraint: ConvexSet<S>) -> Self {
        let initial_point = constraint.anchor();
        Self { objective, constraint, initial_point }
    }
}

/// `minimize sum_i f_i(x)` subject to `x` in every `X_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance<S> {
    name: String,
    agents: Vec<AgentSpec<S>>,
    dim: usize,
    known_fstar: Option<S>,
    known_xstar: Option<Point<S>>,
    subgradient_bound: S,
}

impl<S: Scalar> ProblemInstance<S> {
    pub fn new(
        name: impl Into<String>,
        agents: Vec<AgentSpec<S>>,
        subgradient_bound: S,
        known_fstar: Option<S>,
        known_xstar: Option<Point<S>>,
    ) -> Result<Self> {
        if agents.len() < 2 {
            return Err(invalid("a problem needs at least two agents"));
        }
        let dim = agents[0].initial_point.dim();
        for (i, a) in agents.iter().enumerate() {
            check_dim(dim, a.objective.dim())?;
            check_dim(dim, a.constraint.dim())?;
            check_dim(dim, a.initial_point.dim())?;
            if !a.constraint.contains(&a.initial_point, S::of(1e-12))? {
                return Err(invalid(format!("initial point of agent {i} is infeasible")));
            }
        }
        if !(subgradient_bound > S::zero()) || !subgradient_bound.is_finite() {
            return Err(invalid("subgradient bound L must be positive and finite"));
        }
        let problem = Self {
            name: name.into(),
            agents,
            dim,
            known_fstar,
            known_xstar,
            subgradient_bound,
        };
        if let Some(x) = &problem.known_xstar {
            check_dim(dim, x.dim())?;
            for (i, a) in problem.agents.iter().enumerate() {
                if !a.constraint.contains(x, S::of(1e-12))? {
                    return Err(invalid(format!("known optimum is infeasible for agent {i}")));
                }
            }
            if let Some(f) = problem.known_fstar {
                let value = problem.global_objective(x)?;
                if (value - f).abs() > S::of(1e-9) {
                    return Err(invalid(format!(
                        "known optimal value {f} disagrees with objective at known optimum ({value})"
                    )));
                }
            }
        }
        Ok(problem)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn agents(&self) -> &[AgentSpec<S>] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn known_fstar(&self) -> Option<S> {
        self.known_fstar
    }

    pub fn known_xstar(&self) -> Option<&Point<S>> {
        self.known_xstar.as_ref()
    }

    /// Uniform bound `L` on subgradient norms.
    pub fn subgradient_bound(&self) -> S {
        self.subgradient_bound
    }

    pub fn initial_state(&self) -> Vec<Point<S>> {
        self.agents.iter().map(|a| a.initial_point.clone()).collect()
    }

    /// Replaces every agent's start point; each must be feasible.
    pub fn with_initial_points(mut self, points: Vec<Point<S>>) -> Result<Self> {
        check_dim(self.agents.len(), points.len())?;
        for (i, (a, x)) in self.agents.iter_mut().zip(points).enumerate() {
            check_dim(self.dim, x.dim())?;
            if !a.constraint.contains(&x, S::of(1e-12))? {
                return Err(invalid(format!("initial point of agent {i} is infeasible")));
            }
            a.initial_point = x;
        }
        Ok(self)
    }

    /// Every agent shares the same constraint set.
    pub fn same_constraints(&self) -> bool {
        self.agents.windows(2).all(|w| w[0].constraint == w[1].constraint)
    }

    /// Every constraint set is compact.
    pub fn all_compact(&self) -> bool {
        self.agents.iter().all(|a| a.constraint.is_bounded())
    }

    /// `X = X_1 ∩ ... ∩ X_m` when it has a closed form.
    pub fn intersection(&self) -> Option<ConvexSet<S>> {
        if self.same_constraints() {
            return Some(self.agents[0].constraint.clone());
        }
        let sets: Vec<_> = self.agents.iter().map(|a| a.constraint.clone()).collect();
        ConvexSet::intersect_axis_aligned(&sets).ok().flatten()
    }

    /// `f(x) = sum_i f_i(x)`
    pub fn global_objective(&self, x: &Point<S>) -> Result<S> {
        check_dim(self.dim, x.dim())?;
        self.agents.iter().try_fold(S::zero(), |acc, a| Ok(acc + a.objective.eval(x)?))
    }

    /// A point of `X` for lemma checks: the known optimum when present,
    /// otherwise the anchor of the closed-form intersection.
    pub fn reference_point(&self) -> Option<Point<S>> {
        self.known_xstar.clone().or_else(|| self.intersection().map(|x| x.anchor()))
    }
}

/// Parameter overrides for catalog instances.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProblemParams {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub half_width: Option<f64>,
    /// Per-agent minimizers for `common_box_quadratic`.
    pub centers: Option<Vec<Vec<f64>>>,
}

pub fn builtin<S: Scalar>(name: &str, params: &ProblemParams) -> Result<ProblemInstance<S>> {
    match name {
        COUNTEREXAMPLE => {
            reject_size_overrides(name, params, 2, 1)?;
            counterexample()
        }
        COMMON_BOX_QUADRATIC => common_box_quadratic(params),
        DISTINCT_BOXES_ABS => {
            reject_size_overrides(name, params, 3, 2)?;
            distinct_boxes_abs()
        }
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

fn reject_size_overrides(name: &str, params: &ProblemParams, m: usize, n: usize) -> Result<()> {
    if params.m.is_some_and(|v| v != m)
        || params.n.is_some_and(|v| v != n)
        || params.half_width.is_some()
        || params.centers.is_some()
    {
        return Err(invalid(format!("`{name}` has fixed shape m={m}, n={n} and takes no parameters")));
    }
    Ok(())
}

fn counterexample<S: Scalar>() -> Result<ProblemInstance<S>> {
    let set = ConvexSet::nonneg_orthant(1);
    let agents = vec![
        AgentSpec::anchored(Objective::linear(Point::from_f64(&[-1.0])?), set.clone()),
        AgentSpec::anchored(Objective::linear(Point::from_f64(&[2.0])?), set),
    ];
    ProblemInstance::new(COUNTEREXAMPLE, agents, S::of(2.0), Some(S::zero()), Some(Point::zeros(1)))
}

/// Default minimizers: `c_ij = 0.5 + cos(2 pi i / m + j)`, so the centers
/// are spread out and their mean `(0.5, ..., 0.5)` is not the box midpoint.
fn default_centers(m: usize, n: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| {
            (0..n)
                .map(|j| 0.5 + (2.0 * std::f64::consts::PI * i as f64 / m as f64 + j as f64).cos())
                .collect()
        })
        .collect()
}

fn common_box_quadratic<S: Scalar>(params: &ProblemParams) -> Result<ProblemInstance<S>> {
    let centers = match &params.centers {
        Some(c) => c.clone(),
        None => default_centers(params.m.unwrap_or(3), params.n.unwrap_or(2)),
    };
    let m = params.m.unwrap_or(centers.len());
    let n = params.n.unwrap_or_else(|| centers.first().map_or(0, Vec::len));
    if centers.len() != m || centers.iter().any(|c| c.len() != n) || n == 0 {
        return Err(invalid("centers must be an m x n array with n >= 1"));
    }
    let half_width = params.half_width.unwrap_or(2.0);
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(invalid("half_width must be positive"));
    }
    let set = ConvexSet::cube(n, S::of(-half_width), S::of(half_width))?;
    let centers: Vec<Point<S>> = centers.iter().map(|c| Point::from_f64(c)).collect::<Result<_>>()?;
    let mut agents = Vec::with_capacity(m);
    let mut bound = S::zero();
    for c in &centers {
        let f = Objective::squared_distance(c, S::one())?;
        bound = bound.max(f.subgradient_bound(&set).expect("box is bounded"));
        agents.push(AgentSpec::anchored(f, set.clone()));
    }
    // sum_i ||x - c_i||^2 = m ||x - cbar||^2 + const, so the constrained
    // minimizer is the projection of the mean center onto the box.
    let xstar = set.project(&Point::mean(&centers))?;
    let fstar = centers.iter().fold(S::zero(), |acc, c| acc + xstar.sub(c).norm_squared());
    ProblemInstance::new(COMMON_BOX_QUADRATIC, agents, bound, Some(fstar), Some(xstar))
}

/// Boxes intersect in `[0.5, 2] x [-1, 1]`. Summed objective is
/// `2.5|x0| + 0.25 x0 + 2.5|x1| - 0.25 x1`, increasing in `x0 > 0` and
/// minimized at `x1 = 0`, so `x* = (0.5, 0)` and `f* = 2.75 * 0.5`.
fn distinct_boxes_abs<S: Scalar>() -> Result<ProblemInstance<S>> {
    // lower corner, upper corner, abs weights, linear coefficients
    let layout: [[[f64; 2]; 4]; 3] = [
        [[0.5, -2.0], [3.0, 1.5], [1.0, 1.0], [0.5, -0.5]],
        [[-1.0, -1.0], [2.0, 2.0], [0.5, 1.0], [-0.25, 0.25]],
        [[0.0, -1.5], [2.5, 1.0], [1.0, 0.5], [0.0, 0.0]],
    ];
    let mut agents = Vec::new();
    let mut bound = S::zero();
    for [lower, upper, abs_w, lin] in layout {
        let set = ConvexSet::boxed(lower.map(S::of).to_vec(), upper.map(S::of).to_vec())?;
        let f = Objective::sum(vec![
            Objective::abs(Point::from_f64(&abs_w)?)?,
            Objective::linear(Point::from_f64(&lin)?),
        ])?;
        // Tight bound for weighted-abs plus linear: worst sign pattern.
        let l = abs_w
            .iter()
            .zip(lin)
            .map(|(w, c)| (w + c.abs()) * (w + c.abs()))
            .sum::<f64>()
            .sqrt();
        bound = bound.max(S::of(l));
        agents.push(AgentSpec::anchored(f, set));
    }
    let xstar = Point::from_f64(&[0.5, 0.0])?;
    ProblemInstance::new(DISTINCT_BOXES_ABS, agents, bound, Some(S::of(1.375)), Some(xstar))
}

/// Result of the grid oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct GridOptimum<S> {
    pub value: S,
    pub point: Point<S>,
    /// Diagonal of one grid cell.
    pub cell_diagonal: S,
}

impl<S: Scalar> GridOptimum<S> {
    /// `2 * (m L) * cell_diagonal`, where `m L` bounds the Lipschitz constant
    /// of the summed objective.
    pub fn tolerance(&self, problem: &ProblemInstance<S>) -> S {
        S::of(2.0)
            * S::from_usize(problem.num_agents()).unwrap()
            * problem.subgradient_bound()
            * self.cell_diagonal
    }
}

/// Exhaustive grid search over the bounding box of `X`, keeping points
/// feasible for every agent. Ties resolve to the lexicographically smallest
/// point.
pub fn brute_force_optimum<S: Scalar>(
    problem: &ProblemInstance<S>,
    resolution: usize,
) -> Result<GridOptimum<S>> {
    if resolution == 0 {
        return Err(invalid("grid resolution must be positive"));
    }
    let n = problem.dim();
    if n > 3 {
        return Err(Error::Unsupported(format!("grid oracle supports n <= 3, got {n}")));
    }
    let mut lower = vec![S::neg_infinity(); n];
    let mut upper = vec![S::infinity(); n];
    for a in problem.agents() {
        let (lo, hi) = a.constraint.bounding_box();
        for j in 0..n {
            lower[j] = lower[j].max(lo[j]);
            upper[j] = upper[j].min(hi[j]);
        }
    }
    if lower.iter().chain(&upper).any(|c| !c.is_finite()) {
        return Err(Error::Unsupported("feasible set is unbounded".into()));
    }
    let axes: Vec<Vec<S>> = (0..n)
        .map(|j| {
            if resolution == 1 || lower[j] == upper[j] {
                vec![(lower[j] + upper[j]) / S::of(2.0)]
            } else {
                let step = (upper[j] - lower[j]) / S::from_usize(resolution - 1).unwrap();
                (0..resolution)
                    .map(|i| if i + 1 == resolution { upper[j] } else { lower[j] + step * S::from_usize(i).unwrap() })
                    .collect()
            }
        })
        .collect();
    let cell_diagonal = axes
        .iter()
        .map(|ax| if ax.len() > 1 { ax[1] - ax[0] } else { S::zero() })
        .fold(S::zero(), |acc, h| acc + h * h)
        .sqrt();
    let feas_tol = S::of(1e-9);

    let eval_tail = |head: usize| -> Option<(S, Vec<S>)> {
        let mut best: Option<(S, Vec<S>)> = None;
        let tail_len: usize = axes[1..].iter().map(Vec::len).product();
        let mut x = vec![S::zero(); n];
        x[0] = axes[0][head];
        for flat in 0..tail_len {
            let mut rest = flat;
            for j in (1..n).rev() {
                x[j] = axes[j][rest % axes[j].len()];
                rest /= axes[j].len();
            }
            let point = Point::raw(x.clone());
            let feasible = problem
                .agents()
                .iter()
                .all(|a| a.constraint.distance(&point).is_ok_and(|d| d <= feas_tol));
            if !feasible {
                continue;
            }
            let value = problem.global_objective(&point).ok()?;
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, x.clone()));
            }
        }
        best
    };
    // Heads are scanned in ascending order and merged keeping the earlier
    // candidate on ties, which preserves the lexicographic tie-break.
    let best = (0..axes[0].len())
        .into_par_iter()
        .map(eval_tail)
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None::<(S, Vec<S>)>, |acc, cand| match acc {
            Some(a) if a.0 <= cand.0 => Some(a),
            _ => Some(cand),
        });
    let (value, x) = best.ok_or_else(|| Error::Unsupported("no feasible grid point".into()))?;
    Ok(GridOptimum { value, point: Point::raw(x), cell_diagonal })
}
