//! Per-step verification of the iteration's algebraic identities and the
//! deterministic lemma bounds.

use std::fmt;

use super::disagreement::Lemma3Verdict;
use crate::communication::CommModel;
use crate::error::Result;
use crate::geometry::Point;
use crate::iteration::IterationRecord;
use crate::problems::ProblemInstance;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub doubly_stochastic: f64,
    /// Relative, per coordinate.
    pub reconstruction: f64,
    pub feasibility: f64,
    pub y_recursion: f64,
    pub lemma1: f64,
    pub lemma9: f64,
    pub lemma6b: f64,
    pub lemma3: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            doubly_stochastic: 1e-9,
            reconstruction: 1e-14,
            feasibility: 1e-12,
            y_recursion: 1e-10,
            lemma1: 1e-8,
            lemma9: 1e-10,
            lemma6b: 1e-8,
            lemma3: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CheckKind {
    /// `A(k)` doubly stochastic, symmetric, `a_ii >= gamma`, backbone support.
    WeightMatrix,
    /// `x_i(k+1) = v_i - alpha d_i + e_i`.
    Reconstruction,
    Feasibility,
    /// `y(k+1) = y(k) - (alpha/m) sum d_i + (1/m) sum e_i`.
    YRecursion,
    /// Pairwise spread bounded by initial spread plus accumulated steps and
    /// projection errors.
    Lemma1,
    /// `||e_i(k)|| <= 2 L alpha(k)` under a shared constraint set.
    Lemma9,
    /// Descent inequality for `sum_j ||x_j - z||^2`.
    Lemma6b,
    /// Disagreement bound from disjoint spanning-tree activation events.
    Lemma3,
}

impl CheckKind {
    pub const ALL: [CheckKind; 8] = [
        Self::WeightMatrix,
        Self::Reconstruction,
        Self::Feasibility,
        Self::YRecursion,
        Self::Lemma1,
        Self::Lemma9,
        Self::Lemma6b,
        Self::Lemma3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::WeightMatrix => "doubly_stochastic",
            Self::Reconstruction => "reconstruction",
            Self::Feasibility => "feasibility",
            Self::YRecursion => "y_recursion",
            Self::Lemma1 => "lemma1",
            Self::Lemma9 => "lemma9",
            Self::Lemma6b => "lemma6b",
            Self::Lemma3 => "lemma3",
        }
    }
}

/// Outcome of every per-step check; `None` means not evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepVerdicts {
    pub weight_matrix: Option<bool>,
    pub reconstruction: bool,
    pub feasibility: bool,
    pub y_recursion: bool,
    pub lemma1: bool,
    pub lemma9: Option<bool>,
    pub lemma6b: Option<bool>,
}

impl StepVerdicts {
    pub fn all_ok(&self) -> bool {
        self.weight_matrix != Some(false)
            && self.reconstruction
            && self.feasibility
            && self.y_recursion
            && self.lemma1
            && self.lemma9 != Some(false)
            && self.lemma6b != Some(false)
    }

    fn get(&self, kind: CheckKind) -> Option<bool> {
        match kind {
            CheckKind::WeightMatrix => self.weight_matrix,
            CheckKind::Reconstruction => Some(self.reconstruction),
            CheckKind::Feasibility => Some(self.feasibility),
            CheckKind::YRecursion => Some(self.y_recursion),
            CheckKind::Lemma1 => Some(self.lemma1),
            CheckKind::Lemma9 => self.lemma9,
            CheckKind::Lemma6b => self.lemma6b,
            CheckKind::Lemma3 => None,
        }
    }
}

/// Stateful checker fed one record at a time.
pub struct LemmaChecker<'a, S> {
    problem: &'a ProblemInstance<S>,
    model: &'a CommModel<S>,
    z: Option<(Point<S>, S)>,
    tol: Tolerances,
    spread0: S,
    sum_alpha: S,
    sum_error_norms: S,
}

impl<'a, S: Scalar> LemmaChecker<'a, S> {
    /// `z` is the feasible comparison point for the descent inequality;
    /// `initial` is `x(0)`.
    pub fn new(
        problem: &'a ProblemInstance<S>,
        model: &'a CommModel<S>,
        initial: &[Point<S>],
        z: Option<Point<S>>,
        tol: Tolerances,
    ) -> Result<Self> {
        let z = match z {
            Some(z) => {
                let fz = problem.global_objective(&z)?;
                Some((z, fz))
            }
            None => None,
        };
        let m = S::from_usize(problem.num_agents()).unwrap();
        let max_norm = initial.iter().fold(S::zero(), |acc, x| acc.max(x.norm()));
        Ok(Self {
            problem,
            model,
            z,
            tol,
            spread0: S::of(2.0) * m * max_norm,
            sum_alpha: S::zero(),
            sum_error_norms: S::zero(),
        })
    }

    pub fn lemma9_applicable(&self) -> bool {
        self.problem.same_constraints()
    }

    pub fn lemma6b_applicable(&self) -> bool {
        self.z.is_some()
    }

    /// Verifies the transition `previous = x(k)` to `record.x = x(k+1)`.
    pub fn check(&mut self, previous: &[Point<S>], record: &IterationRecord<S>) -> Result<StepVerdicts> {
        let problem = self.problem;
        let m = problem.num_agents();
        let ms = S::from_usize(m).unwrap();
        let l = problem.subgradient_bound();
        let alpha = record.alpha;
        let t = |v: f64| S::of(v);

        let weight_matrix = record.weights.as_ref().map(|w| {
            w.validate(self.model.graph(), self.model.params().gamma, t(self.tol.doubly_stochastic)).is_ok()
        });

        let mut reconstruction = true;
        for i in 0..m {
            for j in 0..problem.dim() {
                let step = alpha * record.d[i][j];
                let rebuilt = record.v[i][j] - step + record.e[i][j];
                let scale = record.x[i][j].abs().max(record.v[i][j].abs()).max(step.abs()).max(record.e[i][j].abs());
                if (record.x[i][j] - rebuilt).abs() > t(self.tol.reconstruction) * scale {
                    reconstruction = false;
                }
            }
        }

        let mut feasibility = true;
        for (agent, x) in problem.agents().iter().zip(&record.x) {
            if agent.constraint.distance(x)? > t(self.tol.feasibility) {
                feasibility = false;
            }
        }

        let y_prev = Point::mean(previous);
        let y_next = Point::mean(&record.x);
        let d_sum = record.d.iter().fold(Point::zeros(problem.dim()), |acc, d| acc.add(d));
        let e_sum = record.e.iter().fold(Point::zeros(problem.dim()), |acc, e| acc.add(e));
        let predicted = y_prev.axpy(-alpha / ms, &d_sum).axpy(S::one() / ms, &e_sum);
        let y_recursion = y_next.distance_to(&predicted) <= t(self.tol.y_recursion);

        let e_norms: Vec<S> = record.e.iter().map(Point::norm).collect();
        self.sum_alpha += alpha;
        self.sum_error_norms += e_norms.iter().fold(S::zero(), |a, &b| a + b);
        let bound = self.spread0 + S::of(2.0) * ms * l * self.sum_alpha + S::of(2.0) * self.sum_error_norms;
        let lemma1 = max_pairwise(&record.x) <= bound + t(self.tol.lemma1);

        let lemma9 = self.lemma9_applicable().then(|| {
            let cap = S::of(2.0) * l * alpha + t(self.tol.lemma9);
            e_norms.iter().all(|&n| n <= cap)
        });

        let lemma6b = match &self.z {
            None => None,
            Some((z, fz)) => {
                let lhs = record.x.iter().fold(S::zero(), |acc, x| acc + x.sub(z).norm_squared());
                let prev_sq = previous.iter().fold(S::zero(), |acc, x| acc + x.sub(z).norm_squared());
                let spread = previous.iter().fold(S::zero(), |acc, x| acc + x.distance_to(&y_prev));
                let fy = problem.global_objective(&y_prev)?;
                let rhs = prev_sq + alpha * alpha * ms * l * l + S::of(2.0) * alpha * l * spread
                    - S::of(2.0) * alpha * (fy - *fz);
                Some(lhs <= rhs + t(self.tol.lemma6b))
            }
        };

        Ok(StepVerdicts { weight_matrix, reconstruction, feasibility, y_recursion, lemma1, lemma9, lemma6b })
    }
}

pub(crate) fn max_pairwise<S: Scalar>(points: &[Point<S>]) -> S {
    let mut best = S::zero();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(a.distance_to(b));
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckSummary {
    pub kind: CheckKind,
    pub evaluated: usize,
    pub failed: usize,
    pub first_failure: Option<usize>,
    /// Why the check was not run, when it was not.
    pub note: Option<String>,
}

impl CheckSummary {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

/// Pass/fail tallies per check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditReport {
    pub checks: Vec<CheckSummary>,
}

impl Default for AuditReport {
    fn default() -> Self {
        Self {
            checks: CheckKind::ALL
                .iter()
                .map(|&kind| CheckSummary { kind, evaluated: 0, failed: 0, first_failure: None, note: None })
                .collect(),
        }
    }
}

impl AuditReport {
    pub fn summary(&self, kind: CheckKind) -> &CheckSummary {
        self.checks.iter().find(|c| c.kind == kind).expect("every kind has a summary")
    }

    fn summary_mut(&mut self, kind: CheckKind) -> &mut CheckSummary {
        self.checks.iter_mut().find(|c| c.kind == kind).expect("every kind has a summary")
    }

    fn tally(&mut self, kind: CheckKind, k: usize, ok: bool) {
        let s = self.summary_mut(kind);
        s.evaluated += 1;
        if !ok {
            s.failed += 1;
            s.first_failure.get_or_insert(k);
        }
    }

    pub fn record_step(&mut self, k: usize, verdicts: &StepVerdicts) {
        for kind in CheckKind::ALL {
            if let Some(ok) = verdicts.get(kind) {
                self.tally(kind, k, ok);
            }
        }
    }

    /// Contraction verdicts are indexed by the end step of their span.
    pub fn record_lemma3<S: Scalar>(&mut self, verdict: &Lemma3Verdict<S>) {
        self.tally(CheckKind::Lemma3, verdict.k, verdict.holds);
    }

    pub fn set_note(&mut self, kind: CheckKind, note: impl Into<String>) {
        self.summary_mut(kind).note = Some(note.into());
    }

    pub fn total_failures(&self) -> usize {
        self.checks.iter().map(|c| c.failed).sum()
    }

    pub fn all_passed(&self) -> bool {
        self.total_failures() == 0
    }

    pub fn merge(&mut self, other: &AuditReport) {
        for theirs in &other.checks {
            let ours = self.summary_mut(theirs.kind);
            ours.evaluated += theirs.evaluated;
            ours.failed += theirs.failed;
            ours.first_failure = match (ours.first_failure, theirs.first_failure) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            if ours.note.is_none() {
                ours.note.clone_from(&theirs.note);
            }
        }
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "{:<18}", c.kind.name())?;
            if c.evaluated == 0 {
                writeln!(f, "{}", c.note.as_deref().unwrap_or("not evaluated"))?;
                continue;
            }
            write!(f, "{}/{} passed", c.evaluated - c.failed, c.evaluated)?;
            if let Some(k) = c.first_failure {
                write!(f, ", first failure at step {k}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
