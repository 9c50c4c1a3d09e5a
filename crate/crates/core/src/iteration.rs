//! The projected multi-agent subgradient iteration.
//!
//! Each step mixes neighbor estimates with the sampled weights, takes a
//! local subgradient step at the mixed point and projects back onto the
//! agent's own constraint set:
//!
//! ```text
//! v_i = sum_j a_ij x_j
//! x_i' = P_i(v_i - alpha d_i),   d_i in ∂f_i(v_i)
//! e_i = x_i' - (v_i - alpha d_i)
//! ```

use rand::Rng;

use crate::communication::{build_weight_matrix, sample_activations, ActiveSet, CommModel, WeightMatrix};
use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::Point;
use crate::problems::ProblemInstance;
use crate::rng::{self, SimRng};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule<S> {
    Constant(S),
    /// `1 / ((k + 2) ln(k + 2))`
    HarmonicLog,
    /// `c / (k + 1)^p` with `p` in `(0.5, 1]`
    Power { c: S, p: S },
}

/// Summability properties of a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScheduleFlags {
    /// `k log^p(k) alpha(k) -> 0` for every `p < 1`.
    pub limiting: bool,
    pub square_summable: bool,
    pub nonsummable: bool,
}

impl<S: Scalar> StepSchedule<S> {
    pub fn constant(alpha: S) -> Result<Self> {
        if !(alpha > S::zero()) || !alpha.is_finite() {
            return Err(invalid("constant stepsize must be positive"));
        }
        Ok(Self::Constant(alpha))
    }

    pub fn power(c: S, p: S) -> Result<Self> {
        if !(c > S::zero()) || !c.is_finite() {
            return Err(invalid("power schedule scale must be positive"));
        }
        if !(p > S::of(0.5) && p <= S::one()) {
            return Err(invalid("power schedule exponent must lie in (0.5, 1]"));
        }
        Ok(Self::Power { c, p })
    }

    pub fn stepsize(&self, k: usize) -> S {
        let k = S::from_usize(k).unwrap();
        match *self {
            Self::Constant(a) => a,
            Self::HarmonicLog => {
                let t = k + S::of(2.0);
                S::one() / (t * t.ln())
            }
            Self::Power { c, p } => c / (k + S::one()).powf(p),
        }
    }

    pub fn flags(&self) -> ScheduleFlags {
        match *self {
            Self::Constant(_) => ScheduleFlags { limiting: false, square_summable: false, nonsummable: true },
            Self::HarmonicLog => ScheduleFlags { limiting: true, square_summable: true, nonsummable: true },
            Self::Power { p, .. } => {
                ScheduleFlags { limiting: false, square_summable: p > S::of(0.5), nonsummable: true }
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Constant(a) => format!("constant({a})"),
            Self::HarmonicLog => "harmonic_log".to_string(),
            Self::Power { c, p } => format!("power({c}, {p})"),
        }
    }
}

/// Everything computed during step `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<S> {
    pub k: usize,
    /// Post-update estimates `x_i(k+1)`.
    pub x: Vec<Point<S>>,
    pub v: Vec<Point<S>>,
    pub d: Vec<Point<S>>,
    pub e: Vec<Point<S>>,
    /// `A(k)`; dropped from stored traces unless matrices are recorded.
    pub weights: Option<WeightMatrix<S>>,
    pub active: ActiveSet,
    pub alpha: S,
}

/// Per-agent `(x', v, d, e)` of one step.
pub type StepParts<S> = (Vec<Point<S>>, Vec<Point<S>>, Vec<Point<S>>, Vec<Point<S>>);

/// Mixes with the given weights and applies the projected subgradient step.
pub fn apply_weights<S: Scalar>(
    problem: &ProblemInstance<S>,
    weights: &WeightMatrix<S>,
    state: &[Point<S>],
    alpha: S,
) -> Result<StepParts<S>> {
    let m = problem.num_agents();
    check_dim(m, state.len())?;
    check_dim(m, weights.size())?;
    let n = problem.dim();
    let mut xs = Vec::with_capacity(m);
    let mut vs = Vec::with_capacity(m);
    let mut ds = Vec::with_capacity(m);
    let mut es = Vec::with_capacity(m);
    for (i, agent) in problem.agents().iter().enumerate() {
        let mut v = Point::zeros(n);
        for (j, xj) in state.iter().enumerate() {
            let a = weights.get(i, j);
            if a != S::zero() {
                v = v.axpy(a, xj);
            }
        }
        let d = agent.objective.subgradient(&v)?;
        let target = v.axpy(-alpha, &d);
        let x = agent.constraint.project(&target)?;
        let e = x.sub(&target);
        xs.push(x);
        vs.push(v);
        ds.push(d);
        es.push(e);
    }
    Ok((xs, vs, ds, es))
}

/// One iteration from `state = x(k)`.
pub fn step<S: Scalar, R: Rng + ?Sized>(
    problem: &ProblemInstance<S>,
    model: &CommModel<S>,
    schedule: &StepSchedule<S>,
    state: &[Point<S>],
    k: usize,
    rng: &mut R,
) -> Result<IterationRecord<S>> {
    check_dim(problem.num_agents(), model.num_agents())?;
    check_dim(problem.num_agents(), state.len())?;
    let active = sample_activations(model, state, rng)?;
    let weights = build_weight_matrix(model, &active)?;
    let alpha = schedule.stepsize(k);
    let (x, v, d, e) = apply_weights(problem, &weights, state, alpha)?;
    if let Some(i) = x.iter().position(|p| !p.is_finite()) {
        return Err(Error::OutOfRange(format!("estimate of agent {i} became non-finite at step {k}")));
    }
    Ok(IterationRecord { k, x, v, d, e, weights: Some(weights), active, alpha })
}

/// Receives every step of a simulation as it happens.
pub trait StepObserver<S> {
    /// `previous` is `x(k)`; `record.x` is `x(k+1)`.
    fn observe(&mut self, previous: &[Point<S>], record: &IterationRecord<S>) -> Result<()>;
}

impl<S> StepObserver<S> for () {
    fn observe(&mut self, _: &[Point<S>], _: &IterationRecord<S>) -> Result<()> {
        Ok(())
    }
}

impl<S, A: StepObserver<S>, B: StepObserver<S>> StepObserver<S> for (A, B) {
    fn observe(&mut self, previous: &[Point<S>], record: &IterationRecord<S>) -> Result<()> {
        self.0.observe(previous, record)?;
        self.1.observe(previous, record)
    }
}

impl<S, O: StepObserver<S> + ?Sized> StepObserver<S> for &mut O {
    fn observe(&mut self, previous: &[Point<S>], record: &IterationRecord<S>) -> Result<()> {
        (**self).observe(previous, record)
    }
}

/// Runs `horizon` steps from the problem's initial points, streaming each
/// record to `observer` without storing it. Returns the final state.
pub fn simulate<S: Scalar, O: StepObserver<S>>(
    problem: &ProblemInstance<S>,
    model: &CommModel<S>,
    schedule: &StepSchedule<S>,
    horizon: usize,
    rng: &mut SimRng,
    mut observer: O,
) -> Result<Vec<Point<S>>> {
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let mut state = problem.initial_state();
    for k in 0..horizon {
        let record = step(problem, model, schedule, &state, k, rng)?;
        observer.observe(&state, &record)?;
        state = record.x;
    }
    Ok(state)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep `A(k)` in every stored record instead of rebuilding on demand.
    pub record_matrices: bool,
}

/// Full record of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<S> {
    pub problem: String,
    pub schedule: StepSchedule<S>,
    pub model: CommModel<S>,
    pub seed: u64,
    pub stream: u64,
    pub initial: Vec<Point<S>>,
    pub records: Vec<IterationRecord<S>>,
}

impl<S: Scalar> Trace<S> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `x(k)` for `k = 0..=len`.
    pub fn state(&self, k: usize) -> Option<&[Point<S>]> {
        match k {
            0 => Some(&self.initial),
            _ => self.records.get(k - 1).map(|r| r.x.as_slice()),
        }
    }

    pub fn final_state(&self) -> &[Point<S>] {
        self.state(self.len()).expect("state at trace length exists")
    }

    /// `A(k)`, taken from the record or rebuilt from its active edges.
    pub fn weight_matrix(&self, k: usize) -> Result<WeightMatrix<S>> {
        let record = self
            .records
            .get(k)
            .ok_or_else(|| Error::OutOfRange(format!("step {k} beyond trace of length {}", self.len())))?;
        match &record.weights {
            Some(w) => Ok(w.clone()),
            None => build_weight_matrix(&self.model, &record.active),
        }
    }

    pub fn activation_history(&self) -> Vec<ActiveSet> {
        self.records.iter().map(|r| r.active.clone()).collect()
    }
}

struct Recorder<'a, S> {
    records: &'a mut Vec<IterationRecord<S>>,
    keep_matrices: bool,
}

impl<S: Scalar> StepObserver<S> for Recorder<'_, S> {
    fn observe(&mut self, _: &[Point<S>], record: &IterationRecord<S>) -> Result<()> {
        let mut r = record.clone();
        if !self.keep_matrices {
            r.weights = None;
        }
        self.records.push(r);
        Ok(())
    }
}

/// Runs trial `stream` of base seed `seed` and stores every record.
pub fn run_trial<S: Scalar>(
    problem: &ProblemInstance<S>,
    model: &CommModel<S>,
    schedule: &StepSchedule<S>,
    horizon: usize,
    seed: u64,
    stream: u64,
    options: RunOptions,
) -> Result<Trace<S>> {
    let mut records = Vec::with_capacity(horizon);
    let mut rng = rng::stream(seed, stream);
    simulate(
        problem,
        model,
        schedule,
        horizon,
        &mut rng,
        Recorder { records: &mut records, keep_matrices: options.record_matrices },
    )?;
    Ok(Trace {
        problem: problem.name().to_string(),
        schedule: *schedule,
        model: model.clone(),
        seed,
        stream,
        initial: problem.initial_state(),
        records,
    })
}

pub fn run<S: Scalar>(
    problem: &ProblemInstance<S>,
    model: &CommModel<S>,
    schedule: &StepSchedule<S>,
    horizon: usize,
    seed: u64,
    options: RunOptions,
) -> Result<Trace<S>> {
    run_trial(problem, model, schedule, horizon, seed, 0, options)
}

/// `y = (1/m) sum_j x_j`
pub fn y_average<S: Scalar>(state: &[Point<S>]) -> Result<Point<S>> {
    if state.is_empty() {
        return Err(invalid("average of an empty state"));
    }
    let n = state[0].dim();
    for p in state {
        check_dim(n, p.dim())?;
    }
    Ok(Point::mean(state))
}
