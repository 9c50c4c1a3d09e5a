use super::checks::{max_pairwise, AuditReport, CheckKind, LemmaChecker, StepVerdicts, Tolerances};
use crate::communication::{ActiveSet, CommModel};
use crate::error::{invalid, Result};
use crate::geometry::{ConvexSet, Point};
use crate::iteration::{IterationRecord, StepObserver, Trace};
use crate::problems::ProblemInstance;
use crate::Scalar;

/// Metrics of the state `x(k+1)` produced by step `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow<S> {
    pub k: usize,
    /// `max_i ||x_i - y||`
    pub consensus_max: S,
    /// `max_{i,h} ||x_i - x_h||`
    pub pairwise_max: S,
    /// `f(y) - f*` when `f*` is known.
    pub f_gap: Option<S>,
    /// `dist(y, X)` when `X` has a closed form.
    pub dist_y_to_x: Option<S>,
    pub verdicts: StepVerdicts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics<S> {
    pub rows: Vec<MetricsRow<S>>,
    pub audit: AuditReport,
}

impl<S: Scalar> RunMetrics<S> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn consensus_series(&self) -> Vec<S> {
        self.rows.iter().map(|r| r.consensus_max).collect()
    }

    pub fn f_gap_series(&self) -> Option<Vec<S>> {
        self.rows.iter().map(|r| r.f_gap).collect()
    }
}

/// Streaming observer computing [`RunMetrics`] and running every per-step
/// check. Optionally keeps the activation history for span checks.
pub struct MetricsRecorder<'a, S> {
    problem: &'a ProblemInstance<S>,
    checker: LemmaChecker<'a, S>,
    intersection: Option<ConvexSet<S>>,
    rows: Vec<MetricsRow<S>>,
    audit: AuditReport,
    keep_rows: bool,
    history: Option<Vec<ActiveSet>>,
}

impl<'a, S: Scalar> MetricsRecorder<'a, S> {
    pub fn new(
        problem: &'a ProblemInstance<S>,
        model: &'a CommModel<S>,
        z: Option<Point<S>>,
        tol: Tolerances,
    ) -> Result<Self> {
        let checker = LemmaChecker::new(problem, model, &problem.initial_state(), z, tol)?;
        let mut audit = AuditReport::default();
        if !checker.lemma9_applicable() {
            audit.set_note(CheckKind::Lemma9, "not applicable: agents have different constraint sets");
        }
        if !checker.lemma6b_applicable() {
            audit.set_note(CheckKind::Lemma6b, "not applicable: no reference point in X");
        }
        Ok(Self {
            problem,
            checker,
            intersection: problem.intersection(),
            rows: Vec::new(),
            audit,
            keep_rows: true,
            history: None,
        })
    }

    /// Skip storing per-step rows; only the audit tallies are kept.
    pub fn audit_only(mut self) -> Self {
        self.keep_rows = false;
        self
    }

    pub fn with_history(mut self) -> Self {
        self.history = Some(Vec::new());
        self
    }

    pub fn rows(&self) -> &[MetricsRow<S>] {
        &self.rows
    }

    pub fn history(&self) -> Option<&[ActiveSet]> {
        self.history.as_deref()
    }

    pub fn audit_mut(&mut self) -> &mut AuditReport {
        &mut self.audit
    }

    pub fn finish(self) -> (RunMetrics<S>, Option<Vec<ActiveSet>>) {
        (RunMetrics { rows: self.rows, audit: self.audit }, self.history)
    }
}

impl<S: Scalar> StepObserver<S> for MetricsRecorder<'_, S> {
    fn observe(&mut self, previous: &[Point<S>], record: &IterationRecord<S>) -> Result<()> {
        let verdicts = self.checker.check(previous, record)?;
        self.audit.record_step(record.k, &verdicts);
        if let Some(h) = &mut self.history {
            h.push(record.active.clone());
        }
        if self.keep_rows {
            let y = Point::mean(&record.x);
            let consensus_max = record.x.iter().fold(S::zero(), |acc, x| acc.max(x.distance_to(&y)));
            let f_gap = match self.problem.known_fstar() {
                Some(f) => Some(self.problem.global_objective(&y)? - f),
                None => None,
            };
            let dist_y_to_x = match &self.intersection {
                Some(set) => Some(set.distance(&y)?),
                None => None,
            };
            self.rows.push(MetricsRow {
                k: record.k,
                consensus_max,
                pairwise_max: max_pairwise(&record.x),
                f_gap,
                dist_y_to_x,
                verdicts,
            });
        }
        Ok(())
    }
}

/// Replays a stored trace through [`MetricsRecorder`], rebuilding weight
/// matrices that were not recorded.
pub fn run_metrics<S: Scalar>(
    trace: &Trace<S>,
    problem: &ProblemInstance<S>,
    z: Option<Point<S>>,
    tol: Tolerances,
) -> Result<RunMetrics<S>> {
    let mut recorder = MetricsRecorder::new(problem, &trace.model, z, tol)?;
    for (k, record) in trace.records.iter().enumerate() {
        let previous = trace.state(k).expect("state exists for every record");
        if record.weights.is_some() {
            recorder.observe(previous, record)?;
        } else {
            let mut full = record.clone();
            full.weights = Some(trace.weight_matrix(k)?);
            recorder.observe(previous, &full)?;
        }
    }
    Ok(recorder.finish().0)
}

/// Audits records loaded from a file that carries neither weight matrices
/// nor activations. `x(0)` is the problem's initial state.
pub fn audit_records<S: Scalar>(
    problem: &ProblemInstance<S>,
    model: &CommModel<S>,
    records: &[IterationRecord<S>],
    z: Option<Point<S>>,
    tol: Tolerances,
) -> Result<RunMetrics<S>> {
    let mut recorder = MetricsRecorder::new(problem, model, z, tol)?;
    let note = "not available: trace file carries no weight matrices";
    recorder.audit_mut().set_note(CheckKind::WeightMatrix, note);
    recorder.audit_mut().set_note(CheckKind::Lemma3, note);
    let mut previous = problem.initial_state();
    for (k, record) in records.iter().enumerate() {
        if record.k != k || record.x.len() != problem.num_agents() {
            return Err(invalid(format!("record {k} does not match the problem")));
        }
        let mut bare = record.clone();
        bare.weights = None;
        recorder.observe(&previous, &bare)?;
        previous.clone_from(&record.x);
    }
    Ok(recorder.finish().0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::communication::{BackboneGraph, CommParams, Topology};
    use crate::geometry::Objective;
    use crate::iteration::{run, RunOptions, StepSchedule};
    use crate::problems::{builtin, AgentSpec, ProblemParams, COMMON_BOX_QUADRATIC, COUNTEREXAMPLE, DISTINCT_BOXES_ABS};

    fn complete(m: usize, gamma: f64) -> CommModel<f64> {
        CommModel::new(
            BackboneGraph::topology(Topology::Complete, m).unwrap(),
            CommParams::new(gamma, 0.5, 1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identical_agents_stay_in_consensus() {
        let set = ConvexSet::full_space(2);
        let start = Point::from_f64(&[1.0, -1.0]).unwrap();
        let agents = (0..3)
            .map(|_| AgentSpec { objective: Objective::zero(2), constraint: set.clone(), initial_point: start.clone() })
            .collect();
        let prob = ProblemInstance::new("zero", agents, 1.0, None, None).unwrap();
        let model = complete(3, 0.25);
        let trace = run(&prob, &model, &StepSchedule::HarmonicLog, 50, 3, RunOptions::default()).unwrap();
        let metrics = run_metrics(&trace, &prob, prob.reference_point(), Tolerances::default()).unwrap();
        assert_eq!(metrics.len(), 50);
        assert!(metrics.consensus_series().iter().all(|&c| c == 0.0));
        assert!(metrics.audit.all_passed());
    }

    #[test]
    fn catalog_runs_pass_every_check() {
        for (name, sched) in [
            (COMMON_BOX_QUADRATIC, StepSchedule::HarmonicLog),
            (DISTINCT_BOXES_ABS, StepSchedule::power(1.0, 0.75).unwrap()),
        ] {
            let prob = builtin::<f64>(name, &ProblemParams::default()).unwrap();
            let model = complete(3, 0.25);
            let trace = run(&prob, &model, &sched, 2000, 17, RunOptions::default()).unwrap();
            let metrics = run_metrics(&trace, &prob, prob.known_xstar().cloned(), Tolerances::default()).unwrap();
            assert!(metrics.audit.all_passed(), "{name}:\n{}", metrics.audit);
            let lemma9 = metrics.audit.summary(CheckKind::Lemma9);
            assert_eq!(lemma9.evaluated > 0, prob.same_constraints());
            assert!(metrics.rows.iter().all(|r| r.dist_y_to_x.is_some()));
        }
    }

    #[test]
    fn counterexample_gap_grows() {
        let prob = builtin::<f64>(COUNTEREXAMPLE, &ProblemParams::default())
            .unwrap()
            .with_initial_points(vec![Point::from_f64(&[1.0]).unwrap(), Point::from_f64(&[1.0]).unwrap()])
            .unwrap();
        let model = CommModel::new(
            BackboneGraph::topology(Topology::Path, 2).unwrap(),
            CommParams::new(0.5, 0.5, 0.01, 2.0).unwrap(),
        )
        .unwrap();
        let trace = run(&prob, &model, &StepSchedule::constant(0.1).unwrap(), 5000, 8, RunOptions::default()).unwrap();
        let metrics = run_metrics(&trace, &prob, prob.known_xstar().cloned(), Tolerances::default()).unwrap();
        let gaps = metrics.f_gap_series().unwrap();
        assert!(gaps[gaps.len() - 1] > gaps[0]);
        assert!(metrics.audit.all_passed(), "{}", metrics.audit);
    }

    #[test]
    fn corrupted_record_is_flagged() {
        let prob = builtin::<f64>(COMMON_BOX_QUADRATIC, &ProblemParams::default()).unwrap();
        let model = complete(3, 0.25);
        let mut trace = run(&prob, &model, &StepSchedule::HarmonicLog, 40, 1, RunOptions::default()).unwrap();
        let bumped = trace.records[12].x[1].add(&Point::from_f64(&[0.5, 0.0]).unwrap());
        trace.records[12].x[1] = bumped;
        let metrics = run_metrics(&trace, &prob, prob.known_xstar().cloned(), Tolerances::default()).unwrap();
        assert!(!metrics.audit.all_passed());
        assert_eq!(metrics.audit.summary(CheckKind::Reconstruction).first_failure, Some(12));
        assert!(!metrics.rows[12].verdicts.all_ok());

        let records: Vec<_> = trace.records.iter().cloned().map(|mut r| { r.weights = None; r }).collect();
        let loaded = audit_records(&prob, &model, &records, prob.known_xstar().cloned(), Tolerances::default()).unwrap();
        assert_eq!(loaded.audit.summary(CheckKind::Reconstruction).first_failure, Some(12));
        assert_eq!(loaded.audit.summary(CheckKind::WeightMatrix).evaluated, 0);
        assert!(loaded.audit.to_string().contains("not available"));
    }
}
