//! Statistical behavior of the method over many seeded runs.

use dsgm::analysis::{estimate_expected_rho, run_metrics, Tolerances};
use dsgm::communication::{BackboneGraph, CommModel, CommParams, Topology};
use dsgm::geometry::Point;
use dsgm::iteration::{run, simulate, IterationRecord, RunOptions, StepObserver, StepSchedule};
use dsgm::problems::{builtin, ProblemParams, COMMON_BOX_QUADRATIC, DISTINCT_BOXES_ABS};
use dsgm::{rng, Scalar};

fn complete3<S: Scalar>(gamma: f64, delta: f64) -> CommModel<S> {
    CommModel::new(
        BackboneGraph::topology(Topology::Complete, 3).unwrap(),
        CommParams::new(S::of(gamma), S::of(delta), S::one(), S::one()).unwrap(),
    )
    .unwrap()
}

struct ConsensusAt {
    at: Vec<usize>,
    values: Vec<f64>,
}

impl StepObserver<f64> for ConsensusAt {
    fn observe(&mut self, _: &[Point<f64>], r: &IterationRecord<f64>) -> dsgm::Result<()> {
        if self.at.contains(&(r.k + 1)) {
            let y = Point::mean(&r.x);
            self.values.push(r.x.iter().map(|x| x.distance_to(&y)).fold(0.0, f64::max));
        }
        Ok(())
    }
}

#[test]
fn expected_disagreement_vanishes() {
    let problem = builtin::<f64>(COMMON_BOX_QUADRATIC, &ProblemParams::default()).unwrap();
    let model = complete3(0.25, 0.5);
    let at = vec![100, 100_000];
    let mut sums = [0.0; 2];
    let trials = 30;
    for trial in 0..trials {
        let mut probe = ConsensusAt { at: at.clone(), values: Vec::new() };
        let mut stream = rng::stream(21, trial);
        simulate(&problem, &model, &StepSchedule::HarmonicLog, 100_000, &mut stream, &mut probe).unwrap();
        sums[0] += probe.values[0];
        sums[1] += probe.values[1];
    }
    let (early, late) = (sums[0] / trials as f64, sums[1] / trials as f64);
    assert!(late < early, "mean consensus error {early} at k=1e2, {late} at k=1e5");
}

#[test]
fn single_run_consensus_drops_hundredfold() {
    let problem = builtin::<f64>(COMMON_BOX_QUADRATIC, &ProblemParams::default()).unwrap();
    let model = complete3(0.25, 0.5);
    let trace = run(&problem, &model, &StepSchedule::HarmonicLog, 100_000, 4, RunOptions::default()).unwrap();
    let metrics = run_metrics(&trace, &problem, problem.known_xstar().cloned(), Tolerances::default()).unwrap();
    let series = metrics.consensus_series();
    assert!(series[series.len() - 1] * 100.0 < series[0], "{} vs {}", series[series.len() - 1], series[0]);
    assert!(metrics.audit.all_passed(), "{}", metrics.audit);
}

#[test]
fn expected_rho_is_nonincreasing() {
    let problem = builtin::<f64>(DISTINCT_BOXES_ABS, &ProblemParams::default()).unwrap();
    let model = CommModel::new(
        BackboneGraph::topology(Topology::Ring, 3).unwrap(),
        CommParams::new(0.25, 0.5, 1.0, 1.0).unwrap(),
    )
    .unwrap();
    let schedule = StepSchedule::power(1.0, 0.75).unwrap();
    let ks: Vec<usize> = (5..=40).step_by(5).collect();
    let est = estimate_expected_rho(&problem, &model, &schedule, 5, &ks, 100, 8).unwrap();
    for w in est.windows(2) {
        assert!(w[1].mean <= w[0].mean + 2.0 * (w[0].stderr + w[1].stderr), "{w:?}");
    }
}

#[test]
fn single_factor_rho_is_bounded() {
    let problem = builtin::<f64>(DISTINCT_BOXES_ABS, &ProblemParams::default()).unwrap();
    let model = complete3(0.25, 0.5);
    let schedule = StepSchedule::HarmonicLog;
    let est = estimate_expected_rho(&problem, &model, &schedule, 3, &[3], 50, 2).unwrap();
    assert!(est[0].mean > 0.0 && est[0].mean <= 1.0 - 1.0 / 3.0);
}

#[test]
fn single_precision_run() {
    let problem = builtin::<f32>(COMMON_BOX_QUADRATIC, &ProblemParams::default()).unwrap();
    let model = complete3::<f32>(0.25, 0.5);
    let a = run(&problem, &model, &StepSchedule::HarmonicLog, 5_000, 1, RunOptions::default()).unwrap();
    let b = run(&problem, &model, &StepSchedule::HarmonicLog, 5_000, 1, RunOptions::default()).unwrap();
    assert_eq!(a, b);
    let loose = Tolerances {
        doubly_stochastic: 1e-5,
        reconstruction: 1e-5,
        feasibility: 1e-5,
        y_recursion: 1e-4,
        lemma1: 1e-3,
        lemma9: 1e-4,
        lemma6b: 1e-3,
        lemma3: 1e-5,
    };
    let metrics = run_metrics(&a, &problem, problem.known_xstar().cloned(), loose).unwrap();
    assert!(metrics.audit.all_passed(), "{}", metrics.audit);
    let series = metrics.consensus_series();
    assert!(series[series.len() - 1] < series[0]);
}
