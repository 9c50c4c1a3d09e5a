//! Transition matrices, the disagreement metric, lemma-bound verdicts, run
//! metrics and Monte Carlo estimation of expected disagreement.

mod checks;
mod disagreement;
mod metrics;
mod montecarlo;

pub use checks::{AuditReport, CheckKind, CheckSummary, LemmaChecker, StepVerdicts, Tolerances};
pub use disagreement::{
    disagreement_series, lemma3_bound, lemma3_verdict, lemma3_verdict_from_history, random_spans, rho, transition,
    transition_from_history, DeviationTracker, DisagreementSeries, Lemma3Verdict, TransitionMatrix,
};
pub use metrics::{audit_records, run_metrics, MetricsRecorder, MetricsRow, RunMetrics};
pub use montecarlo::{
    compare_decay_models, estimate_expected_rho, fit_decay, ContractionFit, DecayComparison, DecayModel, RhoEstimate,
};
