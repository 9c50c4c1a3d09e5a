use rayon::prelude::*;

use super::disagreement::DeviationTracker;
use crate::error::{invalid, Error, Result};
use crate::geometry::Point;
use crate::iteration::{simulate, IterationRecord, StepObserver, StepSchedule};
use crate::problems::ProblemInstance;
use crate::communication::CommModel;
use crate::rng;
use crate::Scalar;

/// Sample mean and standard error of `ρ(k, s)` over independent trials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhoEstimate<S> {
    pub k: usize,
    pub s: usize,
    pub mean: S,
    pub stderr: S,
    pub trials: usize,
}

struct RhoProbe<'a, S> {
    s: usize,
    k_list: &'a [usize],
    tracker: Option<DeviationTracker<S>>,
    out: Vec<S>,
}

impl<S: Scalar> StepObserver<S> for RhoProbe<'_, S> {
    fn observe(&mut self, _: &[Point<S>], record: &IterationRecord<S>) -> Result<()> {
        if record.k < self.s {
            return Ok(());
        }
        let a = record.weights.as_ref().expect("simulation records carry weights").matrix();
        let tracker = match &mut self.tracker {
            Some(t) => {
                t.push(a);
                t
            }
            None => self.tracker.insert(DeviationTracker::new(a, self.s)),
        };
        if self.k_list.binary_search(&record.k).is_ok() {
            self.out.push(tracker.rho());
        }
        Ok(())
    }
}

/// Runs `trials` independent simulations (trial `i` on stream `i` of
/// `base_seed`) and aggregates `ρ(k, s)` for every `k` in `k_list`.
pub fn estimate_expected_rho<S: Scalar>(
    problem: &ProblemInstance<S>,
    model: &CommModel<S>,
    schedule: &StepSchedule<S>,
    s: usize,
    k_list: &[usize],
    trials: usize,
    base_seed: u64,
) -> Result<Vec<RhoEstimate<S>>> {
    if trials < 30 {
        return Err(invalid(format!("at least 30 trials are required, got {trials}")));
    }
    let mut ks = k_list.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] < s {
        return Err(invalid("k_list must be nonempty with every k >= s"));
    }
    let horizon = ks[ks.len() - 1] + 1;
    let per_trial: Vec<Vec<S>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut probe = RhoProbe { s, k_list: &ks, tracker: None, out: Vec::with_capacity(ks.len()) };
            let mut rng = rng::stream(base_seed, trial);
            simulate(problem, model, schedule, horizon, &mut rng, &mut probe)?;
            Ok(probe.out)
        })
        .collect::<Result<_>>()?;

    let count = S::from_usize(trials).unwrap();
    Ok(ks
        .iter()
        .enumerate()
        .map(|(idx, &k)| {
            let mean = per_trial.iter().fold(S::zero(), |acc, v| acc + v[idx]) / count;
            let var = per_trial.iter().fold(S::zero(), |acc, v| acc + (v[idx] - mean).powi(2))
                / (count - S::one());
            RhoEstimate { k, s, mean, stderr: (var / count).sqrt(), trials }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayModel {
    /// `a exp(-b sqrt(k - s))`
    SqrtExponential,
    /// `a exp(-b (k - s))`
    Exponential,
}

impl DecayModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::SqrtExponential => "sqrt_exponential",
            Self::Exponential => "exponential",
        }
    }

    fn regressor(self, lag: f64) -> f64 {
        match self {
            Self::SqrtExponential => lag.sqrt(),
            Self::Exponential => lag,
        }
    }
}

/// Log-space least-squares fit of a decay law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionFit {
    pub model: DecayModel,
    pub a: f64,
    pub b: f64,
    pub b_stderr: f64,
    /// Sum of squared log-space residuals.
    pub residual: f64,
    pub points: usize,
}

/// Fits `ln mean = ln a - b * g(k - s)` over points whose mean exceeds ten
/// standard errors.
pub fn fit_decay<S: Scalar>(series: &[RhoEstimate<S>], model: DecayModel) -> Result<ContractionFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|e| e.mean > S::zero() && e.mean > S::of(10.0) * e.stderr)
        .map(|e| (model.regressor((e.k - e.s) as f64), e.mean.as_f64().ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientPoints { needed: 5, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("decay fit needs at least two distinct lags"));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let b_stderr = (residual / (n - 2.0) / sxx).sqrt();
    Ok(ContractionFit { model, a: intercept.exp(), b: -slope, b_stderr, residual, points: pts.len() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayComparison {
    pub exponential: ContractionFit,
    pub sqrt_exponential: ContractionFit,
}

impl DecayComparison {
    /// Model with the lower residual; exponential wins ties.
    pub fn preferred(&self) -> DecayModel {
        if self.exponential.residual <= self.sqrt_exponential.residual {
            DecayModel::Exponential
        } else {
            DecayModel::SqrtExponential
        }
    }
}

pub fn compare_decay_models<S: Scalar>(series: &[RhoEstimate<S>]) -> Result<DecayComparison> {
    Ok(DecayComparison {
        exponential: fit_decay(series, DecayModel::Exponential)?,
        sqrt_exponential: fit_decay(series, DecayModel::SqrtExponential)?,
    })
}
