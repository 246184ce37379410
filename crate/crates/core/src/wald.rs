//! The Waldboost-style early-exit extension: one stopping decision tree per
//! boosting stage, trained on cumulative validation scores, plus the
//! sequential prediction rule that exits as soon as a stopping tree is
//! confident enough.

use std::time::Instant;

use crate::boost::{self, Ensemble};
use crate::dtree;
use crate::{Error, Result};

/// Outcome of a sequential early-exit prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyExitResult {
    pub predicted_class: usize,
    /// Stages actually evaluated, in `[1, M]`.
    pub stages_evaluated: usize,
    /// Max stopping-tree probability at the exit (or final) stage.
    pub stop_confidence: f64,
}

/// Aggregate early-exit cost statistics over a sample set.
#[derive(Debug, Clone)]
pub struct EvalStats {
    pub mean_stages: f64,
    /// `stage_histogram[m]` counts samples that exited after `m + 1` stages.
    pub stage_histogram: Vec<usize>,
    pub wall_time_per_sample: f64,
    pub speedup_vs_full: f64,
}

/// Train one stopping tree per stage. For every validation sample the
/// cumulative strong scores of stages `1..=m` form the input vector of
/// stage `m`'s tree; the target is the true label, with uniform weights.
pub fn fit_stopping_trees(
    mut ensemble: Ensemble,
    validation_samples: &[Vec<f64>],
    validation_labels: &[usize],
    max_depth: usize,
) -> Result<Ensemble> {
    if !ensemble.stopping.is_empty() {
        return Err(Error::invalid("ensemble already has stopping stages"));
    }
    if validation_samples.is_empty() {
        return Err(Error::invalid("empty validation set"));
    }
    if validation_samples.len() != validation_labels.len() {
        return Err(Error::invalid("validation sample/label length mismatch"));
    }
    let k = ensemble.num_classes;
    let n = validation_samples.len();
    let weights = vec![1.0 / n as f64; n];

    let mut cumulative = vec![vec![0.0f64; k]; n];
    let mut stopping = Vec::with_capacity(ensemble.stages());
    for stage in 0..ensemble.stages() {
        for (cum, sample) in cumulative.iter_mut().zip(validation_samples) {
            let scores = boost::stage_scores(&ensemble, stage, sample)?;
            for (c, s) in cum.iter_mut().zip(scores) {
                *c += s;
            }
        }
        let tree =
            dtree::fit_tree(&cumulative, validation_labels, &weights, k, max_depth, 1e-6)?;
        stopping.push(tree);
    }
    ensemble.stopping = stopping;
    Ok(ensemble)
}

/// Evaluate stages in order; after stage `m` feed the cumulative scores to
/// stopping tree `m` and exit once its max class probability reaches
/// `alpha`. The prediction is always the argmax of the cumulative strong
/// scores — the stopping tree only gates.
pub fn predict_early_exit(
    ensemble: &Ensemble,
    sample: &[f64],
    alpha: f64,
) -> Result<EarlyExitResult> {
    if ensemble.stopping.len() != ensemble.stages() {
        return Err(Error::invalid(
            "ensemble has no stopping stages; fit them before early-exit prediction",
        ));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    if sample.len() != ensemble.dim {
        return Err(Error::invalid(format!(
            "sample dimension {} does not match ensemble dimension {}",
            sample.len(),
            ensemble.dim
        )));
    }
    let mut cumulative = vec![0.0f64; ensemble.num_classes];
    let mut confidence = 0.0;
    for stage in 0..ensemble.stages() {
        let scores = boost::stage_scores(ensemble, stage, sample)?;
        for (c, s) in cumulative.iter_mut().zip(scores) {
            *c += s;
        }
        let stop_probs = dtree::tree_predict_proba(&ensemble.stopping[stage], &cumulative)?;
        confidence = stop_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if confidence >= alpha {
            return Ok(EarlyExitResult {
                predicted_class: boost::argmax(&cumulative),
                stages_evaluated: stage + 1,
                stop_confidence: confidence,
            });
        }
    }
    Ok(EarlyExitResult {
        predicted_class: boost::argmax(&cumulative),
        stages_evaluated: ensemble.stages(),
        stop_confidence: confidence,
    })
}

/// Early-exit cost statistics against full-ensemble prediction on the same
/// inputs. Timing is wall-clock; the speedup is full time / early-exit time.
pub fn evaluation_stats(
    ensemble: &Ensemble,
    samples: &[Vec<f64>],
    alpha: f64,
) -> Result<EvalStats> {
    if samples.is_empty() {
        return Err(Error::invalid("evaluation_stats: empty sample set"));
    }
    let m = ensemble.stages();
    let mut histogram = vec![0usize; m];
    let mut total_stages = 0usize;

    let start = Instant::now();
    for sample in samples {
        let result = predict_early_exit(ensemble, sample, alpha)?;
        histogram[result.stages_evaluated - 1] += 1;
        total_stages += result.stages_evaluated;
    }
    let early_elapsed = start.elapsed().as_secs_f64();

    let start = Instant::now();
    for sample in samples {
        boost::predict_strong(ensemble, sample)?;
    }
    let full_elapsed = start.elapsed().as_secs_f64();

    let n = samples.len() as f64;
    Ok(EvalStats {
        mean_stages: total_stages as f64 / n,
        stage_histogram: histogram,
        wall_time_per_sample: early_elapsed / n,
        speedup_vs_full: if early_elapsed > 0.0 { full_elapsed / early_elapsed } else { 1.0 },
    })
}
