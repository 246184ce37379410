//! Multiclass real-valued Adaboost over probabilistic decision trees:
//! label coding, the multiplicative weight update, quasi-random weighted
//! pool sampling with trimming, per-stage feature-subset selection, the
//! log-probability score transform, and full-ensemble prediction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dtree::{self, DecisionTree};
use crate::{Error, Result};

/// One boosting stage: a tree fitted on a random feature subset. The tree
/// splits on subset-local indices; `feature_subset` maps them back to the
/// input space.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakClassifier {
    pub feature_subset: Vec<usize>,
    pub tree: DecisionTree,
}

/// A fitted boosted mapper. `stopping` is empty until the early-exit stage
/// classifiers are trained; when present it holds one tree per stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub weaks: Vec<WeakClassifier>,
    pub num_classes: usize,
    pub dim: usize,
    pub stopping: Vec<DecisionTree>,
    pub alpha: f64,
}

impl Ensemble {
    pub fn stages(&self) -> usize {
        self.weaks.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weaks.is_empty() {
            return Err(Error::invalid("ensemble: no weak classifiers"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("ensemble: need at least 2 classes"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("ensemble: alpha {} outside [0,1]", self.alpha)));
        }
        let subset_size = subset_size_for(self.dim);
        for (m, weak) in self.weaks.iter().enumerate() {
            if weak.feature_subset.len() != subset_size {
                return Err(Error::invalid(format!(
                    "ensemble: stage {m} subset size {} != {subset_size}",
                    weak.feature_subset.len()
                )));
            }
            let mut seen = std::collections::BTreeSet::new();
            for &d in &weak.feature_subset {
                if d >= self.dim || !seen.insert(d) {
                    return Err(Error::invalid(format!(
                        "ensemble: stage {m} subset has invalid or duplicate dimension {d}"
                    )));
                }
            }
            if weak.tree.num_classes != self.num_classes {
                return Err(Error::invalid(format!("ensemble: stage {m} class count mismatch")));
            }
            weak.tree.validate()?;
        }
        if !self.stopping.is_empty() && self.stopping.len() != self.weaks.len() {
            return Err(Error::invalid(format!(
                "ensemble: {} stopping trees for {} stages",
                self.stopping.len(),
                self.weaks.len()
            )));
        }
        for tree in &self.stopping {
            if tree.num_classes != self.num_classes {
                return Err(Error::invalid("ensemble: stopping tree class count mismatch"));
            }
            tree.validate()?;
        }
        Ok(())
    }
}

/// Boosting hyperparameters. Defaults follow the reference configuration:
/// 1000 stages, pool a tenth of the data, 1% trim mass, depth-15 trees.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostParams {
    pub stages: usize,
    pub pool_fraction: f64,
    pub trim_mass: f64,
    pub max_depth: usize,
    /// Minimum leaf weight as a fraction of the fitted set's total weight.
    pub min_leaf_frac: f64,
    pub alpha: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            stages: 1000,
            pool_fraction: 0.1,
            trim_mass: 0.01,
            max_depth: 15,
            min_leaf_frac: 1e-6,
            alpha: 0.97,
        }
    }
}

/// Number of feature dimensions a weak learner sees: round(√D).
pub fn subset_size_for(dim: usize) -> usize {
    (dim as f64).sqrt().round() as usize
}

/// First index of the maximum value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-sample label coding: 1 for the true class, −1/(K−1) elsewhere, so
/// every coding vector sums to zero.
pub fn encode_labels(labels: &[usize], num_classes: usize) -> Result<Vec<Vec<f64>>> {
    if num_classes < 2 {
        return Err(Error::invalid("encode_labels: need at least 2 classes"));
    }
    let off = -1.0 / (num_classes - 1) as f64;
    labels
        .iter()
        .map(|&label| {
            if label >= num_classes {
                return Err(Error::invalid(format!(
                    "encode_labels: label {label} out of range for {num_classes} classes"
                )));
            }
            let mut coding = vec![off; num_classes];
            coding[label] = 1.0;
            Ok(coding)
        })
        .collect()
}

/// Quasi-random weighted sampling with trimming. The lightest samples whose
/// cumulative mass stays within `trim_mass` of the total are dropped, the
/// rest renormalized; each survivor contributes floor(n·wᵢ) copies and the
/// fractional remainders are filled by systematic resampling so the pool
/// holds exactly n = round(pool_fraction·N) entries, returned sorted.
pub fn qws_trim_sample(
    weights: &[f64],
    pool_fraction: f64,
    trim_mass: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::invalid("qws: empty weight vector"));
    }
    if !(pool_fraction > 0.0) || !pool_fraction.is_finite() {
        return Err(Error::invalid(format!("qws: pool_fraction {pool_fraction} must be > 0")));
    }
    if !(0.0..1.0).contains(&trim_mass) {
        return Err(Error::invalid(format!("qws: trim_mass {trim_mass} outside [0,1)")));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::invalid("qws: weights must be nonnegative with positive sum"));
    }

    // Trim: walk weights ascending (ties by index) and drop the prefix whose
    // cumulative mass stays within the trim budget.
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        weights[a].partial_cmp(&weights[b]).expect("finite weights").then(a.cmp(&b))
    });
    let budget = trim_mass * total;
    let mut cum = 0.0;
    let mut first_kept = 0;
    for (pos, &i) in order.iter().enumerate() {
        cum += weights[i];
        if cum > budget {
            first_kept = pos;
            break;
        }
        first_kept = pos + 1;
    }
    let survivors = &order[first_kept..];
    if survivors.is_empty() {
        return Err(Error::invalid("qws: trimming removed every sample (weight collapse)"));
    }
    let surv_total: f64 = survivors.iter().map(|&i| weights[i]).sum();

    let n = (pool_fraction * weights.len() as f64).round() as usize;
    if n == 0 {
        return Err(Error::invalid("qws: pool size rounds to zero"));
    }

    // Deterministic integer copies plus systematic resampling of residuals.
    let mut kept: Vec<usize> = survivors.to_vec();
    kept.sort_unstable();
    let mut pool = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(kept.len());
    for &i in &kept {
        let target = n as f64 * weights[i] / surv_total;
        let copies = target.floor() as usize;
        pool.extend(std::iter::repeat(i).take(copies));
        residuals.push(target - copies as f64);
    }
    let deficit = n - pool.len();
    if deficit > 0 {
        let r_total: f64 = residuals.iter().sum();
        if r_total > 0.0 {
            let step = r_total / deficit as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut position = rng.gen::<f64>() * step;
            let mut cum = 0.0;
            let mut j = 0usize;
            for _ in 0..deficit {
                while j < kept.len() && cum + residuals[j] <= position {
                    cum += residuals[j];
                    j += 1;
                }
                pool.push(kept[j.min(kept.len() - 1)]);
                position += step;
            }
        } else {
            // Residuals vanished in float; pad with the heaviest survivors.
            let mut by_weight: Vec<usize> = kept.clone();
            by_weight.sort_by(|&a, &b| {
                weights[b].partial_cmp(&weights[a]).expect("finite weights").then(a.cmp(&b))
            });
            pool.extend(by_weight.into_iter().cycle().take(deficit));
        }
    }
    pool.sort_unstable();
    debug_assert_eq!(pool.len(), n);
    Ok(pool)
}

/// Draw round(√D) distinct dimensions, round(√D) times, and keep the draw
/// whose depth-limited probe tree scores the best weighted accuracy on the
/// given (pool) data. Ties go to the earliest draw.
pub fn select_feature_subset(
    samples: &[Vec<f64>],
    labels: &[usize],
    weights: &[f64],
    dim: usize,
    num_classes: usize,
    max_depth: usize,
    min_leaf_weight: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if dim < 4 {
        return Err(Error::invalid(format!("subset selection needs dimension >= 4, got {dim}")));
    }
    let subset_size = subset_size_for(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe_depth = max_depth.min(3);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..subset_size {
        let mut draw = std::collections::BTreeSet::new();
        while draw.len() < subset_size {
            draw.insert(rng.gen_range(0..dim));
        }
        let subset: Vec<usize> = draw.into_iter().collect();
        let projected = project_all(samples, &subset);
        let tree =
            dtree::fit_tree(&projected, labels, weights, num_classes, probe_depth, min_leaf_weight)?;
        let mut correct = 0.0;
        for ((s, &l), &w) in projected.iter().zip(labels).zip(weights) {
            let probs = dtree::tree_predict_proba(&tree, s)?;
            if argmax(probs) == l {
                correct += w;
            }
        }
        let total: f64 = weights.iter().sum();
        let accuracy = correct / total;
        if best.as_ref().map_or(true, |(b, _)| accuracy > *b) {
            best = Some((accuracy, subset));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

fn project(sample: &[f64], subset: &[usize]) -> Vec<f64> {
    subset.iter().map(|&d| sample[d]).collect()
}

fn project_all(samples: &[Vec<f64>], subset: &[usize]) -> Vec<Vec<f64>> {
    samples.iter().map(|s| project(s, subset)).collect()
}

/// Multiplicative boosting update:
/// w_i ← w_i·exp(−((K−1)/K)·Σ_k y_i^k·log p_k), then renormalized to unit
/// sum.
pub fn update_weights(
    weights: &[f64],
    codings: &[Vec<f64>],
    probs: &[&[f64]],
    num_classes: usize,
) -> Result<Vec<f64>> {
    if weights.len() != codings.len() || weights.len() != probs.len() {
        return Err(Error::invalid("update_weights: length mismatch"));
    }
    let k = num_classes as f64;
    let factor_scale = -(k - 1.0) / k;
    let mut updated = Vec::with_capacity(weights.len());
    for ((&w, coding), p) in weights.iter().zip(codings).zip(probs) {
        if p.len() != num_classes || coding.len() != num_classes {
            return Err(Error::invalid("update_weights: class count mismatch"));
        }
        let mut dot = 0.0;
        for (y, &pk) in coding.iter().zip(p.iter()) {
            if !(pk > 0.0) {
                return Err(Error::invalid(
                    "update_weights: nonpositive probability (missing leaf clamping?)",
                ));
            }
            dot += y * pk.ln();
        }
        let next = w * (factor_scale * dot).exp();
        if !next.is_finite() {
            return Err(Error::invalid("update_weights: nonfinite weight"));
        }
        updated.push(next);
    }
    let sum: f64 = updated.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::invalid("update_weights: degenerate weight collapse"));
    }
    updated.iter_mut().for_each(|w| *w /= sum);
    Ok(updated)
}

/// Log-probability score transform: s_k = (K−1)(log p_k − mean_k′ log p_k′).
/// The output sums to zero.
pub fn weak_scores(probs: &[f64], num_classes: usize) -> Result<Vec<f64>> {
    if probs.len() != num_classes {
        return Err(Error::invalid(format!(
            "weak_scores: {} probabilities for {num_classes} classes",
            probs.len()
        )));
    }
    let mut logs = Vec::with_capacity(num_classes);
    for &p in probs {
        if !(p > 0.0) {
            return Err(Error::invalid("weak_scores: zero probability"));
        }
        logs.push(p.ln());
    }
    let mean = logs.iter().sum::<f64>() / num_classes as f64;
    let scale = (num_classes - 1) as f64;
    Ok(logs.into_iter().map(|l| scale * (l - mean)).collect())
}

/// Numerically stable softmax (max-subtraction).
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Fit the boosted mapper. Weights start uniform; each stage samples a
/// pool, selects a feature subset, fits a weak tree on the pool with the
/// pool's renormalized weights, then updates the weights on the complete
/// data. The returned ensemble has no stopping classifiers yet.
pub fn fit_adaboost(
    samples: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    params: &BoostParams,
    seed: u64,
) -> Result<Ensemble> {
    let n = samples.len();
    if num_classes < 2 {
        return Err(Error::invalid("fit_adaboost: need at least 2 classes"));
    }
    if n < num_classes {
        return Err(Error::invalid(format!(
            "fit_adaboost: {n} samples for {num_classes} classes"
        )));
    }
    if labels.len() != n {
        return Err(Error::invalid("fit_adaboost: label count mismatch"));
    }
    if params.stages == 0 {
        return Err(Error::invalid("fit_adaboost: need at least 1 stage"));
    }
    let dim = samples[0].len();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(Error::invalid("fit_adaboost: ragged sample dimensions"));
    }
    if labels.iter().any(|&l| l >= num_classes) {
        return Err(Error::invalid("fit_adaboost: label out of range"));
    }

    let codings = encode_labels(labels, num_classes)?;
    let mut weights = vec![1.0 / n as f64; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weaks = Vec::with_capacity(params.stages);

    for _stage in 0..params.stages {
        let pool_seed = rng.gen::<u64>();
        let subset_seed = rng.gen::<u64>();

        let pool = qws_trim_sample(&weights, params.pool_fraction, params.trim_mass, pool_seed)?;
        let pool_samples: Vec<Vec<f64>> = pool.iter().map(|&i| samples[i].clone()).collect();
        let pool_labels: Vec<usize> = pool.iter().map(|&i| labels[i]).collect();
        let raw: Vec<f64> = pool.iter().map(|&i| weights[i]).collect();
        let raw_total: f64 = raw.iter().sum();
        let pool_weights: Vec<f64> = raw.iter().map(|w| w / raw_total).collect();
        let min_leaf = params.min_leaf_frac; // pool weights sum to 1

        let subset = select_feature_subset(
            &pool_samples,
            &pool_labels,
            &pool_weights,
            dim,
            num_classes,
            params.max_depth,
            min_leaf,
            subset_seed,
        )?;
        let projected = project_all(&pool_samples, &subset);
        let tree = dtree::fit_tree(
            &projected,
            &pool_labels,
            &pool_weights,
            num_classes,
            params.max_depth,
            min_leaf,
        )?;

        let probs: Vec<&[f64]> = samples
            .iter()
            .map(|s| dtree::tree_predict_proba(&tree, &project(s, &subset)))
            .collect::<Result<_>>()?;
        weights = update_weights(&weights, &codings, &probs, num_classes)?;
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        weaks.push(WeakClassifier { feature_subset: subset, tree });
    }

    Ok(Ensemble { weaks, num_classes, dim, stopping: Vec::new(), alpha: params.alpha })
}

/// Score vector contributed by stage `m` for one sample.
pub fn stage_scores(ensemble: &Ensemble, stage: usize, sample: &[f64]) -> Result<Vec<f64>> {
    let weak = ensemble
        .weaks
        .get(stage)
        .ok_or_else(|| Error::invalid(format!("stage {stage} out of range")))?;
    if sample.len() != ensemble.dim {
        return Err(Error::invalid(format!(
            "sample dimension {} does not match ensemble dimension {}",
            sample.len(),
            ensemble.dim
        )));
    }
    let probs = dtree::tree_predict_proba(&weak.tree, &project(sample, &weak.feature_subset))?;
    weak_scores(probs, ensemble.num_classes)
}

/// Full-ensemble prediction: summed per-stage scores and their softmax.
pub fn predict_strong(ensemble: &Ensemble, sample: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if sample.len() != ensemble.dim {
        return Err(Error::invalid(format!(
            "sample dimension {} does not match ensemble dimension {}",
            sample.len(),
            ensemble.dim
        )));
    }
    let mut scores = vec![0.0f64; ensemble.num_classes];
    for stage in 0..ensemble.stages() {
        for (acc, s) in scores.iter_mut().zip(stage_scores(ensemble, stage, sample)?) {
            *acc += s;
        }
    }
    let probs = softmax(&scores);
    Ok((scores, probs))
}
