//! Linear one-vs-rest SVM over video representations, plus the AP/MAP
//! ranking metrics used for evaluation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// SVM training configuration: hinge loss + L2 with step schedule 1/(λt).
#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { lambda: 1e-4, epochs: 50, seed: 0 }
    }
}

/// One weight vector and bias per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub config: SvmConfig,
}

impl LinearModel {
    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.biases.len() {
            return Err(Error::invalid("linear model: weight/bias shape mismatch"));
        }
        let dim = self.dim();
        for (c, w) in self.weights.iter().enumerate() {
            if w.len() != dim || w.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("linear model: class {c} weights invalid")));
            }
        }
        if self.biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("linear model: nonfinite bias"));
        }
        Ok(())
    }
}

/// Fit one-vs-rest linear SVMs by seeded stochastic subgradient descent on
/// the hinge loss with L2 regularization (bias unregularized).
pub fn fit_linear_ovr(
    representations: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    config: &SvmConfig,
) -> Result<LinearModel> {
    if representations.is_empty() || representations.len() != labels.len() {
        return Err(Error::invalid("svm: empty input or label length mismatch"));
    }
    if num_classes < 2 {
        return Err(Error::invalid("svm: need at least 2 classes"));
    }
    if labels.iter().any(|&l| l >= num_classes) {
        return Err(Error::invalid("svm: label out of range"));
    }
    let distinct = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    if distinct < 2 {
        return Err(Error::invalid("svm: single-class input"));
    }
    let dim = representations[0].len();
    if representations.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid("svm: ragged representation dimensions"));
    }
    if config.lambda <= 0.0 || config.epochs == 0 {
        return Err(Error::invalid("svm: lambda must be > 0 and epochs >= 1"));
    }

    let n = representations.len();
    let mut weights = Vec::with_capacity(num_classes);
    let mut biases = Vec::with_capacity(num_classes);
    for class in 0..num_classes {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (class as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut w = vec![0.0f64; dim];
        let mut b = 0.0f64;
        let mut order: Vec<usize> = (0..n).collect();
        let mut t = 0usize;
        for _ in 0..config.epochs {
            // Fisher–Yates with the class-local generator.
            for i in (1..n).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            for &i in &order {
                t += 1;
                let step = 1.0 / (config.lambda * t as f64);
                let y = if labels[i] == class { 1.0 } else { -1.0 };
                let x = &representations[i];
                let margin = y * (dot(&w, x) + b);
                let shrink = 1.0 - step * config.lambda;
                if margin < 1.0 {
                    for (wj, xj) in w.iter_mut().zip(x) {
                        *wj = shrink * *wj + step * y * xj;
                    }
                    b += step * y;
                } else {
                    w.iter_mut().for_each(|wj| *wj *= shrink);
                }
            }
        }
        weights.push(w);
        biases.push(b);
    }
    let model = LinearModel { weights, biases, config: config.clone() };
    model.validate()?;
    Ok(model)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-class margins w_c·x + b_c.
pub fn predict_margin(model: &LinearModel, representation: &[f64]) -> Result<Vec<f64>> {
    if representation.len() != model.dim() {
        return Err(Error::invalid(format!(
            "svm: representation dimension {} does not match model dimension {}",
            representation.len(),
            model.dim()
        )));
    }
    Ok(model
        .weights
        .iter()
        .zip(&model.biases)
        .map(|(w, b)| dot(w, representation) + b)
        .collect())
}

/// Scored videos for one-vs-rest ranking, sorted by descending score with
/// stable order on ties.
#[derive(Debug, Clone)]
pub struct RankedScores {
    pub entries: Vec<(f64, bool)>,
}

impl RankedScores {
    pub fn new(scores_and_positives: &[(f64, bool)]) -> RankedScores {
        let mut entries = scores_and_positives.to_vec();
        entries.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores"));
        RankedScores { entries }
    }
}

/// AP = mean over positive ranks of the precision at that rank.
pub fn average_precision(ranked: &RankedScores) -> Result<f64> {
    let mut positives = 0usize;
    let mut sum = 0.0f64;
    for (rank, (_, is_positive)) in ranked.entries.iter().enumerate() {
        if *is_positive {
            positives += 1;
            sum += positives as f64 / (rank + 1) as f64;
        }
    }
    if positives == 0 {
        return Err(Error::invalid("average precision undefined without positives"));
    }
    Ok(sum / positives as f64)
}

/// Unweighted mean of per-class APs.
pub fn mean_average_precision(per_class_ap: &[f64]) -> Result<f64> {
    if per_class_ap.is_empty() {
        return Err(Error::invalid("MAP needs at least one class AP"));
    }
    Ok(per_class_ap.iter().sum::<f64>() / per_class_ap.len() as f64)
}

/// One-vs-rest MAP over per-video margin vectors. Classes with no positive
/// test videos are skipped; errors if none remain.
pub fn map_from_margins(
    margins: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
) -> Result<(f64, Vec<f64>)> {
    if margins.is_empty() || margins.len() != labels.len() {
        return Err(Error::invalid("map: empty input or label length mismatch"));
    }
    let mut per_class = Vec::new();
    for class in 0..num_classes {
        if !labels.iter().any(|&l| l == class) {
            continue;
        }
        let scored: Vec<(f64, bool)> = margins
            .iter()
            .zip(labels)
            .map(|(m, &l)| (m[class], l == class))
            .collect();
        per_class.push(average_precision(&RankedScores::new(&scored))?);
    }
    let map = mean_average_precision(&per_class)?;
    Ok((map, per_class))
}

/// Fraction of samples whose argmax margin equals the label.
pub fn top1_accuracy(margins: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if margins.is_empty() || margins.len() != labels.len() {
        return Err(Error::invalid("accuracy: empty input or label length mismatch"));
    }
    let correct = margins
        .iter()
        .zip(labels)
        .filter(|(m, &l)| crate::boost::argmax(m) == l)
        .count();
    Ok(correct as f64 / margins.len() as f64)
}
