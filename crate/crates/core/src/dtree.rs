//! Weighted multiclass decision trees with probabilistic leaves. These are
//! both the boosting weak learners and the per-stage stopping classifiers.
//!
//! Leaves never carry a zero probability: probabilities are clamped to at
//! least ε and renormalized, so `log p` stays finite downstream.

use crate::{Error, Result};

/// Leaf probability floor before renormalization.
pub const LEAF_EPSILON: f64 = 1e-5;

/// One node of a flat tree array. Children always have larger indices than
/// their parent; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split { dim: usize, threshold: f64, left: usize, right: usize },
    Leaf { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub num_classes: usize,
    pub max_depth: usize,
}

impl DecisionTree {
    /// Structural checks: nonempty, child indices in range and forward-only,
    /// leaf distributions normalized with strictly positive entries.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::invalid("tree: empty node array"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split { left, right, threshold, .. } => {
                    for &child in [left, right] {
                        if child >= self.nodes.len() {
                            return Err(Error::invalid(format!(
                                "tree: node {i} references dangling child {child}"
                            )));
                        }
                        if child <= i {
                            return Err(Error::invalid(format!(
                                "tree: node {i} references non-forward child {child}"
                            )));
                        }
                    }
                    if !threshold.is_finite() {
                        return Err(Error::invalid(format!("tree: node {i} threshold not finite")));
                    }
                }
                Node::Leaf { probs } => {
                    if probs.len() != self.num_classes {
                        return Err(Error::invalid(format!(
                            "tree: leaf {i} has {} probabilities, expected {}",
                            probs.len(),
                            self.num_classes
                        )));
                    }
                    let sum: f64 = probs.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 || probs.iter().any(|p| *p <= 0.0 || *p > 1.0) {
                        return Err(Error::invalid(format!("tree: leaf {i} not a distribution")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Greedy CART-style fit: each node takes the (dimension, threshold) pair
/// with the largest weighted Gini impurity decrease; thresholds are the
/// midpoints between consecutive distinct sorted values. Ties resolve to the
/// lowest dimension, then the lowest threshold. Splitting stops at
/// `max_depth`, pure nodes, nodes lighter than `min_leaf_weight`, or when no
/// candidate improves impurity.
pub fn fit_tree(
    samples: &[Vec<f64>],
    labels: &[usize],
    weights: &[f64],
    num_classes: usize,
    max_depth: usize,
    min_leaf_weight: f64,
) -> Result<DecisionTree> {
    if samples.is_empty() {
        return Err(Error::invalid("fit_tree: empty sample set"));
    }
    if samples.len() != labels.len() || samples.len() != weights.len() {
        return Err(Error::invalid(format!(
            "fit_tree: length mismatch ({} samples, {} labels, {} weights)",
            samples.len(),
            labels.len(),
            weights.len()
        )));
    }
    if num_classes < 2 {
        return Err(Error::invalid("fit_tree: need at least 2 classes"));
    }
    let dim = samples[0].len();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(Error::invalid("fit_tree: ragged sample dimensions"));
    }
    if labels.iter().any(|&l| l >= num_classes) {
        return Err(Error::invalid("fit_tree: label out of range"));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::invalid("fit_tree: weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("fit_tree: zero total weight"));
    }

    let mut builder = TreeBuilder {
        samples,
        labels,
        weights,
        num_classes,
        max_depth,
        min_leaf_weight,
        nodes: Vec::new(),
    };
    let all: Vec<usize> = (0..samples.len()).collect();
    builder.build(all, 0);
    let tree = DecisionTree { nodes: builder.nodes, num_classes, max_depth };
    debug_assert!(tree.validate().is_ok());
    Ok(tree)
}

struct TreeBuilder<'a> {
    samples: &'a [Vec<f64>],
    labels: &'a [usize],
    weights: &'a [f64],
    num_classes: usize,
    max_depth: usize,
    min_leaf_weight: f64,
    nodes: Vec<Node>,
}

struct SplitChoice {
    dim: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    /// Builds the subtree over `indices` and returns its root node index.
    fn build(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let node_weight: f64 = indices.iter().map(|&i| self.weights[i]).sum();
        let split = if depth < self.max_depth
            && node_weight >= self.min_leaf_weight
            && !self.is_pure(&indices)
        {
            self.best_split(&indices, node_weight)
        } else {
            None
        };

        match split {
            Some(choice) => {
                let slot = self.nodes.len();
                self.nodes.push(Node::Split {
                    dim: choice.dim,
                    threshold: choice.threshold,
                    left: usize::MAX,
                    right: usize::MAX,
                });
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                    .into_iter()
                    .partition(|&i| self.samples[i][choice.dim] <= choice.threshold);
                let left = self.build(left_idx, depth + 1);
                let right = self.build(right_idx, depth + 1);
                self.nodes[slot] = Node::Split { dim: choice.dim, threshold: choice.threshold, left, right };
                slot
            }
            None => {
                let probs = self.leaf_probs(&indices, node_weight);
                self.nodes.push(Node::Leaf { probs });
                self.nodes.len() - 1
            }
        }
    }

    fn is_pure(&self, indices: &[usize]) -> bool {
        let mut seen: Option<usize> = None;
        for &i in indices {
            if self.weights[i] == 0.0 {
                continue;
            }
            match seen {
                None => seen = Some(self.labels[i]),
                Some(l) if l != self.labels[i] => return false,
                _ => {}
            }
        }
        true
    }

    /// Weighted class frequencies per Eq-style leaf estimate, floored at ε
    /// and renormalized. The floor is waterfilled so every entry truly ends
    /// at or above the floor after renormalization.
    fn leaf_probs(&self, indices: &[usize], node_weight: f64) -> Vec<f64> {
        let k = self.num_classes;
        let mut probs = vec![0.0f64; k];
        if node_weight > 0.0 {
            for &i in indices {
                probs[self.labels[i]] += self.weights[i];
            }
            for p in &mut probs {
                *p /= node_weight;
            }
        } else {
            // Zero-weight leaves cannot arise from valid splits, but a
            // zero-weight *root* region degenerates to uniform.
            probs.fill(1.0 / k as f64);
        }
        clamp_distribution(&mut probs, LEAF_EPSILON.min(1.0 / k as f64));
        probs
    }

    fn best_split(&self, indices: &[usize], node_weight: f64) -> Option<SplitChoice> {
        let dim = self.samples[indices[0]].len();
        let k = self.num_classes;
        let mut best: Option<SplitChoice> = None;

        // Parent impurity cost: W·Gini(W) = W − Σ_c w_c²/W.
        let mut class_w = vec![0.0f64; k];
        for &i in indices {
            class_w[self.labels[i]] += self.weights[i];
        }
        let parent_sumsq: f64 = class_w.iter().map(|w| w * w).sum();
        let parent_cost = node_weight - parent_sumsq / node_weight;

        let mut order: Vec<usize> = Vec::with_capacity(indices.len());
        let mut left_class = vec![0.0f64; k];
        for d in 0..dim {
            order.clear();
            order.extend_from_slice(indices);
            order.sort_by(|&a, &b| {
                self.samples[a][d].partial_cmp(&self.samples[b][d]).expect("finite features")
            });

            left_class.fill(0.0);
            let (mut w_left, mut sumsq_left) = (0.0f64, 0.0f64);
            let mut sumsq_right = parent_sumsq;

            for pos in 0..order.len() - 1 {
                let i = order[pos];
                let (w, c) = (self.weights[i], self.labels[i]);
                // Move sample i to the left side; both sums of squared
                // class weights update in O(1).
                sumsq_left += w * (2.0 * left_class[c] + w);
                sumsq_right -= w * (2.0 * (class_w[c] - left_class[c]) - w);
                left_class[c] += w;
                w_left += w;

                let (lo, hi) = (self.samples[i][d], self.samples[order[pos + 1]][d]);
                if lo == hi {
                    continue;
                }
                let w_right = node_weight - w_left;
                if w_left < self.min_leaf_weight
                    || w_right < self.min_leaf_weight
                    || w_left <= 0.0
                    || w_right <= 0.0
                {
                    continue;
                }
                let mut threshold = (lo + hi) / 2.0;
                if threshold >= hi {
                    threshold = lo; // midpoint collapsed upward in float
                }
                let cost = (w_left - sumsq_left / w_left) + (w_right - sumsq_right / w_right);
                let gain = parent_cost - cost;
                if gain > node_weight * 1e-12
                    && best.as_ref().map_or(true, |b| gain > b.gain)
                {
                    best = Some(SplitChoice { dim: d, threshold, gain });
                }
            }
        }
        best
    }
}

/// Floor `probs` at `eps` and renormalize so the result still sums to 1 and
/// every entry is ≥ `eps`. Entries are pinned at the floor iteratively and
/// the remaining mass rescaled.
fn clamp_distribution(probs: &mut [f64], eps: f64) {
    loop {
        let mut pinned_mass = 0.0;
        let mut free_mass = 0.0;
        for p in probs.iter_mut() {
            if *p <= eps {
                *p = eps;
                pinned_mass += eps;
            } else {
                free_mass += *p;
            }
        }
        if free_mass <= 0.0 {
            let k = probs.len() as f64;
            probs.iter_mut().for_each(|p| *p = 1.0 / k);
            return;
        }
        let scale = (1.0 - pinned_mass) / free_mass;
        let mut done = true;
        for p in probs.iter_mut() {
            if *p > eps {
                *p *= scale;
                if *p < eps {
                    done = false;
                }
            }
        }
        if done {
            return;
        }
    }
}

/// Route a sample to a leaf: left when `value ≤ threshold`.
pub fn tree_predict_proba<'t>(tree: &'t DecisionTree, sample: &[f64]) -> Result<&'t [f64]> {
    let mut node = 0usize;
    for _ in 0..tree.nodes.len() {
        match tree.nodes.get(node) {
            Some(Node::Split { dim, threshold, left, right }) => {
                if *dim >= sample.len() {
                    return Err(Error::invalid(format!(
                        "tree: split dimension {dim} exceeds sample dimension {}",
                        sample.len()
                    )));
                }
                node = if sample[*dim] <= *threshold { *left } else { *right };
            }
            Some(Node::Leaf { probs }) => return Ok(probs),
            None => return Err(Error::invalid(format!("tree: dangling node index {node}"))),
        }
    }
    Err(Error::invalid("tree: walk exceeded node count (cycle)"))
}
