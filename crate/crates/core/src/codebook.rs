//! Codebooks over training descriptors. A fitted codebook turns descriptors
//! into discrete labels for the boosted mapper; the codebookless mode skips
//! clustering entirely and treats every training sample as its own center.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::descriptors::DescriptorKind;
use crate::{Error, Result};

/// K cluster centers of uniform dimension over one descriptor kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub centers: Vec<Vec<f64>>,
    pub kind: DescriptorKind,
}

impl Codebook {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, |c| c.len())
    }

    /// Within-cluster sum of squared distances of `points` under nearest-
    /// center assignment.
    pub fn distortion(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .map(|p| {
                self.centers
                    .iter()
                    .map(|c| squared_distance(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn count_distinct(points: &[Vec<f64>]) -> usize {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    sorted.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(!sorted.is_empty())
}

/// Lloyd's algorithm from k-means++ seeding. Stops when assignments are
/// stable or after `max_iters`; empty clusters are re-seeded to the points
/// currently farthest from their centers. Distortion is checked to be
/// non-increasing on every iteration.
pub fn kmeans_fit(
    points: &[Vec<f64>],
    kind: DescriptorKind,
    k: usize,
    max_iters: usize,
    seed: u64,
) -> Result<Codebook> {
    if k < 2 {
        return Err(Error::invalid(format!("kmeans: k must be >= 2, got {k}")));
    }
    if max_iters == 0 {
        return Err(Error::invalid("kmeans: max_iters must be >= 1"));
    }
    let dim = points.first().map_or(0, |p| p.len());
    if dim == 0 {
        return Err(Error::invalid("kmeans: no points"));
    }
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("kmeans: points must be finite and of uniform dimension"));
    }
    let distinct = count_distinct(points);
    if k > distinct {
        return Err(Error::invalid(format!(
            "kmeans: k={k} exceeds {distinct} distinct points"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_plus_plus(points, k, &mut rng)?;

    let mut assignments = vec![usize::MAX; points.len()];
    let mut distortion = f64::INFINITY;
    for _ in 0..max_iters {
        let mut changed = false;
        let mut new_distortion = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (mut best, mut best_d) = (0usize, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let d = squared_distance(p, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            new_distortion += best_d;
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        assert!(
            new_distortion <= distortion * (1.0 + 1e-12) + 1e-9,
            "kmeans distortion increased: {distortion} -> {new_distortion}"
        );
        distortion = new_distortion;
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        // Points sorted by distance to their center, farthest first, feed
        // any empty clusters so K centers stay alive.
        let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        let mut far_order: Vec<usize> = Vec::new();
        if !empties.is_empty() {
            let mut by_dist: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .map(|(i, p)| (squared_distance(p, &centers[assignments[i]]), i))
                .collect();
            by_dist.sort_by(|a, b| b.partial_cmp(a).expect("finite distances"));
            far_order = by_dist.into_iter().map(|(_, i)| i).collect();
        }
        let mut next_far = far_order.into_iter();
        for c in 0..k {
            if counts[c] > 0 {
                let n = counts[c] as f64;
                for (ctr, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *ctr = s / n;
                }
            } else {
                let i = next_far.next().expect("more points than clusters");
                centers[c] = points[i].clone();
            }
        }
    }

    Ok(Codebook { centers, kind })
}

fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let first = rng.gen_range(0..points.len());
    let mut centers = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("kmeans: fewer distinct points than k"));
        }
        let mut target = rng.gen::<f64>() * total;
        let mut chosen = points.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            target -= d;
            if target <= 0.0 {
                chosen = i;
                break;
            }
        }
        centers.push(points[chosen].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, centers.last().expect("just pushed")));
        }
    }
    Ok(centers)
}

/// Index of the nearest center by squared Euclidean distance; ties resolve
/// to the lowest index.
pub fn assign_codeword(codebook: &Codebook, descriptor: &[f64]) -> Result<usize> {
    if descriptor.len() != codebook.dim() {
        return Err(Error::invalid(format!(
            "assign: descriptor dimension {} does not match codebook dimension {}",
            descriptor.len(),
            codebook.dim()
        )));
    }
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, center) in codebook.centers.iter().enumerate() {
        let d = squared_distance(descriptor, center);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    Ok(best)
}

/// Identity labeling for the codebookless mode: sample `i` gets label `i`,
/// so the label count equals the training sample count.
pub fn codebookless_labels(num_samples: usize) -> Result<Vec<usize>> {
    if num_samples < 2 {
        return Err(Error::invalid(format!(
            "codebookless labeling needs at least 2 samples, got {num_samples}"
        )));
    }
    Ok((0..num_samples).collect())
}
