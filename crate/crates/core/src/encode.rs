//! Bag-of-words aggregation: per-patch codeword assignments become
//! per-video histograms, optionally L1-normalized, and two normalized
//! representations can be concatenated into a combined one.

use crate::{Error, Result};

/// Per-video histogram over K codewords.
#[derive(Debug, Clone, PartialEq)]
pub struct BowHistogram {
    pub counts: Vec<f64>,
    pub video_id: String,
    pub normalized: bool,
}

impl BowHistogram {
    pub fn k(&self) -> usize {
        self.counts.len()
    }
}

/// Count codeword assignments into a K-bin histogram; `normalize` divides by
/// the assignment count so the bins sum to 1.
pub fn bow_aggregate(
    assignments: &[usize],
    k: usize,
    video_id: &str,
    normalize: bool,
) -> Result<BowHistogram> {
    if assignments.is_empty() {
        return Err(Error::invalid(format!("bow: no assignments for video {video_id}")));
    }
    let mut counts = vec![0.0f64; k];
    for &a in assignments {
        if a >= k {
            return Err(Error::invalid(format!("bow: assignment {a} out of range for K={k}")));
        }
        counts[a] += 1.0;
    }
    if normalize {
        let total = assignments.len() as f64;
        counts.iter_mut().for_each(|c| *c /= total);
    }
    Ok(BowHistogram { counts, video_id: video_id.to_string(), normalized: normalize })
}

/// Concatenate two normalized histograms of the same video; each half keeps
/// its own L1 normalization.
pub fn concat_representations(a: &BowHistogram, b: &BowHistogram) -> Result<Vec<f64>> {
    if a.video_id != b.video_id {
        return Err(Error::invalid(format!(
            "concat: video id mismatch ({} vs {})",
            a.video_id, b.video_id
        )));
    }
    if !a.normalized || !b.normalized {
        return Err(Error::invalid("concat: both histograms must be normalized"));
    }
    let mut combined = Vec::with_capacity(a.counts.len() + b.counts.len());
    combined.extend_from_slice(&a.counts);
    combined.extend_from_slice(&b.counts);
    Ok(combined)
}

/// One export row: `video_id,label,v1,…,vK`.
pub fn histogram_csv_row(video_id: &str, label: usize, values: &[f64]) -> String {
    let mut row = format!("{video_id},{label}");
    for v in values {
        row.push(',');
        row.push_str(&format!("{v}"));
    }
    row
}

/// Parse a row written by [`histogram_csv_row`].
pub fn parse_histogram_csv_row(row: &str) -> Result<(String, usize, Vec<f64>)> {
    let mut parts = row.split(',');
    let video_id = parts
        .next()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::invalid("csv row: missing video id"))?;
    let label: usize = parts
        .next()
        .ok_or_else(|| Error::invalid("csv row: missing label"))?
        .parse()
        .map_err(|_| Error::invalid("csv row: label is not an integer"))?;
    let values: Vec<f64> = parts
        .map(|p| p.parse::<f64>().map_err(|_| Error::invalid("csv row: bad value")))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::invalid("csv row: no histogram values"));
    }
    Ok((video_id.to_string(), label, values))
}
