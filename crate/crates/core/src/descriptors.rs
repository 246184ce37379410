//! Train-time appearance and motion descriptors: HOG, HOF and 3D HOF.
//!
//! These exist only to generate codebook labels during training. At test
//! time the boosted mapper consumes raw patches directly and none of this
//! code runs — that is the whole point of the pipeline.

use crate::patchio::l1_normalize;
use crate::{Error, Result};

/// Which descriptor family a vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptorKind {
    Hog,
    Hof,
    Hof3d,
}

impl DescriptorKind {
    pub fn parse(token: &str) -> Result<DescriptorKind> {
        match token {
            "hog" => Ok(DescriptorKind::Hog),
            "hof" => Ok(DescriptorKind::Hof),
            "hof3d" => Ok(DescriptorKind::Hof3d),
            other => Err(Error::Config(format!("unknown descriptor kind `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DescriptorKind::Hog => "hog",
            DescriptorKind::Hof => "hof",
            DescriptorKind::Hof3d => "hof3d",
        }
    }

    /// Descriptor vector length.
    pub fn descriptor_len(&self) -> usize {
        match self {
            DescriptorKind::Hog => 36,
            DescriptorKind::Hof | DescriptorKind::Hof3d => 9,
        }
    }

    /// Frames of pixel context needed to compute the descriptor.
    /// HOF needs a frame pair even though its boosting sample is one frame.
    pub fn context_depth(&self, temporal_depth: usize) -> usize {
        match self {
            DescriptorKind::Hog => 1,
            DescriptorKind::Hof => 2,
            DescriptorKind::Hof3d => temporal_depth,
        }
    }

    /// Temporal depth of the raw-patch sample the mapper is trained on.
    pub fn sample_depth(&self, temporal_depth: usize) -> usize {
        match self {
            DescriptorKind::Hog | DescriptorKind::Hof => 1,
            DescriptorKind::Hof3d => temporal_depth,
        }
    }
}

/// An L1-normalized descriptor vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f64>,
    pub kind: DescriptorKind,
}

/// Dense optical flow over the region where the estimation window fits.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlowField {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

const HOG_BINS: usize = 9;
const HOF_DIRECTION_BINS: usize = 8;
/// Flow magnitudes below this count as "no motion" (HOF bin 8).
pub const HOF_NO_MOTION_THRESHOLD: f64 = 0.25;

/// 36-dim HOG: central-difference gradients on the patch interior, unsigned
/// orientation in `[0,π)` over 9 bins, magnitude-weighted, pooled into 2×2
/// half-patch cells, L1-normalized. A gradient-free patch yields the uniform
/// descriptor.
pub fn hog_descriptor(patch: &[f64], patch_size: usize) -> Result<Descriptor> {
    if patch.len() != patch_size * patch_size {
        return Err(Error::invalid(format!(
            "hog: expected {0}x{0} patch ({1} values), got {2}",
            patch_size,
            patch_size * patch_size,
            patch.len()
        )));
    }
    if patch_size < 3 {
        return Err(Error::invalid("hog: patch must be at least 3x3"));
    }
    let half = patch_size / 2;
    let mut hist = vec![0.0f64; 4 * HOG_BINS];
    let bin_width = std::f64::consts::PI / HOG_BINS as f64;
    for y in 1..patch_size - 1 {
        for x in 1..patch_size - 1 {
            let gx = (patch[y * patch_size + x + 1] - patch[y * patch_size + x - 1]) / 2.0;
            let gy = (patch[(y + 1) * patch_size + x] - patch[(y - 1) * patch_size + x]) / 2.0;
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += std::f64::consts::PI;
            }
            // atan2 can return exactly π; fold onto orientation 0.
            if theta >= std::f64::consts::PI {
                theta -= std::f64::consts::PI;
            }
            let bin = ((theta / bin_width) as usize).min(HOG_BINS - 1);
            let cell = usize::from(y >= half) * 2 + usize::from(x >= half);
            hist[cell * HOG_BINS + bin] += mag;
        }
    }
    Ok(Descriptor { values: l1_normalize(&hist)?, kind: DescriptorKind::Hog })
}

/// Lucas–Kanade flow between two equally sized patches. The window is the
/// side of the square least-squares neighborhood; near-singular systems
/// (determinant below 1e-9) resolve to zero motion.
pub fn lucas_kanade_flow(
    prev: &[f64],
    next: &[f64],
    width: usize,
    height: usize,
    window: usize,
) -> Result<FlowField> {
    if prev.len() != width * height || next.len() != prev.len() {
        return Err(Error::invalid(format!(
            "flow: dimension mismatch ({}x{} vs {} and {} values)",
            width,
            height,
            prev.len(),
            next.len()
        )));
    }
    if window < 3 || window % 2 == 0 {
        return Err(Error::invalid("flow: window must be odd and >= 3"));
    }
    if width < window || height < window {
        return Err(Error::invalid("flow: patch smaller than window"));
    }

    // Spatial gradients of the first frame: central differences in the
    // interior, one-sided at the border so the arrays cover every pixel.
    let idx = |x: usize, y: usize| y * width + x;
    let mut ix = vec![0.0f64; prev.len()];
    let mut iy = vec![0.0f64; prev.len()];
    let mut it = vec![0.0f64; prev.len()];
    for y in 0..height {
        for x in 0..width {
            ix[idx(x, y)] = match x {
                0 => prev[idx(1, y)] - prev[idx(0, y)],
                x if x == width - 1 => prev[idx(x, y)] - prev[idx(x - 1, y)],
                x => (prev[idx(x + 1, y)] - prev[idx(x - 1, y)]) / 2.0,
            };
            iy[idx(x, y)] = match y {
                0 => prev[idx(x, 1)] - prev[idx(x, 0)],
                y if y == height - 1 => prev[idx(x, y)] - prev[idx(x, y - 1)],
                y => (prev[idx(x, y + 1)] - prev[idx(x, y - 1)]) / 2.0,
            };
            it[idx(x, y)] = next[idx(x, y)] - prev[idx(x, y)];
        }
    }

    let r = window / 2;
    let out_w = width - window + 1;
    let out_h = height - window + 1;
    let mut u = vec![0.0f64; out_w * out_h];
    let mut v = vec![0.0f64; out_w * out_h];
    for cy in r..height - r {
        for cx in r..width - r {
            let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for y in cy - r..=cy + r {
                for x in cx - r..=cx + r {
                    let (gx, gy, gt) = (ix[idx(x, y)], iy[idx(x, y)], it[idx(x, y)]);
                    a11 += gx * gx;
                    a12 += gx * gy;
                    a22 += gy * gy;
                    b1 -= gx * gt;
                    b2 -= gy * gt;
                }
            }
            let det = a11 * a22 - a12 * a12;
            let out = (cy - r) * out_w + (cx - r);
            if det.abs() >= 1e-9 {
                u[out] = (a22 * b1 - a12 * b2) / det;
                v[out] = (a11 * b2 - a12 * b1) / det;
            }
        }
    }
    Ok(FlowField { width: out_w, height: out_h, u, v })
}

/// 9-dim HOF: 8 magnitude-weighted direction bins over `[0,2π)` — centered
/// on the compass directions so angle jitter around a cardinal axis stays in
/// one bin — for vectors at or above the no-motion threshold, plus a count
/// bin (index 8) for the rest; L1-normalized.
pub fn hof_descriptor(flow: &FlowField) -> Result<Descriptor> {
    if flow.is_empty() {
        return Err(Error::invalid("hof: empty flow field"));
    }
    Ok(Descriptor { values: l1_normalize(&hof_histogram(flow))?, kind: DescriptorKind::Hof })
}

/// Unnormalized HOF histogram; shared by `hof_descriptor` and the 3D sum.
fn hof_histogram(flow: &FlowField) -> Vec<f64> {
    let mut hist = vec![0.0f64; HOF_DIRECTION_BINS + 1];
    let bin_width = 2.0 * std::f64::consts::PI / HOF_DIRECTION_BINS as f64;
    for (&u, &v) in flow.u.iter().zip(&flow.v) {
        let mag = u.hypot(v);
        if mag < HOF_NO_MOTION_THRESHOLD {
            hist[HOF_DIRECTION_BINS] += 1.0;
            continue;
        }
        let mut theta = v.atan2(u) + bin_width / 2.0;
        if theta < 0.0 {
            theta += 2.0 * std::f64::consts::PI;
        }
        let bin = ((theta / bin_width) as usize) % HOF_DIRECTION_BINS;
        hist[bin] += mag;
    }
    hist
}

/// 3D HOF over `depth` consecutive patches: the per-pair HOF histograms of
/// the `depth - 1` frame pairs are summed, then L1-normalized.
pub fn hof3d_descriptor(
    frames: &[&[f64]],
    patch_size: usize,
    window: usize,
    depth: usize,
) -> Result<Descriptor> {
    if frames.len() != depth {
        return Err(Error::invalid(format!(
            "hof3d: expected {} frames, got {}",
            depth,
            frames.len()
        )));
    }
    if depth < 2 {
        return Err(Error::invalid("hof3d: depth must be >= 2"));
    }
    let mut sum = vec![0.0f64; HOF_DIRECTION_BINS + 1];
    for pair in frames.windows(2) {
        let flow = lucas_kanade_flow(pair[0], pair[1], patch_size, patch_size, window)?;
        for (acc, h) in sum.iter_mut().zip(hof_histogram(&flow)) {
            *acc += h;
        }
    }
    Ok(Descriptor { values: l1_normalize(&sum)?, kind: DescriptorKind::Hof3d })
}

/// Compute the descriptor of `kind` from a frame-major raw context patch of
/// `kind.context_depth(temporal_depth)` frames.
pub fn compute_descriptor(
    kind: DescriptorKind,
    context: &[f64],
    patch_size: usize,
    flow_window: usize,
    temporal_depth: usize,
) -> Result<Descriptor> {
    let area = patch_size * patch_size;
    let depth = kind.context_depth(temporal_depth);
    if context.len() != area * depth {
        return Err(Error::invalid(format!(
            "descriptor context: expected {} frames of {} values, got {} values",
            depth,
            area,
            context.len()
        )));
    }
    match kind {
        DescriptorKind::Hog => hog_descriptor(context, patch_size),
        DescriptorKind::Hof => {
            let flow = lucas_kanade_flow(
                &context[..area],
                &context[area..],
                patch_size,
                patch_size,
                flow_window,
            )?;
            hof_descriptor(&flow)
        }
        DescriptorKind::Hof3d => {
            let frames: Vec<&[f64]> = context.chunks_exact(area).collect();
            hof3d_descriptor(&frames, patch_size, flow_window, depth)
        }
    }
}
