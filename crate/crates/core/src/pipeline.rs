//! End-to-end orchestration: extract labeled training patches, build the
//! codebook, train the boosted mapper with its stopping stages, encode videos
//! into histograms under the four representation modes, fit and evaluate the
//! linear classifier, and run the α-sweep benchmark.
//!
//! Every stage re-derives what it needs from (config, manifest) and is
//! deterministic in the config seeds, so composing the stages through model
//! files equals running them in one process.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boost::{fit_adaboost, BoostParams, Ensemble};
use crate::classify::{
    average_precision, fit_linear_ovr, map_from_margins, predict_margin, top1_accuracy,
    LinearModel, RankedScores, SvmConfig,
};
use crate::codebook::{assign_codeword, kmeans_fit, Codebook};
use crate::config::{Labeling, PipelineConfig, SeedStream};
use crate::descriptors::compute_descriptor;
use crate::encode::{
    bow_aggregate, concat_representations, histogram_csv_row, parse_histogram_csv_row,
    BowHistogram,
};
use crate::model::ModelContainer;
use crate::patchio::{
    extract_patch_grid, l1_normalize, load_video_frames, DatasetManifest, Frame, Split,
};
use crate::wald::{evaluation_stats, fit_stopping_trees, predict_early_exit};
use crate::{Error, Result};

/// Video representation fed to the linear classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Classic bag-of-words: descriptors quantized against the codebook.
    Bow,
    /// Mapper histograms: early-exit codeword predictions from raw patches.
    Featureless,
    /// Mapper histograms over patch-ID classes (no codebook anywhere).
    Codebookless,
    /// Concatenation of `Bow` and `Featureless`.
    Combined,
}

impl Mode {
    pub fn parse(text: &str) -> Result<Mode> {
        match text {
            "bow" => Ok(Mode::Bow),
            "featureless" => Ok(Mode::Featureless),
            "codebookless" => Ok(Mode::Codebookless),
            "combined" => Ok(Mode::Combined),
            other => Err(Error::InvalidInput(format!(
                "unknown mode `{other}` (expected bow|featureless|codebookless|combined)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Bow => "bow",
            Mode::Featureless => "featureless",
            Mode::Codebookless => "codebookless",
            Mode::Combined => "combined",
        }
    }
}

/// A mode only makes sense for the labeling it was designed around.
pub fn check_mode(config: &PipelineConfig, mode: Mode) -> Result<()> {
    match (mode, config.labeling) {
        (Mode::Codebookless, Labeling::Codebookless) => Ok(()),
        (Mode::Codebookless, Labeling::Codebook { .. }) => Err(Error::Config(
            "mode codebookless requires `labeling = codebookless` in the config".into(),
        )),
        (_, Labeling::Codebookless) => Err(Error::Config(format!(
            "mode {} requires codebook labeling, config says codebookless",
            mode.as_str()
        ))),
        _ => Ok(()),
    }
}

/// Aligned mapper samples and train-time descriptors for the train split.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub samples: Vec<Vec<f64>>,
    pub descriptors: Vec<Vec<f64>>,
}

/// Walk the train split and produce, for every patch position, the
/// L1-normalized mapper sample and its descriptor. Descriptors see the raw
/// (unnormalized) context; motion descriptors look one frame further than
/// the sample. Applies the `max_train_patches` cap with a seeded draw.
pub fn extract_training_data(
    manifest: &DatasetManifest,
    config: &PipelineConfig,
) -> Result<TrainData> {
    config.validate()?;
    let area = config.patch_size * config.patch_size;
    let sample_len = area * config.descriptor.sample_depth(config.temporal_depth);

    let mut samples = Vec::new();
    let mut descriptors = Vec::new();
    let mut saw_train = false;
    for entry in manifest.entries_for(Split::Train) {
        saw_train = true;
        let frames = load_video_frames(&entry.frame_dir)?;
        let context_depth = config.descriptor.context_depth(config.temporal_depth);
        let patches =
            extract_patch_grid(&frames, config.patch_size, config.stride, context_depth)?;
        for patch in &patches {
            samples.push(l1_normalize(&patch.values[..sample_len])?);
            let descriptor = compute_descriptor(
                config.descriptor,
                &patch.values,
                config.patch_size,
                config.flow_window,
                config.temporal_depth,
            )?;
            descriptors.push(descriptor.values);
        }
    }
    if !saw_train {
        return Err(Error::Manifest("manifest has no train videos".into()));
    }

    if config.max_train_patches > 0 && samples.len() > config.max_train_patches {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.subseed(SeedStream::PatchSubsample));
        fisher_yates(&mut order, &mut rng);
        let mut keep: Vec<usize> = order[..config.max_train_patches].to_vec();
        keep.sort_unstable();
        samples = keep.iter().map(|&i| samples[i].clone()).collect();
        descriptors = keep.iter().map(|&i| descriptors[i].clone()).collect();
    }
    Ok(TrainData { samples, descriptors })
}

/// k-means over the train-split descriptors.
pub fn build_codebook_stage(
    manifest: &DatasetManifest,
    config: &PipelineConfig,
) -> Result<Codebook> {
    let k = match config.labeling {
        Labeling::Codebook { k } => k,
        Labeling::Codebookless => {
            return Err(Error::Config(
                "codebookless labeling does not build a codebook".into(),
            ));
        }
    };
    let data = extract_training_data(manifest, config)?;
    kmeans_fit(
        &data.descriptors,
        config.descriptor,
        k,
        config.kmeans_iters,
        config.subseed(SeedStream::Kmeans),
    )
}

/// Train the boosted mapper plus stopping stages. Codebook labeling assigns
/// each patch its nearest codeword and splits 10% off for stopping-tree
/// validation, stratified by codeword. Codebookless labeling gives every
/// boosting patch its own class; validation patches (which cannot be their
/// own class) are labeled by their nearest boosting descriptor — the same
/// each-descriptor-is-a-center rule the mode is defined by.
pub fn train_mapper_stage(
    manifest: &DatasetManifest,
    config: &PipelineConfig,
    codebook: Option<&Codebook>,
) -> Result<Ensemble> {
    let data = extract_training_data(manifest, config)?;
    let n = data.samples.len();
    let split_seed = config.subseed(SeedStream::ValidationSplit);

    let (boost_idx, val_idx, boost_labels, val_labels, num_classes) = match config.labeling {
        Labeling::Codebook { k } => {
            let codebook = codebook.ok_or_else(|| {
                Error::InvalidInput(
                    "codebook labeling needs a codebook: run build-codebook and pass its model"
                        .into(),
                )
            })?;
            let labels: Vec<usize> = data
                .descriptors
                .iter()
                .map(|d| assign_codeword(codebook, d))
                .collect::<Result<_>>()?;
            let (boost_idx, val_idx) = stratified_split(&labels, 0.1, split_seed)?;
            let boost_labels: Vec<usize> = boost_idx.iter().map(|&i| labels[i]).collect();
            let val_labels: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();
            (boost_idx, val_idx, boost_labels, val_labels, k)
        }
        Labeling::Codebookless => {
            let (boost_idx, val_idx) = plain_split(n, 0.1, split_seed)?;
            let boost_labels: Vec<usize> = (0..boost_idx.len()).collect();
            let val_labels: Vec<usize> = val_idx
                .iter()
                .map(|&i| nearest_index(&data.descriptors[i], &boost_idx, &data.descriptors))
                .collect();
            let num_classes = boost_labels.len();
            (boost_idx, val_idx, boost_labels, val_labels, num_classes)
        }
    };

    let boost_samples: Vec<Vec<f64>> = boost_idx.iter().map(|&i| data.samples[i].clone()).collect();
    let val_samples: Vec<Vec<f64>> = val_idx.iter().map(|&i| data.samples[i].clone()).collect();

    let params = BoostParams {
        stages: config.stages,
        pool_fraction: config.pool_fraction,
        trim_mass: config.trim_mass,
        max_depth: config.max_depth,
        alpha: config.alpha,
        ..BoostParams::default()
    };
    let ensemble = fit_adaboost(
        &boost_samples,
        &boost_labels,
        num_classes,
        &params,
        config.subseed(SeedStream::Boost),
    )?;
    fit_stopping_trees(ensemble, &val_samples, &val_labels, config.max_depth)
}

/// One encoded video: the representation row written to the histogram CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedVideo {
    pub video_id: String,
    pub label: usize,
    pub split: Split,
    pub values: Vec<f64>,
}

/// Encode every manifest video (both splits, manifest order) under `mode`.
/// `alpha` overrides the config's early-exit threshold when given.
pub fn encode_stage(
    manifest: &DatasetManifest,
    container: &ModelContainer,
    mode: Mode,
    alpha: Option<f64>,
) -> Result<Vec<EncodedVideo>> {
    let config = &container.config;
    check_mode(config, mode)?;
    let alpha = alpha.unwrap_or(config.alpha);

    let mut encoded = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let frames = load_video_frames(&entry.frame_dir)?;
        let values = match mode {
            Mode::Bow => bow_histogram(&frames, container, &entry.video_id)?.counts,
            Mode::Featureless | Mode::Codebookless => {
                mapper_histogram(&frames, container, alpha, &entry.video_id)?.counts
            }
            Mode::Combined => {
                let bow = bow_histogram(&frames, container, &entry.video_id)?;
                let mapper = mapper_histogram(&frames, container, alpha, &entry.video_id)?;
                concat_representations(&bow, &mapper)?
            }
        };
        encoded.push(EncodedVideo {
            video_id: entry.video_id.clone(),
            label: entry.label,
            split: entry.split,
            values,
        });
    }
    Ok(encoded)
}

fn bow_histogram(
    frames: &[Frame],
    container: &ModelContainer,
    video_id: &str,
) -> Result<BowHistogram> {
    let config = &container.config;
    let codebook = container
        .codebook
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model has no codebook section".into()))?;
    let context_depth = config.descriptor.context_depth(config.temporal_depth);
    let patches = extract_patch_grid(frames, config.patch_size, config.stride, context_depth)?;
    let mut assignments = Vec::with_capacity(patches.len());
    for patch in &patches {
        let descriptor = compute_descriptor(
            config.descriptor,
            &patch.values,
            config.patch_size,
            config.flow_window,
            config.temporal_depth,
        )?;
        assignments.push(assign_codeword(codebook, &descriptor.values)?);
    }
    bow_aggregate(&assignments, codebook.k(), video_id, true)
}

fn mapper_histogram(
    frames: &[Frame],
    container: &ModelContainer,
    alpha: f64,
    video_id: &str,
) -> Result<BowHistogram> {
    let config = &container.config;
    let ensemble = container
        .ensemble
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("mapper model required: run train-mapper first".into()))?;
    let sample_depth = config.descriptor.sample_depth(config.temporal_depth);
    let patches = extract_patch_grid(frames, config.patch_size, config.stride, sample_depth)?;
    let mut assignments = Vec::with_capacity(patches.len());
    for patch in &patches {
        let sample = l1_normalize(&patch.values)?;
        let result = predict_early_exit(ensemble, &sample, alpha)?;
        assignments.push(result.predicted_class);
    }
    bow_aggregate(&assignments, ensemble.num_classes, video_id, true)
}

/// Fit the one-vs-rest SVM on the train-split rows.
pub fn train_svm_stage(
    encoded: &[EncodedVideo],
    num_classes: usize,
    config: &PipelineConfig,
) -> Result<LinearModel> {
    let mut reps = Vec::new();
    let mut labels = Vec::new();
    for row in encoded.iter().filter(|r| r.split == Split::Train) {
        reps.push(row.values.clone());
        labels.push(row.label);
    }
    if reps.is_empty() {
        return Err(Error::InvalidInput("no train-split rows to fit the svm on".into()));
    }
    let svm = SvmConfig {
        lambda: config.svm_lambda,
        epochs: config.svm_epochs,
        seed: config.subseed(SeedStream::Svm),
    };
    fit_linear_ovr(&reps, &labels, num_classes, &svm)
}

/// MAP / top-1 report over the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub map: f64,
    pub top1: f64,
    /// Per class name; `None` when the class has no test videos.
    pub per_class_ap: Vec<(String, Option<f64>)>,
    pub num_test_videos: usize,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "test videos: {}", self.num_test_videos)?;
        writeln!(f, "MAP: {:.4}", self.map)?;
        writeln!(f, "top-1 accuracy: {:.4}", self.top1)?;
        writeln!(f, "per-class AP:")?;
        for (name, ap) in &self.per_class_ap {
            match ap {
                Some(ap) => writeln!(f, "  {name}: {ap:.4}")?,
                None => writeln!(f, "  {name}: (no test videos)")?,
            }
        }
        Ok(())
    }
}

pub fn evaluate_stage(
    encoded: &[EncodedVideo],
    linear: &LinearModel,
    manifest: &DatasetManifest,
) -> Result<EvalReport> {
    let test: Vec<&EncodedVideo> = encoded.iter().filter(|r| r.split == Split::Test).collect();
    if test.is_empty() {
        return Err(Error::InvalidInput("no test-split rows to evaluate".into()));
    }
    let margins: Vec<Vec<f64>> = test
        .iter()
        .map(|r| predict_margin(linear, &r.values))
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = test.iter().map(|r| r.label).collect();
    let num_classes = manifest.num_classes();
    let (map, _) = map_from_margins(&margins, &labels, num_classes)?;
    let top1 = top1_accuracy(&margins, &labels)?;

    let mut names = vec![String::new(); num_classes];
    for (name, &idx) in &manifest.label_map {
        names[idx] = name.clone();
    }
    let mut per_class_ap = Vec::with_capacity(num_classes);
    for (class, name) in names.into_iter().enumerate() {
        if labels.iter().any(|&l| l == class) {
            let scored: Vec<(f64, bool)> = margins
                .iter()
                .zip(&labels)
                .map(|(m, &l)| (m[class], l == class))
                .collect();
            let ap = average_precision(&RankedScores::new(&scored))?;
            per_class_ap.push((name, Some(ap)));
        } else {
            per_class_ap.push((name, None));
        }
    }
    Ok(EvalReport { map, top1, per_class_ap, num_test_videos: test.len() })
}

/// One α row of the benchmark sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub alpha: f64,
    pub mean_stages: f64,
    pub time_per_frame_s: f64,
    pub speedup: f64,
    pub map: f64,
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("alpha,mean_stages,time_per_frame_s,speedup,map\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.3},{:.6},{:.3},{:.4}\n",
            r.alpha, r.mean_stages, r.time_per_frame_s, r.speedup, r.map
        ));
    }
    out
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:>8}  {:>12}  {:>18}  {:>8}  {:>8}\n",
        "alpha", "mean_stages", "time_per_frame_s", "speedup", "map"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>8}  {:>12.3}  {:>18.6}  {:>8.3}  {:>8.4}\n",
            r.alpha, r.mean_stages, r.time_per_frame_s, r.speedup, r.map
        ));
    }
    out
}

/// Early-exit benchmark over the test split: for each α, timing statistics
/// over all test-split samples plus the MAP the mapper representation reaches
/// at that α. Needs a full container (mapper + stopping + linear trained on
/// mapper histograms).
pub fn run_bench_stage(
    manifest: &DatasetManifest,
    container: &ModelContainer,
    alphas: &[f64],
) -> Result<Vec<BenchRow>> {
    let config = &container.config;
    let ensemble = container
        .ensemble
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("mapper model required: run train-mapper first".into()))?;
    if ensemble.stopping.is_empty() {
        return Err(Error::InvalidInput("run-bench needs stopping stages in the model".into()));
    }
    let linear = container.linear.as_ref().ok_or_else(|| {
        Error::InvalidInput("run-bench needs a linear model: run encode and train-svm first".into())
    })?;
    if linear.dim() != ensemble.num_classes {
        return Err(Error::InvalidInput(format!(
            "run-bench needs a linear model over mapper histograms ({} dims), got {} dims",
            ensemble.num_classes,
            linear.dim()
        )));
    }
    if alphas.is_empty() {
        return Err(Error::InvalidInput("no alphas to benchmark".into()));
    }

    // Flatten all test-split samples once; remember per-video extents.
    let sample_depth = config.descriptor.sample_depth(config.temporal_depth);
    let mut all_samples: Vec<Vec<f64>> = Vec::new();
    let mut videos: Vec<(usize, usize, usize)> = Vec::new(); // (start, end, label)
    let mut total_frames = 0usize;
    for entry in manifest.entries_for(Split::Test) {
        let frames = load_video_frames(&entry.frame_dir)?;
        total_frames += frames.len();
        let patches =
            extract_patch_grid(&frames, config.patch_size, config.stride, sample_depth)?;
        let start = all_samples.len();
        for patch in &patches {
            all_samples.push(l1_normalize(&patch.values)?);
        }
        videos.push((start, all_samples.len(), entry.label));
    }
    if all_samples.is_empty() {
        return Err(Error::InvalidInput("manifest has no test videos".into()));
    }
    let samples_per_frame = all_samples.len() as f64 / total_frames as f64;

    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let stats = evaluation_stats(ensemble, &all_samples, alpha)?;

        let assignments: Vec<usize> = all_samples
            .iter()
            .map(|s| predict_early_exit(ensemble, s, alpha).map(|r| r.predicted_class))
            .collect::<Result<_>>()?;
        let mut margins = Vec::with_capacity(videos.len());
        let mut labels = Vec::with_capacity(videos.len());
        for &(start, end, label) in &videos {
            let hist = bow_aggregate(&assignments[start..end], ensemble.num_classes, "bench", true)?;
            margins.push(predict_margin(linear, &hist.counts)?);
            labels.push(label);
        }
        let (map, _) = map_from_margins(&margins, &labels, manifest.num_classes())?;

        rows.push(BenchRow {
            alpha,
            mean_stages: stats.mean_stages,
            time_per_frame_s: stats.wall_time_per_sample * samples_per_frame,
            speedup: stats.speedup_vs_full,
            map,
        });
    }
    Ok(rows)
}

/// The whole pipeline in one call: codebook (if the labeling wants one),
/// mapper, encoding under `mode`, SVM, evaluation.
pub fn run_all(
    manifest: &DatasetManifest,
    config: &PipelineConfig,
    mode: Mode,
) -> Result<(ModelContainer, Vec<EncodedVideo>, EvalReport)> {
    config.validate()?;
    check_mode(config, mode)?;
    let mut container = ModelContainer::new(config.clone());
    if matches!(config.labeling, Labeling::Codebook { .. }) {
        container.codebook = Some(build_codebook_stage(manifest, config)?);
    }
    container.ensemble =
        Some(train_mapper_stage(manifest, config, container.codebook.as_ref())?);
    let encoded = encode_stage(manifest, &container, mode, None)?;
    container.linear = Some(train_svm_stage(&encoded, manifest.num_classes(), config)?);
    let report = evaluate_stage(&encoded, container.linear.as_ref().unwrap(), manifest)?;
    Ok((container, encoded, report))
}

/// Histogram CSV: one `video_id,label,v1,…,vK` row per video, manifest order.
pub fn encoded_to_csv(encoded: &[EncodedVideo]) -> String {
    let mut out = String::new();
    for row in encoded {
        out.push_str(&histogram_csv_row(&row.video_id, row.label, &row.values));
        out.push('\n');
    }
    out
}

/// Parse histogram CSV rows back, joining the split through the manifest.
pub fn encoded_from_csv(text: &str, manifest: &DatasetManifest) -> Result<Vec<EncodedVideo>> {
    let by_id: BTreeMap<&str, (&usize, Split)> = manifest
        .entries
        .iter()
        .map(|e| (e.video_id.as_str(), (&e.label, e.split)))
        .collect();
    let mut encoded = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (video_id, label, values) = parse_histogram_csv_row(line)?;
        let (&manifest_label, split) = *by_id.get(video_id.as_str()).ok_or_else(|| {
            Error::InvalidInput(format!(
                "histogram row {}: video `{video_id}` not in manifest",
                lineno + 1
            ))
        })?;
        if manifest_label != label {
            return Err(Error::InvalidInput(format!(
                "histogram row {}: label {label} disagrees with manifest label {manifest_label}",
                lineno + 1
            )));
        }
        if let Some(d) = dim {
            if values.len() != d {
                return Err(Error::InvalidInput(format!(
                    "histogram row {}: {} values, earlier rows had {d}",
                    lineno + 1,
                    values.len()
                )));
            }
        } else {
            dim = Some(values.len());
        }
        encoded.push(EncodedVideo { video_id, label, split, values });
    }
    if encoded.is_empty() {
        return Err(Error::InvalidInput("histogram csv is empty".into()));
    }
    Ok(encoded)
}

// ---- split helpers ----

fn fisher_yates(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
}

/// Hold out ~`frac` of the indices per label for stopping-tree validation.
/// Labels with a single sample stay entirely in the boosting split.
fn stratified_split(labels: &[usize], frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boost = Vec::new();
    let mut val = Vec::new();
    for (_, mut idxs) in groups {
        fisher_yates(&mut idxs, &mut rng);
        let take = if idxs.len() >= 2 {
            ((idxs.len() as f64 * frac).round() as usize).clamp(1, idxs.len() - 1)
        } else {
            0
        };
        val.extend_from_slice(&idxs[..take]);
        boost.extend_from_slice(&idxs[take..]);
    }
    if val.is_empty() {
        return Err(Error::InvalidInput(
            "validation split is empty: every label has a single patch".into(),
        ));
    }
    boost.sort_unstable();
    val.sort_unstable();
    Ok((boost, val))
}

/// Unstratified ~`frac` holdout (codebookless labels are all singletons).
fn plain_split(n: usize, frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 patches to split off validation, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fisher_yates(&mut order, &mut rng);
    let take = ((n as f64 * frac).round() as usize).clamp(1, n - 2);
    let mut val: Vec<usize> = order[..take].to_vec();
    let mut boost: Vec<usize> = order[take..].to_vec();
    boost.sort_unstable();
    val.sort_unstable();
    Ok((boost, val))
}

/// Index into `candidates` of the descriptor nearest to `query` (position in
/// `candidates`, i.e. the patch-ID class); ties take the lowest position.
fn nearest_index(query: &[f64], candidates: &[usize], descriptors: &[Vec<f64>]) -> usize {
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    for (pos, &idx) in candidates.iter().enumerate() {
        let d: f64 = descriptors[idx]
            .iter()
            .zip(query)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d < best_dist {
            best_dist = d;
            best = pos;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patchio::load_manifest;
    use crate::synth::{generate_dataset, SynthParams};
    use tempfile::TempDir;

    fn tiny_dataset() -> (TempDir, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        let params = SynthParams {
            num_classes: 3,
            train_videos_per_class: 2,
            test_videos_per_class: 1,
            frames_per_video: 3,
            width: 32,
            height: 24,
            noise: 2.0,
            seed: 9,
        };
        let manifest_path = generate_dataset(dir.path(), &params).unwrap();
        let manifest = load_manifest(&manifest_path).unwrap();
        (dir, manifest)
    }

    fn tiny_config() -> PipelineConfig {
        PipelineConfig {
            patch_size: 8,
            stride: 8,
            labeling: Labeling::Codebook { k: 4 },
            stages: 6,
            pool_fraction: 0.5,
            max_depth: 6,
            kmeans_iters: 30,
            svm_epochs: 20,
            seed: 3,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn extraction_aligns_samples_and_descriptors() {
        let (_dir, manifest) = tiny_dataset();
        let config = tiny_config();
        let data = extract_training_data(&manifest, &config).unwrap();
        // 6 train videos x 3 frames x (4x3 grid) patches.
        assert_eq!(data.samples.len(), 6 * 3 * 12);
        assert_eq!(data.samples.len(), data.descriptors.len());
        assert_eq!(data.samples[0].len(), 64);
        assert_eq!(data.descriptors[0].len(), 36);
        for s in &data.samples {
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn patch_cap_subsamples_deterministically() {
        let (_dir, manifest) = tiny_dataset();
        let mut config = tiny_config();
        config.max_train_patches = 50;
        let a = extract_training_data(&manifest, &config).unwrap();
        let b = extract_training_data(&manifest, &config).unwrap();
        assert_eq!(a.samples.len(), 50);
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.descriptors, b.descriptors);
    }

    #[test]
    fn run_all_is_deterministic_and_composable() {
        let (_dir, manifest) = tiny_dataset();
        let config = tiny_config();
        let (container_a, encoded_a, report_a) =
            run_all(&manifest, &config, Mode::Featureless).unwrap();
        let (container_b, encoded_b, report_b) =
            run_all(&manifest, &config, Mode::Featureless).unwrap();
        assert_eq!(container_a.to_bytes(), container_b.to_bytes());
        assert_eq!(encoded_a, encoded_b);
        assert_eq!(report_a, report_b);

        // Stage-by-stage composition must produce the same artifacts.
        let mut container = ModelContainer::new(config.clone());
        container.codebook = Some(build_codebook_stage(&manifest, &config).unwrap());
        container.ensemble = Some(
            train_mapper_stage(&manifest, &config, container.codebook.as_ref()).unwrap(),
        );
        let encoded = encode_stage(&manifest, &container, Mode::Featureless, None).unwrap();
        container.linear =
            Some(train_svm_stage(&encoded, manifest.num_classes(), &config).unwrap());
        let report = evaluate_stage(&encoded, container.linear.as_ref().unwrap(), &manifest)
            .unwrap();
        assert_eq!(container.to_bytes(), container_a.to_bytes());
        assert_eq!(encoded, encoded_a);
        assert_eq!(report, report_a);
        assert_eq!(report.num_test_videos, 3);
        assert!(report.map > 0.0 && report.map <= 1.0);
    }

    #[test]
    fn encode_modes_have_expected_dimensions() {
        let (_dir, manifest) = tiny_dataset();
        let config = tiny_config();
        let (container, _, _) = run_all(&manifest, &config, Mode::Featureless).unwrap();
        let bow = encode_stage(&manifest, &container, Mode::Bow, None).unwrap();
        let fl = encode_stage(&manifest, &container, Mode::Featureless, None).unwrap();
        let combined = encode_stage(&manifest, &container, Mode::Combined, None).unwrap();
        assert_eq!(bow[0].values.len(), 4);
        assert_eq!(fl[0].values.len(), 4);
        assert_eq!(combined[0].values.len(), 8);
        // Each half of the combined row keeps its own normalization.
        assert!((combined[0].values.iter().sum::<f64>() - 2.0).abs() < 1e-9);
        let err = encode_stage(&manifest, &container, Mode::Codebookless, None).unwrap_err();
        assert!(err.to_string().contains("codebookless"));
    }

    #[test]
    fn featureless_without_mapper_reports_missing_model() {
        let (_dir, manifest) = tiny_dataset();
        let config = tiny_config();
        let container = ModelContainer::new(config);
        let err = encode_stage(&manifest, &container, Mode::Featureless, None).unwrap_err();
        assert!(err.to_string().contains("mapper model required"), "got: {err}");
    }

    #[test]
    fn histogram_csv_round_trips_with_split_join() {
        let (_dir, manifest) = tiny_dataset();
        let config = tiny_config();
        let (_, encoded, _) = run_all(&manifest, &config, Mode::Featureless).unwrap();
        let csv = encoded_to_csv(&encoded);
        let parsed = encoded_from_csv(&csv, &manifest).unwrap();
        assert_eq!(parsed, encoded);

        let bad = csv.replace("grating00_train_00", "mystery_video");
        assert!(encoded_from_csv(&bad, &manifest).is_err());
    }

    #[test]
    fn codebookless_pipeline_runs_end_to_end() {
        let (_dir, manifest) = tiny_dataset();
        let mut config = tiny_config();
        config.labeling = Labeling::Codebookless;
        config.stages = 4;
        // 216 patches -> ~22 validation, 194 patch-ID classes.
        let (container, encoded, report) =
            run_all(&manifest, &config, Mode::Codebookless).unwrap();
        let ensemble = container.ensemble.as_ref().unwrap();
        assert_eq!(ensemble.num_classes, 194);
        assert_eq!(encoded[0].values.len(), 194);
        assert!(container.codebook.is_none());
        assert!(report.map > 0.0);
        // The mapper concentrates on a strict subset of patch IDs.
        let mut nonzero = vec![false; ensemble.num_classes];
        for row in &encoded {
            for (i, &v) in row.values.iter().enumerate() {
                if v > 0.0 {
                    nonzero[i] = true;
                }
            }
        }
        let distinct = nonzero.iter().filter(|&&b| b).count();
        assert!(distinct < ensemble.num_classes);
    }

    #[test]
    fn bench_rows_cover_alphas_and_track_cost() {
        let (_dir, manifest) = tiny_dataset();
        let config = tiny_config();
        let (container, _, _) = run_all(&manifest, &config, Mode::Featureless).unwrap();
        let rows = run_bench_stage(&manifest, &container, &[1.0, 0.9, 0.0]).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert!(r.mean_stages >= 1.0 && r.mean_stages <= 6.0);
            assert!(r.time_per_frame_s >= 0.0);
            assert!(r.speedup > 0.0);
            assert!((0.0..=1.0).contains(&r.map));
        }
        // alpha = 0 exits at stage one.
        assert_eq!(rows[2].mean_stages, 1.0);
        // Lower alpha can only lower the stage count.
        assert!(rows[1].mean_stages <= rows[0].mean_stages);
        let csv = bench_csv(&rows);
        assert!(csv.starts_with("alpha,mean_stages,time_per_frame_s,speedup,map\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn bench_requires_mapper_and_matching_linear() {
        let (_dir, manifest) = tiny_dataset();
        let config = tiny_config();
        let container = ModelContainer::new(config.clone());
        let err = run_bench_stage(&manifest, &container, &[0.9]).unwrap_err();
        assert!(err.to_string().contains("mapper model required"));

        // Linear trained on a bow representation of different width is refused.
        let (mut container, _, _) = run_all(&manifest, &config, Mode::Featureless).unwrap();
        let combined = encode_stage(&manifest, &container, Mode::Combined, None).unwrap();
        container.linear =
            Some(train_svm_stage(&combined, manifest.num_classes(), &config).unwrap());
        let err = run_bench_stage(&manifest, &container, &[0.9]).unwrap_err();
        assert!(err.to_string().contains("mapper histograms"), "got: {err}");
    }

    #[test]
    fn stratified_split_respects_labels() {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let (boost, val) = stratified_split(&labels, 0.1, 7).unwrap();
        assert_eq!(boost.len() + val.len(), 40);
        let mut all: Vec<usize> = boost.iter().chain(&val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        // 10 per label -> exactly one validation index per label.
        assert_eq!(val.len(), 4);
        let val_labels: std::collections::BTreeSet<usize> =
            val.iter().map(|&i| labels[i]).collect();
        assert_eq!(val_labels.len(), 4);
        // Determinism.
        let again = stratified_split(&labels, 0.1, 7).unwrap();
        assert_eq!(again, (boost, val));
        // Singleton labels never land in validation.
        let labels = vec![0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1];
        let (boost, val) = stratified_split(&labels, 0.1, 1).unwrap();
        assert!(boost.contains(&0));
        assert_eq!(val.len(), 1);
    }

    #[test]
    fn plain_split_bounds_and_determinism() {
        let (boost, val) = plain_split(20, 0.1, 5).unwrap();
        assert_eq!(boost.len(), 18);
        assert_eq!(val.len(), 2);
        assert_eq!(plain_split(20, 0.1, 5).unwrap(), (boost, val));
        assert!(plain_split(2, 0.1, 5).is_err());
    }
}
