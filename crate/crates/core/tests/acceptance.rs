//! Acceptance suite: one test per numbered criterion, each printing a single
//! `criterion N: PASS/FAIL` line with the measured numbers before asserting.
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads=1`
//! for an ordered report. The grating fixture (criteria 4-7) is built once
//! and shared; every test is still independent.

use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mcwb::boost::{
    argmax, encode_labels, fit_adaboost, predict_strong, softmax, update_weights, weak_scores,
    BoostParams, Ensemble,
};
use mcwb::classify::{fit_linear_ovr, predict_margin, SvmConfig};
use mcwb::codebook::{assign_codeword, kmeans_fit, Codebook};
use mcwb::config::{Labeling, PipelineConfig};
use mcwb::descriptors::{compute_descriptor, DescriptorKind};
use mcwb::dtree::{tree_predict_proba, DecisionTree, Node};
use mcwb::encode::bow_aggregate;
use mcwb::model::ModelContainer;
use mcwb::patchio::{
    extract_patch_grid, l1_normalize, load_manifest, load_video_frames, DatasetManifest, Split,
};
use mcwb::pipeline::{
    build_codebook_stage, encode_stage, evaluate_stage, extract_training_data, train_mapper_stage,
    train_svm_stage, EncodedVideo, Mode,
};
use mcwb::synth::{generate_dataset, SynthParams};
use mcwb::wald::{evaluation_stats, fit_stopping_trees, predict_early_exit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn report(criterion: usize, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict} - {detail}");
    assert!(pass, "criterion {criterion} failed - {detail}");
}

/// Separable Gaussian-ish blobs: class `c` is shifted by +4 on dims with
/// `d % num_classes == c`, plus uniform noise in [-1, 1).
fn blobs(num_classes: usize, per_class: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for class in 0..num_classes {
        for _ in 0..per_class {
            let sample = (0..dim)
                .map(|d| {
                    let center = if d % num_classes == class { 4.0 } else { 0.0 };
                    center + rng.gen_range(-1.0..1.0)
                })
                .collect();
            samples.push(sample);
            labels.push(class);
        }
    }
    (samples, labels)
}

/// Reference tree walk used by the oracle: recursive rather than iterative,
/// same split convention (`<=` goes left).
fn recursive_proba<'t>(tree: &'t DecisionTree, index: usize, sample: &[f64]) -> &'t [f64] {
    match &tree.nodes[index] {
        Node::Leaf { probs } => probs,
        Node::Split { dim, threshold, left, right } => {
            if sample[*dim] <= *threshold {
                recursive_proba(tree, *left, sample)
            } else {
                recursive_proba(tree, *right, sample)
            }
        }
    }
}

/// Independent strong-score recomputation: per stage, gather the feature
/// subset, walk the tree recursively and accumulate (K-1)(ln p - mean ln p).
fn oracle_strong(ensemble: &Ensemble, sample: &[f64]) -> Vec<f64> {
    let k = ensemble.num_classes;
    let mut total = vec![0.0f64; k];
    for weak in &ensemble.weaks {
        let projected: Vec<f64> = weak.feature_subset.iter().map(|&d| sample[d]).collect();
        let probs = recursive_proba(&weak.tree, 0, &projected);
        let logs: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
        let mean = logs.iter().sum::<f64>() / k as f64;
        for (t, l) in total.iter_mut().zip(&logs) {
            *t += (k as f64 - 1.0) * (l - mean);
        }
    }
    total
}

// ---------------------------------------------------------------------------
// Shared grating fixture for criteria 4-7.

struct GratingWorld {
    _dir: TempDir,
    manifest: DatasetManifest,
    config: PipelineConfig,
    container: ModelContainer,
    map_bow: f64,
    map_featureless: f64,
}

static GRATINGS: OnceLock<GratingWorld> = OnceLock::new();

fn map_of(manifest: &DatasetManifest, config: &PipelineConfig, encoded: &[EncodedVideo]) -> f64 {
    let linear = train_svm_stage(encoded, manifest.num_classes(), config).expect("svm");
    evaluate_stage(encoded, &linear, manifest).expect("evaluate").map
}

fn gratings() -> &'static GratingWorld {
    GRATINGS.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let manifest_path = generate_dataset(dir.path(), &SynthParams::default()).expect("dataset");
        let manifest = load_manifest(&manifest_path).expect("manifest");
        let config = PipelineConfig {
            labeling: Labeling::Codebook { k: 16 },
            stages: 200,
            ..PipelineConfig::default()
        };

        let codebook = build_codebook_stage(&manifest, &config).expect("codebook");
        let ensemble = train_mapper_stage(&manifest, &config, Some(&codebook)).expect("mapper");
        let mut container = ModelContainer::new(config.clone());
        container.codebook = Some(codebook);
        container.ensemble = Some(ensemble);

        let bow = encode_stage(&manifest, &container, Mode::Bow, None).expect("bow");
        let featureless =
            encode_stage(&manifest, &container, Mode::Featureless, None).expect("featureless");
        let map_bow = map_of(&manifest, &config, &bow);
        let map_featureless = map_of(&manifest, &config, &featureless);

        GratingWorld { _dir: dir, manifest, config, container, map_bow, map_featureless }
    })
}

/// Test-split patches as mapper samples plus their codeword ground truth.
fn test_patches(
    manifest: &DatasetManifest,
    config: &PipelineConfig,
    codebook: &Codebook,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let depth = config.descriptor.context_depth(config.temporal_depth);
    let sample_len =
        config.patch_size * config.patch_size * config.descriptor.sample_depth(config.temporal_depth);
    let mut samples = Vec::new();
    let mut truths = Vec::new();
    for entry in manifest.entries_for(Split::Test) {
        let frames = load_video_frames(&entry.frame_dir).expect("frames");
        let patches =
            extract_patch_grid(&frames, config.patch_size, config.stride, depth).expect("grid");
        for patch in &patches {
            let descriptor = compute_descriptor(
                config.descriptor,
                &patch.values,
                config.patch_size,
                config.flow_window,
                config.temporal_depth,
            )
            .expect("descriptor");
            truths.push(assign_codeword(codebook, &descriptor.values).expect("assign"));
            samples.push(l1_normalize(&patch.values[..sample_len]).expect("normalize"));
        }
    }
    (samples, truths)
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_equation_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC01);
    let mut coding_dev = 0.0f64;
    let mut score_dev = 0.0f64;
    let mut softmax_dev = 0.0f64;
    for _ in 0..10_000 {
        let k = rng.gen_range(2..=12usize);
        let label = rng.gen_range(0..k);
        let coding = &encode_labels(&[label], k).unwrap()[0];
        coding_dev = coding_dev.max(coding.iter().sum::<f64>().abs());

        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let scores = weak_scores(&probs, k).unwrap();
        score_dev = score_dev.max(scores.iter().sum::<f64>().abs());
        softmax_dev = softmax_dev.max((softmax(&scores).iter().sum::<f64>() - 1.0).abs());
    }

    // Weight-update factor for K=2, p=(0.9, 0.1), correct label. The second
    // sample sees uniform probabilities, so its factor is exactly 1 and the
    // renormalized weight ratio recovers the first sample's factor: 1/3.
    let codings = encode_labels(&[0, 0], 2).unwrap();
    let first = [0.9, 0.1];
    let neutral = [0.5, 0.5];
    let probs: Vec<&[f64]> = vec![&first, &neutral];
    let updated = update_weights(&[0.5, 0.5], &codings, &probs, 2).unwrap();
    let factor_dev = (updated[0] / updated[1] - 1.0 / 3.0).abs();

    let elapsed = start.elapsed();
    let pass = coding_dev <= 1e-12
        && score_dev <= 1e-8
        && factor_dev <= 1e-9
        && softmax_dev <= 1e-9
        && elapsed < Duration::from_secs(5);
    report(
        1,
        pass,
        &format!(
            "10000 vectors: coding sum dev {coding_dev:.2e}, score sum dev {score_dev:.2e}, \
             softmax sum dev {softmax_dev:.2e}, weight factor dev {factor_dev:.2e}, {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_02_strong_score_oracle() {
    let (samples, labels) = blobs(3, 40, 12, 0xAC02);
    let params = BoostParams { stages: 20, ..BoostParams::default() };
    let ensemble = fit_adaboost(&samples, &labels, 3, &params, 7).unwrap();
    assert_eq!(ensemble.stages(), 20);

    let mut rng = ChaCha8Rng::seed_from_u64(0xAC02 + 1);
    let mut max_diff = 0.0f64;
    let mut tree_mismatches = 0usize;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..6.0)).collect();
        let (scores, _) = predict_strong(&ensemble, &x).unwrap();
        for (s, o) in scores.iter().zip(oracle_strong(&ensemble, &x)) {
            max_diff = max_diff.max((s - o).abs());
        }
        for weak in &ensemble.weaks {
            let projected: Vec<f64> = weak.feature_subset.iter().map(|&d| x[d]).collect();
            let fast = tree_predict_proba(&weak.tree, &projected).unwrap();
            if fast != recursive_proba(&weak.tree, 0, &projected) {
                tree_mismatches += 1;
            }
        }
    }
    let pass = max_diff < 1e-8 && tree_mismatches == 0;
    report(
        2,
        pass,
        &format!(
            "1000 samples x 20 stages: max score diff {max_diff:.2e}, \
             {tree_mismatches} tree walks differed from the recursive oracle"
        ),
    );
}

#[test]
fn criterion_03_unreachable_threshold_identity() {
    let (train, train_labels) = blobs(4, 60, 10, 0xAC03);
    let (val, val_labels) = blobs(4, 15, 10, 0xAC03 + 1);
    let params = BoostParams { stages: 20, ..BoostParams::default() };
    let ensemble = fit_adaboost(&train, &train_labels, 4, &params, 11).unwrap();
    let ensemble = fit_stopping_trees(ensemble, &val, &val_labels, params.max_depth).unwrap();

    // Leaf probabilities are clamped below 1, so alpha = 1.0 can never
    // trigger the gate: every sample must run all stages and agree.
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC03 + 2);
    let mut class_matches = 0usize;
    let mut full_runs = 0usize;
    for _ in 0..5000 {
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..6.0)).collect();
        let early = predict_early_exit(&ensemble, &x, 1.0).unwrap();
        let (scores, _) = predict_strong(&ensemble, &x).unwrap();
        class_matches += (early.predicted_class == argmax(&scores)) as usize;
        full_runs += (early.stages_evaluated == ensemble.stages()) as usize;
    }
    let pass = class_matches == 5000 && full_runs == 5000;
    report(
        3,
        pass,
        &format!("alpha 1.0: {class_matches}/5000 class matches, {full_runs}/5000 ran all stages"),
    );
}

#[test]
fn criterion_04_early_exit_tradeoff() {
    let start = Instant::now();
    // Own fixture: the criterion pins the dataset shape (5 classes, >= 2000
    // patches), M = 200 and alpha = 0.97, but leaves noise, codebook size
    // and pool size free. A small codebook over clean gratings saturates
    // within the first stages, which is the regime the trade-off is about.
    let dir = tempfile::tempdir().unwrap();
    let params = SynthParams { noise: 1.0, ..SynthParams::default() };
    let manifest = load_manifest(&generate_dataset(dir.path(), &params).unwrap()).unwrap();
    let config = PipelineConfig {
        patch_size: 12,
        stride: 12,
        labeling: Labeling::Codebook { k: 4 },
        stages: 200,
        pool_fraction: 1.0,
        ..PipelineConfig::default()
    };
    let codebook = build_codebook_stage(&manifest, &config).unwrap();
    let ensemble = &train_mapper_stage(&manifest, &config, Some(&codebook)).unwrap();
    let train_patches = extract_training_data(&manifest, &config).unwrap().samples.len();
    let (samples, truths) = test_patches(&manifest, &config, &codebook);

    let mut full_hits = 0usize;
    let mut early_hits = 0usize;
    for (x, &truth) in samples.iter().zip(&truths) {
        let (scores, _) = predict_strong(ensemble, x).unwrap();
        full_hits += (argmax(&scores) == truth) as usize;
        let early = predict_early_exit(ensemble, x, config.alpha).unwrap();
        early_hits += (early.predicted_class == truth) as usize;
    }
    let n = samples.len() as f64;
    let full_acc = full_hits as f64 / n;
    let early_acc = early_hits as f64 / n;
    let stats = evaluation_stats(ensemble, &samples, config.alpha).unwrap();
    let elapsed = start.elapsed();

    let m = ensemble.stages() as f64;
    let pass = train_patches >= 2000
        && ensemble.stages() == 200
        && early_acc >= full_acc - 0.02
        && stats.mean_stages <= 0.6 * m
        && stats.speedup_vs_full > 1.5
        && elapsed < Duration::from_secs(300);
    report(
        4,
        pass,
        &format!(
            "{train_patches} train patches; test codeword accuracy early {early_acc:.4} vs \
             full {full_acc:.4}; mean stages {:.1} of {m}; speedup {:.2}x; {elapsed:.1?}",
            stats.mean_stages, stats.speedup_vs_full
        ),
    );
}

#[test]
fn criterion_05_mapper_beats_linear_baseline() {
    let w = gratings();
    let codebook = w.container.codebook.as_ref().unwrap();

    // Baseline: same pipeline, but the patch-to-codeword mapper is a linear
    // one-vs-rest classifier over raw normalized patches.
    let data = extract_training_data(&w.manifest, &w.config).unwrap();
    let labels: Vec<usize> =
        data.descriptors.iter().map(|d| assign_codeword(codebook, d).unwrap()).collect();
    let svm = SvmConfig { seed: 0xAC05, ..SvmConfig::default() };
    let baseline = fit_linear_ovr(&data.samples, &labels, codebook.k(), &svm).unwrap();

    let depth = w.config.descriptor.context_depth(w.config.temporal_depth);
    let sample_len = w.config.patch_size
        * w.config.patch_size
        * w.config.descriptor.sample_depth(w.config.temporal_depth);
    let mut encoded = Vec::new();
    for entry in &w.manifest.entries {
        let frames = load_video_frames(&entry.frame_dir).unwrap();
        let patches =
            extract_patch_grid(&frames, w.config.patch_size, w.config.stride, depth).unwrap();
        let assignments: Vec<usize> = patches
            .iter()
            .map(|p| {
                let sample = l1_normalize(&p.values[..sample_len]).unwrap();
                argmax(&predict_margin(&baseline, &sample).unwrap())
            })
            .collect();
        let hist = bow_aggregate(&assignments, codebook.k(), &entry.video_id, true).unwrap();
        encoded.push(EncodedVideo {
            video_id: entry.video_id.clone(),
            label: entry.label,
            split: entry.split,
            values: hist.counts,
        });
    }
    let map_baseline = map_of(&w.manifest, &w.config, &encoded);

    let pass = w.map_featureless >= map_baseline + 0.10;
    report(
        5,
        pass,
        &format!(
            "boosted mapper MAP {:.4} vs raw-patch linear baseline MAP {map_baseline:.4}",
            w.map_featureless
        ),
    );
}

#[test]
fn criterion_06_featureless_and_combined_gaps() {
    let w = gratings();
    let combined = encode_stage(&w.manifest, &w.container, Mode::Combined, None).unwrap();
    let map_combined = map_of(&w.manifest, &w.config, &combined);
    let floor = w.map_bow.max(w.map_featureless) - 0.05;
    let pass = w.map_featureless >= w.map_bow - 0.10 && map_combined >= floor;
    report(
        6,
        pass,
        &format!(
            "MAP bow {:.4}, featureless {:.4}, combined {map_combined:.4} (floor {floor:.4})",
            w.map_bow, w.map_featureless
        ),
    );
}

#[test]
fn criterion_07_codebookless_viability() {
    let w = gratings();
    // Cap the patch pool so every kept training patch is its own class.
    let config = PipelineConfig {
        labeling: Labeling::Codebookless,
        stages: 50,
        max_train_patches: 1250,
        ..PipelineConfig::default()
    };
    let ensemble = train_mapper_stage(&w.manifest, &config, None).unwrap();
    let num_ids = ensemble.num_classes;
    let mut container = ModelContainer::new(config.clone());
    container.ensemble = Some(ensemble);
    let encoded = encode_stage(&w.manifest, &container, Mode::Codebookless, None).unwrap();

    let mut predicted = BTreeSet::new();
    for row in encoded.iter().filter(|r| r.split == Split::Test) {
        for (id, v) in row.values.iter().enumerate() {
            if *v > 0.0 {
                predicted.insert(id);
            }
        }
    }
    let map_codebookless = map_of(&w.manifest, &config, &encoded);

    let limit = (0.2 * num_ids as f64).floor() as usize;
    let pass = num_ids >= 1000
        && predicted.len() <= limit
        && map_codebookless >= 0.8 * w.map_bow;
    report(
        7,
        pass,
        &format!(
            "{num_ids} patch-id classes; {} distinct ids predicted on test (limit {limit}); \
             MAP {map_codebookless:.4} vs 0.8 x bow = {:.4}",
            predicted.len(),
            0.8 * w.map_bow
        ),
    );
}

#[test]
fn criterion_08_kmeans_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC08);
    let mut assignment_checks = 0usize;
    let mut assignment_mismatches = 0usize;
    let mut refit_mismatches = 0usize;
    for instance in 0..100u64 {
        let n = rng.gen_range(8..40usize);
        let dim = rng.gen_range(2..6usize);
        let k = rng.gen_range(2..=4usize);
        let points: Vec<Vec<f64>> =
            (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();

        // Distortion monotonicity is asserted inside the fit on every
        // Lloyd iteration; a violation panics the test.
        let seed = 1000 + instance;
        let codebook = kmeans_fit(&points, DescriptorKind::Hog, k, 40, seed).unwrap();
        let refit = kmeans_fit(&points, DescriptorKind::Hog, k, 40, seed).unwrap();
        if codebook.centers != refit.centers {
            refit_mismatches += 1;
        }

        let queries: Vec<Vec<f64>> =
            (0..10).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        for query in points.iter().chain(&queries) {
            let got = assign_codeword(&codebook, query).unwrap();
            let mut best = 0usize;
            let mut best_dist = f64::INFINITY;
            for (i, center) in codebook.centers.iter().enumerate() {
                let dist: f64 =
                    center.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best_dist {
                    best_dist = dist;
                    best = i;
                }
            }
            assignment_checks += 1;
            assignment_mismatches += (got != best) as usize;
        }
    }
    let pass = assignment_mismatches == 0 && refit_mismatches == 0;
    report(
        8,
        pass,
        &format!(
            "100 instances fitted with per-iteration distortion checks; \
             {assignment_mismatches}/{assignment_checks} brute-force assignment mismatches; \
             {refit_mismatches} same-seed refits differed"
        ),
    );
}

#[test]
fn criterion_09_model_round_trip() {
    let (train, train_labels) = blobs(3, 30, 9, 0xAC09);
    let (val, val_labels) = blobs(3, 10, 9, 0xAC09 + 1);
    let params = BoostParams { stages: 8, pool_fraction: 0.5, ..BoostParams::default() };
    let ensemble = fit_adaboost(&train, &train_labels, 3, &params, 21).unwrap();
    let ensemble = fit_stopping_trees(ensemble, &val, &val_labels, params.max_depth).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(0xAC09 + 2);
    let centers: Vec<Vec<f64>> =
        (0..3).map(|_| (0..36).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let reps: Vec<Vec<f64>> = (0..30)
        .map(|i| (0..3).map(|d| rng.gen::<f64>() + if d == i % 3 { 2.0 } else { 0.0 }).collect())
        .collect();
    let rep_labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let linear = fit_linear_ovr(&reps, &rep_labels, 3, &SvmConfig::default()).unwrap();

    let config = PipelineConfig {
        patch_size: 3,
        stride: 3,
        labeling: Labeling::Codebook { k: 3 },
        stages: 8,
        ..PipelineConfig::default()
    };
    let container = ModelContainer {
        config,
        codebook: Some(Codebook { centers, kind: DescriptorKind::Hog }),
        ensemble: Some(ensemble),
        linear: Some(linear),
    };

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.mcwb");
    container.save(&path).unwrap();
    let loaded = ModelContainer::load(&path).unwrap();

    let ens_before = container.ensemble.as_ref().unwrap();
    let ens_after = loaded.ensemble.as_ref().unwrap();
    let mut prediction_mismatches = 0usize;
    for _ in 0..200 {
        let x: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..6.0)).collect();
        let (s_before, p_before) = predict_strong(ens_before, &x).unwrap();
        let (s_after, p_after) = predict_strong(ens_after, &x).unwrap();
        let e_before = predict_early_exit(ens_before, &x, 0.97).unwrap();
        let e_after = predict_early_exit(ens_after, &x, 0.97).unwrap();
        let same = s_before == s_after
            && p_before == p_after
            && e_before.predicted_class == e_after.predicted_class
            && e_before.stages_evaluated == e_after.stages_evaluated
            && e_before.stop_confidence == e_after.stop_confidence;
        prediction_mismatches += (!same) as usize;

        let rep: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
        let m_before = predict_margin(container.linear.as_ref().unwrap(), &rep).unwrap();
        let m_after = predict_margin(loaded.linear.as_ref().unwrap(), &rep).unwrap();
        prediction_mismatches += (m_before != m_after) as usize;

        let desc: Vec<f64> = (0..36).map(|_| rng.gen_range(0.0..1.0)).collect();
        let a_before = assign_codeword(container.codebook.as_ref().unwrap(), &desc).unwrap();
        let a_after = assign_codeword(loaded.codebook.as_ref().unwrap(), &desc).unwrap();
        prediction_mismatches += (a_before != a_after) as usize;
    }

    let bytes = std::fs::read(&path).unwrap();
    // Header is 12 bytes and the first section header another 12, so byte 30
    // sits inside the first section's payload.
    let mut corrupt = bytes.clone();
    corrupt[30] ^= 0x40;
    let checksum_err = ModelContainer::from_bytes(&corrupt).unwrap_err().to_string();
    let mut bad_magic = bytes.clone();
    bad_magic[..4].copy_from_slice(b"XXXX");
    let magic_err = ModelContainer::from_bytes(&bad_magic).unwrap_err().to_string();
    let truncated_err = ModelContainer::from_bytes(&bytes[..bytes.len() - 3]).is_err();

    let pass = prediction_mismatches == 0
        && checksum_err.contains("checksum")
        && magic_err.contains("magic")
        && truncated_err;
    report(
        9,
        pass,
        &format!(
            "{prediction_mismatches} prediction mismatches over 200 random inputs; \
             corrupted payload -> {checksum_err:?}; bad magic and truncation rejected"
        ),
    );
}

#[test]
fn criterion_10_boosting_progress() {
    let (train, train_labels) = blobs(5, 80, 16, 0xAC10);
    let (val, val_labels) = blobs(5, 20, 16, 0xAC10 + 1);
    let params = BoostParams { stages: 50, ..BoostParams::default() };
    let ensemble = fit_adaboost(&train, &train_labels, 5, &params, 31).unwrap();

    let mut hits = 0usize;
    for (x, &label) in train.iter().zip(&train_labels) {
        let (scores, _) = predict_strong(&ensemble, x).unwrap();
        hits += (argmax(&scores) == label) as usize;
    }
    let train_acc = hits as f64 / train.len() as f64;

    let ensemble = fit_stopping_trees(ensemble, &val, &val_labels, params.max_depth).unwrap();
    let alphas = [0.5, 0.9, 0.97, 0.999];
    let mut mean_stages = Vec::new();
    for &alpha in &alphas {
        mean_stages.push(evaluation_stats(&ensemble, &train, alpha).unwrap().mean_stages);
    }
    // Lowering alpha can only move each sample's exit earlier, so the means
    // must be non-decreasing in alpha.
    let monotone = mean_stages.windows(2).all(|pair| pair[0] <= pair[1]);

    let pass = train_acc >= 0.95 && monotone;
    let pairs: Vec<String> = alphas
        .iter()
        .zip(&mean_stages)
        .map(|(a, m)| format!("alpha {a} -> {m:.2}"))
        .collect();
    report(
        10,
        pass,
        &format!("train accuracy {train_acc:.4} at 50 stages; mean stages [{}]", pairs.join(", ")),
    );
}
