//! Pipeline configuration: reference defaults, a `key = value` file format,
//! and per-component seed derivation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::descriptors::DescriptorKind;
use crate::{Error, Result};

/// How boosting labels are produced from training patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labeling {
    /// Codeword assignments against a k-means codebook of size `k`.
    Codebook { k: usize },
    /// Every training patch is its own class (patch IDs).
    Codebookless,
}

impl Labeling {
    pub fn as_str(&self) -> &'static str {
        match self {
            Labeling::Codebook { .. } => "codebook",
            Labeling::Codebookless => "codebookless",
        }
    }
}

/// Deterministic seed streams derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Synthetic,
    Kmeans,
    ValidationSplit,
    Boost,
    Svm,
    PatchSubsample,
}

impl SeedStream {
    fn index(self) -> u64 {
        match self {
            SeedStream::Synthetic => 1,
            SeedStream::Kmeans => 2,
            SeedStream::ValidationSplit => 3,
            SeedStream::Boost => 4,
            SeedStream::Svm => 5,
            SeedStream::PatchSubsample => 6,
        }
    }
}

/// All pipeline knobs. Defaults follow the reference configuration: 24×24
/// patches on a non-overlapping grid, HOG labels over a 100-word codebook,
/// 1000 boosting stages of depth-15 trees, pool fraction 0.1, α = 0.97.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub patch_size: usize,
    pub stride: usize,
    /// Temporal depth of mapper samples; descriptors may look further
    /// (motion descriptors need frame pairs regardless).
    pub temporal_depth: usize,
    pub descriptor: DescriptorKind,
    pub labeling: Labeling,
    pub stages: usize,
    pub pool_fraction: f64,
    pub trim_mass: f64,
    pub max_depth: usize,
    pub alpha: f64,
    pub seed: u64,
    pub kmeans_iters: usize,
    pub flow_window: usize,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    /// Cap on boosting samples drawn from the training split (0 = no cap).
    pub max_train_patches: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            patch_size: 24,
            stride: 24,
            temporal_depth: 1,
            descriptor: DescriptorKind::Hog,
            labeling: Labeling::Codebook { k: 100 },
            stages: 1000,
            pool_fraction: 0.1,
            trim_mass: 0.01,
            max_depth: 15,
            alpha: 0.97,
            seed: 0,
            kmeans_iters: 100,
            flow_window: 5,
            svm_lambda: 1e-4,
            svm_epochs: 50,
            max_train_patches: 100_000,
        }
    }
}

/// Reference codebook size per descriptor: 100 for HOG/HOF, 1000 for the
/// larger 3D HOF codebooks.
pub fn default_codebook_k(kind: DescriptorKind) -> usize {
    match kind {
        DescriptorKind::Hog | DescriptorKind::Hof => 100,
        DescriptorKind::Hof3d => 1000,
    }
}

impl PipelineConfig {
    /// Defaults specialized to a descriptor: 3D HOF switches to temporal
    /// depth 9 and the larger codebook.
    pub fn for_descriptor(kind: DescriptorKind) -> PipelineConfig {
        let mut config = PipelineConfig::default();
        config.descriptor = kind;
        config.labeling = Labeling::Codebook { k: default_codebook_k(kind) };
        if kind == DescriptorKind::Hof3d {
            config.temporal_depth = 9;
        }
        config
    }

    /// Mapper sample dimension: patch area times the sample's temporal depth.
    pub fn sample_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.descriptor.sample_depth(self.temporal_depth)
    }

    /// Derive an independent seed for one pipeline component.
    pub fn subseed(&self, stream: SeedStream) -> u64 {
        // SplitMix64 over (seed, stream); avalanches even small seeds.
        let mut z = self.seed.wrapping_add(stream.index().wrapping_mul(0x9e37_79b9_7f4a_7c15));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 3 {
            return Err(Error::Config("patch_size must be >= 3".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        if self.temporal_depth == 0 {
            return Err(Error::Config("temporal_depth must be >= 1".into()));
        }
        if self.descriptor == DescriptorKind::Hof3d && self.temporal_depth < 2 {
            return Err(Error::Config(format!(
                "descriptor hof3d needs temporal_depth >= 2, got {}",
                self.temporal_depth
            )));
        }
        if self.descriptor != DescriptorKind::Hog {
            if self.flow_window < 3 || self.flow_window % 2 == 0 {
                return Err(Error::Config("flow_window must be odd and >= 3".into()));
            }
            if self.patch_size < self.flow_window {
                return Err(Error::Config(format!(
                    "patch_size {} smaller than flow_window {}",
                    self.patch_size, self.flow_window
                )));
            }
        }
        if let Labeling::Codebook { k } = self.labeling {
            if k < 2 {
                return Err(Error::Config("codebook_k must be >= 2".into()));
            }
        }
        if self.stages == 0 {
            return Err(Error::Config("stages must be >= 1".into()));
        }
        if !(self.pool_fraction > 0.0 && self.pool_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "pool_fraction {} outside (0, 1]",
                self.pool_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.trim_mass) {
            return Err(Error::Config(format!("trim_mass {} outside [0, 1)", self.trim_mass)));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.kmeans_iters == 0 {
            return Err(Error::Config("kmeans_iters must be >= 1".into()));
        }
        if !(self.svm_lambda > 0.0) {
            return Err(Error::Config("svm_lambda must be > 0".into()));
        }
        if self.svm_epochs == 0 {
            return Err(Error::Config("svm_epochs must be >= 1".into()));
        }
        if self.sample_dim() < 4 {
            return Err(Error::Config("sample dimension below 4; enlarge the patch".into()));
        }
        Ok(())
    }

    /// Parse `key = value` text (`#` comments) on top of the defaults for
    /// the configured descriptor. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<PipelineConfig> {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }

        // Descriptor first: it decides the defaults the rest layer onto.
        let descriptor = match pairs.remove("descriptor") {
            Some(v) => DescriptorKind::parse(&v)?,
            None => DescriptorKind::Hog,
        };
        let mut config = PipelineConfig::for_descriptor(descriptor);

        let labeling_kind = pairs.remove("labeling");
        let codebook_k = pairs.remove("codebook_k");
        match labeling_kind.as_deref() {
            None | Some("codebook") => {
                if let Some(k) = &codebook_k {
                    let k = parse_usize("codebook_k", k)?;
                    config.labeling = Labeling::Codebook { k };
                }
            }
            Some("codebookless") => {
                if codebook_k.is_some() {
                    return Err(Error::Config(
                        "codebook_k is meaningless with codebookless labeling".into(),
                    ));
                }
                config.labeling = Labeling::Codebookless;
            }
            Some(other) => {
                return Err(Error::Config(format!("unknown labeling `{other}`")));
            }
        }

        for (key, value) in pairs {
            match key.as_str() {
                "patch_size" => config.patch_size = parse_usize(&key, &value)?,
                "stride" => config.stride = parse_usize(&key, &value)?,
                "temporal_depth" => config.temporal_depth = parse_usize(&key, &value)?,
                "stages" => config.stages = parse_usize(&key, &value)?,
                "pool_fraction" => config.pool_fraction = parse_f64(&key, &value)?,
                "trim_mass" => config.trim_mass = parse_f64(&key, &value)?,
                "max_depth" => config.max_depth = parse_usize(&key, &value)?,
                "alpha" => config.alpha = parse_f64(&key, &value)?,
                "seed" => config.seed = parse_u64(&key, &value)?,
                "kmeans_iters" => config.kmeans_iters = parse_usize(&key, &value)?,
                "flow_window" => config.flow_window = parse_usize(&key, &value)?,
                "svm_lambda" => config.svm_lambda = parse_f64(&key, &value)?,
                "svm_epochs" => config.svm_epochs = parse_usize(&key, &value)?,
                "max_train_patches" => config.max_train_patches = parse_usize(&key, &value)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::parse(&text)
    }
}

impl fmt::Display for PipelineConfig {
    /// Emits the same `key = value` format `parse` accepts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "descriptor = {}", self.descriptor.as_str())?;
        writeln!(f, "labeling = {}", self.labeling.as_str())?;
        if let Labeling::Codebook { k } = self.labeling {
            writeln!(f, "codebook_k = {k}")?;
        }
        writeln!(f, "patch_size = {}", self.patch_size)?;
        writeln!(f, "stride = {}", self.stride)?;
        writeln!(f, "temporal_depth = {}", self.temporal_depth)?;
        writeln!(f, "stages = {}", self.stages)?;
        writeln!(f, "pool_fraction = {}", self.pool_fraction)?;
        writeln!(f, "trim_mass = {}", self.trim_mass)?;
        writeln!(f, "max_depth = {}", self.max_depth)?;
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "kmeans_iters = {}", self.kmeans_iters)?;
        writeln!(f, "flow_window = {}", self.flow_window)?;
        writeln!(f, "svm_lambda = {}", self.svm_lambda)?;
        writeln!(f, "svm_epochs = {}", self.svm_epochs)?;
        writeln!(f, "max_train_patches = {}", self.max_train_patches)
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| Error::Config(format!("{key}: `{value}` is not a valid count")))
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value.parse().map_err(|_| Error::Config(format!("{key}: `{value}` is not a valid integer")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let parsed: f64 = value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: `{value}` is not a valid number")))?;
    if !parsed.is_finite() {
        return Err(Error::Config(format!("{key}: must be finite")));
    }
    Ok(parsed)
}
