//! Binary model container. A single file carries everything a pipeline run
//! produces: the config snapshot, the optional codebook, the boosted mapper
//! with its stopping stages, and the linear classifier.
//!
//! Layout: `"MCWB"` magic, format version, section count, then tagged
//! sections of `{tag u32, payload length u64, payload, crc32 u32}`. All
//! integers little-endian, floats as IEEE-754 bit patterns, so a round trip
//! is bit-exact. Each section checksum is verified before decoding.

use std::path::Path;

use crate::boost::{Ensemble, WeakClassifier};
use crate::codebook::Codebook;
use crate::config::{Labeling, PipelineConfig};
use crate::classify::{LinearModel, SvmConfig};
use crate::descriptors::DescriptorKind;
use crate::dtree::{DecisionTree, Node};
use crate::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"MCWB";
pub const FORMAT_VERSION: u32 = 1;

const TAG_CONFIG: u32 = 1;
const TAG_CODEBOOK: u32 = 2;
const TAG_ENSEMBLE: u32 = 3;
const TAG_STOPPING: u32 = 4;
const TAG_LINEAR: u32 = 5;

/// Everything the pipeline can persist. Only the config is mandatory; the
/// other sections appear as the corresponding stages run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelContainer {
    pub config: PipelineConfig,
    pub codebook: Option<Codebook>,
    pub ensemble: Option<Ensemble>,
    pub linear: Option<LinearModel>,
}

impl ModelContainer {
    pub fn new(config: PipelineConfig) -> ModelContainer {
        ModelContainer { config, codebook: None, ensemble: None, linear: None }
    }

    /// Cross-section consistency on top of the per-section structure checks
    /// `from_bytes` already performs.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if let Some(codebook) = &self.codebook {
            if codebook.kind != self.config.descriptor {
                return Err(Error::Model(format!(
                    "codebook built for {} but config selects {}",
                    codebook.kind.as_str(),
                    self.config.descriptor.as_str()
                )));
            }
            if let Labeling::Codebook { k } = self.config.labeling {
                if codebook.k() != k {
                    return Err(Error::Model(format!(
                        "codebook has {} words, config expects {}",
                        codebook.k(),
                        k
                    )));
                }
            }
        }
        if let Some(ensemble) = &self.ensemble {
            if ensemble.dim != self.config.sample_dim() {
                return Err(Error::Model(format!(
                    "mapper expects {}-dim samples, config produces {}",
                    ensemble.dim,
                    self.config.sample_dim()
                )));
            }
            if let (Some(codebook), Labeling::Codebook { .. }) =
                (&self.codebook, self.config.labeling)
            {
                if ensemble.num_classes != codebook.k() {
                    return Err(Error::Model(format!(
                        "mapper predicts {} classes, codebook has {} words",
                        ensemble.num_classes,
                        codebook.k()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut sections: Vec<(u32, Vec<u8>)> = Vec::new();
        sections.push((TAG_CONFIG, encode_config(&self.config)));
        if let Some(codebook) = &self.codebook {
            sections.push((TAG_CODEBOOK, encode_codebook(codebook)));
        }
        if let Some(ensemble) = &self.ensemble {
            sections.push((TAG_ENSEMBLE, encode_ensemble(ensemble)));
            if !ensemble.stopping.is_empty() {
                sections.push((TAG_STOPPING, encode_stopping(&ensemble.stopping)));
            }
        }
        if let Some(linear) = &self.linear {
            sections.push((TAG_LINEAR, encode_linear(linear)));
        }

        let mut out = Vec::new();
        out.extend_from_slice(&MODEL_MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u32(&mut out, sections.len() as u32);
        for (tag, payload) in sections {
            put_u32(&mut out, tag);
            put_u64(&mut out, payload.len() as u64);
            let crc = crc32(&payload);
            out.extend_from_slice(&payload);
            put_u32(&mut out, crc);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ModelContainer> {
        let mut dec = Dec::new(bytes);
        let magic = dec.take(4)?;
        if magic != MODEL_MAGIC {
            return Err(Error::Model(format!(
                "not a model file: bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(magic),
                "MCWB"
            )));
        }
        let version = dec.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported model format version {version} (this build reads {FORMAT_VERSION})"
            )));
        }
        let section_count = dec.u32()?;

        let mut config: Option<PipelineConfig> = None;
        let mut codebook: Option<Codebook> = None;
        let mut ensemble: Option<Ensemble> = None;
        let mut stopping: Option<Vec<DecisionTree>> = None;
        let mut linear: Option<LinearModel> = None;
        for _ in 0..section_count {
            let tag = dec.u32()?;
            let len = dec.usize_len()?;
            let payload = dec.take(len)?;
            let stored_crc = dec.u32()?;
            let actual_crc = crc32(payload);
            if stored_crc != actual_crc {
                return Err(Error::Model(format!(
                    "section {tag} checksum mismatch (stored {stored_crc:#010x}, computed {actual_crc:#010x}); file is corrupt"
                )));
            }
            let mut body = Dec::new(payload);
            match tag {
                TAG_CONFIG => {
                    if config.is_some() {
                        return Err(Error::Model("duplicate config section".into()));
                    }
                    config = Some(decode_config(&mut body)?);
                }
                TAG_CODEBOOK => {
                    if codebook.is_some() {
                        return Err(Error::Model("duplicate codebook section".into()));
                    }
                    codebook = Some(decode_codebook(&mut body)?);
                }
                TAG_ENSEMBLE => {
                    if ensemble.is_some() {
                        return Err(Error::Model("duplicate ensemble section".into()));
                    }
                    ensemble = Some(decode_ensemble(&mut body)?);
                }
                TAG_STOPPING => {
                    if stopping.is_some() {
                        return Err(Error::Model("duplicate stopping section".into()));
                    }
                    stopping = Some(decode_stopping(&mut body)?);
                }
                TAG_LINEAR => {
                    if linear.is_some() {
                        return Err(Error::Model("duplicate linear section".into()));
                    }
                    linear = Some(decode_linear(&mut body)?);
                }
                other => {
                    return Err(Error::Model(format!("unknown section tag {other}")));
                }
            }
            body.finish(tag)?;
        }
        let mut container = ModelContainer {
            config: config.ok_or_else(|| Error::Model("missing config section".into()))?,
            codebook,
            ensemble,
            linear,
        };
        if let Some(stopping) = stopping {
            match &mut container.ensemble {
                Some(ensemble) => ensemble.stopping = stopping,
                None => {
                    return Err(Error::Model("stopping section without an ensemble".into()));
                }
            }
        }
        if let Some(ensemble) = &container.ensemble {
            ensemble.validate()?;
        }
        if let Some(linear) = &container.linear {
            linear.validate()?;
        }
        Ok(container)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ModelContainer> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        ModelContainer::from_bytes(&bytes)
    }
}

// ---- section codecs ----

fn encode_config(config: &PipelineConfig) -> Vec<u8> {
    let mut out = Vec::new();
    put_u64(&mut out, config.patch_size as u64);
    put_u64(&mut out, config.stride as u64);
    put_u64(&mut out, config.temporal_depth as u64);
    out.push(descriptor_code(config.descriptor));
    match config.labeling {
        Labeling::Codebook { k } => {
            out.push(0);
            put_u64(&mut out, k as u64);
        }
        Labeling::Codebookless => out.push(1),
    }
    put_u64(&mut out, config.stages as u64);
    put_f64(&mut out, config.pool_fraction);
    put_f64(&mut out, config.trim_mass);
    put_u64(&mut out, config.max_depth as u64);
    put_f64(&mut out, config.alpha);
    put_u64(&mut out, config.seed);
    put_u64(&mut out, config.kmeans_iters as u64);
    put_u64(&mut out, config.flow_window as u64);
    put_f64(&mut out, config.svm_lambda);
    put_u64(&mut out, config.svm_epochs as u64);
    put_u64(&mut out, config.max_train_patches as u64);
    out
}

fn decode_config(dec: &mut Dec) -> Result<PipelineConfig> {
    let patch_size = dec.usize_len()?;
    let stride = dec.usize_len()?;
    let temporal_depth = dec.usize_len()?;
    let descriptor = descriptor_from_code(dec.u8()?)?;
    let labeling = match dec.u8()? {
        0 => Labeling::Codebook { k: dec.usize_len()? },
        1 => Labeling::Codebookless,
        other => return Err(Error::Model(format!("unknown labeling code {other}"))),
    };
    Ok(PipelineConfig {
        patch_size,
        stride,
        temporal_depth,
        descriptor,
        labeling,
        stages: dec.usize_len()?,
        pool_fraction: dec.f64()?,
        trim_mass: dec.f64()?,
        max_depth: dec.usize_len()?,
        alpha: dec.f64()?,
        seed: dec.u64()?,
        kmeans_iters: dec.usize_len()?,
        flow_window: dec.usize_len()?,
        svm_lambda: dec.f64()?,
        svm_epochs: dec.usize_len()?,
        max_train_patches: dec.usize_len()?,
    })
}

fn encode_codebook(codebook: &Codebook) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(descriptor_code(codebook.kind));
    put_u64(&mut out, codebook.k() as u64);
    put_u64(&mut out, codebook.dim() as u64);
    for center in &codebook.centers {
        for &v in center {
            put_f64(&mut out, v);
        }
    }
    out
}

fn decode_codebook(dec: &mut Dec) -> Result<Codebook> {
    let kind = descriptor_from_code(dec.u8()?)?;
    let k = dec.usize_len()?;
    let dim = dec.usize_len()?;
    if k == 0 || dim == 0 {
        return Err(Error::Model("codebook with zero words or zero dimension".into()));
    }
    let mut centers = Vec::with_capacity(k);
    for _ in 0..k {
        let mut center = Vec::with_capacity(dim);
        for _ in 0..dim {
            let v = dec.f64()?;
            if !v.is_finite() {
                return Err(Error::Model("codebook center with non-finite entry".into()));
            }
            center.push(v);
        }
        centers.push(center);
    }
    Ok(Codebook { centers, kind })
}

fn encode_tree(out: &mut Vec<u8>, tree: &DecisionTree) {
    put_u64(out, tree.num_classes as u64);
    put_u64(out, tree.max_depth as u64);
    put_u64(out, tree.nodes.len() as u64);
    for node in &tree.nodes {
        match node {
            Node::Split { dim, threshold, left, right } => {
                out.push(0);
                put_u64(out, *dim as u64);
                put_f64(out, *threshold);
                put_u64(out, *left as u64);
                put_u64(out, *right as u64);
            }
            Node::Leaf { probs } => {
                out.push(1);
                for &p in probs {
                    put_f64(out, p);
                }
            }
        }
    }
}

fn decode_tree(dec: &mut Dec) -> Result<DecisionTree> {
    let num_classes = dec.usize_len()?;
    let max_depth = dec.usize_len()?;
    let node_count = dec.usize_len()?;
    let mut nodes = Vec::with_capacity(node_count.min(1 << 20));
    for _ in 0..node_count {
        let node = match dec.u8()? {
            0 => Node::Split {
                dim: dec.usize_len()?,
                threshold: dec.f64()?,
                left: dec.usize_len()?,
                right: dec.usize_len()?,
            },
            1 => {
                let mut probs = Vec::with_capacity(num_classes);
                for _ in 0..num_classes {
                    probs.push(dec.f64()?);
                }
                Node::Leaf { probs }
            }
            other => return Err(Error::Model(format!("unknown tree node kind {other}"))),
        };
        nodes.push(node);
    }
    let tree = DecisionTree { nodes, num_classes, max_depth };
    tree.validate()?;
    Ok(tree)
}

fn encode_ensemble(ensemble: &Ensemble) -> Vec<u8> {
    let mut out = Vec::new();
    put_u64(&mut out, ensemble.num_classes as u64);
    put_u64(&mut out, ensemble.dim as u64);
    put_f64(&mut out, ensemble.alpha);
    put_u64(&mut out, ensemble.weaks.len() as u64);
    for weak in &ensemble.weaks {
        put_u64(&mut out, weak.feature_subset.len() as u64);
        for &d in &weak.feature_subset {
            put_u64(&mut out, d as u64);
        }
        encode_tree(&mut out, &weak.tree);
    }
    out
}

fn decode_ensemble(dec: &mut Dec) -> Result<Ensemble> {
    let num_classes = dec.usize_len()?;
    let dim = dec.usize_len()?;
    let alpha = dec.f64()?;
    let weak_count = dec.usize_len()?;
    let mut weaks = Vec::with_capacity(weak_count.min(1 << 20));
    for _ in 0..weak_count {
        let subset_len = dec.usize_len()?;
        let mut feature_subset = Vec::with_capacity(subset_len.min(1 << 20));
        for _ in 0..subset_len {
            feature_subset.push(dec.usize_len()?);
        }
        let tree = decode_tree(dec)?;
        weaks.push(WeakClassifier { feature_subset, tree });
    }
    Ok(Ensemble { weaks, num_classes, dim, stopping: Vec::new(), alpha })
}

fn encode_stopping(stopping: &[DecisionTree]) -> Vec<u8> {
    let mut out = Vec::new();
    put_u64(&mut out, stopping.len() as u64);
    for tree in stopping {
        encode_tree(&mut out, tree);
    }
    out
}

fn decode_stopping(dec: &mut Dec) -> Result<Vec<DecisionTree>> {
    let count = dec.usize_len()?;
    let mut trees = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        trees.push(decode_tree(dec)?);
    }
    Ok(trees)
}

fn encode_linear(linear: &LinearModel) -> Vec<u8> {
    let mut out = Vec::new();
    put_u64(&mut out, linear.num_classes() as u64);
    put_u64(&mut out, linear.dim() as u64);
    put_f64(&mut out, linear.config.lambda);
    put_u64(&mut out, linear.config.epochs as u64);
    put_u64(&mut out, linear.config.seed);
    for weights in &linear.weights {
        for &w in weights {
            put_f64(&mut out, w);
        }
    }
    for &b in &linear.biases {
        put_f64(&mut out, b);
    }
    out
}

fn decode_linear(dec: &mut Dec) -> Result<LinearModel> {
    let num_classes = dec.usize_len()?;
    let dim = dec.usize_len()?;
    let config = SvmConfig { lambda: dec.f64()?, epochs: dec.usize_len()?, seed: dec.u64()? };
    let mut weights = Vec::with_capacity(num_classes.min(1 << 20));
    for _ in 0..num_classes {
        let mut row = Vec::with_capacity(dim);
        for _ in 0..dim {
            row.push(dec.f64()?);
        }
        weights.push(row);
    }
    let mut biases = Vec::with_capacity(num_classes.min(1 << 20));
    for _ in 0..num_classes {
        biases.push(dec.f64()?);
    }
    Ok(LinearModel { weights, biases, config })
}

fn descriptor_code(kind: DescriptorKind) -> u8 {
    match kind {
        DescriptorKind::Hog => 0,
        DescriptorKind::Hof => 1,
        DescriptorKind::Hof3d => 2,
    }
}

fn descriptor_from_code(code: u8) -> Result<DescriptorKind> {
    match code {
        0 => Ok(DescriptorKind::Hog),
        1 => Ok(DescriptorKind::Hof),
        2 => Ok(DescriptorKind::Hof3d),
        other => Err(Error::Model(format!("unknown descriptor code {other}"))),
    }
}

// ---- primitive little-endian codecs ----

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Dec<'a> {
    fn new(buf: &'a [u8]) -> Dec<'a> {
        Dec { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Model("model data truncated".into()));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// u64 narrowed to usize; lengths and indices are stored wide.
    fn usize_len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Model(format!("length {v} overflows this platform")))
    }

    fn finish(&self, tag: u32) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Model(format!("trailing bytes in section {tag}")));
        }
        Ok(())
    }
}

/// CRC-32 (IEEE 802.3, reflected, polynomial 0xEDB88320).
fn crc32(bytes: &[u8]) -> u32 {
    static TABLE: [u32; 256] = crc32_table();
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        let idx = ((crc ^ b as u32) & 0xFF) as usize;
        crc = (crc >> 8) ^ TABLE[idx];
    }
    !crc
}

const fn crc32_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u32;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}
