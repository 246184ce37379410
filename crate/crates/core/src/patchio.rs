//! Dataset ingestion: manifests, PGM frames, dense patch grids and the
//! L1-normalized samples that feed the boosting pipeline.
//!
//! A dataset is a plain-text manifest listing one video per line
//! (`video_id<TAB>frame_dir<TAB>class_name<TAB>train|test`); each frame
//! directory holds binary PGM (P5) files whose lexicographic name order is
//! the temporal order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// Which side of the train/test split a video belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn parse(token: &str) -> Result<Split> {
        match token {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Manifest(format!("unknown split token `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One manifest line: a video with its frame directory and class.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub video_id: String,
    pub frame_dir: PathBuf,
    pub class_name: String,
    /// Index into the manifest's label map.
    pub label: usize,
    pub split: Split,
}

/// A parsed and validated dataset manifest.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Sorted distinct class names mapped to `0..C-1`.
    pub label_map: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.label_map.len()
    }

    pub fn entries_for(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

/// Parse a manifest file. Relative frame directories are resolved against
/// the manifest's parent directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, base)
}

/// Parse manifest text; `base` anchors relative frame directories.
pub fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest> {
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Manifest(format!(
                "line {}: expected 4 tab-separated fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let split = Split::parse(fields[3].trim())?;
        raw.push((
            fields[0].trim().to_string(),
            fields[1].trim().to_string(),
            fields[2].trim().to_string(),
            split,
        ));
    }
    if raw.is_empty() {
        return Err(Error::Manifest("empty manifest".into()));
    }

    let mut seen = BTreeSet::new();
    for (id, _, _, _) in &raw {
        if !seen.insert(id.clone()) {
            return Err(Error::Manifest(format!("duplicate video id `{id}`")));
        }
    }

    let classes: BTreeSet<String> = raw.iter().map(|(_, _, c, _)| c.clone()).collect();
    let label_map: BTreeMap<String, usize> =
        classes.into_iter().enumerate().map(|(i, c)| (c, i)).collect();

    let entries = raw
        .into_iter()
        .map(|(video_id, dir, class_name, split)| {
            let dir_path = PathBuf::from(&dir);
            let frame_dir = if dir_path.is_absolute() { dir_path } else { base.join(dir_path) };
            let label = label_map[&class_name];
            ManifestEntry { video_id, frame_dir, class_name, label, split }
        })
        .collect();

    Ok(DatasetManifest { entries, label_map })
}

/// A single grayscale frame, row-major, intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Frame> {
        if width * height != pixels.len() {
            return Err(Error::invalid(format!(
                "frame {}x{} needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        Ok(Frame { width, height, pixels })
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Load a binary PGM (P5, maxval 255) frame.
pub fn load_frame(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

/// Parse P5 bytes. Header comments (`#` to end of line) are accepted.
pub fn parse_pgm(bytes: &[u8]) -> Result<Frame> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let magic = bytes.get(..2).map(|m| String::from_utf8_lossy(m).into_owned());
        return Err(Error::Pgm(format!(
            "unsupported format: expected P5 magic, got {:?}",
            magic.unwrap_or_default()
        )));
    }
    let mut pos = 2;
    let width = read_header_int(bytes, &mut pos)?;
    let height = read_header_int(bytes, &mut pos)?;
    let maxval = read_header_int(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::Pgm(format!("unsupported maxval {maxval}, expected 255")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Pgm("missing payload separator".into())),
    }
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(Error::Pgm(format!(
            "truncated payload: expected {} bytes, got {}",
            n,
            bytes.len() - pos
        )));
    }
    Frame::new(width, height, bytes[pos..pos + n].to_vec())
}

fn read_header_int(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    // Skip whitespace and comments.
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(b) = bytes.get(*pos) {
                    *pos += 1;
                    if *b == b'\n' {
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while matches!(bytes.get(*pos), Some(b) if b.is_ascii_digit()) {
        *pos += 1;
    }
    if *pos == start {
        return Err(Error::Pgm("malformed header".into()));
    }
    let text = std::str::from_utf8(&bytes[start..*pos]).expect("digits are ascii");
    text.parse::<usize>().map_err(|_| Error::Pgm("header value out of range".into()))
}

/// Write a frame as binary PGM.
pub fn write_pgm(frame: &Frame, path: &Path) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Load all `.pgm` files in a directory, lexicographic name order.
pub fn load_video_frames(dir: &Path) -> Result<Vec<Frame>> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |ext| ext == "pgm"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::invalid(format!("no .pgm frames in {}", dir.display())));
    }
    names.iter().map(|p| load_frame(p)).collect()
}

/// A raw (unnormalized) patch cut from one or more consecutive frames.
///
/// Spatiotemporal patches concatenate the same spatial window frame-major:
/// all of frame `t`, then frame `t+1`, and so on.
#[derive(Debug, Clone)]
pub struct RawPatch {
    pub values: Vec<f64>,
    /// First frame of the temporal stack.
    pub frame: usize,
    pub x: usize,
    pub y: usize,
}

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchOrigin {
    pub video_id: String,
    pub frame: usize,
    pub x: usize,
    pub y: usize,
}

/// An L1-normalized boosting sample of dimension `patch_size^2 * depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub values: Vec<f64>,
    pub origin: PatchOrigin,
}

impl Sample {
    pub fn from_patch(patch: &RawPatch, video_id: &str) -> Result<Sample> {
        Ok(Sample {
            values: l1_normalize(&patch.values)?,
            origin: PatchOrigin {
                video_id: video_id.to_string(),
                frame: patch.frame,
                x: patch.x,
                y: patch.y,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Extract the dense patch grid: top-left corners at multiples of `stride`,
/// windows of `temporal_depth` consecutive frames stacked frame-major.
pub fn extract_patch_grid(
    frames: &[Frame],
    patch_size: usize,
    stride: usize,
    temporal_depth: usize,
) -> Result<Vec<RawPatch>> {
    if frames.is_empty() {
        return Err(Error::invalid("no frames"));
    }
    if patch_size == 0 || stride == 0 || temporal_depth == 0 {
        return Err(Error::invalid("patch_size, stride and temporal_depth must be >= 1"));
    }
    let (w, h) = (frames[0].width, frames[0].height);
    for f in frames {
        if f.width != w || f.height != h {
            return Err(Error::invalid(format!(
                "mismatched frame sizes: {}x{} vs {}x{}",
                f.width, f.height, w, h
            )));
        }
    }
    if w < patch_size || h < patch_size {
        return Err(Error::invalid(format!(
            "frame {w}x{h} smaller than patch size {patch_size}"
        )));
    }
    if frames.len() < temporal_depth {
        return Err(Error::invalid(format!(
            "need at least {} frames for temporal depth, got {}",
            temporal_depth,
            frames.len()
        )));
    }

    let mut patches = Vec::new();
    for t in 0..=frames.len() - temporal_depth {
        let mut y = 0;
        while y + patch_size <= h {
            let mut x = 0;
            while x + patch_size <= w {
                let mut values = Vec::with_capacity(patch_size * patch_size * temporal_depth);
                for frame in &frames[t..t + temporal_depth] {
                    for yy in y..y + patch_size {
                        let row = yy * w;
                        values.extend(
                            frame.pixels[row + x..row + x + patch_size]
                                .iter()
                                .map(|&p| f64::from(p)),
                        );
                    }
                }
                patches.push(RawPatch { values, frame: t, x, y });
                x += stride;
            }
            y += stride;
        }
    }
    Ok(patches)
}

/// Number of patches `extract_patch_grid` produces, in closed form.
pub fn patch_grid_count(
    width: usize,
    height: usize,
    patch_size: usize,
    stride: usize,
    num_frames: usize,
    temporal_depth: usize,
) -> usize {
    if width < patch_size || height < patch_size || num_frames < temporal_depth {
        return 0;
    }
    let nx = (width - patch_size) / stride + 1;
    let ny = (height - patch_size) / stride + 1;
    nx * ny * (num_frames - temporal_depth + 1)
}

/// L1-normalize nonnegative values to sum 1. An all-zero patch maps to the
/// uniform vector so black frames do not abort a pipeline.
pub fn l1_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("empty patch"));
    }
    if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("patch values must be finite and nonnegative"));
    }
    let sum: f64 = values.iter().sum();
    if sum == 0.0 {
        let d = values.len() as f64;
        return Ok(vec![1.0 / d; values.len()]);
    }
    Ok(values.iter().map(|v| v / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn manifest_text() -> &'static str {
        "# comment line\n\
         vid_a\tframes/a\tclassA\ttrain\n\
         vid_b\tframes/b\tclassB\ttrain\n\
         vid_c\tframes/c\tclassA\ttest\n"
    }

    #[test]
    fn manifest_parses_and_builds_label_map() {
        let m = parse_manifest(manifest_text(), Path::new("/data")).unwrap();
        assert_eq!(m.entries.len(), 3);
        assert_eq!(m.label_map["classA"], 0);
        assert_eq!(m.label_map["classB"], 1);
        assert_eq!(m.entries[0].frame_dir, Path::new("/data/frames/a"));
        assert_eq!(m.entries[2].split, Split::Test);
        assert_eq!(m.entries_for(Split::Train).count(), 2);
    }

    #[test]
    fn manifest_rejects_duplicate_video_id() {
        let text = "v1\td\tc\ttrain\nv1\td2\tc\ttest\n";
        let err = parse_manifest(text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("duplicate video id"));
    }

    #[test]
    fn manifest_rejects_unknown_split() {
        let text = "v1\td\tc\tvalidation\n";
        let err = parse_manifest(text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("unknown split token"));
    }

    #[test]
    fn manifest_rejects_empty() {
        let err = parse_manifest("# only comments\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("empty manifest"));
    }

    fn pgm_bytes(w: usize, h: usize, fill: u8) -> Vec<u8> {
        let mut b = format!("P5\n{w} {h}\n255\n").into_bytes();
        b.extend(std::iter::repeat(fill).take(w * h));
        b
    }

    #[test]
    fn pgm_constant_image_round_trips() {
        let frame = parse_pgm(&pgm_bytes(4, 4, 128)).unwrap();
        assert_eq!(frame.width, 4);
        assert_eq!(frame.height, 4);
        assert!(frame.pixels.iter().all(|&p| p == 128));
    }

    #[test]
    fn pgm_rejects_color_magic() {
        let mut bytes = pgm_bytes(4, 4, 0);
        bytes[1] = b'6';
        let err = parse_pgm(&bytes).unwrap_err();
        assert!(err.to_string().contains("unsupported format"));
    }

    #[test]
    fn pgm_rejects_truncated_payload() {
        let mut bytes = pgm_bytes(4, 4, 7);
        bytes.truncate(bytes.len() - 1); // 15 of 16 payload bytes
        let err = parse_pgm(&bytes).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn pgm_rejects_wrong_maxval() {
        let mut b = format!("P5\n2 2\n65535\n").into_bytes();
        b.extend([0u8; 8]);
        let err = parse_pgm(&b).unwrap_err();
        assert!(err.to_string().contains("maxval"));
    }

    #[test]
    fn pgm_write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let frame = Frame::new(3, 2, vec![0, 50, 100, 150, 200, 250]).unwrap();
        write_pgm(&frame, &path).unwrap();
        assert_eq!(load_frame(&path).unwrap(), frame);
    }

    fn const_frame(w: usize, h: usize, v: u8) -> Frame {
        Frame::new(w, h, vec![v; w * h]).unwrap()
    }

    #[test]
    fn grid_exact_fit_yields_single_patch() {
        let patches = extract_patch_grid(&[const_frame(24, 24, 9)], 24, 24, 1).unwrap();
        assert_eq!(patches.len(), 1);
        assert_eq!(patches[0].values.len(), 576);
        assert_eq!((patches[0].x, patches[0].y, patches[0].frame), (0, 0, 0));
    }

    #[test]
    fn grid_two_columns() {
        let patches = extract_patch_grid(&[const_frame(48, 24, 9)], 24, 24, 1).unwrap();
        assert_eq!(patches.len(), 2);
        assert_eq!((patches[0].x, patches[1].x), (0, 24));
    }

    #[test]
    fn grid_spatiotemporal_stack() {
        let frames: Vec<Frame> = (0..9).map(|i| const_frame(24, 24, i as u8)).collect();
        let patches = extract_patch_grid(&frames, 24, 24, 9).unwrap();
        assert_eq!(patches.len(), 1);
        assert_eq!(patches[0].values.len(), 5184);
        // Frame-major layout: first 576 values from frame 0, next from frame 1.
        assert_eq!(patches[0].values[0], 0.0);
        assert_eq!(patches[0].values[576], 1.0);
        assert_eq!(patches[0].values[8 * 576], 8.0);
    }

    #[test]
    fn grid_rejects_small_frames_and_mismatches() {
        let err = extract_patch_grid(&[const_frame(16, 24, 0)], 24, 24, 1).unwrap_err();
        assert!(err.to_string().contains("smaller than patch"));
        let err =
            extract_patch_grid(&[const_frame(24, 24, 0), const_frame(25, 24, 0)], 24, 24, 1)
                .unwrap_err();
        assert!(err.to_string().contains("mismatched"));
    }

    /// Independent oracle: enumerate every valid (t, y, x) position.
    fn enumerate_grid(w: usize, h: usize, p: usize, s: usize, t: usize, depth: usize) -> usize {
        let mut count = 0;
        if t < depth {
            return 0;
        }
        for _start in 0..=(t - depth) {
            let mut y = 0;
            while y + p <= h {
                let mut x = 0;
                while x + p <= w {
                    count += 1;
                    x += s;
                }
                y += s;
            }
        }
        count
    }

    proptest! {
        #[test]
        fn grid_count_matches_enumeration(
            w in 4usize..40, h in 4usize..40, p in 1usize..12,
            s in 1usize..8, t in 1usize..6, depth in 1usize..4,
        ) {
            prop_assume!(w >= p && h >= p && t >= depth);
            let frames: Vec<Frame> = (0..t).map(|_| const_frame(w, h, 1)).collect();
            let patches = extract_patch_grid(&frames, p, s, depth).unwrap();
            let expected = enumerate_grid(w, h, p, s, t, depth);
            prop_assert_eq!(patches.len(), expected);
            prop_assert_eq!(patches.len(), patch_grid_count(w, h, p, s, t, depth));
        }

        #[test]
        fn normalization_is_scale_invariant(
            values in proptest::collection::vec(0.0f64..1000.0, 1..64),
            scale in 0.001f64..1000.0,
        ) {
            prop_assume!(values.iter().sum::<f64>() > 0.0);
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let a = l1_normalize(&values).unwrap();
            let b = l1_normalize(&scaled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn normalize_simple_ratio() {
        assert_eq!(l1_normalize(&[1.0, 3.0]).unwrap(), vec![0.25, 0.75]);
    }

    #[test]
    fn normalize_constant_patch() {
        let out = l1_normalize(&vec![128.0; 576]).unwrap();
        assert!(out.iter().all(|v| (v - 1.0 / 576.0).abs() < 1e-15));
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalize_all_zero_is_uniform() {
        assert_eq!(l1_normalize(&[0.0; 4]).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn normalize_rejects_empty() {
        assert!(l1_normalize(&[]).is_err());
    }

    #[test]
    fn extraction_is_deterministic() {
        let frames: Vec<Frame> = (0..3)
            .map(|t| {
                Frame::new(8, 8, (0..64).map(|i| ((i * 7 + t * 13) % 256) as u8).collect())
                    .unwrap()
            })
            .collect();
        let a = extract_patch_grid(&frames, 4, 2, 2).unwrap();
        let b = extract_patch_grid(&frames, 4, 2, 2).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.values, q.values);
            assert_eq!((p.frame, p.x, p.y), (q.frame, q.x, q.y));
        }
    }

    #[test]
    fn samples_sum_to_one_and_are_nonnegative() {
        let frames: Vec<Frame> = (0..2)
            .map(|t| {
                Frame::new(12, 12, (0..144).map(|i| ((i * 5 + t) % 251) as u8).collect()).unwrap()
            })
            .collect();
        for patch in extract_patch_grid(&frames, 6, 3, 2).unwrap() {
            let s = Sample::from_patch(&patch, "v").unwrap();
            let sum: f64 = s.values.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
            assert!(s.values.iter().all(|v| *v >= 0.0));
        }
    }
}
