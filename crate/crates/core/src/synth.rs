//! Synthetic video generator: oriented sinusoid gratings drifting at
//! class-specific velocities. Class c gets orientation π·c/C and its own
//! drift speed, so both appearance and motion separate the classes; each
//! video jitters phase, wavelength, orientation, and amplitude, and adds
//! Gaussian pixel noise.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::patchio::{write_pgm, Frame, Split};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub num_classes: usize,
    pub train_videos_per_class: usize,
    pub test_videos_per_class: usize,
    pub frames_per_video: usize,
    pub width: usize,
    pub height: usize,
    /// Std-dev of additive Gaussian pixel noise, in gray levels.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            num_classes: 5,
            train_videos_per_class: 8,
            test_videos_per_class: 4,
            frames_per_video: 12,
            width: 72,
            height: 48,
            noise: 4.0,
            seed: 0,
        }
    }
}

/// One video's grating: `value(x, y, t) = level + A·sin(2π(x·cosθ + y·sinθ)/λ + φ + ωt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grating {
    pub theta: f64,
    pub wavelength: f64,
    pub phase: f64,
    pub amplitude: f64,
    /// Phase advance per frame; drift velocity along the normal is ωλ/2π.
    pub omega: f64,
    pub level: f64,
}

impl Grating {
    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        let along = x * self.theta.cos() + y * self.theta.sin();
        let phase = 2.0 * std::f64::consts::PI * along / self.wavelength + self.phase
            + self.omega * t;
        self.level + self.amplitude * phase.sin()
    }
}

/// Class orientation: evenly spaced over [0, π).
pub fn class_orientation(class: usize, num_classes: usize) -> f64 {
    std::f64::consts::PI * class as f64 / num_classes as f64
}

/// Class drift speed in pixels per frame along the grating normal.
pub fn class_drift_speed(class: usize) -> f64 {
    0.5 + 0.5 * class as f64
}

const BASE_WAVELENGTH: f64 = 12.0;
const BASE_AMPLITUDE: f64 = 100.0;
const GRAY_LEVEL: f64 = 128.0;
const ORIENTATION_JITTER: f64 = 0.03;

fn sample_grating(class: usize, num_classes: usize, rng: &mut ChaCha8Rng) -> Grating {
    let wavelength = BASE_WAVELENGTH * (0.9 + 0.2 * rng.gen::<f64>());
    let theta = class_orientation(class, num_classes)
        + ORIENTATION_JITTER * (2.0 * rng.gen::<f64>() - 1.0);
    let phase = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
    let amplitude = BASE_AMPLITUDE * (0.9 + 0.2 * rng.gen::<f64>());
    let omega = 2.0 * std::f64::consts::PI * class_drift_speed(class) / wavelength;
    Grating { theta, wavelength, phase, amplitude, omega, level: GRAY_LEVEL }
}

/// Marsaglia polar method; one draw per call keeps the stream simple.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u = 2.0 * rng.gen::<f64>() - 1.0;
        let v = 2.0 * rng.gen::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

pub fn render_frame(
    grating: &Grating,
    width: usize,
    height: usize,
    t: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Frame {
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let mut v = grating.value(x as f64, y as f64, t as f64);
            if noise > 0.0 {
                v += noise * gaussian(rng);
            }
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    Frame::new(width, height, pixels).expect("rendered frame dimensions are consistent")
}

fn validate(params: &SynthParams) -> Result<()> {
    if params.num_classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    if params.train_videos_per_class == 0 || params.test_videos_per_class == 0 {
        return Err(Error::invalid("need at least one train and one test video per class"));
    }
    if params.frames_per_video == 0 {
        return Err(Error::invalid("need at least one frame per video"));
    }
    if params.width < 8 || params.height < 8 {
        return Err(Error::invalid("frames must be at least 8x8"));
    }
    if !(params.noise >= 0.0 && params.noise.is_finite()) {
        return Err(Error::invalid("noise must be finite and non-negative"));
    }
    Ok(())
}

/// Generate the dataset under `root`: PGM frames in `videos/<video_id>/` and
/// a manifest at `root/manifest.tsv`. Returns the manifest path.
///
/// Fully deterministic in `params.seed`: videos are generated class-major,
/// train split before test, and every random draw comes from one stream.
pub fn generate_dataset(root: &Path, params: &SynthParams) -> Result<PathBuf> {
    validate(params)?;
    let videos_dir = root.join("videos");
    std::fs::create_dir_all(&videos_dir).map_err(|e| Error::io(&videos_dir, e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut manifest = String::from("# video_id\tframe_dir\tclass\tsplit\n");
    for class in 0..params.num_classes {
        let class_name = format!("grating{class:02}");
        let counts = [
            (Split::Train, params.train_videos_per_class),
            (Split::Test, params.test_videos_per_class),
        ];
        for (split, count) in counts {
            for index in 0..count {
                let video_id = format!("{class_name}_{}_{index:02}", split.as_str());
                let grating = sample_grating(class, params.num_classes, &mut rng);
                let dir = videos_dir.join(&video_id);
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                for t in 0..params.frames_per_video {
                    let frame =
                        render_frame(&grating, params.width, params.height, t, params.noise, &mut rng);
                    let path = dir.join(format!("frame_{t:04}.pgm"));
                    write_pgm(&frame, &path)?;
                }
                manifest.push_str(&format!(
                    "{video_id}\tvideos/{video_id}\t{class_name}\t{}\n",
                    split.as_str()
                ));
            }
        }
    }

    let manifest_path = root.join("manifest.tsv");
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}
