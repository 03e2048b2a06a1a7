//! Synthetic labeled image corpus: texture-family naturals, the two anomaly
//! manipulations (block permutation and random strokes), and split
//! construction for the one-vs-all and image-alteration setups.

mod corrupt;
pub mod io;
mod splits;

pub use corrupt::{apply_block_permutation, block_permute, corrupt_image, draw_strokes};
pub use splits::{build_splits, Splits};

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;

pub type CorpusResult<T> = Result<T, CorpusError>;

#[derive(Debug)]
pub enum CorpusError {
    InvalidSpec(String),
    /// Block grid does not divide the image dims, or N < 2.
    BadBlockGrid { n: usize, height: usize, width: usize },
    EmptyRange(String),
    /// Requested split fractions cannot be satisfied by the corpus.
    Infeasible(String),
    Io { path: String, source: std::io::Error },
    Format { path: String, detail: String },
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidSpec(msg) => write!(f, "invalid corpus spec: {msg}"),
            Self::BadBlockGrid { n, height, width } => {
                write!(f, "block grid {n} invalid for {height}x{width} image")
            }
            Self::EmptyRange(msg) => write!(f, "empty range: {msg}"),
            Self::Infeasible(msg) => write!(f, "split infeasible: {msg}"),
            Self::Io { path, source } => write!(f, "io error on {path}: {source}"),
            Self::Format { path, detail } => write!(f, "bad file {path}: {detail}"),
        }
    }
}

impl std::error::Error for CorpusError {}

/// Labeled image set with per-image corruption provenance. Pixels are
/// row-major within channel, channels within image, all in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageCorpus {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f32>,
    pub class_labels: Vec<i32>,
    pub anomaly_flags: Vec<bool>,
    /// Empty string for naturals; a short corruption record otherwise.
    pub provenance: Vec<String>,
}

impl ImageCorpus {
    pub fn count(&self) -> usize {
        self.class_labels.len()
    }

    pub fn pixels_per_image(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn image(&self, idx: usize) -> &[f32] {
        let n = self.pixels_per_image();
        &self.pixels[idx * n..(idx + 1) * n]
    }

    /// Flatten one image to f64 features for the encoder.
    pub fn image_features(&self, idx: usize) -> Vec<f64> {
        self.image(idx).iter().map(|&v| v as f64).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.pixels_per_image()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionKind {
    BlockPerm,
    Strokes,
}

/// Parameters of one anomaly manipulation.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    /// Grid side N for block permutation.
    pub block_grid: usize,
    /// Stroke thickness M in pixels.
    pub stroke_thickness: usize,
    pub stroke_count: (usize, usize),
    /// Stroke length range as fractions of the image diagonal.
    pub stroke_len: (f64, f64),
}

impl CorruptionSpec {
    pub fn block_perm(n: usize) -> Self {
        Self {
            kind: CorruptionKind::BlockPerm,
            block_grid: n,
            stroke_thickness: 1,
            stroke_count: (1, 3),
            stroke_len: (0.2, 0.5),
        }
    }

    pub fn strokes(thickness: usize, count: (usize, usize), len: (f64, f64)) -> Self {
        Self {
            kind: CorruptionKind::Strokes,
            block_grid: 2,
            stroke_thickness: thickness,
            stroke_count: count,
            stroke_len: len,
        }
    }

    /// Named desk-scale presets mirroring the N in {2, 8} and small/large M
    /// hierarchy at 32x32.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "bp2" => Some(Self::block_perm(2)),
            "bp8" => Some(Self::block_perm(8)),
            "st_small" => Some(Self::strokes(1, (1, 3), (0.2, 0.5))),
            "st_large" => Some(Self::strokes(3, (1, 3), (0.2, 0.5))),
            _ => None,
        }
    }

    pub fn validate(&self, height: usize, width: usize) -> CorpusResult<()> {
        match self.kind {
            CorruptionKind::BlockPerm => {
                let n = self.block_grid;
                if n < 2 || height % n != 0 || width % n != 0 {
                    return Err(CorpusError::BadBlockGrid { n, height, width });
                }
            }
            CorruptionKind::Strokes => {
                if self.stroke_thickness == 0 {
                    return Err(CorpusError::InvalidSpec("stroke thickness must be >= 1".into()));
                }
                if self.stroke_count.0 == 0 || self.stroke_count.0 > self.stroke_count.1 {
                    return Err(CorpusError::EmptyRange(format!(
                        "stroke count {:?}",
                        self.stroke_count
                    )));
                }
                if self.stroke_len.0 <= 0.0 || self.stroke_len.0 > self.stroke_len.1 {
                    return Err(CorpusError::EmptyRange(format!(
                        "stroke length {:?}",
                        self.stroke_len
                    )));
                }
            }
        }
        Ok(())
    }

    /// Provenance record attached to a corrupted image.
    pub fn provenance(&self, source_idx: usize) -> String {
        match self.kind {
            CorruptionKind::BlockPerm => {
                format!("block_perm N={} src={}", self.block_grid, source_idx)
            }
            CorruptionKind::Strokes => format!(
                "strokes M={} count={}..{} len={}..{} src={}",
                self.stroke_thickness,
                self.stroke_count.0,
                self.stroke_count.1,
                self.stroke_len.0,
                self.stroke_len.1,
                source_idx
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetupKind {
    OneVsAll,
    Alteration,
}

impl SetupKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::OneVsAll => "one_vs_all",
            Self::Alteration => "alteration",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "one_vs_all" => Some(Self::OneVsAll),
            "alteration" => Some(Self::Alteration),
            _ => None,
        }
    }
}

/// How the corpus is carved into train/val/test.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub setup: SetupKind,
    pub normal_class: usize,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub semi_supervised: bool,
    pub labeled_anomaly_fraction: f64,
}

impl SplitSpec {
    pub fn validate(&self) -> CorpusResult<()> {
        let ok = |v: f64| v > 0.0 && v < 1.0;
        if !ok(self.train_fraction) || !ok(self.val_fraction) {
            return Err(CorpusError::InvalidSpec(
                "train/val fractions must lie in (0, 1)".into(),
            ));
        }
        if self.train_fraction + self.val_fraction >= 1.0 {
            return Err(CorpusError::InvalidSpec(
                "train + val fractions must leave room for test".into(),
            ));
        }
        if self.semi_supervised && !ok(self.labeled_anomaly_fraction) {
            return Err(CorpusError::InvalidSpec(
                "labeled anomaly fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) use crate::stream_rng;

const STROKE_STREAM_BASE: u64 = 1 << 40;

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = (h.rem_euclid(1.0)) * 6.0;
    let i = h.floor() as i64 % 6;
    let f = h - h.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// One parameterized texture family per class: class-specific base hue,
/// grating frequency and orientation, and blob count, with per-image jitter.
/// Classes separate in mean color and dominant frequency by construction.
pub fn generate_naturals(
    n_per_class: usize,
    n_classes: usize,
    height: usize,
    width: usize,
    channels: usize,
    seed: u64,
) -> CorpusResult<ImageCorpus> {
    if height < 8 || width < 8 {
        return Err(CorpusError::InvalidSpec(format!(
            "image dims must be at least 8, got {height}x{width}"
        )));
    }
    if n_per_class == 0 || n_classes == 0 {
        return Err(CorpusError::InvalidSpec("empty corpus requested".into()));
    }
    if channels != 1 && channels != 3 {
        return Err(CorpusError::InvalidSpec(format!(
            "channels must be 1 or 3, got {channels}"
        )));
    }
    let count = n_per_class * n_classes;
    let per_image = channels * height * width;
    let mut pixels = Vec::with_capacity(count * per_image);
    let mut class_labels = Vec::with_capacity(count);

    let grating_weight = [1.0, 0.8, 0.6];
    for class in 0..n_classes {
        let hue = class as f64 / n_classes as f64;
        let base_rgb = hsv_to_rgb(hue, 0.55, 0.65);
        let gray = if n_classes > 1 {
            0.2 + 0.6 * class as f64 / (n_classes - 1) as f64
        } else {
            0.5
        };
        let freq_base = 2.0 + 1.5 * class as f64;
        let angle_base = PI * class as f64 / n_classes as f64;
        let blob_count = 1 + class % 3;

        for img in 0..n_per_class {
            let index = (class * n_per_class + img) as u64;
            let mut rng = stream_rng(seed, index);
            let freq = freq_base + rng.gen_range(-0.15..0.15);
            let angle = angle_base + rng.gen_range(-0.08..0.08);
            let phase = rng.gen_range(0.0..2.0 * PI);
            let amp = 0.12 + rng.gen_range(-0.03..0.03);
            let blobs: Vec<(f64, f64, f64, f64)> = (0..blob_count)
                .map(|_| {
                    (
                        rng.gen_range(0.0..width as f64),
                        rng.gen_range(0.0..height as f64),
                        rng.gen_range(3.0..6.0),
                        rng.gen_range(-0.1..0.1),
                    )
                })
                .collect();
            let (sin_a, cos_a) = angle.sin_cos();
            for c in 0..channels {
                let base = if channels == 3 { base_rgb[c] } else { gray };
                let weight = grating_weight[c % 3];
                for y in 0..height {
                    for x in 0..width {
                        let proj = x as f64 * cos_a + y as f64 * sin_a;
                        let wave = amp * weight * (2.0 * PI * freq * proj / width as f64 + phase).sin();
                        let mut blob_sum = 0.0;
                        for &(bx, by, sigma, bamp) in &blobs {
                            let dx = x as f64 - bx;
                            let dy = y as f64 - by;
                            blob_sum += bamp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                        }
                        let noise = rng.gen_range(-0.02..0.02);
                        let v = (base + wave + blob_sum + noise).clamp(0.0, 1.0);
                        pixels.push(v as f32);
                    }
                }
            }
            class_labels.push(class as i32);
        }
    }
    Ok(ImageCorpus {
        channels,
        height,
        width,
        pixels,
        class_labels,
        anomaly_flags: vec![false; count],
        provenance: vec![String::new(); count],
    })
}

/// Append one corrupted counterpart per natural, flagged anomalous and
/// carrying provenance. Per-image RNG streams keep results independent of
/// evaluation order.
pub fn with_alteration_counterparts(
    mut corpus: ImageCorpus,
    corruption: &CorruptionSpec,
    seed: u64,
) -> CorpusResult<ImageCorpus> {
    corruption.validate(corpus.height, corpus.width)?;
    let naturals = corpus.count();
    let per_image = corpus.pixels_per_image();
    corpus.pixels.reserve(naturals * per_image);
    for idx in 0..naturals {
        let mut rng = stream_rng(seed, STROKE_STREAM_BASE + idx as u64);
        let src = corpus.pixels[idx * per_image..(idx + 1) * per_image].to_vec();
        let corrupted = corrupt_image(
            &src,
            corpus.channels,
            corpus.height,
            corpus.width,
            corruption,
            &mut rng,
        )?;
        corpus.pixels.extend_from_slice(&corrupted);
        corpus.class_labels.push(corpus.class_labels[idx]);
        corpus.anomaly_flags.push(true);
        corpus.provenance.push(corruption.provenance(idx));
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests;
