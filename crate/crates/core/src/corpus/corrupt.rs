//! The two anomaly manipulations: block permutation and random strokes.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{CorpusError, CorpusResult, CorruptionKind, CorruptionSpec};

/// Reorder the N x N grid of blocks by `perm`: output block j is input block
/// perm[j]. The permutation applies identically to every channel.
pub fn apply_block_permutation(
    image: &[f32],
    channels: usize,
    height: usize,
    width: usize,
    n: usize,
    perm: &[usize],
) -> Vec<f32> {
    let (bh, bw) = (height / n, width / n);
    let mut out = vec![0.0f32; image.len()];
    for c in 0..channels {
        let plane = c * height * width;
        for (dst, &src) in perm.iter().enumerate() {
            let (dst_bi, dst_bj) = (dst / n, dst % n);
            let (src_bi, src_bj) = (src / n, src % n);
            for row in 0..bh {
                let dst_base = plane + (dst_bi * bh + row) * width + dst_bj * bw;
                let src_base = plane + (src_bi * bh + row) * width + src_bj * bw;
                out[dst_base..dst_base + bw].copy_from_slice(&image[src_base..src_base + bw]);
            }
        }
    }
    out
}

/// Shuffle the image's N x N blocks by a uniformly drawn non-identity
/// permutation. The pixel multiset is preserved exactly.
pub fn block_permute(
    image: &[f32],
    channels: usize,
    height: usize,
    width: usize,
    n: usize,
    rng: &mut impl Rng,
) -> CorpusResult<Vec<f32>> {
    if n < 2 || height % n != 0 || width % n != 0 {
        return Err(CorpusError::BadBlockGrid { n, height, width });
    }
    let mut perm: Vec<usize> = (0..n * n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().any(|(i, &p)| i != p) {
            break;
        }
    }
    Ok(apply_block_permutation(image, channels, height, width, n, &perm))
}

/// Overdraw the image with uniformly drawn polyline strokes, all in one
/// random color. Each stroke has 2-4 waypoints; its arc length is truncated
/// at a target drawn from the spec's length range (as a fraction of the
/// diagonal). Thickness M marks pixels within Euclidean distance floor(M/2)
/// of the walked line, clipped to bounds.
pub fn draw_strokes(
    image: &[f32],
    channels: usize,
    height: usize,
    width: usize,
    spec: &CorruptionSpec,
    rng: &mut impl Rng,
) -> CorpusResult<Vec<f32>> {
    if spec.kind != CorruptionKind::Strokes {
        return Err(CorpusError::InvalidSpec("draw_strokes needs a strokes spec".into()));
    }
    spec.validate(height, width)?;
    let mut out = image.to_vec();
    let color: Vec<f32> = (0..channels).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let count = rng.gen_range(spec.stroke_count.0..=spec.stroke_count.1);
    let diag = ((height * height + width * width) as f64).sqrt();
    let half = (spec.stroke_thickness / 2) as i64;

    for _ in 0..count {
        let n_pts = rng.gen_range(2..=4usize);
        let pts: Vec<(f64, f64)> = (0..n_pts)
            .map(|_| {
                (
                    rng.gen_range(0.0..width as f64 - 1.0),
                    rng.gen_range(0.0..height as f64 - 1.0),
                )
            })
            .collect();
        let target_len = rng.gen_range(spec.stroke_len.0..=spec.stroke_len.1) * diag;
        let mut budget = target_len;
        for seg in pts.windows(2) {
            if budget <= 0.0 {
                break;
            }
            let (x0, y0) = seg[0];
            let (mut x1, mut y1) = seg[1];
            let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
            if len > budget && len > 0.0 {
                let t = budget / len;
                x1 = x0 + (x1 - x0) * t;
                y1 = y0 + (y1 - y0) * t;
            }
            budget -= len;
            stamp_segment(&mut out, channels, height, width, (x0, y0), (x1, y1), half, &color);
        }
    }
    Ok(out)
}

/// Walk the segment one pixel at a time along its major axis (DDA), stamping
/// the radius-`half` disc around each rounded sample. Writes are clipped to
/// the image bounds.
fn stamp_segment(
    out: &mut [f32],
    channels: usize,
    height: usize,
    width: usize,
    a: (f64, f64),
    b: (f64, f64),
    half: i64,
    color: &[f32],
) {
    let span = (b.0 - a.0).abs().max((b.1 - a.1).abs());
    let steps = span.ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let px = (a.0 + (b.0 - a.0) * t).round() as i64;
        let py = (a.1 + (b.1 - a.1) * t).round() as i64;
        for dy in -half..=half {
            for dx in -half..=half {
                if dx * dx + dy * dy > half * half {
                    continue;
                }
                let (x, y) = (px + dx, py + dy);
                if x < 0 || y < 0 || x >= width as i64 || y >= height as i64 {
                    continue;
                }
                for c in 0..channels {
                    out[c * height * width + y as usize * width + x as usize] = color[c];
                }
            }
        }
    }
}

/// Apply the spec's manipulation to one image.
pub fn corrupt_image(
    image: &[f32],
    channels: usize,
    height: usize,
    width: usize,
    spec: &CorruptionSpec,
    rng: &mut impl Rng,
) -> CorpusResult<Vec<f32>> {
    match spec.kind {
        CorruptionKind::BlockPerm => {
            block_permute(image, channels, height, width, spec.block_grid, rng)
        }
        CorruptionKind::Strokes => draw_strokes(image, channels, height, width, spec, rng),
    }
}
