//! Dataset wire formats: the TDS1 container, a split-index CSV sidecar, and
//! PPM export for eyeballing individual images.
//!
//! TDS1 layout, all integers little-endian:
//!   magic "TDS1", u32 count, u32 C, u32 H, u32 W,
//!   f32 pixels [count*C*H*W], u8 anomaly flags [count],
//!   i32 class labels [count], then per image u32 length + UTF-8 provenance.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CorpusError, CorpusResult, ImageCorpus, Splits};
use crate::objective::RowLabel;

const MAGIC: &[u8; 4] = b"TDS1";

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, detail: impl Into<String>) -> CorpusError {
    CorpusError::Format {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

pub fn write_corpus(corpus: &ImageCorpus, path: &Path) -> CorpusResult<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));
    write(MAGIC)?;
    write(&(corpus.count() as u32).to_le_bytes())?;
    write(&(corpus.channels as u32).to_le_bytes())?;
    write(&(corpus.height as u32).to_le_bytes())?;
    write(&(corpus.width as u32).to_le_bytes())?;
    for &px in &corpus.pixels {
        write(&px.to_le_bytes())?;
    }
    for &flag in &corpus.anomaly_flags {
        write(&[u8::from(flag)])?;
    }
    for &label in &corpus.class_labels {
        write(&label.to_le_bytes())?;
    }
    for prov in &corpus.provenance {
        write(&(prov.len() as u32).to_le_bytes())?;
        write(prov.as_bytes())?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_corpus(path: &Path) -> CorpusResult<ImageCorpus> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if &magic != MAGIC {
        return Err(format_err(path, "bad magic, expected TDS1"));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut BufReader<File>| -> CorpusResult<u32> {
        r.read_exact(&mut u32buf).map_err(|e| io_err(path, e))?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let count = read_u32(&mut r)? as usize;
    let channels = read_u32(&mut r)? as usize;
    let height = read_u32(&mut r)? as usize;
    let width = read_u32(&mut r)? as usize;
    if count == 0 || channels == 0 || height == 0 || width == 0 {
        return Err(format_err(path, "zero dimension in header"));
    }

    let pixel_count = count * channels * height * width;
    let mut raw = vec![0u8; pixel_count * 4];
    r.read_exact(&mut raw).map_err(|e| io_err(path, e))?;
    let pixels: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let mut flag_bytes = vec![0u8; count];
    r.read_exact(&mut flag_bytes).map_err(|e| io_err(path, e))?;
    let anomaly_flags: Vec<bool> = flag_bytes.iter().map(|&b| b != 0).collect();

    let mut label_bytes = vec![0u8; count * 4];
    r.read_exact(&mut label_bytes).map_err(|e| io_err(path, e))?;
    let class_labels: Vec<i32> = label_bytes
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let mut provenance = Vec::with_capacity(count);
    for _ in 0..count {
        let mut len_buf = [0u8; 4];
        r.read_exact(&mut len_buf).map_err(|e| io_err(path, e))?;
        let len = u32::from_le_bytes(len_buf) as usize;
        let mut s = vec![0u8; len];
        r.read_exact(&mut s).map_err(|e| io_err(path, e))?;
        provenance
            .push(String::from_utf8(s).map_err(|_| format_err(path, "provenance not UTF-8"))?);
    }

    Ok(ImageCorpus {
        channels,
        height,
        width,
        pixels,
        class_labels,
        anomaly_flags,
        provenance,
    })
}

fn row_label_str(l: RowLabel) -> &'static str {
    match l {
        RowLabel::Unlabeled => "unlabeled",
        RowLabel::Normal => "+1",
        RowLabel::Anomaly => "-1",
    }
}

fn parse_row_label(s: &str) -> Option<RowLabel> {
    match s {
        "unlabeled" => Some(RowLabel::Unlabeled),
        "+1" => Some(RowLabel::Normal),
        "-1" => Some(RowLabel::Anomaly),
        _ => None,
    }
}

pub fn write_splits(splits: &Splits, path: &Path) -> CorpusResult<()> {
    let mut out = String::from("split,index,label\n");
    for (idx, label) in splits.train.iter().zip(&splits.train_labels) {
        out.push_str(&format!("train,{idx},{}\n", row_label_str(*label)));
    }
    for (idx, truth) in splits.val.iter().zip(&splits.val_truth) {
        out.push_str(&format!(
            "val,{idx},{}\n",
            if *truth { "anomalous" } else { "normal" }
        ));
    }
    for (idx, truth) in splits.test.iter().zip(&splits.test_truth) {
        out.push_str(&format!(
            "test,{idx},{}\n",
            if *truth { "anomalous" } else { "normal" }
        ));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_splits(path: &Path) -> CorpusResult<Splits> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut splits = Splits {
        train: Vec::new(),
        train_labels: Vec::new(),
        val: Vec::new(),
        val_truth: Vec::new(),
        test: Vec::new(),
        test_truth: Vec::new(),
    };
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line != "split,index,label" {
                return Err(format_err(path, format!("bad header: {line}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (split, idx, label) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(i), Some(l), None) => (s, i, l),
            _ => return Err(format_err(path, format!("line {}: bad field count", lineno + 1))),
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| format_err(path, format!("line {}: bad index", lineno + 1)))?;
        match split {
            "train" => {
                let l = parse_row_label(label)
                    .ok_or_else(|| format_err(path, format!("line {}: bad label", lineno + 1)))?;
                splits.train.push(idx);
                splits.train_labels.push(l);
            }
            "val" | "test" => {
                let truth = match label {
                    "anomalous" => true,
                    "normal" => false,
                    _ => {
                        return Err(format_err(path, format!("line {}: bad truth", lineno + 1)))
                    }
                };
                if split == "val" {
                    splits.val.push(idx);
                    splits.val_truth.push(truth);
                } else {
                    splits.test.push(idx);
                    splits.test_truth.push(truth);
                }
            }
            other => {
                return Err(format_err(path, format!("line {}: bad split {other}", lineno + 1)))
            }
        }
    }
    Ok(splits)
}

/// Export one image as binary PPM (P6). Single-channel images replicate
/// their plane across RGB.
pub fn write_ppm(corpus: &ImageCorpus, idx: usize, path: &Path) -> CorpusResult<()> {
    let (h, w) = (corpus.height, corpus.width);
    let img = corpus.image(idx);
    let mut buf = format!("P6\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let plane = if corpus.channels == 3 { c } else { 0 };
                let v = img[plane * h * w + y * w + x].clamp(0.0, 1.0);
                buf.push((v * 255.0).round() as u8);
            }
        }
    }
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}
