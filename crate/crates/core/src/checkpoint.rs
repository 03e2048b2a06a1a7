//! Checkpoint container: magic "SVDP", version u16, then for each tensor
//! name length u16 + name bytes + rank u8 + dims as u32 + f64 little-endian
//! values. Model metadata rides along as meta.* scalar tensors so a
//! checkpoint is self-describing.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::encoder::{Activation, EncoderParams, EncoderSpec, Param, ParamKind};
use crate::objective::{SvddMode, SvddState};

const MAGIC: &[u8; 4] = b"SVDP";
const VERSION: u16 = 1;

pub type CheckpointResult<T> = Result<T, CheckpointError>;

#[derive(Debug)]
pub enum CheckpointError {
    Io { path: String, source: std::io::Error },
    Format { path: String, detail: String },
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { path, source } => write!(f, "io error on {path}: {source}"),
            Self::Format { path, detail } => write!(f, "bad checkpoint {path}: {detail}"),
        }
    }
}

impl std::error::Error for CheckpointError {}

fn io_err(path: &Path, source: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, detail: impl Into<String>) -> CheckpointError {
    CheckpointError::Format {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Raw named tensors, the unit of the wire format.
pub type NamedTensor = (String, Vec<usize>, Vec<f64>);

pub fn write_tensors(path: &Path, tensors: &[NamedTensor]) -> CheckpointResult<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));
    put(MAGIC)?;
    put(&VERSION.to_le_bytes())?;
    for (name, shape, values) in tensors {
        put(&(name.len() as u16).to_le_bytes())?;
        put(name.as_bytes())?;
        put(&[shape.len() as u8])?;
        for &d in shape {
            put(&(d as u32).to_le_bytes())?;
        }
        for &v in values {
            put(&v.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_tensors(path: &Path) -> CheckpointResult<Vec<NamedTensor>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if &magic != MAGIC {
        return Err(format_err(path, "bad magic, expected SVDP"));
    }
    let mut v16 = [0u8; 2];
    r.read_exact(&mut v16).map_err(|e| io_err(path, e))?;
    let version = u16::from_le_bytes(v16);
    if version != VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    let mut tensors = Vec::new();
    loop {
        let mut len_buf = [0u8; 2];
        match r.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(io_err(path, e)),
        }
        let name_len = u16::from_le_bytes(len_buf) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(|e| io_err(path, e))?;
        let name =
            String::from_utf8(name).map_err(|_| format_err(path, "tensor name not UTF-8"))?;
        let mut rank = [0u8; 1];
        r.read_exact(&mut rank).map_err(|e| io_err(path, e))?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            let mut d = [0u8; 4];
            r.read_exact(&mut d).map_err(|e| io_err(path, e))?;
            shape.push(u32::from_le_bytes(d) as usize);
        }
        let count: usize = shape.iter().product();
        let mut raw = vec![0u8; count * 8];
        r.read_exact(&mut raw).map_err(|e| io_err(path, e))?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        tensors.push((name, shape, values));
    }
    Ok(tensors)
}

/// Save a trained model: parameters, svdd state, and spec metadata.
pub fn save_model(
    path: &Path,
    spec: &EncoderSpec,
    params: &EncoderParams,
    state: &SvddState,
) -> CheckpointResult<()> {
    let mut tensors: Vec<NamedTensor> = Vec::new();
    for p in &params.params {
        tensors.push((p.name.clone(), p.shape.clone(), p.values.clone()));
    }
    tensors.push(("svdd.center".into(), vec![state.center.len()], state.center.clone()));
    tensors.push(("svdd.radius".into(), vec![1], vec![state.radius]));
    let scalar = |name: &str, v: f64| (name.to_string(), vec![1], vec![v]);
    tensors.push(scalar("meta.mode", state.mode.code()));
    tensors.push(scalar("meta.nu", state.nu));
    tensors.push(scalar("meta.eta", state.eta));
    tensors.push(scalar("meta.eps_inv", state.eps_inv));
    tensors.push(scalar("meta.activation", spec.activation.code()));
    tensors.push(scalar("meta.use_bias", if spec.use_bias { 1.0 } else { 0.0 }));
    tensors.push(scalar("meta.input_dim", spec.input_dim as f64));
    tensors.push(scalar(
        "meta.noise_head_k",
        spec.noise_head_k.map(|k| k as f64).unwrap_or(0.0),
    ));
    tensors.push((
        "meta.widths".into(),
        vec![spec.layer_widths.len()],
        spec.layer_widths.iter().map(|&w| w as f64).collect(),
    ));
    write_tensors(path, &tensors)
}

fn kind_from_name(name: &str) -> Option<ParamKind> {
    if let Some(rest) = name.strip_prefix("enc.w") {
        return rest.parse().ok().map(|layer| ParamKind::Weight { layer });
    }
    if let Some(rest) = name.strip_prefix("enc.b") {
        return rest.parse().ok().map(|layer| ParamKind::Bias { layer });
    }
    match name {
        "head.w" => Some(ParamKind::HeadWeight),
        "head.b" => Some(ParamKind::HeadBias),
        _ => None,
    }
}

/// Load a model saved by [`save_model`] and validate it against its own
/// metadata.
pub fn load_model(path: &Path) -> CheckpointResult<(EncoderSpec, EncoderParams, SvddState)> {
    let tensors = read_tensors(path)?;
    let find = |name: &str| -> CheckpointResult<&NamedTensor> {
        tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .ok_or_else(|| format_err(path, format!("missing tensor {name}")))
    };
    let scalar = |name: &str| -> CheckpointResult<f64> {
        let (_, _, values) = find(name)?;
        if values.len() != 1 {
            return Err(format_err(path, format!("{name} is not scalar")));
        }
        Ok(values[0])
    };

    let widths = find("meta.widths")?.2.iter().map(|&w| w as usize).collect::<Vec<_>>();
    let spec = EncoderSpec {
        input_dim: scalar("meta.input_dim")? as usize,
        layer_widths: widths,
        use_bias: scalar("meta.use_bias")? != 0.0,
        activation: Activation::from_code(scalar("meta.activation")?)
            .ok_or_else(|| format_err(path, "unknown activation code"))?,
        noise_head_k: match scalar("meta.noise_head_k")? as usize {
            0 => None,
            k => Some(k),
        },
    };
    spec.validate()
        .map_err(|e| format_err(path, format!("inconsistent spec: {e}")))?;

    let mut params = Vec::new();
    for (name, shape, values) in &tensors {
        if let Some(kind) = kind_from_name(name) {
            params.push(Param {
                name: name.clone(),
                kind,
                shape: shape.clone(),
                values: values.clone(),
            });
        }
    }
    let params = EncoderParams { params };
    // spot-check shapes against the spec before trusting the file
    for l in 0..spec.num_layers() {
        let fan_in = if l == 0 { spec.input_dim } else { spec.layer_widths[l - 1] };
        let w = params
            .find(ParamKind::Weight { layer: l })
            .ok_or_else(|| format_err(path, format!("missing enc.w{l}")))?;
        if w.shape != vec![fan_in, spec.layer_widths[l]] {
            return Err(format_err(path, format!("enc.w{l} shape mismatch")));
        }
        if spec.use_bias && params.find(ParamKind::Bias { layer: l }).is_none() {
            return Err(format_err(path, format!("missing enc.b{l}")));
        }
    }
    if spec.noise_head_k.is_some() && params.find(ParamKind::HeadWeight).is_none() {
        return Err(format_err(path, "missing head.w"));
    }

    let center = find("svdd.center")?.2.clone();
    if center.len() != spec.feature_dim() {
        return Err(format_err(path, "center length does not match feature dim"));
    }
    let mode = SvddMode::from_code(scalar("meta.mode")?)
        .ok_or_else(|| format_err(path, "unknown mode code"))?;
    let mut state = SvddState::new(center, mode, scalar("meta.nu")?, scalar("meta.eta")?)
        .map_err(|e| format_err(path, format!("bad state: {e}")))?;
    state.radius = scalar("svdd.radius")?;
    state.eps_inv = scalar("meta.eps_inv")?;
    Ok((spec, params, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_params;
    use crate::objective::{SvddMode, SvddState};

    #[test]
    fn model_round_trips() {
        let spec = EncoderSpec {
            input_dim: 6,
            layer_widths: vec![4, 3],
            use_bias: true,
            activation: Activation::Tanh,
            noise_head_k: Some(5),
        };
        let params = init_params(&spec, 11).unwrap();
        let mut state =
            SvddState::new(vec![0.3, -0.4, 0.9], SvddMode::SoftBoundary, 0.2, 1.5).unwrap();
        state.radius = 1.25;

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.svdp");
        save_model(&path, &spec, &params, &state).unwrap();
        let (spec2, params2, state2) = load_model(&path).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(state, state2);
        assert_eq!(params.params.len(), params2.params.len());
        for (a, b) in params.params.iter().zip(&params2.params) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.svdp");
        std::fs::write(&path, b"JUNKxxxx").unwrap();
        assert!(matches!(
            read_tensors(&path),
            Err(CheckpointError::Format { .. })
        ));

        let spec = EncoderSpec {
            input_dim: 2,
            layer_widths: vec![2],
            use_bias: false,
            activation: Activation::Relu,
            noise_head_k: None,
        };
        let params = init_params(&spec, 0).unwrap();
        let state = SvddState::new(vec![0.1, 0.1], SvddMode::OneClass, 0.1, 1.0).unwrap();
        let good = dir.path().join("good.svdp");
        save_model(&good, &spec, &params, &state).unwrap();
        let bytes = std::fs::read(&good).unwrap();
        let cut = dir.path().join("cut.svdp");
        std::fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_tensors(&cut).is_err());
    }
}
