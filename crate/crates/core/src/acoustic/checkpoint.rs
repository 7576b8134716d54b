//! Checkpoint files: a text header naming the version and layer menu,
//! terminated by `end`, then every tensor as little-endian f32.

use std::fmt::Write as _;

use super::model::{LayerSpec, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &str = "ctccrf-checkpoint";
const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        msg: msg.into(),
    }
}

pub fn encode_checkpoint(model: &ModelParams) -> Vec<u8> {
    let mut header = String::new();
    let _ = writeln!(header, "{MAGIC} {VERSION}");
    let _ = writeln!(header, "input {}", model.input_dim());
    let _ = writeln!(header, "outputs {}", model.num_outputs());
    let _ = writeln!(header, "dropout {:?}", model.dropout());
    for spec in model.specs() {
        let _ = writeln!(header, "layer {}", spec.describe());
    }
    let tensors = model.tensors();
    let sizes: Vec<String> = tensors.iter().map(|t| t.len().to_string()).collect();
    let _ = writeln!(header, "tensors {}", sizes.join(" "));
    header.push_str("end\n");
    let mut out = header.into_bytes();
    for t in tensors {
        for &v in t {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let end = bytes
        .windows(5)
        .position(|w| w == b"\nend\n")
        .ok_or_else(|| bad("header terminator missing"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
    let body = &bytes[end + 5..];

    let mut lines = header.lines();
    let first = lines.next().unwrap_or_default();
    let version = first
        .strip_prefix(MAGIC)
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| bad("not a checkpoint"))?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mut input = None;
    let mut outputs = None;
    let mut dropout = 0.0;
    let mut specs = Vec::new();
    let mut sizes = Vec::new();
    for line in lines {
        let (key, value) = line.split_once(' ').unwrap_or((line, ""));
        let int = || value.parse::<usize>().map_err(|_| bad(format!("bad `{key}` line")));
        match key {
            "input" => input = Some(int()?),
            "outputs" => outputs = Some(int()?),
            "dropout" => dropout = value.parse().map_err(|_| bad("bad dropout"))?,
            "layer" => specs.extend(LayerSpec::parse_list(value)?),
            "tensors" => {
                sizes = value
                    .split_whitespace()
                    .map(|s| s.parse::<usize>().map_err(|_| bad("bad tensor size")))
                    .collect::<Result<_>>()?
            }
            _ => return Err(bad(format!("unknown header key `{key}`"))),
        }
    }
    let (Some(input), Some(outputs)) = (input, outputs) else {
        return Err(bad("missing input/outputs"));
    };
    let total: usize = sizes.iter().sum();
    if body.len() != total * 4 {
        return Err(bad(format!(
            "{} payload bytes for {total} parameters",
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))));
    let tensors: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&n| values.by_ref().take(n).collect())
        .collect();
    ModelParams::from_parts(input, &specs, outputs, dropout, tensors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reload_is_bit_exact() {
        let specs = LayerSpec::parse_list("affine:5,tanh,birnn:3").unwrap();
        let mut model = ModelParams::new(4, &specs, 3, 1).unwrap();
        model.set_dropout(0.25).unwrap();
        let bytes = encode_checkpoint(&model);
        let loaded = decode_checkpoint(&bytes).unwrap();
        assert_eq!(encode_checkpoint(&loaded), bytes);
        assert_eq!(loaded.num_parameters(), model.num_parameters());
        assert_eq!(loaded.specs(), model.specs());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let model = ModelParams::new(2, &[LayerSpec::Tanh], 3, 1).unwrap();
        let bytes = encode_checkpoint(&model);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_checkpoint(b"garbage\nend\n").is_err());
    }
}
