//! On-disk formats shared by the pipeline: the `CATM` binary matrix, the
//! `log p(l)` cache and utterance-keyed text files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::format_significant;

pub const MATRIX_MAGIC: &[u8; 4] = b"CATM";

/// `CATM`, u32 rows, u32 cols, then row-major little-endian f32 values.
pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * m.as_slice().len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    let bad = |msg: &str| Error::Format {
        what: "matrix",
        msg: msg.to_string(),
    };
    if bytes.len() < 12 || &bytes[..4] != MATRIX_MAGIC {
        return Err(bad("missing CATM header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let body = &bytes[12..];
    if body.len() != rows * cols * 4 {
        return Err(bad(&format!(
            "{rows}x{cols} header but {} payload bytes",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, encode_matrix(m)).map_err(|e| Error::io(path, e))
}

/// `utterance-id<TAB>value` lines, values with 12 significant digits.
pub fn format_log_pl_cache<'a>(entries: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    let mut out = String::new();
    for (id, v) in entries {
        let _ = writeln!(out, "{id}\t{}", format_significant(v, 12));
    }
    out
}

pub fn parse_log_pl_cache(text: &str) -> Result<HashMap<String, f64>> {
    let mut out = HashMap::new();
    for (i, (id, value)) in parse_keyed_lines(text, "log_pl cache")?.into_iter().enumerate() {
        let v: f64 = match value.as_str() {
            "-inf" => f64::NEG_INFINITY,
            s => s.parse().map_err(|_| Error::Format {
                what: "log_pl cache",
                msg: format!("entry {}: bad value `{s}`", i + 1),
            })?,
        };
        out.insert(id, v);
    }
    Ok(out)
}

/// `key<TAB>rest` lines (the rest may be empty). Order is preserved;
/// duplicate keys are rejected.
pub fn parse_keyed_lines(text: &str, what: &'static str) -> Result<Vec<(String, String)>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, rest) = match line.split_once('\t') {
            Some((k, r)) => (k.trim(), r.trim()),
            None => match line.trim().split_once(char::is_whitespace) {
                Some((k, r)) => (k, r.trim()),
                None => (line.trim(), ""),
            },
        };
        if !seen.insert(key.to_string()) {
            return Err(Error::Format {
                what,
                msg: format!("line {}: duplicate key `{key}`", i + 1),
            });
        }
        out.push((key.to_string(), rest.to_string()));
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matrix_header_layout() {
        let m = Matrix::from_vec(1, 2, vec![1.0, -0.5]).unwrap();
        let bytes = encode_matrix(&m);
        assert_eq!(&bytes[..4], b"CATM");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
        assert!(decode_matrix(&bytes[..15]).is_err());
        assert!(decode_matrix(b"XATM\0\0\0\0\0\0\0\0").is_err());
    }

    proptest! {
        #[test]
        fn f32_matrices_round_trip(rows in 0usize..5, cols in 1usize..5, seed in any::<u64>()) {
            let data: Vec<f64> = (0..rows * cols)
                .map(|i| f64::from((seed.wrapping_mul(i as u64 + 1) % 1000) as f32 / 7.0))
                .collect();
            let m = Matrix::from_vec(rows, cols, data).unwrap();
            prop_assert_eq!(decode_matrix(&encode_matrix(&m)).unwrap(), m);
        }
    }

    #[test]
    fn log_pl_cache_uses_twelve_digits() {
        let text = format_log_pl_cache([("u1", -1.234567890123456), ("u2", -0.5)]);
        assert_eq!(text, "u1\t-1.23456789012\nu2\t-0.5\n");
        let back = parse_log_pl_cache(&text).unwrap();
        assert_eq!(back["u2"], -0.5);
        assert!(parse_keyed_lines("a\t1\na\t2\n", "x").is_err());
    }
}
