//! On-disk formats: binary tensors, edge lists, 0/1 label or mask files and
//! band-interleaved raster conversion.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use graphprop_core::{DenseTensor, EdgeSet};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const TENSOR_LAYOUT: &str = "fiber-fastest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub layout: String,
}

/// JSON header line, then little-endian `f64` values in the core's flat layout.
pub fn encode_tensor(t: &DenseTensor) -> Vec<u8> {
    let header = TensorHeader {
        shape: t.shape().to_vec(),
        dtype: "f64".into(),
        layout: TENSOR_LAYOUT.into(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.reserve(t.len() * 8);
    for v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<DenseTensor> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| HarnessError::Data("tensor file has no header line".into()))?;
    let header: TensorHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| HarnessError::Data(format!("tensor header: {e}")))?;
    if header.dtype != "f64" || header.layout != TENSOR_LAYOUT {
        return Err(HarnessError::Data(format!(
            "unsupported tensor dtype {:?} / layout {:?}",
            header.dtype, header.layout
        )));
    }
    let payload = &bytes[nl + 1..];
    let len: usize = header.shape.iter().product();
    if payload.len() != len * 8 {
        return Err(HarnessError::Data(format!(
            "shape {:?} needs {} payload bytes, found {}",
            header.shape,
            len * 8,
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    DenseTensor::new(header.shape, data).map_err(|e| HarnessError::Data(e.to_string()))
}

pub fn write_tensor(path: &Path, t: &DenseTensor) -> Result<()> {
    fs::write(path, encode_tensor(t)).map_err(|e| HarnessError::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode_tensor(&bytes).map_err(|e| match e {
        HarnessError::Data(m) => HarnessError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Text edge list: `# n=<N>` header, then one `u v` pair per line, 1-based.
pub fn parse_edge_list(text: &str) -> Result<EdgeSet> {
    let mut n = None;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("n=") {
                n = Some(
                    v.trim()
                        .parse::<usize>()
                        .map_err(|e| HarnessError::Data(format!("line {}: bad node count: {e}", lineno + 1)))?,
                );
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(HarnessError::Data(format!(
                "line {}: expected two node ids",
                lineno + 1
            )));
        };
        let parse = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(HarnessError::Data(format!(
                    "line {}: node id {s:?} is not a positive integer",
                    lineno + 1
                ))),
            }
        };
        pairs.push((parse(a)?, parse(b)?));
    }
    let n = n.ok_or_else(|| HarnessError::Data("edge list lacks a '# n=<N>' header".into()))?;
    EdgeSet::new(n, pairs).map_err(|e| HarnessError::Data(e.to_string()))
}

pub fn format_edge_list(e: &EdgeSet) -> String {
    let mut s = format!("# n={}\n", e.n());
    for &(u, v) in e.edges() {
        s.push_str(&format!("{} {}\n", u + 1, v + 1));
    }
    s
}

pub fn read_edge_list(path: &Path) -> Result<EdgeSet> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_edge_list(&text).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

/// One `0` or `1` per line, in node order.
pub fn read_flags(path: &Path) -> Result<Vec<u8>> {
    let f = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        match line.trim() {
            "" => continue,
            "0" => out.push(0),
            "1" => out.push(1),
            other => {
                return Err(HarnessError::Data(format!(
                    "{}:{}: expected 0 or 1, found {other:?}",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(out)
}

pub fn write_flags(path: &Path, flags: &[u8]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(f);
    for v in flags {
        writeln!(w, "{v}").map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interleave {
    /// Band sequential: all of band 0, then band 1, ...
    Bsq,
    /// Band interleaved by line: row 0 of every band, then row 1, ...
    Bil,
    /// Band interleaved by pixel.
    Bip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RasterDtype {
    U8,
    U16,
    F32,
    F64,
}

impl RasterDtype {
    fn size(self) -> usize {
        match self {
            RasterDtype::U8 => 1,
            RasterDtype::U16 => 2,
            RasterDtype::F32 => 4,
            RasterDtype::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            RasterDtype::U8 => b[0] as f64,
            RasterDtype::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            RasterDtype::F32 => f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64,
            RasterDtype::F64 => f64::from_le_bytes(b.try_into().expect("8 bytes")),
        }
    }
}

/// Sidecar describing a flat little-endian raster file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterSidecar {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub dtype: RasterDtype,
    #[serde(default = "default_interleave")]
    pub interleave: Interleave,
}

fn default_interleave() -> Interleave {
    Interleave::Bsq
}

/// Decodes a flat raster into a `height x width x bands` tensor.
pub fn decode_raster(bytes: &[u8], s: &RasterSidecar) -> Result<DenseTensor> {
    let (h, w, b) = (s.height, s.width, s.bands);
    let size = s.dtype.size();
    if h == 0 || w == 0 || b == 0 {
        return Err(HarnessError::Data("raster sidecar has a zero extent".into()));
    }
    if bytes.len() != h * w * b * size {
        return Err(HarnessError::Data(format!(
            "{h}x{w}x{b} {:?} raster needs {} bytes, found {}",
            s.dtype,
            h * w * b * size,
            bytes.len()
        )));
    }
    let at = |row: usize, col: usize, band: usize| -> usize {
        match s.interleave {
            Interleave::Bsq => (band * h + row) * w + col,
            Interleave::Bil => (row * b + band) * w + col,
            Interleave::Bip => (row * w + col) * b + band,
        }
    };
    let t = DenseTensor::from_fn(vec![h, w, b], |i| {
        let o = at(i[0], i[1], i[2]) * size;
        s.dtype.decode(&bytes[o..o + size])
    })
    .map_err(|e| HarnessError::Data(format!("raster values: {e}")))?;
    Ok(t)
}

pub fn convert_raster(input: &Path, sidecar: &Path, output: &Path) -> Result<DenseTensor> {
    let side = fs::read_to_string(sidecar).map_err(|e| HarnessError::io(sidecar, e))?;
    let s: RasterSidecar =
        serde_json::from_str(&side).map_err(|e| HarnessError::Data(format!("{}: {e}", sidecar.display())))?;
    let mut bytes = Vec::new();
    fs::File::open(input)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| HarnessError::io(input, e))?;
    let t = decode_raster(&bytes, &s)?;
    write_tensor(output, &t)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_round_trip() {
        let t = DenseTensor::from_fn(vec![2, 3, 2], |i| i[0] as f64 - 0.5 * i[1] as f64 + i[2] as f64 * 1e-3).unwrap();
        assert_eq!(decode_tensor(&encode_tensor(&t)).unwrap(), t);
        let mut bytes = encode_tensor(&t);
        bytes.pop();
        assert!(decode_tensor(&bytes).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let e = EdgeSet::new(4, [(0, 1), (2, 3), (1, 3)]).unwrap();
        assert_eq!(parse_edge_list(&format_edge_list(&e)).unwrap(), e);
        assert!(parse_edge_list("1 2\n").is_err());
        assert!(parse_edge_list("# n=2\n0 1\n").is_err());
    }

    #[test]
    fn interleavings_agree() {
        let (h, w, b) = (2, 3, 2);
        let value = |r: usize, c: usize, k: usize| (100 * k + 10 * r + c) as u8;
        let mut bsq = Vec::new();
        let mut bil = Vec::new();
        let mut bip = Vec::new();
        for k in 0..b {
            for r in 0..h {
                for c in 0..w {
                    bsq.push(value(r, c, k));
                }
            }
        }
        for r in 0..h {
            for k in 0..b {
                for c in 0..w {
                    bil.push(value(r, c, k));
                }
            }
        }
        for r in 0..h {
            for c in 0..w {
                for k in 0..b {
                    bip.push(value(r, c, k));
                }
            }
        }
        let side = |interleave| RasterSidecar {
            height: h,
            width: w,
            bands: b,
            dtype: RasterDtype::U8,
            interleave,
        };
        let a = decode_raster(&bsq, &side(Interleave::Bsq)).unwrap();
        assert_eq!(a, decode_raster(&bil, &side(Interleave::Bil)).unwrap());
        assert_eq!(a, decode_raster(&bip, &side(Interleave::Bip)).unwrap());
        assert_eq!(a.get(&[1, 2, 1]), 112.0);
    }
}
