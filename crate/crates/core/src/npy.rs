//! Minimal NPY (v1.0 / v2.0) codec for 2-D float arrays.

use crate::error::{Error, Result};

const MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Element {
    F32,
    F64,
}

impl Element {
    fn size(self) -> usize {
        match self {
            Element::F32 => 4,
            Element::F64 => 8,
        }
    }
}

/// A decoded 2-D array, always widened to row-major `f64`.
#[derive(Debug, Clone)]
pub(crate) struct Array2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

struct Header {
    element: Element,
    fortran_order: bool,
    shape: Vec<usize>,
}

pub(crate) fn decode(bytes: &[u8]) -> Result<Array2> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing NPY magic string".into()));
    }
    let major = bytes[6];
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Format("truncated NPY header".into()));
            }
            (u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize, 12)
        }
        v => return Err(Error::Format(format!("unsupported NPY version {v}"))),
    };
    let end = start + header_len;
    if bytes.len() < end {
        return Err(Error::Format("truncated NPY header".into()));
    }
    let text =
        std::str::from_utf8(&bytes[start..end]).map_err(|_| Error::Format("NPY header is not valid text".into()))?;
    let header = parse_header(text)?;

    let [rows, cols] = header.shape[..] else {
        return Err(Error::Shape(format!("expected a 2-D array, found shape {:?}", header.shape)));
    };
    let payload = &bytes[end..];
    let count = rows * cols;
    if payload.len() != count * header.element.size() {
        return Err(Error::Shape(format!(
            "declared shape ({rows}, {cols}) needs {} bytes of payload, found {}",
            count * header.element.size(),
            payload.len()
        )));
    }

    let mut data: Vec<f64> = match header.element {
        Element::F64 => payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        Element::F32 => payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
    };
    if header.fortran_order {
        let mut c_order = vec![0.0; count];
        for j in 0..cols {
            for i in 0..rows {
                c_order[i * cols + j] = data[j * rows + i];
            }
        }
        data = c_order;
    }
    Ok(Array2 { rows, cols, data })
}

pub(crate) fn encode_f64(data: &[f64], rows: usize, cols: usize) -> Vec<u8> {
    let dict = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': ({rows}, {cols}), }}");
    // Pad so that magic + version + length + header ends on a 64-byte boundary.
    let unpadded = 10 + dict.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    let mut header = dict;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn parse_header(text: &str) -> Result<Header> {
    let text = text.trim();
    let inner = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| Error::Format(format!("NPY header is not a dict: {text:?}")))?;

    let descr = dict_value(inner, "descr")?;
    let descr = descr.trim_matches(|c| c == '\'' || c == '"');
    let element = match descr {
        "<f8" | "=f8" | "f8" | "<d" => Element::F64,
        "<f4" | "=f4" | "f4" | "<f" => Element::F32,
        other => {
            return Err(Error::Type(format!(
                "unsupported element type {other:?}; expected little-endian float32 or float64"
            )))
        }
    };

    let fortran_order = match dict_value(inner, "fortran_order")?.trim() {
        "False" => false,
        "True" => true,
        other => return Err(Error::Format(format!("bad fortran_order value {other:?}"))),
    };

    let shape_text = dict_value(inner, "shape")?;
    let shape_text = shape_text
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::Format(format!("bad shape {shape_text:?}")))?;
    let shape = shape_text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.trim_end_matches('L').parse::<usize>().map_err(|_| Error::Format(format!("bad shape entry {s:?}"))))
        .collect::<Result<Vec<_>>>()?;

    Ok(Header { element, fortran_order, shape })
}

/// Extracts the raw text of `key`'s value from a Python dict literal body.
fn dict_value<'a>(inner: &'a str, key: &str) -> Result<&'a str> {
    let missing = || Error::Format(format!("NPY header lacks key {key:?}"));
    let pos = inner.find(&format!("'{key}'")).or_else(|| inner.find(&format!("\"{key}\""))).ok_or_else(missing)?;
    let rest = &inner[pos + key.len() + 2..];
    let rest = rest.trim_start().strip_prefix(':').ok_or_else(missing)?.trim_start();
    let end = if rest.starts_with('(') { rest.find(')').map(|i| i + 1) } else { rest.find(',') }.unwrap_or(rest.len());
    Ok(&rest[..end])
}
