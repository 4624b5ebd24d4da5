//! Grey-scale image files.
//!
//! Reading accepts 8/16-bit grey PNG (low bit depths are expanded), binary
//! PGM (`P5`) and the raw `f64` format; values are mapped to `[0, 255]`.
//! Writing PNG/PGM quantises to 8 bit (round half away from zero, clamp).
//!
//! Raw format, little-endian throughout:
//!
//! ```text
//! b"TVPWLF64" | rows: u64 | cols: u64 | rows * cols f64, row-major
//! ```

use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::ScalarField;

pub const RAW_MAGIC: &[u8; 8] = b"TVPWLF64";
const PNG_MAGIC: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Pgm,
    Raw,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("png") => Ok(Self::Png),
            Some("pgm") => Ok(Self::Pgm),
            Some("raw") | Some("f64") => Ok(Self::Raw),
            _ => Err(Error::Format(format!(
                "unsupported image extension for {} (expected .png, .pgm, .raw or .f64)",
                path.display()
            ))),
        }
    }

    fn sniff(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(PNG_MAGIC) {
            Ok(Self::Png)
        } else if bytes.starts_with(RAW_MAGIC) {
            Ok(Self::Raw)
        } else if bytes.starts_with(b"P5") {
            Ok(Self::Pgm)
        } else {
            Err(Error::Format("unrecognised image header".into()))
        }
    }
}

/// Round half away from zero, then clamp to `[0, 255]`.
pub fn quantise_u8(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.round().clamp(0.0, 255.0) as u8
}

pub fn decode_image(bytes: &[u8]) -> Result<ScalarField> {
    match ImageFormat::sniff(bytes)? {
        ImageFormat::Png => decode_png(bytes),
        ImageFormat::Pgm => decode_pgm(bytes),
        ImageFormat::Raw => decode_raw(bytes),
    }
}

pub fn encode_image(field: &ScalarField, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Png => encode_png(field),
        ImageFormat::Pgm => Ok(encode_pgm(field)),
        ImageFormat::Raw => Ok(encode_raw(field)),
    }
}

/// Reads any supported format, detected from the file header.
pub fn read_image(path: &Path) -> Result<ScalarField> {
    decode_image(&fs::read(path)?)
}

/// Writes in the format implied by the extension, atomically.
pub fn write_image(path: &Path, field: &ScalarField) -> Result<()> {
    let bytes = encode_image(field, ImageFormat::from_path(path)?)?;
    write_atomic(path, &bytes)
}

/// Writes to a temporary file in the target directory, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Format(format!("png: {e}"))
}

pub fn decode_png(bytes: &[u8]) -> Result<ScalarField> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("png: image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let (rows, cols) = (info.height as usize, info.width as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => return Err(Error::Format(format!("png: expected grey-scale, got {other:?}"))),
    };
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let line = &buf[i * info.line_size..(i + 1) * info.line_size];
        match info.bit_depth {
            png::BitDepth::Eight => {
                data.extend((0..cols).map(|j| f64::from(line[j * channels])));
            }
            png::BitDepth::Sixteen => data.extend((0..cols).map(|j| {
                let k = 2 * j * channels;
                f64::from(u16::from_be_bytes([line[k], line[k + 1]])) * 255.0 / 65535.0
            })),
            other => return Err(Error::Format(format!("png: unexpected bit depth {other:?}"))),
        }
    }
    ScalarField::from_vec(rows, cols, data)
}

pub fn encode_png(field: &ScalarField) -> Result<Vec<u8>> {
    let (rows, cols) = field.shape();
    let too_big = || Error::Format("png: dimensions exceed u32".into());
    let width = u32::try_from(cols).map_err(|_| too_big())?;
    let height = u32::try_from(rows).map_err(|_| too_big())?;
    let pixels: Vec<u8> = field.as_slice().iter().map(|&v| quantise_u8(v)).collect();
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width, height);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(png_err)?;
        writer.write_image_data(&pixels).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

/// Splits the PGM header into its four tokens and returns the payload offset.
fn pgm_header(bytes: &[u8]) -> Result<([usize; 3], usize)> {
    let bad = |msg: &str| Error::Format(format!("pgm: {msg}"));
    if !bytes.starts_with(b"P5") {
        return Err(bad("missing P5 magic"));
    }
    let mut pos = 2;
    let mut values = [0usize; 3];
    for v in &mut values {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(bad("expected a number in the header"));
        }
        *v = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("header number out of range"))?;
    }
    // exactly one whitespace byte before the payload
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => Ok((values, pos + 1)),
        _ => Err(bad("missing whitespace after maxval")),
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ScalarField> {
    let ([cols, rows, maxval], offset) = pgm_header(bytes)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("pgm: invalid maxval {maxval}")));
    }
    let wide = maxval > 255;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("pgm: dimensions overflow".into()))?;
    let need = if wide { 2 * n } else { n };
    let payload = &bytes[offset..];
    if payload.len() < need {
        return Err(Error::Format(format!(
            "pgm: payload has {} bytes, expected {need}",
            payload.len()
        )));
    }
    let scale = 255.0 / maxval as f64;
    let data = if wide {
        payload[..need]
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) * scale)
            .collect()
    } else if maxval == 255 {
        payload[..need].iter().map(|&b| f64::from(b)).collect()
    } else {
        payload[..need].iter().map(|&b| f64::from(b) * scale).collect()
    };
    ScalarField::from_vec(rows, cols, data)
}

pub fn encode_pgm(field: &ScalarField) -> Vec<u8> {
    let (rows, cols) = field.shape();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(field.as_slice().iter().map(|&v| quantise_u8(v)));
    out
}

pub fn encode_raw(field: &ScalarField) -> Vec<u8> {
    let (rows, cols) = field.shape();
    let mut out = Vec::with_capacity(24 + 8 * field.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in field.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<ScalarField> {
    if bytes.len() < 24 || !bytes.starts_with(RAW_MAGIC) {
        return Err(Error::Format("raw: bad header".into()));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(8) as usize, word(16) as usize);
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format("raw: dimensions overflow".into()))?;
    if bytes.len() - 24 != expected {
        return Err(Error::Format(format!(
            "raw: payload has {} bytes, expected {expected}",
            bytes.len() - 24
        )));
    }
    let data = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    ScalarField::from_vec(rows, cols, data)
}
