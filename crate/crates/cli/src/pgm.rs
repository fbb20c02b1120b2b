//! Grayscale PGM images (plain P2 and raw P5).
//!
//! In memory an image is a column-major `Vec<f64>` with pixel `(row, col)`
//! at `row + height·col`, intensities in `[0, 1]`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("cannot read image {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed PGM: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    Plain,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&str, PgmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::Malformed("unexpected end of data".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| PgmError::Malformed("non-ASCII header".into()))
    }

    fn number(&mut self, what: &str) -> Result<usize, PgmError> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| PgmError::Malformed(format!("bad {what} `{t}`")))
    }
}

/// Decodes P2 or P5 data, rescaling by the declared maximum value.
pub fn decode(bytes: &[u8]) -> Result<Image, PgmError> {
    let mut h = Header { bytes, pos: 0 };
    let magic = h.token()?.to_string();
    if magic != "P2" && magic != "P5" {
        return Err(PgmError::Malformed(format!("unsupported magic `{magic}`")));
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(PgmError::Malformed(format!(
            "bad dimensions {width}x{height} or maxval {maxval}"
        )));
    }
    let count = width * height;
    let mut raw = Vec::with_capacity(count);
    if magic == "P2" {
        for _ in 0..count {
            raw.push(h.number("sample")?);
        }
    } else {
        // exactly one whitespace byte separates header and raster
        let start = h.pos + 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let data = bytes
            .get(start..start + need)
            .ok_or_else(|| PgmError::Malformed("truncated raster".into()))?;
        if wide {
            raw.extend(data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as usize));
        } else {
            raw.extend(data.iter().map(|&v| v as usize));
        }
    }
    if let Some(v) = raw.iter().find(|&&v| v > maxval) {
        return Err(PgmError::Malformed(format!("sample {v} exceeds maxval {maxval}")));
    }
    let mut pixels = vec![0.0; count];
    for r in 0..height {
        for c in 0..width {
            pixels[r + height * c] = raw[r * width + c] as f64 / maxval as f64;
        }
    }
    Ok(Image {
        width,
        height,
        pixels,
    })
}

pub fn read(path: &Path) -> Result<Image, PgmError> {
    let bytes = std::fs::read(path).map_err(|source| PgmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

/// Encodes an image with maxval 255, clamping intensities to `[0, 1]`.
pub fn encode(image: &Image, format: PgmFormat) -> Vec<u8> {
    let (w, h) = (image.width, image.height);
    assert_eq!(image.pixels.len(), w * h, "pixel count");
    let level = |r: usize, c: usize| (image.pixels[r + h * c].clamp(0.0, 1.0) * 255.0).round() as u8;
    match format {
        PgmFormat::Plain => {
            let mut s = format!("P2\n{w} {h}\n255\n");
            for r in 0..h {
                let mut line = String::new();
                for c in 0..w {
                    let v = level(r, c).to_string();
                    if line.len() + v.len() + 1 > 70 {
                        s.push_str(&line);
                        s.push('\n');
                        line.clear();
                    }
                    if !line.is_empty() {
                        line.push(' ');
                    }
                    let _ = write!(line, "{v}");
                }
                s.push_str(&line);
                s.push('\n');
            }
            s.into_bytes()
        }
        PgmFormat::Raw => {
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            for r in 0..h {
                for c in 0..w {
                    out.push(level(r, c));
                }
            }
            out
        }
    }
}

pub fn write(path: &Path, image: &Image, format: PgmFormat) -> std::io::Result<()> {
    std::fs::write(path, encode(image, format))
}
