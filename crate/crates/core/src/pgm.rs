//! Netpbm graymap I/O: reads P2 (ASCII) and P5 (binary) with maxval ≤ 255,
//! writes P5 with maxval 255.

use std::fs;
use std::path::Path;

use crate::{Error, Image, Result};

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path)?;
    decode_pgm(&bytes)
}

/// Writes `img` as binary P5. Pixels are rounded half away from zero and must
/// land in `[0, 255]`; clamp first if needed.
pub fn save_pgm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_pgm(img)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_pgm(img: &Image) -> Result<Vec<u8>> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.reserve(img.len());
    for (i, &v) in img.pixels().iter().enumerate() {
        let q = v.round();
        if !(0.0..=255.0).contains(&q) {
            return Err(Error::Precondition(format!(
                "pixel {i} = {v} rounds outside [0, 255]; clamp before saving"
            )));
        }
        out.push(q as u8);
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos, message: message.into() }
    }

    /// Skips whitespace and `#` comments.
    fn skip_blank(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        self.skip_blank();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse::<u64>().map_err(|_| Error::Parse {
            offset: start,
            message: format!("{what} out of range"),
        })
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(cur.err("missing PGM magic"));
    }
    let binary = match bytes[1] {
        b'5' => true,
        b'2' => false,
        _ => return Err(cur.err("only P2 and P5 graymaps are supported")),
    };
    cur.pos = 2;
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval_offset = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse { offset: maxval_offset, message: "zero image dimension".into() });
    }
    if maxval == 0 {
        return Err(Error::Parse { offset: maxval_offset, message: "maxval must be positive".into() });
    }
    if maxval > 255 {
        return Err(Error::UnsupportedFormat(format!("maxval {maxval} > 255")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| cur.err("image dimensions overflow"))?;

    let mut pixels = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(cur.err("expected whitespace before raster"));
        }
        cur.pos += 1;
        let raster = &bytes[cur.pos..];
        if raster.len() < n {
            return Err(Error::Parse {
                offset: bytes.len(),
                message: format!("truncated raster: {} of {n} bytes", raster.len()),
            });
        }
        for (i, &b) in raster[..n].iter().enumerate() {
            if u64::from(b) > maxval {
                return Err(Error::Parse {
                    offset: cur.pos + i,
                    message: format!("sample {b} exceeds maxval {maxval}"),
                });
            }
            pixels.push(f64::from(b));
        }
    } else {
        for _ in 0..n {
            let at = cur.pos;
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(Error::Parse { offset: at, message: format!("sample {v} exceeds maxval {maxval}") });
            }
            pixels.push(v as f64);
        }
    }
    Image::new(width, height, pixels)
}
