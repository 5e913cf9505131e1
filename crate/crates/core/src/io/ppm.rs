//! Binary PPM (P6), 8 or 16 bits per sample.

use super::RawImage;
use crate::error::{Error, Result};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
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

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Decode { offset: start, message: format!("expected {what}") });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Decode { offset: start, message: format!("{what} out of range") })
    }
}

pub fn decode(bytes: &[u8]) -> Result<RawImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(Error::Decode { offset: 0, message: "missing P6 magic".into() });
    }
    let mut c = Cursor { bytes, pos: 2 };
    let width = c.number("width")?;
    let height = c.number("height")?;
    c.skip_space_and_comments();
    let maxval_at = c.pos;
    let maxval = c.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Decode { offset: maxval_at, message: format!("maxval {maxval} not in 1..=65535") });
    }
    if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
        return Err(Error::Decode { offset: c.pos, message: "expected whitespace before pixel data".into() });
    }
    let data_start = c.pos + 1;
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let samples = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::Decode { offset: 2, message: "image dimensions overflow".into() })?;
    let need = samples * bytes_per;
    let have = bytes.len() - data_start;
    if have < need {
        return Err(Error::Decode {
            offset: bytes.len(),
            message: format!("truncated pixel data: expected {need} bytes from offset {data_start}, found {have}"),
        });
    }
    let data = &bytes[data_start..data_start + need];
    let samples: Vec<u16> = if bytes_per == 1 {
        data.iter().map(|&b| b as u16).collect()
    } else {
        data.chunks_exact(2).map(|p| u16::from_be_bytes([p[0], p[1]])).collect()
    };
    if let Some(i) = samples.iter().position(|&s| s as usize > maxval) {
        return Err(Error::Decode { offset: data_start + i * bytes_per, message: format!("sample exceeds maxval {maxval}") });
    }
    Ok(RawImage { width, height, maxval: maxval as u16, samples })
}

pub fn encode(raw: &RawImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n{}\n", raw.width, raw.height, raw.maxval).into_bytes();
    if raw.maxval < 256 {
        out.extend(raw.samples.iter().map(|&s| s as u8));
    } else {
        for s in &raw.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    }
    out
}
