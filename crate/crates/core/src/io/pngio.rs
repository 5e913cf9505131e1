//! PNG via the `png` crate: RGB, RGBA (alpha dropped) and grey inputs, 8 or 16 bits.

use std::io::Cursor;

use super::RawImage;
use crate::error::{Error, Result};

fn decode_err(e: png::DecodingError) -> Error {
    Error::Decode { offset: 0, message: e.to_string() }
}

pub fn decode(bytes: &[u8]) -> Result<RawImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Decode { offset: 0, message: "image too large".into() })?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(decode_err)?;
    let buf = &buf[..info.buffer_size()];
    let (width, height) = (info.width as usize, info.height as usize);
    let sixteen = info.bit_depth == png::BitDepth::Sixteen;
    let values: Vec<u16> = if sixteen {
        buf.chunks_exact(2).map(|p| u16::from_be_bytes([p[0], p[1]])).collect()
    } else {
        buf.iter().map(|&b| b as u16).collect()
    };
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Indexed => {
            return Err(Error::Unsupported("palette PNG was not expanded".into()));
        }
    };
    let mut samples = Vec::with_capacity(width * height * 3);
    for px in values.chunks_exact(channels).take(width * height) {
        match channels {
            1 | 2 => samples.extend([px[0]; 3]),
            _ => samples.extend(&px[..3]),
        }
    }
    if samples.len() != width * height * 3 {
        return Err(Error::Decode { offset: bytes.len(), message: "short PNG frame".into() });
    }
    Ok(RawImage { width, height, maxval: if sixteen { 65535 } else { 255 }, samples })
}

pub fn encode(raw: &RawImage) -> Result<Vec<u8>> {
    let sixteen = match raw.maxval {
        255 => false,
        65535 => true,
        m => return Err(Error::Unsupported(format!("PNG needs maxval 255 or 65535, got {m}"))),
    };
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, raw.width as u32, raw.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(if sixteen { png::BitDepth::Sixteen } else { png::BitDepth::Eight });
        let mut writer = encoder.write_header().map_err(|e| Error::Io(e.to_string()))?;
        let data: Vec<u8> = if sixteen {
            raw.samples.iter().flat_map(|s| s.to_be_bytes()).collect()
        } else {
            raw.samples.iter().map(|&s| s as u8).collect()
        };
        writer.write_image_data(&data).map_err(|e| Error::Io(e.to_string()))?;
        writer.finish().map_err(|e| Error::Io(e.to_string()))?;
    }
    Ok(out)
}
