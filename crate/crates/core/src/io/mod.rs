//! Image files and dataset manifests.
//!
//! Everything inside the library is linear light. Files are read as integer
//! codes scaled to `[0, 1]`, optionally sRGB-decoded, and pixels with any
//! channel at the maximum code are marked as excluded (saturated).

pub mod manifest;
pub mod pngio;
pub mod ppm;
pub mod srgb;

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::LinearImage;

pub use manifest::{load_manifest, polygon_mask, DatasetManifest, ManifestEntry};

/// Integer-coded interleaved RGB samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Ppm,
    Png,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<ImageFormat> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
            Some("ppm") => Ok(ImageFormat::Ppm),
            Some("png") => Ok(ImageFormat::Png),
            _ => Err(Error::Unsupported(format!("unknown image extension for {}", path.display()))),
        }
    }

    fn sniff(bytes: &[u8]) -> Option<ImageFormat> {
        if bytes.starts_with(b"P6") {
            Some(ImageFormat::Ppm)
        } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
            Some(ImageFormat::Png)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn maxval(self) -> u16 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadOptions {
    pub srgb_decode: bool,
}

#[derive(Debug, Clone)]
pub struct LoadedImage {
    /// Linear image with saturated pixels excluded.
    pub image: LinearImage,
    pub saturated: Vec<bool>,
    pub maxval: u16,
}

pub fn raw_to_linear(raw: &RawImage, options: &LoadOptions) -> Result<LoadedImage> {
    let scale = raw.maxval as f64;
    let mut data = Vec::with_capacity(raw.width * raw.height);
    let mut saturated = Vec::with_capacity(raw.width * raw.height);
    for px in raw.samples.chunks_exact(3) {
        saturated.push(px.iter().any(|&s| s >= raw.maxval));
        let mut v = [px[0] as f64 / scale, px[1] as f64 / scale, px[2] as f64 / scale];
        if options.srgb_decode {
            v = v.map(srgb::decode);
        }
        data.push(v);
    }
    let image = LinearImage::new(raw.width, raw.height, data)?.with_excluded(saturated.clone())?;
    Ok(LoadedImage { image, saturated, maxval: raw.maxval })
}

/// Clips to `[0, 1]`, optionally sRGB-encodes and quantises.
pub fn linear_to_raw(image: &LinearImage, depth: BitDepth, srgb_encode: bool) -> RawImage {
    let maxval = depth.maxval();
    let m = maxval as f64;
    let samples = image
        .pixels()
        .iter()
        .flat_map(|p| p.iter().copied())
        .map(|v| {
            let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
            let v = if srgb_encode { srgb::encode(v) } else { v };
            (v * m).round().clamp(0.0, m) as u16
        })
        .collect();
    RawImage { width: image.width(), height: image.height(), maxval, samples }
}

pub fn decode_image(bytes: &[u8], options: &LoadOptions) -> Result<LoadedImage> {
    let raw = match ImageFormat::sniff(bytes) {
        Some(ImageFormat::Ppm) => ppm::decode(bytes)?,
        Some(ImageFormat::Png) => pngio::decode(bytes)?,
        None => return Err(Error::Unsupported("not a binary PPM or PNG file".into())),
    };
    raw_to_linear(&raw, options)
}

pub fn load_image(path: &Path, options: &LoadOptions) -> Result<LoadedImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    decode_image(&bytes, options)
}

pub fn encode_image(image: &LinearImage, format: ImageFormat, depth: BitDepth, srgb_encode: bool) -> Result<Vec<u8>> {
    let raw = linear_to_raw(image, depth, srgb_encode);
    match format {
        ImageFormat::Ppm => Ok(ppm::encode(&raw)),
        ImageFormat::Png => pngio::encode(&raw),
    }
}

/// Writes `image` with the format chosen by the file extension.
pub fn save_image(path: &Path, image: &LinearImage, depth: BitDepth, srgb_encode: bool) -> Result<()> {
    let bytes = encode_image(image, ImageFormat::from_path(path)?, depth, srgb_encode)?;
    std::fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
