//! Daylight specular-point locus for a calibrated three-channel camera.
//!
//! Planckian lights imaged by a narrowband camera fall on a straight line in
//! the geometric-mean log-chromaticity plane, `chi = eta + xi / T`. This crate
//! calibrates that line from imaged colour patches and lights, then uses it to
//! estimate scene illuminants, relight images along the locus and produce
//! specular-free matte chromaticity images. A small spectral renderer
//! (Lambertian plus Phong under Wien-approximated Planckian light) supplies
//! ground truth for all of it.

pub mod calib;
pub mod chroma;
pub mod error;
pub mod illum;
pub mod image;
pub mod imaging;
pub mod io;
pub mod matte;
pub mod relight;
pub mod spectra;

pub use error::{Error, Result};
pub use image::LinearImage;
