//! Dataset manifests for batch evaluation.
//!
//! CSV with the header `image,r,g,b,camera,mask`. `image` is relative to the
//! manifest's directory; `r,g,b` is the ground-truth light (all empty when
//! unknown); `camera` is free text; `mask` is an optional polygon
//! `x0 y0;x1 y1;...` in pixel coordinates whose interior is excluded
//! (for example a calibration object in the scene).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::LinearImage;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub truth: Option<[f64; 3]>,
    pub camera: Option<String>,
    pub mask: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

pub const HEADER: [&str; 6] = ["image", "r", "g", "b", "camera", "mask"];

fn parse_polygon(line: usize, text: &str) -> Result<Vec<[f64; 2]>> {
    let pts = text
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let v: Vec<&str> = pair.split_whitespace().collect();
            if v.len() != 2 {
                return Err(Error::Parse { line, message: format!("bad polygon vertex {pair:?}") });
            }
            let x = v[0].parse().map_err(|_| Error::Parse { line, message: format!("bad coordinate {:?}", v[0]) })?;
            let y = v[1].parse().map_err(|_| Error::Parse { line, message: format!("bad coordinate {:?}", v[1]) })?;
            Ok([x, y])
        })
        .collect::<Result<Vec<_>>>()?;
    if pts.len() < 3 {
        return Err(Error::Parse { line, message: "mask polygon needs at least 3 vertices".into() });
    }
    Ok(pts)
}

/// Parses manifest text; `base` resolves relative image paths.
pub fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Parse { line: 1, message: format!("header must be {}", HEADER.join(",")) });
    }
    let mut entries = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        if field(0).is_empty() {
            return Err(Error::Parse { line, message: "empty image path".into() });
        }
        let rgb = [field(1), field(2), field(3)];
        let truth = if rgb.iter().all(|s| s.is_empty()) {
            None
        } else {
            let mut v = [0.0; 3];
            for k in 0..3 {
                v[k] = rgb[k].parse().map_err(|_| Error::Parse { line, message: format!("bad illuminant value {:?}", rgb[k]) })?;
            }
            Some(v)
        };
        let camera = (!field(4).is_empty()).then(|| field(4).to_string());
        let mask = if field(5).is_empty() { None } else { Some(parse_polygon(line, field(5))?) };
        entries.push(ManifestEntry { image: base.join(field(0)), truth, camera, mask });
    }
    Ok(DatasetManifest { entries })
}

/// Reads a manifest and checks every image exists.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let manifest = parse_manifest(&text, base)?;
    for e in &manifest.entries {
        if !e.image.is_file() {
            return Err(Error::Io(format!("manifest image {} does not exist", e.image.display())));
        }
    }
    Ok(manifest)
}

pub fn write_manifest(manifest: &DatasetManifest, base: &Path) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(HEADER).map_err(err)?;
    for e in &manifest.entries {
        let rel = e.image.strip_prefix(base).unwrap_or(&e.image);
        let (r, g, b) = match e.truth {
            Some(v) => (v[0].to_string(), v[1].to_string(), v[2].to_string()),
            None => Default::default(),
        };
        let mask = e
            .mask
            .as_ref()
            .map(|m| m.iter().map(|p| format!("{} {}", p[0], p[1])).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        w.write_record([rel.to_string_lossy().as_ref(), &r, &g, &b, e.camera.as_deref().unwrap_or(""), &mask])
            .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Pixels whose centres fall inside `polygon` (even-odd rule).
pub fn polygon_mask(polygon: &[[f64; 2]], width: usize, height: usize) -> Result<Vec<bool>> {
    for p in polygon {
        if !(p[0] >= 0.0 && p[0] <= width as f64 && p[1] >= 0.0 && p[1] <= height as f64) {
            return Err(Error::InvalidArgument(format!("mask vertex {p:?} outside {width}x{height} image")));
        }
    }
    let mut mask = vec![false; width * height];
    for y in 0..height {
        let py = y as f64 + 0.5;
        for x in 0..width {
            let px = x as f64 + 0.5;
            let mut inside = false;
            let mut j = polygon.len() - 1;
            for i in 0..polygon.len() {
                let (a, b) = (polygon[i], polygon[j]);
                if (a[1] > py) != (b[1] > py) && px < (b[0] - a[0]) * (py - a[1]) / (b[1] - a[1]) + a[0] {
                    inside = !inside;
                }
                j = i;
            }
            mask[y * width + x] = inside;
        }
    }
    Ok(mask)
}

/// Excludes the interior of the entry's mask polygon, if any.
pub fn apply_mask(image: &LinearImage, mask: Option<&[[f64; 2]]>) -> Result<LinearImage> {
    let Some(poly) = mask else { return Ok(image.clone()) };
    let inside = polygon_mask(poly, image.width(), image.height())?;
    let excluded = image.excluded().iter().zip(&inside).map(|(a, b)| *a || *b).collect();
    image.clone().with_excluded(excluded)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries() {
        let text = "image,r,g,b,camera,mask\na.ppm,0.3,0.3,0.4,cam1,\nsub/b.png,,,,,0 0;4 0;4 4\n";
        let m = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].image, PathBuf::from("/data/a.ppm"));
        assert_eq!(m.entries[0].truth, Some([0.3, 0.3, 0.4]));
        assert_eq!(m.entries[0].camera.as_deref(), Some("cam1"));
        assert_eq!(m.entries[1].truth, None);
        assert_eq!(m.entries[1].mask.as_ref().unwrap().len(), 3);
        let again = parse_manifest(&write_manifest(&m, Path::new("/data")).unwrap(), Path::new("/data")).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(parse_manifest("img,r\n", Path::new(".")), Err(Error::Parse { line: 1, .. })));
        let text = "image,r,g,b,camera,mask\na.ppm,x,0,0,,\n";
        assert!(matches!(parse_manifest(text, Path::new(".")), Err(Error::Parse { line: 2, .. })));
        let text = "image,r,g,b,camera,mask\na.ppm,,,,,1 1;2 2\n";
        assert!(matches!(parse_manifest(text, Path::new(".")), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn polygon_mask_covers_interior() {
        let m = polygon_mask(&[[1.0, 1.0], [3.0, 1.0], [3.0, 3.0], [1.0, 3.0]], 4, 4).unwrap();
        let inside: Vec<usize> = (0..16).filter(|&i| m[i]).collect();
        assert_eq!(inside, vec![5, 6, 9, 10]);
        assert!(polygon_mask(&[[0.0, 0.0], [9.0, 0.0], [0.0, 1.0]], 4, 4).is_err());
    }

    #[test]
    fn missing_images_fail_to_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "image,r,g,b,camera,mask\nnope.ppm,,,,,\n").unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::Io(_))));
    }
}
