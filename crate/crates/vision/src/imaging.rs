//! Labeled RGB images and their on-disk forms.
//!
//! Datasets live in `<root>/<class>/<id>.ppm` (binary P6, maxval 255) or
//! `.png`; the class directory names are `healthy`, `drought` and `rust`.

use std::fs;
use std::path::Path;

use aerogh_core::simcore::DiseaseClass;

use crate::error::VisionError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    pub width: usize,
    pub height: usize,
    /// RGB, row-major, 3 bytes per pixel.
    pub pixels: Vec<u8>,
    pub label: DiseaseClass,
    pub source_id: String,
}

impl LabeledImage {
    pub fn new(
        width: usize,
        height: usize,
        pixels: Vec<u8>,
        label: DiseaseClass,
        source_id: impl Into<String>,
    ) -> Result<Self, VisionError> {
        if pixels.len() != 3 * width * height {
            return Err(VisionError::Format(format!(
                "{width}x{height} image needs {} bytes, got {}",
                3 * width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels, label, source_id: source_id.into() })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Channel-major floats in [-0.5, 0.5], the classifier's input layout.
    pub fn tensor(&self) -> Vec<f64> {
        let n = self.width * self.height;
        let mut out = vec![0.0; 3 * n];
        for (i, px) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * n + i] = px[c] as f64 / 255.0 - 0.5;
            }
        }
        out
    }
}

pub fn encode_ppm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Decode a binary PPM; `#` comments in the header are allowed.
pub fn decode_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), VisionError> {
    let bad = |m: &str| VisionError::Format(format!("ppm: {m}"));
    let mut pos = 0;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?.to_string());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if fields[0] != "P6" {
        return Err(bad(&format!("unsupported magic {:?}", fields[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad number {s:?}")));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    let need = 3 * w * h;
    let raster = bytes.get(pos..pos + need).ok_or_else(|| bad("truncated raster"))?;
    Ok((w, h, raster.to_vec()))
}

pub fn read_image(path: &Path) -> Result<(usize, usize, Vec<u8>), VisionError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => decode_ppm(&fs::read(path)?),
        Some("png") => {
            let img = image::open(path).map_err(|e| VisionError::Format(format!("{}: {e}", path.display())))?;
            let rgb = img.to_rgb8();
            Ok((rgb.width() as usize, rgb.height() as usize, rgb.into_raw()))
        }
        _ => Err(VisionError::Format(format!("{}: expected .ppm or .png", path.display()))),
    }
}

pub fn write_image(path: &Path, img: &LabeledImage) -> Result<(), VisionError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => Ok(fs::write(path, encode_ppm(img.width, img.height, &img.pixels))?),
        Some("png") => {
            let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, img.pixels.clone())
                .ok_or_else(|| VisionError::Format("pixel buffer size mismatch".into()))?;
            buf.save(path).map_err(|e| VisionError::Format(format!("{}: {e}", path.display())))
        }
        _ => Err(VisionError::Format(format!("{}: expected .ppm or .png", path.display()))),
    }
}

/// Load `<root>/<class>/<id>.{ppm,png}`, ordered by class then file name.
pub fn load_dataset(root: &Path) -> Result<Vec<LabeledImage>, VisionError> {
    let mut out = Vec::new();
    let mut found_class = false;
    for class in DiseaseClass::ALL {
        let dir = root.join(class.name());
        if !dir.is_dir() {
            continue;
        }
        found_class = true;
        let mut files: Vec<_> = fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ppm" | "png")))
            .collect();
        files.sort();
        for path in files {
            let (w, h, pixels) = read_image(&path)?;
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            out.push(LabeledImage::new(w, h, pixels, class, id)?);
        }
    }
    if !found_class {
        return Err(VisionError::Dataset(format!(
            "{} has none of the class directories healthy/, drought/, rust/",
            root.display()
        )));
    }
    Ok(out)
}

/// Write every image to `<root>/<class>/<source_id>.<ext>`.
pub fn save_dataset(root: &Path, images: &[LabeledImage], ext: &str) -> Result<(), VisionError> {
    for class in DiseaseClass::ALL {
        fs::create_dir_all(root.join(class.name()))?;
    }
    for img in images {
        write_image(&root.join(img.label.name()).join(format!("{}.{ext}", img.source_id)), img)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LabeledImage {
        let pixels = (0..3 * 5 * 4).map(|i| (i * 7 % 256) as u8).collect();
        LabeledImage::new(5, 4, pixels, DiseaseClass::Rust, "x").unwrap()
    }

    #[test]
    fn ppm_roundtrip() {
        let img = sample();
        let bytes = encode_ppm(img.width, img.height, &img.pixels);
        assert_eq!(decode_ppm(&bytes).unwrap(), (5, 4, img.pixels));
    }

    #[test]
    fn ppm_header_comments() {
        let mut bytes = b"P6\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        assert_eq!(decode_ppm(&bytes).unwrap(), (2, 1, vec![1, 2, 3, 4, 5, 6]));
        assert!(decode_ppm(b"P3\n1 1\n255\n1 2 3").is_err());
        assert!(decode_ppm(b"P6\n2 2\n255\n\x01").is_err());
    }

    #[test]
    fn wrong_buffer_size_rejected() {
        assert!(LabeledImage::new(2, 2, vec![0; 11], DiseaseClass::Healthy, "x").is_err());
    }

    #[test]
    fn dataset_roundtrip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = sample();
        a.source_id = "a".into();
        let mut b = sample();
        b.label = DiseaseClass::Healthy;
        b.source_id = "b".into();
        save_dataset(&dir.path().join("ppm"), &[a.clone(), b.clone()], "ppm").unwrap();
        save_dataset(&dir.path().join("png"), &[a.clone(), b.clone()], "png").unwrap();
        for sub in ["ppm", "png"] {
            let loaded = load_dataset(&dir.path().join(sub)).unwrap();
            assert_eq!(loaded, vec![b.clone(), a.clone()]);
        }
        assert!(load_dataset(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn tensor_is_channel_major() {
        let img = sample();
        let t = img.tensor();
        assert_eq!(t.len(), 60);
        assert_eq!(t[0], img.pixels[0] as f64 / 255.0 - 0.5);
        assert_eq!(t[20], img.pixels[1] as f64 / 255.0 - 0.5);
        assert_eq!(t[41], img.pixels[5] as f64 / 255.0 - 0.5);
    }
}
