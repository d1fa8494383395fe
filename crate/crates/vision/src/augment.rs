//! Rotation, zoom and flips, and the augmentation that pads a dataset up to
//! a target size with transformed copies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::VisionError;
use crate::imaging::LabeledImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentRanges {
    /// Max absolute rotation in degrees.
    pub max_rotation: f64,
    pub zoom: (f64, f64),
    pub flip_probability: f64,
}

impl Default for AugmentRanges {
    fn default() -> Self {
        Self { max_rotation: 30.0, zoom: (0.8, 1.2), flip_probability: 0.5 }
    }
}

pub fn flip_horizontal(img: &LabeledImage) -> LabeledImage {
    let mut out = img.clone();
    let w = img.width;
    for y in 0..img.height {
        for x in 0..w {
            let (d, s) = (3 * (y * w + x), 3 * (y * w + (w - 1 - x)));
            out.pixels[d..d + 3].copy_from_slice(&img.pixels[s..s + 3]);
        }
    }
    out
}

pub fn flip_vertical(img: &LabeledImage) -> LabeledImage {
    let mut out = img.clone();
    let row = 3 * img.width;
    for y in 0..img.height {
        let s = (img.height - 1 - y) * row;
        out.pixels[y * row..(y + 1) * row].copy_from_slice(&img.pixels[s..s + row]);
    }
    out
}

/// Rotate by `degrees` and scale by `zoom` about the image center, bilinear
/// sampling with edge replication.
pub fn rotate_zoom(img: &LabeledImage, degrees: f64, zoom: f64) -> LabeledImage {
    let (w, h) = (img.width, img.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let sample = |x: f64, y: f64, c: usize| -> f64 {
        let x = x.clamp(0.0, (w - 1) as f64);
        let y = y.clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let p = |xx: usize, yy: usize| img.pixels[3 * (yy * w + xx) + c] as f64;
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    };
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            // inverse map: output pixel back into the source
            let (dx, dy) = ((x as f64 - cx) / zoom, (y as f64 - cy) / zoom);
            let sx = cx + dx * cos + dy * sin;
            let sy = cy - dx * sin + dy * cos;
            for c in 0..3 {
                out.pixels[3 * (y * w + x) + c] = sample(sx, sy, c).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

/// Grow `images` to exactly `target_count`: originals first, then transformed
/// copies of uniformly chosen parents, ids `<parent>~aug<n>`.
pub fn augment(images: &[LabeledImage], target_count: usize, seed: u64) -> Result<Vec<LabeledImage>, VisionError> {
    augment_with(images, target_count, seed, &AugmentRanges::default())
}

pub fn augment_with(
    images: &[LabeledImage],
    target_count: usize,
    seed: u64,
    ranges: &AugmentRanges,
) -> Result<Vec<LabeledImage>, VisionError> {
    if images.is_empty() {
        return Err(VisionError::Dataset("cannot augment an empty image set".into()));
    }
    if target_count < images.len() {
        return Err(VisionError::Config(format!(
            "target {target_count} is below the {} input images",
            images.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = images.to_vec();
    for n in 0..target_count - images.len() {
        let parent = &images[rng.random_range(0..images.len())];
        let angle = rng.random_range(-ranges.max_rotation..=ranges.max_rotation);
        let zoom = rng.random_range(ranges.zoom.0..=ranges.zoom.1);
        let hflip = rng.random_bool(ranges.flip_probability);
        let vflip = rng.random_bool(ranges.flip_probability);
        let mut img = rotate_zoom(parent, angle, zoom);
        if hflip {
            img = flip_horizontal(&img);
        }
        if vflip {
            img = flip_vertical(&img);
        }
        img.source_id = format!("{}~aug{n}", parent.source_id);
        out.push(img);
    }
    Ok(out)
}

/// The original id an augmented image descends from.
pub fn parent_id(source_id: &str) -> &str {
    source_id.split_once("~aug").map_or(source_id, |(p, _)| p)
}
