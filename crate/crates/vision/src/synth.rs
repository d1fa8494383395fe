//! Procedural geranium leaves. A green ellipse on a gray background;
//! drought shifts it toward yellow-brown and dries the margin, rust adds
//! 5 to 15 separate orange pustules.

use std::f64::consts::PI;

use aerogh_core::simcore::DiseaseClass;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::imaging::LabeledImage;

pub const SYNTH_SIZE: usize = 64;

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn uniform3(rng: &mut ChaCha8Rng, lo: [f64; 3], hi: [f64; 3]) -> [f64; 3] {
    [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]), rng.random_range(lo[2]..hi[2])]
}

/// A 64×64 leaf of `class`; every parameter comes from `seed`.
pub fn generate_synthetic_leaf(class: DiseaseClass, seed: u64) -> LabeledImage {
    generate_with_id(class, seed, format!("{}-{seed}", class.name()))
}

pub fn generate_with_id(class: DiseaseClass, seed: u64, source_id: String) -> LabeledImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class.index() as u64);
    let n = SYNTH_SIZE;

    let gray = rng.random_range(110.0..150.0);
    let background = uniform3(&mut rng, [gray - 5.0; 3], [gray + 5.0; 3]);
    let cx = n as f64 / 2.0 + rng.random_range(-4.0..4.0);
    let cy = n as f64 / 2.0 + rng.random_range(-4.0..4.0);
    let a = rng.random_range(20.0..28.0);
    let b = rng.random_range(13.0..19.0);
    let theta = rng.random_range(0.0..PI);
    let (sin, cos) = theta.sin_cos();
    let green = uniform3(&mut rng, [50.0, 130.0, 40.0], [80.0, 170.0, 70.0]);

    let drought = (class == DiseaseClass::Drought).then(|| {
        let severity = rng.random_range(0.5..0.9);
        let yellow = uniform3(&mut rng, [185.0, 150.0, 60.0], [205.0, 170.0, 80.0]);
        let edge = rng.random_range(0.6..1.0);
        (severity, yellow, edge)
    });

    // leaf-frame coordinates and normalized radius of a pixel center
    let frame = |x: f64, y: f64| {
        let (dx, dy) = (x - cx, y - cy);
        let u = dx * cos + dy * sin;
        let v = -dx * sin + dy * cos;
        (u, v, ((u / a).powi(2) + (v / b).powi(2)).sqrt())
    };

    let mut pustules: Vec<(f64, f64, f64)> = Vec::new();
    if class == DiseaseClass::Rust {
        let want = rng.random_range(5..=15usize);
        let mut attempts = 0;
        while pustules.len() < want && attempts < 20_000 {
            attempts += 1;
            let r = rng.random_range(2..=4usize) as f64;
            let px = rng.random_range(0.0..n as f64);
            let py = rng.random_range(0.0..n as f64);
            let (_, _, rho) = frame(px, py);
            if rho + r / b > 0.9 {
                continue;
            }
            if pustules.iter().all(|&(qx, qy, qr)| ((px - qx).powi(2) + (py - qy).powi(2)).sqrt() > r + qr + 2.0) {
                pustules.push((px, py, r));
            }
        }
    }
    let orange = uniform3(&mut rng, [220.0, 110.0, 20.0], [245.0, 140.0, 45.0]);
    let brown = [120.0, 75.0, 35.0];

    let noise = Normal::new(0.0, 3.0).expect("constant sigma");
    let mut pixels = Vec::with_capacity(3 * n * n);
    for y in 0..n {
        for x in 0..n {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let (_, v, rho) = frame(px, py);
            let mut c = if rho <= 1.0 {
                let mut leaf = green.map(|ch| ch * (1.0 - 0.15 * rho * rho));
                if v.abs() < 0.8 {
                    leaf = leaf.map(|ch| ch + 25.0);
                }
                if let Some((severity, yellow, edge)) = drought {
                    leaf = mix(leaf, yellow, severity);
                    if rho > 0.6 {
                        leaf = mix(leaf, brown, (rho - 0.6) / 0.4 * edge);
                    }
                }
                leaf
            } else {
                background
            };
            if pustules.iter().any(|&(qx, qy, r)| (px - qx).powi(2) + (py - qy).powi(2) <= r * r) {
                c = orange;
            }
            for ch in c {
                pixels.push((ch + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    LabeledImage::new(n, n, pixels, class, source_id).expect("sized above")
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `per_class` leaves of each class, ids `<class>-<i>`.
pub fn synthesize_dataset(per_class: usize, seed: u64) -> Vec<LabeledImage> {
    let mut out = Vec::with_capacity(3 * per_class);
    for class in DiseaseClass::ALL {
        for i in 0..per_class {
            let s = splitmix(seed ^ splitmix(((class.index() as u64) << 32) | i as u64));
            out.push(generate_with_id(class, s, format!("{}-{i:05}", class.name())));
        }
    }
    out
}

/// One imaging session over the greenhouse: a leaf per plant drawn from its
/// current health tag, ids `plant<k>-day<d>`.
pub fn capture_session(plant_health: &[DiseaseClass], day: u32, seed: u64) -> Vec<LabeledImage> {
    plant_health
        .iter()
        .enumerate()
        .map(|(k, class)| {
            let s = splitmix(seed ^ splitmix(((day as u64) << 32) | k as u64));
            generate_with_id(*class, s, format!("plant{k}-day{day}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel_mean(img: &LabeledImage, c: usize) -> f64 {
        img.pixels.iter().skip(c).step_by(3).map(|&v| v as f64).sum::<f64>() / (img.width * img.height) as f64
    }

    #[test]
    fn deterministic() {
        for class in DiseaseClass::ALL {
            assert_eq!(generate_synthetic_leaf(class, 9), generate_synthetic_leaf(class, 9));
            assert_ne!(generate_synthetic_leaf(class, 9).pixels, generate_synthetic_leaf(class, 10).pixels);
        }
    }

    #[test]
    fn healthy_is_greener_than_red() {
        for seed in 0..50 {
            let img = generate_synthetic_leaf(DiseaseClass::Healthy, seed);
            assert!(channel_mean(&img, 1) > channel_mean(&img, 0), "seed {seed}");
        }
    }

    #[test]
    fn dataset_ids_are_unique() {
        let ds = synthesize_dataset(20, 1);
        assert_eq!(ds.len(), 60);
        let ids: std::collections::HashSet<_> = ds.iter().map(|i| i.source_id.clone()).collect();
        assert_eq!(ids.len(), 60);
    }

    #[test]
    fn session_follows_plant_health() {
        let health = [DiseaseClass::Healthy, DiseaseClass::Rust];
        let imgs = capture_session(&health, 24, 3);
        assert_eq!(imgs[1].label, DiseaseClass::Rust);
        assert_eq!(imgs[1].source_id, "plant1-day24");
    }
}
