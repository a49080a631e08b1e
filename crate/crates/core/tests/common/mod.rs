//! Helpers shared by the integration tests: seeded random tensors, a
//! synthetic gesture-image generator, and f64 reference implementations.

#![allow(dead_code)]

pub mod checks;
pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slr_core::datapipe::RgbImage;
use slr_core::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(r: &mut impl Rng, dims: &[usize], lo: f32, hi: f32) -> Tensor {
    let n = dims.iter().product();
    Tensor::new(dims.to_vec(), (0..n).map(|_| r.gen_range(lo..hi)).collect()).unwrap()
}

/// Relative error with a small absolute floor so exact zeros compare sanely.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-6)
}

pub fn max_rel_err(got: &[f32], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter()
        .zip(want)
        .map(|(&g, &w)| rel_err(f64::from(g), w))
        .fold(0.0, f64::max)
}

pub const SHAPES: usize = 10;

const PALETTE: [[f32; 3]; SHAPES] = [
    [230.0, 40.0, 40.0],
    [40.0, 230.0, 40.0],
    [40.0, 40.0, 230.0],
    [230.0, 230.0, 40.0],
    [230.0, 40.0, 230.0],
    [40.0, 230.0, 230.0],
    [240.0, 240.0, 240.0],
    [20.0, 20.0, 20.0],
    [230.0, 140.0, 40.0],
    [120.0, 40.0, 200.0],
];

/// A `size × size` image of gesture-like glyph `class` (0..10) at a random
/// position, scale and angle over a noisy random background. The glyph
/// colour is a per-class palette entry perturbed by up to `jitter`.
pub fn glyph_image(class: usize, size: u32, noise: f32, jitter: f32, r: &mut impl Rng) -> RgbImage {
    let s = size as f32;
    let bg: [f32; 3] = [r.gen_range(60.0..140.0); 3].map(|v| v + r.gen_range(-20.0..20.0));
    let hue = PALETTE[class % SHAPES];
    let fg: [f32; 3] = hue.map(|v| (v + r.gen_range(-jitter..=jitter)).clamp(0.0, 255.0));
    let cx = s * r.gen_range(0.35..0.65);
    let cy = s * r.gen_range(0.35..0.65);
    let radius = s * r.gen_range(0.3..0.42);
    let angle: f32 = r.gen_range(-0.4..0.4);
    let (sin, cos) = angle.sin_cos();
    let mut img = RgbImage::new(size, size);
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = ((x as f32 - cx) / radius, (y as f32 - cy) / radius);
            let u = cos * dx + sin * dy;
            let v = -sin * dx + cos * dy;
            let inside = glyph_contains(class, u, v);
            for c in 0..3 {
                let base = if inside { fg[c] } else { bg[c] };
                let n = r.gen_range(-noise..=noise);
                img.get_pixel_mut(x, y)[c] = (base + n).clamp(0.0, 255.0) as u8;
            }
        }
    }
    img
}

fn glyph_contains(class: usize, u: f32, v: f32) -> bool {
    let d = (u * u + v * v).sqrt();
    match class % SHAPES {
        0 => d < 1.0,                                       // disc
        1 => u.abs() < 0.8 && v.abs() < 0.8,                // square
        2 => d < 1.0 && d > 0.6,                            // ring
        3 => (u.abs() < 0.25 && v.abs() < 1.0) || (v.abs() < 0.25 && u.abs() < 1.0), // plus
        4 => u.abs() < 1.0 && v.abs() < 0.3,                // horizontal bar
        5 => v.abs() < 1.0 && u.abs() < 0.3,                // vertical bar
        6 => u.abs() + v.abs() < 1.0,                       // diamond
        7 => v > -0.8 && v < 0.8 && u.abs() < (0.8 - v) * 0.6, // triangle
        8 => ((u - v).abs() < 0.35 || (u + v).abs() < 0.35) && d < 1.1, // X
        _ => (u.abs() < 0.9 && v.abs() < 0.9) && !(u.abs() < 0.5 && v.abs() < 0.5), // frame
    }
}
