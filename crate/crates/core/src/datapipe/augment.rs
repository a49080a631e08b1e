use image::RgbImage;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FillMode {
    /// Pixels mapped from outside the source repeat the nearest border pixel.
    EdgeReplicate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentConfig {
    pub rotation_deg: f32,
    pub shift_frac: f32,
    pub zoom_frac: f32,
    pub hflip: bool,
    pub fill: FillMode,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rotation_deg: 20.0,
            shift_frac: 0.1,
            zoom_frac: 0.2,
            hflip: true,
            fill: FillMode::EdgeReplicate,
        }
    }
}

impl AugmentConfig {
    /// No rotation, shift, zoom, or flip.
    pub fn identity() -> Self {
        AugmentConfig {
            rotation_deg: 0.0,
            shift_frac: 0.0,
            zoom_frac: 0.0,
            hflip: false,
            fill: FillMode::EdgeReplicate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let frac = |v: f32| (0.0..1.0).contains(&v);
        if !(self.rotation_deg >= 0.0 && self.rotation_deg.is_finite()) {
            return Err(Error::Config(format!("rotation_deg {} must be >= 0", self.rotation_deg)));
        }
        if !frac(self.shift_frac) || !frac(self.zoom_frac) {
            return Err(Error::Config(format!(
                "shift_frac {} and zoom_frac {} must lie in [0, 1)",
                self.shift_frac, self.zoom_frac
            )));
        }
        Ok(())
    }
}

/// A concrete draw of the augmentation transform. Applied to the image in
/// the order rotation → shift → zoom → flip, all about the image center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineParams {
    /// Counter-clockwise as displayed.
    pub rotation_deg: f32,
    /// Pixels, positive to the right.
    pub dx: f32,
    /// Pixels, positive downward.
    pub dy: f32,
    /// Greater than 1 enlarges the content.
    pub scale: f32,
    pub flip: bool,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        rotation_deg: 0.0,
        dx: 0.0,
        dy: 0.0,
        scale: 1.0,
        flip: false,
    };
}

fn symmetric(rng: &mut impl Rng, half_width: f32) -> f32 {
    if half_width == 0.0 {
        0.0
    } else {
        rng.gen_range(-half_width..=half_width)
    }
}

/// Draws one transform for an image of `width × height`.
pub fn sample_params(cfg: &AugmentConfig, width: u32, height: u32, rng: &mut impl Rng) -> AffineParams {
    let rotation_deg = symmetric(rng, cfg.rotation_deg);
    let dx = symmetric(rng, cfg.shift_frac) * width as f32;
    let dy = symmetric(rng, cfg.shift_frac) * height as f32;
    let scale = 1.0 + symmetric(rng, cfg.zoom_frac);
    let flip = cfg.hflip && rng.gen_bool(0.5);
    AffineParams {
        rotation_deg,
        dx,
        dy,
        scale,
        flip,
    }
}

/// Resamples `image` under `params` in one bilinear pass; output dims equal
/// input dims.
pub fn warp(image: &RgbImage, params: &AffineParams) -> RgbImage {
    let (w, h) = (image.width(), image.height());
    let (cx, cy) = ((w as f32 - 1.0) / 2.0, (h as f32 - 1.0) / 2.0);
    let (sin, cos) = params.rotation_deg.to_radians().sin_cos();
    let src = image.as_raw();
    let (wi, hi) = (w as usize, h as usize);
    let mut out = RgbImage::new(w, h);

    for (oy, row) in out.chunks_exact_mut(wi * 3).enumerate() {
        for (ox, px) in row.chunks_exact_mut(3).enumerate() {
            // Walk the forward chain backwards: flip, zoom, shift, rotation.
            let mut x = ox as f32;
            let y = oy as f32;
            if params.flip {
                x = (w as f32 - 1.0) - x;
            }
            let x = (x - cx) / params.scale + cx - params.dx;
            let y = (y - cy) / params.scale + cy - params.dy;
            let (ux, uy) = (x - cx, y - cy);
            let sx = cos * ux - sin * uy + cx;
            let sy = sin * ux + cos * uy + cy;
            sample(src, wi, hi, sx, sy, px);
        }
    }
    out
}

fn sample(src: &[u8], w: usize, h: usize, x: f32, y: f32, out: &mut [u8]) {
    let x = x.clamp(0.0, (w - 1) as f32);
    let y = y.clamp(0.0, (h - 1) as f32);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f32, y - y0 as f32);
    for c in 0..3 {
        let p = |xx: usize, yy: usize| f32::from(src[(yy * w + xx) * 3 + c]);
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bot = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        let v = top * (1.0 - fy) + bot * fy;
        out[c] = v.round().clamp(0.0, 255.0) as u8;
    }
}

/// Draws a transform from `rng` and applies it.
pub fn augment(image: &RgbImage, cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<RgbImage> {
    cfg.validate()?;
    let params = sample_params(cfg, image.width(), image.height(), rng);
    Ok(warp(image, &params))
}
