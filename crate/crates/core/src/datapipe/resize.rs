use image::RgbImage;

use crate::error::{Error, Result};
use crate::mobilenet::INPUT_SIZE;
use crate::tensor::Tensor;

/// Bilinear resample with half-pixel centers and clamped borders. Returns
/// interleaved RGB values on the original 0–255 scale.
pub fn resize_bilinear(image: &RgbImage, out_w: usize, out_h: usize) -> Result<Vec<f32>> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w == 0 || h == 0 || out_w == 0 || out_h == 0 {
        return Err(Error::Data(format!("cannot resize {w}×{h} to {out_w}×{out_h}")));
    }
    let src = image.as_raw();
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f32)> {
        let scale = n_in as f32 / n_out as f32;
        (0..n_out)
            .map(|o| {
                let pos = ((o as f32 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f32);
                let i0 = pos.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, pos - i0 as f32)
            })
            .collect()
    };
    let xs = axis(out_w, w);
    let ys = axis(out_h, h);
    let mut out = Vec::with_capacity(out_w * out_h * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let px = |x: usize, y: usize| f32::from(src[(y * w + x) * 3 + c]);
                let top = px(x0, y0) * (1.0 - fx) + px(x1, y0) * fx;
                let bot = px(x0, y1) * (1.0 - fx) + px(x1, y1) * fx;
                out.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    Ok(out)
}

/// Resizes to the model's 224×224 input and scales to `[0, 1]`; shape `(1, 224, 224, 3)`.
pub fn resize_normalize(image: &RgbImage) -> Result<Tensor> {
    let mut data = resize_bilinear(image, INPUT_SIZE, INPUT_SIZE)?;
    for v in &mut data {
        *v = (*v / 255.0).clamp(0.0, 1.0);
    }
    Tensor::new(vec![1, INPUT_SIZE, INPUT_SIZE, 3], data)
}

/// Concatenates `(1, h, w, c)` tensors along the batch axis.
pub fn stack_batch(items: &[Tensor]) -> Result<Tensor> {
    let first = items.first().ok_or_else(|| Error::Shape("cannot stack zero tensors".into()))?;
    let (_, h, w, c) = first.as_nhwc()?;
    let mut data = Vec::with_capacity(items.len() * first.len());
    for t in items {
        if t.dims() != [1, h, w, c] {
            return Err(Error::Shape(format!("cannot stack {:?} with {:?}", t.dims(), first.dims())));
        }
        data.extend_from_slice(t.data());
    }
    Tensor::new(vec![items.len(), h, w, c], data)
}
