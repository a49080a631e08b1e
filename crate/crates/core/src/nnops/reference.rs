//! Direct-loop convolutions.
//!
//! These compute every output element independently from its definition and
//! are the reference the optimized kernels in this module are held to. They
//! are slow; use them for verification only.

use super::conv::{output_extent, ConvKind, ConvSpec};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn padded(input: &[f32], dims: (usize, usize, usize, usize), b: usize, y: isize, x: isize, c: usize) -> f32 {
    let (_, h, w, ch) = dims;
    if y < 0 || x < 0 || y as usize >= h || x as usize >= w {
        return 0.0;
    }
    input[((b * h + y as usize) * w + x as usize) * ch + c]
}

/// `out[b,y,x,o] = bias[o] + Σ_{ky,kx,i} in[b, y·s+ky−pad, x·s+kx−pad, i] · k[ky,kx,i,o]`.
pub fn conv2d_direct(input: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    if spec.kind != ConvKind::Standard {
        return Err(Error::Shape("conv2d_direct needs a standard kernel".into()));
    }
    let dims = input.as_nhwc()?;
    let (batch, h, w, cin) = dims;
    let kd = spec.kernel.dims();
    let (kh, kw, kin, cout) = (kd[0], kd[1], kd[2], kd[3]);
    if kin != cin {
        return Err(Error::Shape(format!("input has {cin} channels but kernel expects {kin}")));
    }
    let (oh, pt) = output_extent(h, kh, spec.stride, spec.padding)?;
    let (ow, pl) = output_extent(w, kw, spec.stride, spec.padding)?;
    let k = spec.kernel.data();
    let mut out = Vec::with_capacity(batch * oh * ow * cout);
    for b in 0..batch {
        for oy in 0..oh {
            for ox in 0..ow {
                for o in 0..cout {
                    let mut acc = spec.bias.as_ref().map_or(0.0, |t| t.data()[o]);
                    for ky in 0..kh {
                        for kx in 0..kw {
                            for i in 0..cin {
                                let y = (oy * spec.stride + ky) as isize - pt as isize;
                                let x = (ox * spec.stride + kx) as isize - pl as isize;
                                acc += padded(input.data(), dims, b, y, x, i)
                                    * k[((ky * kw + kx) * cin + i) * cout + o];
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    Tensor::new(vec![batch, oh, ow, cout], out)
}

/// `out[b,y,x,c] = bias[c] + Σ_{ky,kx} in[b, y·s+ky−pad, x·s+kx−pad, c] · k[ky,kx,c,0]`.
pub fn depthwise_direct(input: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    if spec.kind != ConvKind::Depthwise {
        return Err(Error::Shape("depthwise_direct needs a depthwise kernel".into()));
    }
    let dims = input.as_nhwc()?;
    let (batch, h, w, ch) = dims;
    let kd = spec.kernel.dims();
    let (kh, kw) = (kd[0], kd[1]);
    if kd[2] != ch {
        return Err(Error::Shape(format!("input has {ch} channels but kernel expects {}", kd[2])));
    }
    let (oh, pt) = output_extent(h, kh, spec.stride, spec.padding)?;
    let (ow, pl) = output_extent(w, kw, spec.stride, spec.padding)?;
    let k = spec.kernel.data();
    let mut out = Vec::with_capacity(batch * oh * ow * ch);
    for b in 0..batch {
        for oy in 0..oh {
            for ox in 0..ow {
                for c in 0..ch {
                    let mut acc = spec.bias.as_ref().map_or(0.0, |t| t.data()[c]);
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let y = (oy * spec.stride + ky) as isize - pt as isize;
                            let x = (ox * spec.stride + kx) as isize - pl as isize;
                            acc += padded(input.data(), dims, b, y, x, c) * k[(ky * kw + kx) * ch + c];
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    Tensor::new(vec![batch, oh, ow, ch], out)
}
