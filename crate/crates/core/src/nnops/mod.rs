//! Framework-free numeric kernels the backbone and head are assembled from.
//!
//! Every function here is a pure function of its arguments. The fast paths
//! in this module are checked against the direct loops in [`reference`].

mod conv;
mod linalg;
pub mod reference;

pub use conv::{
    batchnorm, conv2d, depthwise_conv2d, fold_batchnorm, output_extent, BatchNormParams, ConvKind,
    ConvSpec, Padding,
};
pub(crate) use linalg::{matmul, matmul_a_bt, matmul_at_b};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

/// Elementwise `min(max(x, 0), 6)`.
pub fn relu6(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    relu6_inplace(out.data_mut());
    out
}

pub(crate) fn relu6_inplace(data: &mut [f32]) {
    for v in data {
        *v = v.clamp(0.0, 6.0);
    }
}

pub(crate) fn relu_inplace(data: &mut [f32]) {
    for v in data {
        *v = v.max(0.0);
    }
}

/// Mean over the spatial plane: `(b, h, w, c)` to `(b, c)`.
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor> {
    let (b, h, w, c) = input.as_nhwc()?;
    let plane = h * w;
    if plane == 0 {
        return Err(Error::Shape("global_avg_pool over zero spatial extent".into()));
    }
    let mut out = vec![0.0f32; b * c];
    for (bi, img) in input.data().chunks_exact(plane * c).enumerate() {
        let acc = &mut out[bi * c..(bi + 1) * c];
        for px in img.chunks_exact(c) {
            for (a, &v) in acc.iter_mut().zip(px) {
                *a += v;
            }
        }
        let inv = 1.0 / plane as f32;
        for a in acc.iter_mut() {
            *a *= inv;
        }
    }
    Tensor::new(vec![b, c], out)
}

/// Fully connected layer `F(xW + b)` on a `(batch, in)` input with `(in, out)` weights.
pub fn dense(input: &Tensor, weights: &Tensor, bias: &Tensor, activation: Activation) -> Result<Tensor> {
    let (batch, inp) = input.as_matrix()?;
    let (w_in, w_out) = weights.as_matrix()?;
    if inp != w_in {
        return Err(Error::Shape(format!(
            "dense input has {inp} features but weights expect {w_in}"
        )));
    }
    if bias.dims() != [w_out] {
        return Err(Error::Shape(format!(
            "dense bias dims {:?} do not match {w_out} outputs",
            bias.dims()
        )));
    }
    input.ensure_finite("dense input")?;
    let mut out = matmul(input.data(), batch, inp, weights.data(), w_out);
    for row in out.chunks_exact_mut(w_out) {
        for (o, &b) in row.iter_mut().zip(bias.data()) {
            *o += b;
        }
    }
    if activation == Activation::Relu {
        relu_inplace(&mut out);
    }
    let out = Tensor::new(vec![batch, w_out], out)?;
    out.ensure_finite("dense output")?;
    Ok(out)
}

/// Row-wise softmax of `(batch, classes)` logits, max-subtracted.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let (_, classes) = logits.as_matrix()?;
    logits.ensure_finite("softmax logits")?;
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(classes) {
        softmax_row(row);
    }
    Ok(out)
}

pub(crate) fn softmax_row(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

/// `a += b` elementwise; used for residual connections.
pub fn add_assign(a: &mut Tensor, b: &Tensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!(
            "cannot add dims {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
        *x += y;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(dims: &[usize], data: &[f32]) -> Tensor {
        Tensor::new(dims.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn relu6_clamps() {
        let out = relu6(&t(&[5], &[-1.0, 0.0, 3.0, 6.0, 7.0]));
        assert_eq!(out.data(), &[0.0, 0.0, 3.0, 6.0, 6.0]);
        let z = Tensor::zeros(vec![2, 3]).unwrap();
        assert_eq!(relu6(&z), z);
    }

    #[test]
    fn gap_mean() {
        let out = global_avg_pool(&t(&[1, 2, 2, 1], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(out.dims(), &[1, 1]);
        assert_eq!(out.data(), &[2.5]);
        let c = Tensor::filled(vec![2, 3, 5, 4], 0.7).unwrap();
        let out = global_avg_pool(&c).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.7).abs() < 1e-6));
        assert!(global_avg_pool(&t(&[2, 2], &[0.0; 4])).is_err());
    }

    #[test]
    fn dense_identity_and_clamp() {
        let x = t(&[2, 2], &[1.5, -2.0, 3.0, 4.0]);
        let eye = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let zero = Tensor::zeros(vec![2]).unwrap();
        assert_eq!(dense(&x, &eye, &zero, Activation::None).unwrap(), x);

        let out = dense(
            &t(&[1, 2], &[1.0, 2.0]),
            &t(&[2, 1], &[1.0, 1.0]),
            &t(&[1], &[-5.0]),
            Activation::Relu,
        )
        .unwrap();
        assert_eq!(out.data(), &[0.0]);
    }

    #[test]
    fn dense_inner_mismatch() {
        let err = dense(
            &Tensor::zeros(vec![1, 3]).unwrap(),
            &Tensor::zeros(vec![2, 4]).unwrap(),
            &Tensor::zeros(vec![4]).unwrap(),
            Activation::None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Shape(m) if m.contains('3') && m.contains('2')));
    }

    #[test]
    fn softmax_uniform_and_large() {
        let out = softmax(&t(&[1, 3], &[0.0; 3])).unwrap();
        for &p in out.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-7);
        }
        let out = softmax(&t(&[1, 3], &[1000.0; 3])).unwrap();
        for &p in out.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-7);
        }
        assert!(matches!(
            softmax(&t(&[1, 2], &[f32::INFINITY, 0.0])),
            Err(Error::Numeric(_))
        ));
    }
}
