//! Straightforward f64 loops used as references. Each returns the value and
//! the sum of absolute terms that went into it, which is the scale errors are
//! measured against.

#[derive(Clone, Copy)]
pub enum Pad {
    Same,
    Valid,
}

/// `(out, pad_before)` along one axis.
pub fn extent(n: usize, k: usize, s: usize, pad: Pad) -> Option<(usize, usize)> {
    match pad {
        Pad::Valid => (n >= k).then(|| ((n - k) / s + 1, 0)),
        Pad::Same => {
            let out = n.div_ceil(s);
            let total = ((out - 1) * s + k).saturating_sub(n);
            Some((out, total / 2))
        }
    }
}

pub struct Out {
    pub dims: Vec<usize>,
    pub value: Vec<f64>,
    pub scale: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn conv2d(
    x: &[f32],
    [n, h, w, ci]: [usize; 4],
    k: &[f32],
    [kh, kw, _, co]: [usize; 4],
    bias: Option<&[f32]>,
    stride: usize,
    pad: Pad,
    depthwise: bool,
) -> Option<Out> {
    let (oh, pt) = extent(h, kh, stride, pad)?;
    let (ow, pl) = extent(w, kw, stride, pad)?;
    let oc = if depthwise { ci } else { co };
    let mut value = vec![0.0; n * oh * ow * oc];
    let mut scale = vec![0.0; n * oh * ow * oc];
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for o in 0..oc {
                    let (mut acc, mut mag) = (0.0f64, 0.0f64);
                    if let Some(bias) = bias {
                        acc += f64::from(bias[o]);
                        mag += f64::from(bias[o]).abs();
                    }
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let iy = (oy * stride + dy) as isize - pt as isize;
                            let ix = (ox * stride + dx) as isize - pl as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let base = ((b * h + iy as usize) * w + ix as usize) * ci;
                            let channels: Vec<(usize, usize)> = if depthwise {
                                vec![(o, (dy * kw + dx) * ci + o)]
                            } else {
                                (0..ci).map(|c| (c, ((dy * kw + dx) * ci + c) * co + o)).collect()
                            };
                            for (c, ki) in channels {
                                let t = f64::from(x[base + c]) * f64::from(k[ki]);
                                acc += t;
                                mag += t.abs();
                            }
                        }
                    }
                    let i = ((b * oh + oy) * ow + ox) * oc + o;
                    value[i] = acc;
                    scale[i] = mag;
                }
            }
        }
    }
    Some(Out {
        dims: vec![n, oh, ow, oc],
        value,
        scale,
    })
}

pub fn global_avg_pool(x: &[f32], [n, h, w, c]: [usize; 4]) -> Out {
    let mut value = vec![0.0; n * c];
    let mut scale = vec![0.0; n * c];
    for b in 0..n {
        for ch in 0..c {
            for p in 0..h * w {
                let v = f64::from(x[(b * h * w + p) * c + ch]);
                value[b * c + ch] += v;
                scale[b * c + ch] += v.abs();
            }
            value[b * c + ch] /= (h * w) as f64;
            scale[b * c + ch] /= (h * w) as f64;
        }
    }
    Out {
        dims: vec![n, c],
        value,
        scale,
    }
}

/// `x (m, k) · w (k, n) + b`, optional relu.
pub fn dense(x: &[f32], w: &[f32], b: &[f32], m: usize, k: usize, n: usize, relu: bool) -> Out {
    let mut value = vec![0.0; m * n];
    let mut scale = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = f64::from(b[j]);
            let mut mag = acc.abs();
            for p in 0..k {
                let t = f64::from(x[i * k + p]) * f64::from(w[p * n + j]);
                acc += t;
                mag += t.abs();
            }
            value[i * n + j] = if relu { acc.max(0.0) } else { acc };
            scale[i * n + j] = mag;
        }
    }
    Out {
        dims: vec![m, n],
        value,
        scale,
    }
}

/// Worst `|got - want| / scale` over all elements.
pub fn worst(got: &[f32], out: &Out) -> f64 {
    assert_eq!(got.len(), out.value.len());
    got.iter()
        .zip(&out.value)
        .zip(&out.scale)
        .map(|((&g, &v), &s)| (f64::from(g) - v).abs() / s.max(1e-12))
        .fold(0.0, f64::max)
}

/// Mean cross-entropy of a two-layer relu head, in f64.
pub fn head_loss(x: &[f64], labels: &[usize], d: usize, w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64]) -> f64 {
    let hidden = b1.len();
    let classes = b2.len();
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let h: Vec<f64> = (0..hidden)
            .map(|j| (b1[j] + (0..d).map(|p| x[r * d + p] * w1[p * hidden + j]).sum::<f64>()).max(0.0))
            .collect();
        let z: Vec<f64> = (0..classes)
            .map(|c| b2[c] + (0..hidden).map(|j| h[j] * w2[j * classes + c]).sum::<f64>())
            .collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = z.iter().map(|v| (v - m).exp()).sum();
        let p = ((z[label] - m).exp() / denom).max(1e-12);
        total -= p.ln();
    }
    total / labels.len() as f64
}
