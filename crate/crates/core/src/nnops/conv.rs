use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Output extent `ceil(n / stride)`; when the total padding is odd the
    /// extra row/column goes on the bottom/right.
    Same,
    Valid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvKind {
    /// Kernel `(kh, kw, in_ch, out_ch)`.
    Standard,
    /// Kernel `(kh, kw, ch, 1)`, one filter per channel.
    Depthwise,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvSpec {
    pub kind: ConvKind,
    pub kernel: Tensor,
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub padding: Padding,
}

impl ConvSpec {
    pub fn new(
        kind: ConvKind,
        kernel: Tensor,
        bias: Option<Tensor>,
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        let spec = ConvSpec {
            kind,
            kernel,
            bias,
            stride,
            padding,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let [_, _, _, out] = self.kernel_dims()?;
        if self.kind == ConvKind::Depthwise && out != 1 {
            return Err(Error::Shape(format!(
                "depthwise kernel must be (kh, kw, ch, 1), got {:?}",
                self.kernel.dims()
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("conv stride must be >= 1".into()));
        }
        if let Some(bias) = &self.bias {
            if bias.dims() != [self.out_channels()] {
                return Err(Error::Shape(format!(
                    "bias dims {:?} do not match {} output channels",
                    bias.dims(),
                    self.out_channels()
                )));
            }
        }
        Ok(())
    }

    fn kernel_dims(&self) -> Result<[usize; 4]> {
        match *self.kernel.dims() {
            [kh, kw, i, o] => Ok([kh, kw, i, o]),
            ref d => Err(Error::Shape(format!("conv kernel must be rank 4, got {d:?}"))),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.dims()[2]
    }

    pub fn out_channels(&self) -> usize {
        match self.kind {
            ConvKind::Standard => self.kernel.dims()[3],
            ConvKind::Depthwise => self.kernel.dims()[2],
        }
    }
}

/// Per-channel inference-time batch normalization statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub moving_mean: Tensor,
    pub moving_variance: Tensor,
    pub epsilon: f32,
}

impl BatchNormParams {
    pub fn new(
        gamma: Tensor,
        beta: Tensor,
        moving_mean: Tensor,
        moving_variance: Tensor,
        epsilon: f32,
    ) -> Result<Self> {
        let bn = BatchNormParams {
            gamma,
            beta,
            moving_mean,
            moving_variance,
            epsilon,
        };
        bn.validate()?;
        Ok(bn)
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gamma.len();
        for (name, t) in [
            ("gamma", &self.gamma),
            ("beta", &self.beta),
            ("mean", &self.moving_mean),
            ("variance", &self.moving_variance),
        ] {
            if t.dims() != [n] {
                return Err(Error::Shape(format!(
                    "batch-norm {name} dims {:?}, expected [{n}]",
                    t.dims()
                )));
            }
            t.ensure_finite(name)?;
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("batch-norm epsilon {} < 0", self.epsilon)));
        }
        if let Some(i) = self
            .moving_variance
            .data()
            .iter()
            .position(|&v| v < 0.0 || v + self.epsilon <= 0.0)
        {
            return Err(Error::Numeric(format!(
                "batch-norm channel {i}: variance {} with epsilon {} is not positive",
                self.moving_variance.data()[i],
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Per-channel `(scale, shift)` so that `bn(x) = x * scale + shift`.
    fn affine(&self) -> (Vec<f32>, Vec<f32>) {
        let scale: Vec<f32> = self
            .gamma
            .data()
            .iter()
            .zip(self.moving_variance.data())
            .map(|(&g, &v)| g / (v + self.epsilon).sqrt())
            .collect();
        let shift = self
            .beta
            .data()
            .iter()
            .zip(self.moving_mean.data())
            .zip(&scale)
            .map(|((&b, &m), &s)| b - m * s)
            .collect();
        (scale, shift)
    }
}

/// Output extent and leading pad for one spatial axis.
pub fn output_extent(n: usize, k: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    match padding {
        Padding::Same => {
            let out = n.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(n);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if n < k {
                return Err(Error::Shape(format!(
                    "valid conv: input extent {n} smaller than kernel {k}"
                )));
            }
            Ok(((n - k) / stride + 1, 0))
        }
    }
}

struct Geometry {
    batch: usize,
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    pad_top: usize,
    pad_left: usize,
}

fn geometry(input: &Tensor, spec: &ConvSpec, kind: ConvKind) -> Result<Geometry> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::Shape(format!(
            "expected a {kind:?} conv spec, got {:?}",
            spec.kind
        )));
    }
    let (batch, h, w, cin) = input.as_nhwc()?;
    let [kh, kw, kin, _] = spec.kernel_dims()?;
    if cin != kin {
        return Err(Error::Shape(format!(
            "input has {cin} channels but kernel expects {kin}"
        )));
    }
    input.ensure_finite("conv input")?;
    let (oh, pad_top) = output_extent(h, kh, spec.stride, spec.padding)?;
    let (ow, pad_left) = output_extent(w, kw, spec.stride, spec.padding)?;
    Ok(Geometry {
        batch,
        h,
        w,
        cin,
        kh,
        kw,
        oh,
        ow,
        pad_top,
        pad_left,
    })
}

#[inline]
fn tap(o: usize, k: usize, stride: usize, pad: usize, n: usize) -> Option<usize> {
    let pos = (o * stride + k).checked_sub(pad)?;
    (pos < n).then_some(pos)
}

/// Standard 2-D convolution over an NHWC input.
pub fn conv2d(input: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let g = geometry(input, spec, ConvKind::Standard)?;
    let cout = spec.out_channels();
    let kernel = spec.kernel.data();
    let x = input.data();
    let mut out = vec![0.0f32; g.batch * g.oh * g.ow * cout];

    for b in 0..g.batch {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let base = ((b * g.oh + oy) * g.ow + ox) * cout;
                let acc = &mut out[base..base + cout];
                if let Some(bias) = &spec.bias {
                    acc.copy_from_slice(bias.data());
                }
                for ky in 0..g.kh {
                    let Some(iy) = tap(oy, ky, spec.stride, g.pad_top, g.h) else {
                        continue;
                    };
                    for kx in 0..g.kw {
                        let Some(ix) = tap(ox, kx, spec.stride, g.pad_left, g.w) else {
                            continue;
                        };
                        let px = &x[((b * g.h + iy) * g.w + ix) * g.cin..][..g.cin];
                        let kbase = (ky * g.kw + kx) * g.cin * cout;
                        let ktap = &kernel[kbase..kbase + g.cin * cout];
                        for (&a, krow) in px.iter().zip(ktap.chunks_exact(cout)) {
                            if a == 0.0 {
                                continue;
                            }
                            for (o, &k) in acc.iter_mut().zip(krow) {
                                *o += a * k;
                            }
                        }
                    }
                }
            }
        }
    }
    finish(vec![g.batch, g.oh, g.ow, cout], out)
}

/// Per-channel 2-D convolution; channel count is preserved.
pub fn depthwise_conv2d(input: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let g = geometry(input, spec, ConvKind::Depthwise)?;
    let c = g.cin;
    let kernel = spec.kernel.data();
    let x = input.data();
    let mut out = vec![0.0f32; g.batch * g.oh * g.ow * c];

    for b in 0..g.batch {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let base = ((b * g.oh + oy) * g.ow + ox) * c;
                let acc = &mut out[base..base + c];
                if let Some(bias) = &spec.bias {
                    acc.copy_from_slice(bias.data());
                }
                for ky in 0..g.kh {
                    let Some(iy) = tap(oy, ky, spec.stride, g.pad_top, g.h) else {
                        continue;
                    };
                    for kx in 0..g.kw {
                        let Some(ix) = tap(ox, kx, spec.stride, g.pad_left, g.w) else {
                            continue;
                        };
                        let px = &x[((b * g.h + iy) * g.w + ix) * c..][..c];
                        let k = &kernel[(ky * g.kw + kx) * c..][..c];
                        for ((o, &a), &kv) in acc.iter_mut().zip(px).zip(k) {
                            *o += a * kv;
                        }
                    }
                }
            }
        }
    }
    finish(vec![g.batch, g.oh, g.ow, c], out)
}

fn finish(dims: Vec<usize>, data: Vec<f32>) -> Result<Tensor> {
    let out = Tensor::new(dims, data)?;
    out.ensure_finite("conv output")?;
    Ok(out)
}

/// Applies inference-time batch normalization over the channel axis.
pub fn batchnorm(input: &Tensor, bn: &BatchNormParams) -> Result<Tensor> {
    bn.validate()?;
    let c = *input.dims().last().unwrap_or(&0);
    if c != bn.len() {
        return Err(Error::Shape(format!(
            "batch-norm over {} channels applied to input with {c}",
            bn.len()
        )));
    }
    let (scale, shift) = bn.affine();
    let mut out = input.clone();
    for px in out.data_mut().chunks_exact_mut(c) {
        for ((v, &s), &t) in px.iter_mut().zip(&scale).zip(&shift) {
            *v = *v * s + t;
        }
    }
    out.ensure_finite("batch-norm output")?;
    Ok(out)
}

/// Folds `bn` into `spec` so a single convolution computes conv-then-normalize.
pub fn fold_batchnorm(spec: &ConvSpec, bn: &BatchNormParams) -> Result<ConvSpec> {
    spec.validate()?;
    bn.validate()?;
    let cout = spec.out_channels();
    if bn.len() != cout {
        return Err(Error::Shape(format!(
            "batch-norm has {} channels but conv produces {cout}",
            bn.len()
        )));
    }
    let (scale, _) = bn.affine();
    let mut kernel = spec.kernel.clone();
    // In both kernel layouts the output channel is the fastest-varying
    // index among the trailing `cout` elements.
    for chunk in kernel.data_mut().chunks_exact_mut(cout) {
        for (k, &s) in chunk.iter_mut().zip(&scale) {
            *k *= s;
        }
    }
    let bias: Vec<f32> = (0..cout)
        .map(|o| {
            let b = spec.bias.as_ref().map_or(0.0, |b| b.data()[o]);
            bn.beta.data()[o] + (b - bn.moving_mean.data()[o]) * scale[o]
        })
        .collect();
    ConvSpec::new(
        spec.kind,
        kernel,
        Some(Tensor::new(vec![cout], bias)?),
        spec.stride,
        spec.padding,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(dims: &[usize]) -> Tensor {
        Tensor::filled(dims.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn identity_pointwise() {
        let data: Vec<f32> = (0..2 * 3 * 4 * 3).map(|i| i as f32 * 0.25 - 3.0).collect();
        let x = Tensor::new(vec![2, 3, 4, 3], data).unwrap();
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let spec = ConvSpec::new(
            ConvKind::Standard,
            Tensor::new(vec![1, 1, 3, 3], eye).unwrap(),
            Some(Tensor::zeros(vec![3]).unwrap()),
            1,
            Padding::Same,
        )
        .unwrap();
        assert_eq!(conv2d(&x, &spec).unwrap(), x);
    }

    #[test]
    fn counting_case() {
        let spec = ConvSpec::new(ConvKind::Standard, ones(&[3, 3, 1, 1]), None, 1, Padding::Valid).unwrap();
        let out = conv2d(&ones(&[1, 3, 3, 1]), &spec).unwrap();
        assert_eq!(out.dims(), &[1, 1, 1, 1]);
        assert_eq!(out.data(), &[9.0]);
    }

    #[test]
    fn same_padding_is_bottom_right_heavy() {
        // n=4, k=3, s=2: out 2, total pad 1, all of it after the data.
        assert_eq!(output_extent(4, 3, 2, Padding::Same).unwrap(), (2, 0));
        assert_eq!(output_extent(224, 3, 2, Padding::Same).unwrap(), (112, 0));
        assert_eq!(output_extent(5, 3, 1, Padding::Same).unwrap(), (5, 1));
        // Top-left tap of a 2x2 all-ones kernel at stride 2 on 4x4 ones sees no padding.
        let spec = ConvSpec::new(ConvKind::Standard, ones(&[3, 3, 1, 1]), None, 2, Padding::Same).unwrap();
        let out = conv2d(&ones(&[1, 4, 4, 1]), &spec).unwrap();
        assert_eq!(out.data(), &[9.0, 6.0, 6.0, 4.0]);
    }

    #[test]
    fn channel_mismatch_names_both() {
        let spec = ConvSpec::new(ConvKind::Standard, ones(&[1, 1, 2, 1]), None, 1, Padding::Same).unwrap();
        let err = conv2d(&ones(&[1, 2, 2, 3]), &spec).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('3') && msg.contains('2'), "{msg}");
    }

    #[test]
    fn non_finite_input() {
        let spec = ConvSpec::new(ConvKind::Standard, ones(&[1, 1, 1, 1]), None, 1, Padding::Same).unwrap();
        let mut x = ones(&[1, 2, 2, 1]);
        x.data_mut()[3] = f32::NAN;
        assert!(matches!(conv2d(&x, &spec), Err(Error::Numeric(_))));
    }

    #[test]
    fn depthwise_delta_and_zero_channel() {
        let mut k = vec![0.0; 3 * 3 * 2];
        k[(3 + 1) * 2] = 1.0;
        k[(3 + 1) * 2 + 1] = 1.0;
        let bias = Tensor::new(vec![2], vec![0.0, 0.5]).unwrap();
        let spec = ConvSpec::new(
            ConvKind::Depthwise,
            Tensor::new(vec![3, 3, 2, 1], k).unwrap(),
            Some(bias),
            1,
            Padding::Same,
        )
        .unwrap();
        let data: Vec<f32> = (0..5 * 5).flat_map(|i| [i as f32, 0.0]).collect();
        let x = Tensor::new(vec![1, 5, 5, 2], data).unwrap();
        let out = depthwise_conv2d(&x, &spec).unwrap();
        for (i, px) in out.data().chunks(2).enumerate() {
            assert_eq!(px[0], i as f32);
            assert_eq!(px[1], 0.5);
        }
    }

    #[test]
    fn depthwise_rejects_standard_kernel() {
        let spec = ConvSpec::new(ConvKind::Standard, ones(&[3, 3, 2, 2]), None, 1, Padding::Same).unwrap();
        assert!(depthwise_conv2d(&ones(&[1, 3, 3, 2]), &spec).is_err());
        assert!(ConvSpec::new(ConvKind::Depthwise, ones(&[3, 3, 2, 2]), None, 1, Padding::Same).is_err());
    }

    fn bn(g: f32, b: f32, m: f32, v: f32, n: usize) -> BatchNormParams {
        let f = |x| Tensor::filled(vec![n], x).unwrap();
        BatchNormParams::new(f(g), f(b), f(m), f(v), 0.0).unwrap()
    }

    #[test]
    fn fold_identity_bn() {
        let kernel = Tensor::new(vec![1, 1, 2, 2], vec![0.3, -1.0, 2.0, 0.25]).unwrap();
        let spec = ConvSpec::new(ConvKind::Standard, kernel.clone(), None, 1, Padding::Same).unwrap();
        let folded = fold_batchnorm(&spec, &bn(1.0, 0.0, 0.0, 1.0, 2)).unwrap();
        assert_eq!(folded.kernel, kernel);
        assert_eq!(folded.bias.unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn fold_pure_scaling() {
        let kernel = Tensor::new(vec![1, 1, 2, 2], vec![0.3, -1.0, 2.0, 0.25]).unwrap();
        let spec = ConvSpec::new(
            ConvKind::Standard,
            kernel.clone(),
            Some(Tensor::zeros(vec![2]).unwrap()),
            1,
            Padding::Same,
        )
        .unwrap();
        let folded = fold_batchnorm(&spec, &bn(2.0, 0.0, 0.0, 1.0, 2)).unwrap();
        let doubled: Vec<f32> = kernel.data().iter().map(|v| v * 2.0).collect();
        assert_eq!(folded.kernel.data(), &doubled[..]);
    }

    #[test]
    fn fold_length_mismatch() {
        let spec = ConvSpec::new(ConvKind::Standard, ones(&[1, 1, 2, 3]), None, 1, Padding::Same).unwrap();
        assert!(matches!(fold_batchnorm(&spec, &bn(1.0, 0.0, 0.0, 1.0, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn bn_rejects_negative_variance() {
        let f = |x| Tensor::filled(vec![2], x).unwrap();
        assert!(BatchNormParams::new(f(1.0), f(0.0), f(0.0), f(-1.0), 1e-3).is_err());
    }
}
