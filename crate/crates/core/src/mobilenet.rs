//! The frozen MobileNetV2 backbone assembled from [`crate::nnops`] kernels.
//!
//! Parameter names follow a fixed convention that external weight
//! converters target:
//!
//! | layer                        | entries                                   |
//! |------------------------------|-------------------------------------------|
//! | stem 3×3 conv                | `stem.conv.kernel`, `stem.conv.bn.*`      |
//! | block `i` expansion 1×1      | `block{i}.expand.kernel`, `….bn.*`        |
//! | block `i` depthwise 3×3      | `block{i}.depthwise.kernel`, `….bn.*`     |
//! | block `i` projection 1×1     | `block{i}.project.kernel`, `….bn.*`       |
//! | final 1×1 conv               | `final.conv.kernel`, `final.conv.bn.*`    |
//! | head                         | `head.fc1.kernel/.bias`, `head.fc2.kernel/.bias` |
//!
//! where `bn.*` is `bn.gamma`, `bn.beta`, `bn.mean`, `bn.variance`. Blocks
//! are numbered from 0; block 0 has no expansion layer. Batch-norm epsilon
//! is read from the `bn_epsilon` metadata key (default `1e-3`).

use rand::Rng;

use crate::error::{Error, Result};
use crate::head::{HeadParams, DEFAULT_HIDDEN};
use crate::nnops::{
    self, batchnorm, conv2d, depthwise_conv2d, fold_batchnorm, output_extent, relu6_inplace,
    BatchNormParams, ConvKind, ConvSpec, Padding,
};
use crate::rng;
use crate::tensor::Tensor;
use crate::weights_io::WeightBundle;

pub const INPUT_SIZE: usize = 224;
pub const FEATURE_DIM: usize = 1280;
pub const DEFAULT_NUM_CLASSES: usize = 36;
pub const DEFAULT_BN_EPSILON: f32 = 1e-3;
pub const SUPPORTED_WIDTHS: [f32; 6] = [0.35, 0.5, 0.75, 1.0, 1.3, 1.4];

/// One stage of inverted-residual blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockConfig {
    pub expansion_factor: usize,
    pub out_channels: usize,
    pub repeats: usize,
    pub first_stride: usize,
}

const fn stage(t: usize, c: usize, n: usize, s: usize) -> BlockConfig {
    BlockConfig {
        expansion_factor: t,
        out_channels: c,
        repeats: n,
        first_stride: s,
    }
}

/// Width-1.0 stage table.
pub const SCHEDULE: [BlockConfig; 7] = [
    stage(1, 16, 1, 1),
    stage(6, 24, 2, 2),
    stage(6, 32, 3, 2),
    stage(6, 64, 4, 2),
    stage(6, 96, 3, 1),
    stage(6, 160, 3, 2),
    stage(6, 320, 1, 1),
];
const STEM_CHANNELS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerActivation {
    Relu6,
    Linear,
}

/// A convolution followed by batch norm and an optional ReLU6.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    name: String,
    kind: ConvKind,
    kernel_dims: [usize; 4],
    stride: usize,
    activation: LayerActivation,
    spec: Option<ConvSpec>,
    /// Present only when batch norm was not folded into `spec`.
    bn: Option<BatchNormParams>,
}

impl ConvLayer {
    fn new(name: String, kind: ConvKind, kernel_dims: [usize; 4], stride: usize, activation: LayerActivation) -> Self {
        ConvLayer {
            name,
            kind,
            kernel_dims,
            stride,
            activation,
            spec: None,
            bn: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ConvKind {
        self.kind
    }

    pub fn kernel_dims(&self) -> [usize; 4] {
        self.kernel_dims
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn activation(&self) -> LayerActivation {
        self.activation
    }

    fn out_channels(&self) -> usize {
        match self.kind {
            ConvKind::Standard => self.kernel_dims[3],
            ConvKind::Depthwise => self.kernel_dims[2],
        }
    }

    fn parameters(&self) -> Vec<(String, Vec<usize>)> {
        let c = self.out_channels();
        let mut v = vec![(format!("{}.kernel", self.name), self.kernel_dims.to_vec())];
        for s in ["gamma", "beta", "mean", "variance"] {
            v.push((format!("{}.bn.{s}", self.name), vec![c]));
        }
        v
    }

    fn load(&mut self, bundle: &WeightBundle, eps: f32, fold: bool) -> Result<()> {
        let get = |suffix: &str| {
            let name = format!("{}.{suffix}", self.name);
            bundle
                .get(&name)
                .cloned()
                .ok_or_else(|| Error::MissingWeights(vec![name]))
        };
        let spec = ConvSpec::new(self.kind, get("kernel")?, None, self.stride, Padding::Same)?;
        let bn = BatchNormParams::new(
            get("bn.gamma")?,
            get("bn.beta")?,
            get("bn.mean")?,
            get("bn.variance")?,
            eps,
        )
        .map_err(|e| Error::Format(format!("{}: {e}", self.name)))?;
        if fold {
            self.spec = Some(fold_batchnorm(&spec, &bn)?);
            self.bn = None;
        } else {
            self.spec = Some(spec);
            self.bn = Some(bn);
        }
        Ok(())
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let spec = self
            .spec
            .as_ref()
            .ok_or_else(|| Error::State(format!("{} has no weights loaded", self.name)))?;
        let mut y = match self.kind {
            ConvKind::Standard => conv2d(x, spec)?,
            ConvKind::Depthwise => depthwise_conv2d(x, spec)?,
        };
        if let Some(bn) = &self.bn {
            y = batchnorm(&y, bn)?;
        }
        if self.activation == LayerActivation::Relu6 {
            relu6_inplace(y.data_mut());
        }
        Ok(y)
    }

    fn checksum(&self) -> u64 {
        let mut h = self.spec.as_ref().map_or(0, |s| {
            s.kernel.checksum() ^ s.bias.as_ref().map_or(0, |b| b.checksum().rotate_left(7))
        });
        if let Some(bn) = &self.bn {
            for t in [&bn.gamma, &bn.beta, &bn.moving_mean, &bn.moving_variance] {
                h = h.rotate_left(11) ^ t.checksum();
            }
        }
        h
    }
}

/// Expand (1×1, ReLU6) → depthwise 3×3 (ReLU6) → linear project (1×1).
#[derive(Clone, Debug)]
pub struct InvertedResidual {
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub residual: bool,
    expand: Option<ConvLayer>,
    depthwise: ConvLayer,
    project: ConvLayer,
}

impl InvertedResidual {
    fn layers(&self) -> impl Iterator<Item = &ConvLayer> {
        self.expand.iter().chain([&self.depthwise, &self.project])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut ConvLayer> {
        self.expand
            .iter_mut()
            .chain([&mut self.depthwise, &mut self.project])
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = match &self.expand {
            Some(e) => e.forward(x)?,
            None => x.clone(),
        };
        y = self.depthwise.forward(&y)?;
        y = self.project.forward(&y)?;
        if self.residual {
            nnops::add_assign(&mut y, x)?;
        }
        Ok(y)
    }
}

/// The backbone plus an optional classification head.
#[derive(Clone, Debug)]
pub struct Model {
    width: f32,
    stem: ConvLayer,
    blocks: Vec<InvertedResidual>,
    final_conv: ConvLayer,
    feature_dim: usize,
    input_size: usize,
    head: Option<HeadParams>,
    spatial_ledger: Vec<usize>,
    frozen: bool,
    folded: bool,
}

fn make_divisible(v: f32, divisor: usize) -> usize {
    let d = divisor as f32;
    let mut new = ((v + d / 2.0) / d).floor().max(1.0) as usize * divisor;
    new = new.max(divisor);
    if (new as f32) < 0.9 * v {
        new += divisor;
    }
    new
}

/// Instantiates the layer schedule. Parameters are unset until
/// [`load_weights`]; with `num_classes` a zero-initialized head is attached.
pub fn build_model(width: f32, num_classes: Option<usize>) -> Result<Model> {
    if !SUPPORTED_WIDTHS.iter().any(|&w| (w - width).abs() < 1e-6) {
        return Err(Error::Config(format!(
            "unsupported width multiplier {width}; expected one of {SUPPORTED_WIDTHS:?}"
        )));
    }
    let ch = |c: usize| make_divisible(c as f32 * width, 8);
    let relu6 = LayerActivation::Relu6;

    let stem_out = ch(STEM_CHANNELS);
    let stem = ConvLayer::new("stem.conv".into(), ConvKind::Standard, [3, 3, 3, stem_out], 2, relu6);
    let mut size = output_extent(INPUT_SIZE, 3, 2, Padding::Same)?.0;
    let mut ledger = vec![size];

    let mut blocks = Vec::new();
    let mut in_c = stem_out;
    for st in SCHEDULE {
        let out_c = ch(st.out_channels);
        for r in 0..st.repeats {
            let i = blocks.len();
            let stride = if r == 0 { st.first_stride } else { 1 };
            let hidden = in_c * st.expansion_factor;
            let expand = (st.expansion_factor != 1).then(|| {
                ConvLayer::new(format!("block{i}.expand"), ConvKind::Standard, [1, 1, in_c, hidden], 1, relu6)
            });
            let depthwise =
                ConvLayer::new(format!("block{i}.depthwise"), ConvKind::Depthwise, [3, 3, hidden, 1], stride, relu6);
            let project = ConvLayer::new(
                format!("block{i}.project"),
                ConvKind::Standard,
                [1, 1, hidden, out_c],
                1,
                LayerActivation::Linear,
            );
            if stride == 2 {
                size = output_extent(size, 3, 2, Padding::Same)?.0;
                ledger.push(size);
            }
            blocks.push(InvertedResidual {
                in_channels: in_c,
                out_channels: out_c,
                stride,
                residual: stride == 1 && in_c == out_c,
                expand,
                depthwise,
                project,
            });
            in_c = out_c;
        }
    }
    if ledger != [112, 56, 28, 14, 7] {
        return Err(Error::State(format!("spatial ledger {ledger:?} != [112, 56, 28, 14, 7]")));
    }

    let feature_dim = if width > 1.0 { ch(FEATURE_DIM) } else { FEATURE_DIM };
    let final_conv = ConvLayer::new("final.conv".into(), ConvKind::Standard, [1, 1, in_c, feature_dim], 1, relu6);
    let head = num_classes
        .map(|c| {
            if c == 0 {
                return Err(Error::Config("num_classes must be >= 1".into()));
            }
            HeadParams::zeros(feature_dim, DEFAULT_HIDDEN, c)
        })
        .transpose()?;
    Ok(Model {
        width,
        stem,
        blocks,
        final_conv,
        feature_dim,
        input_size: INPUT_SIZE,
        head,
        spatial_ledger: ledger,
        frozen: false,
        folded: false,
    })
}

/// Fills every backbone parameter from `bundle` and freezes the model.
/// Head entries, when all present, are loaded too; other extra entries are
/// ignored.
pub fn load_weights(mut model: Model, bundle: &WeightBundle, fold_bn: bool) -> Result<Model> {
    if model.frozen {
        return Err(Error::State("model weights are already loaded and frozen".into()));
    }
    let mut missing = Vec::new();
    for (name, dims) in model.parameter_shapes() {
        match bundle.get(&name) {
            None => missing.push(name),
            Some(t) if t.dims() != dims.as_slice() => {
                return Err(Error::Shape(format!(
                    "weight '{name}' has dims {:?}, model expects {dims:?}",
                    t.dims()
                )));
            }
            Some(_) => {}
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingWeights(missing));
    }
    let eps = match bundle.meta("bn_epsilon") {
        Some(v) => v
            .parse::<f32>()
            .map_err(|_| Error::Format(format!("bn_epsilon {v:?} is not a number")))?,
        None => DEFAULT_BN_EPSILON,
    };
    for layer in model.layers_mut() {
        layer.load(bundle, eps, fold_bn)?;
    }
    let head_names = ["head.fc1.kernel", "head.fc1.bias", "head.fc2.kernel", "head.fc2.bias"];
    let present = head_names.iter().filter(|n| bundle.get(n).is_some()).count();
    if present == head_names.len() {
        let head = HeadParams::from_bundle(bundle)?;
        if head.in_dim() != model.feature_dim {
            return Err(Error::Shape(format!(
                "head expects {} features, backbone produces {}",
                head.in_dim(),
                model.feature_dim
            )));
        }
        model.head = Some(head);
    } else if present != 0 {
        let missing = head_names
            .iter()
            .filter(|n| bundle.get(n).is_none())
            .map(|n| n.to_string())
            .collect();
        return Err(Error::MissingWeights(missing));
    }
    model.frozen = true;
    model.folded = fold_bn;
    Ok(model)
}

impl Model {
    pub fn width(&self) -> f32 {
        self.width
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn blocks(&self) -> &[InvertedResidual] {
        &self.blocks
    }

    pub fn spatial_ledger(&self) -> &[usize] {
        &self.spatial_ledger
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn is_folded(&self) -> bool {
        self.folded
    }

    pub fn head(&self) -> Option<&HeadParams> {
        self.head.as_ref()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.head.as_ref().map(HeadParams::num_classes)
    }

    /// Replaces the head; the backbone is untouched.
    pub fn with_head(mut self, head: HeadParams) -> Result<Self> {
        if head.in_dim() != self.feature_dim {
            return Err(Error::Shape(format!(
                "head expects {} features, backbone produces {}",
                head.in_dim(),
                self.feature_dim
            )));
        }
        self.head = Some(head);
        Ok(self)
    }

    /// Every conv layer in execution order.
    pub fn layers(&self) -> impl Iterator<Item = &ConvLayer> {
        std::iter::once(&self.stem)
            .chain(self.blocks.iter().flat_map(InvertedResidual::layers))
            .chain(std::iter::once(&self.final_conv))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut ConvLayer> {
        std::iter::once(&mut self.stem)
            .chain(self.blocks.iter_mut().flat_map(InvertedResidual::layers_mut))
            .chain(std::iter::once(&mut self.final_conv))
    }

    /// Names and dims of every backbone parameter, in execution order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        self.layers().flat_map(ConvLayer::parameters).collect()
    }

    /// Kernels plus batch-norm scale and shift; moving statistics excluded.
    pub fn trainable_backbone_params(&self) -> usize {
        self.parameter_shapes()
            .iter()
            .filter(|(n, _)| !n.ends_with(".bn.mean") && !n.ends_with(".bn.variance"))
            .map(|(_, d)| d.iter().product::<usize>())
            .sum()
    }

    pub fn backbone_checksum(&self) -> u64 {
        self.layers().fold(0u64, |h, l| h.rotate_left(5) ^ l.checksum())
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        let (_, h, w, c) = batch.as_nhwc()?;
        if (h, w, c) != (self.input_size, self.input_size, 3) {
            return Err(Error::Shape(format!(
                "model input must be (b, {s}, {s}, 3): images are resized to {s}×{s} before inference; got {:?}",
                batch.dims(),
                s = self.input_size
            )));
        }
        Ok(())
    }

    /// `(b, 224, 224, 3)` images in `[0, 1]` to `(b, feature_dim)` pooled features.
    pub fn forward_features(&self, batch: &Tensor) -> Result<Tensor> {
        if !self.frozen {
            return Err(Error::State("forward called before load_weights".into()));
        }
        self.check_input(batch)?;
        let mut x = self.stem.forward(batch)?;
        for b in &self.blocks {
            x = b.forward(&x)?;
        }
        x = self.final_conv.forward(&x)?;
        nnops::global_avg_pool(&x)
    }

    /// Class probabilities through the attached head.
    pub fn classify(&self, batch: &Tensor) -> Result<Tensor> {
        let head = self
            .head
            .as_ref()
            .ok_or_else(|| Error::State("classify needs a model with a head".into()))?;
        head.probabilities(&self.forward_features(batch)?)
    }
}

/// Random but well-scaled backbone weights for `model`, for tests and
/// demos without a converted checkpoint. Kernels are He-uniform (fan-in
/// scaled, halved variance for linear projections); batch-norm statistics
/// are drawn near identity.
pub fn random_bundle(model: &Model, seed: u64) -> Result<WeightBundle> {
    let mut rng = rng::derive(seed, rng::INIT, 1);
    let mut bundle = WeightBundle::new();
    for layer in model.layers() {
        let [kh, kw, i, o] = layer.kernel_dims;
        let fan_in = match layer.kind {
            ConvKind::Standard => kh * kw * i,
            ConvKind::Depthwise => kh * kw,
        };
        let gain = match layer.activation {
            LayerActivation::Relu6 => 6.0,
            LayerActivation::Linear => 3.0,
        };
        let limit = (gain / fan_in as f32).sqrt();
        let kernel = (0..kh * kw * i * o).map(|_| rng.gen_range(-limit..limit)).collect();
        bundle.insert(format!("{}.kernel", layer.name), Tensor::new(layer.kernel_dims.to_vec(), kernel)?)?;
        let c = layer.out_channels();
        let mut vec = |lo: f32, hi: f32| Tensor::new(vec![c], (0..c).map(|_| rng.gen_range(lo..hi)).collect());
        let gamma = vec(0.8, 1.2)?;
        let beta = vec(-0.1, 0.1)?;
        let mean = vec(-0.1, 0.1)?;
        let var = vec(0.8, 1.2)?;
        bundle.insert(format!("{}.bn.gamma", layer.name), gamma)?;
        bundle.insert(format!("{}.bn.beta", layer.name), beta)?;
        bundle.insert(format!("{}.bn.mean", layer.name), mean)?;
        bundle.insert(format!("{}.bn.variance", layer.name), var)?;
    }
    bundle.set_meta("bn_epsilon", DEFAULT_BN_EPSILON);
    bundle.set_meta("manifest_version", crate::weights_io::MANIFEST_VERSION);
    bundle.set_meta("producer", "slr-core random_bundle");
    Ok(bundle)
}

/// Per-image maximum absolute feature deviation between this engine and a
/// fixture holding `fixture.image{i}` (`(1, 224, 224, 3)` or `(224, 224, 3)`,
/// already scaled to `[0, 1]`) and `fixture.features{i}` entries.
pub fn fixture_deviation(model: &Model, fixture: &WeightBundle) -> Result<Vec<f32>> {
    let mut out = Vec::new();
    for i in 0.. {
        let Some(image) = fixture.get(&format!("fixture.image{i}")) else {
            break;
        };
        let expected = fixture
            .get(&format!("fixture.features{i}"))
            .ok_or_else(|| Error::MissingWeights(vec![format!("fixture.features{i}")]))?;
        let image = match image.rank() {
            3 => image.clone().reshape([&[1][..], image.dims()].concat())?,
            _ => image.clone(),
        };
        let got = model.forward_features(&image)?;
        if got.len() != expected.len() {
            return Err(Error::Shape(format!(
                "fixture.features{i} has {} values, engine produced {}",
                expected.len(),
                got.len()
            )));
        }
        let dev = got
            .data()
            .iter()
            .zip(expected.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        out.push(dev);
    }
    if out.is_empty() {
        return Err(Error::Format("fixture holds no fixture.image0 entry".into()));
    }
    Ok(out)
}
