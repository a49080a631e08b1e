//! The trainable classification head: `dense(1024, relu) → dense(classes) →
//! softmax`, trained with categorical cross-entropy and Adam on cached
//! backbone features.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nnops::{self, matmul, matmul_a_bt, matmul_at_b, Activation};
use crate::rng;
use crate::tensor::Tensor;
use crate::weights_io::WeightBundle;

/// Probabilities are clamped to this before taking the log.
pub const PROB_FLOOR: f32 = 1e-12;
pub const DEFAULT_HIDDEN: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// Gradients share the parameter layout.
pub type HeadGrads = HeadParams;

impl HeadParams {
    /// Glorot-uniform kernels, zero biases.
    pub fn init(in_dim: usize, hidden: usize, classes: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::derive(seed, rng::INIT, 0);
        let mut glorot = |fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
            let data = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..=limit))
                .collect();
            Tensor::new(vec![fan_in, fan_out], data)
        };
        Ok(HeadParams {
            w1: glorot(in_dim, hidden)?,
            b1: Tensor::zeros(vec![hidden])?,
            w2: glorot(hidden, classes)?,
            b2: Tensor::zeros(vec![classes])?,
        })
    }

    pub fn zeros(in_dim: usize, hidden: usize, classes: usize) -> Result<Self> {
        Ok(HeadParams {
            w1: Tensor::zeros(vec![in_dim, hidden])?,
            b1: Tensor::zeros(vec![hidden])?,
            w2: Tensor::zeros(vec![hidden, classes])?,
            b2: Tensor::zeros(vec![classes])?,
        })
    }

    pub fn from_parts(w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Result<Self> {
        let p = HeadParams { w1, b1, w2, b2 };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let (i, h) = self.w1.as_matrix()?;
        let (h2, c) = self.w2.as_matrix()?;
        if h != h2 || self.b1.dims() != [h] || self.b2.dims() != [c] {
            return Err(Error::Shape(format!(
                "inconsistent head dims: w1 {:?}, b1 {:?}, w2 {:?}, b2 {:?}",
                self.w1.dims(),
                self.b1.dims(),
                self.w2.dims(),
                self.b2.dims()
            )));
        }
        let _ = i;
        for (n, t) in self.named() {
            t.ensure_finite(n)?;
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.w1.dims()[0]
    }

    pub fn hidden(&self) -> usize {
        self.w1.dims()[1]
    }

    pub fn num_classes(&self) -> usize {
        self.b2.len()
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn named(&self) -> [(&'static str, &Tensor); 4] {
        [
            ("head.fc1.kernel", &self.w1),
            ("head.fc1.bias", &self.b1),
            ("head.fc2.kernel", &self.w2),
            ("head.fc2.bias", &self.b2),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn to_bundle(&self) -> Result<WeightBundle> {
        let mut b = WeightBundle::new();
        for (n, t) in self.named() {
            b.insert(n, t.clone())?;
        }
        Ok(b)
    }

    pub fn from_bundle(bundle: &WeightBundle) -> Result<Self> {
        let get = |n: &str| {
            bundle
                .get(n)
                .cloned()
                .ok_or_else(|| Error::MissingWeights(vec![n.to_owned()]))
        };
        Self::from_parts(
            get("head.fc1.kernel")?,
            get("head.fc1.bias")?,
            get("head.fc2.kernel")?,
            get("head.fc2.bias")?,
        )
    }

    pub fn checksum(&self) -> u64 {
        self.named()
            .iter()
            .fold(0u64, |acc, (_, t)| acc.rotate_left(17) ^ t.checksum())
    }

    /// `(batch, classes)` logits.
    pub fn logits(&self, features: &Tensor) -> Result<Tensor> {
        let hidden = nnops::dense(features, &self.w1, &self.b1, Activation::Relu)?;
        nnops::dense(&hidden, &self.w2, &self.b2, Activation::None)
    }

    /// `(batch, classes)` class probabilities.
    pub fn probabilities(&self, features: &Tensor) -> Result<Tensor> {
        nnops::softmax(&self.logits(features)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: HeadParams,
    pub v: HeadParams,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(like: &HeadParams) -> Result<Self> {
        let z = HeadParams::zeros(like.in_dim(), like.hidden(), like.num_classes())?;
        Ok(AdamState {
            m: z.clone(),
            v: z,
            step_count: 0,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps_adam: f32,
    pub patience: usize,
    pub hidden_units: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-7,
            patience: 3,
            hidden_units: DEFAULT_HIDDEN,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.hidden_units == 0 {
            return bad("hidden_units must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.eps_adam > 0.0) {
            return bad("eps_adam must be > 0");
        }
        Ok(())
    }

    pub fn write_meta(&self, bundle: &mut WeightBundle) {
        bundle.set_meta("train.epochs", self.epochs);
        bundle.set_meta("train.batch_size", self.batch_size);
        bundle.set_meta("train.learning_rate", self.learning_rate);
        bundle.set_meta("train.beta1", self.beta1);
        bundle.set_meta("train.beta2", self.beta2);
        bundle.set_meta("train.eps_adam", self.eps_adam);
        bundle.set_meta("train.patience", self.patience);
        bundle.set_meta("train.hidden_units", self.hidden_units);
        bundle.set_meta("train.seed", self.seed);
    }
}

/// Rows of backbone features with their class indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFeatures {
    pub features: Tensor,
    pub labels: Vec<usize>,
}

impl LabeledFeatures {
    pub fn new(features: Tensor, labels: Vec<usize>) -> Result<Self> {
        let (rows, _) = features.as_matrix()?;
        if rows != labels.len() {
            return Err(Error::Shape(format!(
                "{rows} feature rows but {} labels",
                labels.len()
            )));
        }
        Ok(LabeledFeatures { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.dims()[1]
    }

    fn check_labels(&self, num_classes: usize, what: &str) -> Result<()> {
        match self.labels.iter().position(|&l| l >= num_classes) {
            None => Ok(()),
            Some(i) => Err(Error::Data(format!(
                "{what} sample {i} has class index {} outside [0, {num_classes})",
                self.labels[i]
            ))),
        }
    }
}

pub fn onehot(labels: &[usize], num_classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0f32; labels.len() * num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::Data(format!("label {l} outside [0, {num_classes})")));
        }
        data[i * num_classes + l] = 1.0;
    }
    Tensor::new(vec![labels.len(), num_classes], data)
}

fn same_dims(a: &Tensor, b: &Tensor) -> Result<(usize, usize)> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!(
            "dims {:?} and {:?} differ",
            a.dims(),
            b.dims()
        )));
    }
    a.as_matrix()
}

/// Mean over the batch of `−Σ_i y_i · ln(max(p_i, 1e-12))`.
pub fn cross_entropy(probs: &Tensor, onehot: &Tensor) -> Result<f32> {
    let (batch, classes) = same_dims(probs, onehot)?;
    let mut total = 0.0f64;
    for r in 0..batch {
        let (p, y) = (probs.row(r), onehot.row(r));
        for i in 0..classes {
            if y[i] != 0.0 {
                total -= f64::from(y[i]) * f64::from(p[i].max(PROB_FLOOR)).ln();
            }
        }
    }
    Ok((total / batch as f64) as f32)
}

/// Gradient of mean cross-entropy with respect to pre-softmax logits:
/// `(softmax(logits) − onehot) / batch`.
pub fn loss_grad_logits(logits: &Tensor, onehot: &Tensor) -> Result<Tensor> {
    let (batch, _) = same_dims(logits, onehot)?;
    let mut g = nnops::softmax(logits)?;
    let inv = 1.0 / batch as f32;
    for (gv, &y) in g.data_mut().iter_mut().zip(onehot.data()) {
        *gv = (*gv - y) * inv;
    }
    Ok(g)
}

struct Forward {
    hidden: Vec<f32>,
    probs: Vec<f32>,
}

fn forward(p: &HeadParams, x: &[f32], batch: usize) -> Forward {
    let (d, h, c) = (p.in_dim(), p.hidden(), p.num_classes());
    let mut hidden = matmul(x, batch, d, p.w1.data(), h);
    for row in hidden.chunks_exact_mut(h) {
        for (v, &b) in row.iter_mut().zip(p.b1.data()) {
            *v = (*v + b).max(0.0);
        }
    }
    let mut probs = matmul(&hidden, batch, h, p.w2.data(), c);
    for row in probs.chunks_exact_mut(c) {
        for (v, &b) in row.iter_mut().zip(p.b2.data()) {
            *v += b;
        }
        nnops::softmax_row(row);
    }
    Forward { hidden, probs }
}

fn batch_loss(probs: &[f32], labels: &[usize], classes: usize) -> (f64, usize) {
    let mut loss = 0.0f64;
    let mut correct = 0;
    for (row, &l) in probs.chunks_exact(classes).zip(labels) {
        loss -= f64::from(row[l].max(PROB_FLOOR)).ln();
        if argmax(row) == l {
            correct += 1;
        }
    }
    (loss, correct)
}

fn col_sums(m: &[f32], cols: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; cols];
    for row in m.chunks_exact(cols) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

fn check_features(params: &HeadParams, features: &Tensor) -> Result<usize> {
    let (batch, d) = features.as_matrix()?;
    if d != params.in_dim() {
        return Err(Error::Shape(format!(
            "features have {d} columns but the head expects {}",
            params.in_dim()
        )));
    }
    features.ensure_finite("features")?;
    Ok(batch)
}

/// Backpropagation through `dense → relu → dense → softmax → cross-entropy`,
/// returning the mean loss alongside the gradients.
pub fn loss_and_grads(features: &Tensor, labels: &[usize], params: &HeadParams) -> Result<(f32, HeadGrads)> {
    let (loss_sum, _, grads) = backprop(features, labels, params)?;
    Ok(((loss_sum / labels.len() as f64) as f32, grads))
}

/// Summed loss, correct count, and mean-loss gradients for one batch.
fn backprop(features: &Tensor, labels: &[usize], params: &HeadParams) -> Result<(f64, usize, HeadGrads)> {
    let batch = check_features(params, features)?;
    let (d, h, c) = (params.in_dim(), params.hidden(), params.num_classes());
    if labels.len() != batch {
        return Err(Error::Shape(format!("{batch} feature rows but {} labels", labels.len())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Data(format!("label {l} outside [0, {c})")));
    }
    let x = features.data();
    let fw = forward(params, x, batch);
    let (loss, correct) = batch_loss(&fw.probs, labels, c);

    let inv = 1.0 / batch as f32;
    let mut dz2 = fw.probs;
    for (row, &l) in dz2.chunks_exact_mut(c).zip(labels) {
        row[l] -= 1.0;
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
    let dw2 = matmul_at_b(&fw.hidden, batch, h, &dz2, c);
    let db2 = col_sums(&dz2, c);
    let mut dz1 = matmul_a_bt(&dz2, batch, c, params.w2.data(), h);
    for (g, &a) in dz1.iter_mut().zip(&fw.hidden) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
    let dw1 = matmul_at_b(x, batch, d, &dz1, h);
    let db1 = col_sums(&dz1, h);

    let grads = HeadParams {
        w1: Tensor::new(vec![d, h], dw1)?,
        b1: Tensor::new(vec![h], db1)?,
        w2: Tensor::new(vec![h, c], dw2)?,
        b2: Tensor::new(vec![c], db2)?,
    };
    Ok((loss, correct, grads))
}

/// Gradients of the mean cross-entropy with respect to every head parameter.
pub fn head_backward(features: &Tensor, onehot: &Tensor, params: &HeadParams) -> Result<HeadGrads> {
    let (rows, classes) = onehot.as_matrix()?;
    if classes != params.num_classes() {
        return Err(Error::Shape(format!(
            "one-hot has {classes} classes but the head outputs {}",
            params.num_classes()
        )));
    }
    let labels = (0..rows)
        .map(|r| {
            let row = onehot.row(r);
            let hot: Vec<usize> = (0..classes).filter(|&i| row[i] != 0.0).collect();
            match hot[..] {
                [l] if row[l] == 1.0 => Ok(l),
                _ => Err(Error::Data(format!("one-hot row {r} is not a unit vector"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(loss_and_grads(features, &labels, params)?.1)
}

/// One bias-corrected Adam update on a flat parameter group.
/// `step` is the 1-based index of this update.
pub fn adam_update(
    params: &mut [f32],
    grads: &[f32],
    m: &mut [f32],
    v: &mut [f32],
    step: u64,
    cfg: &TrainConfig,
) {
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let t = step.min(i32::MAX as u64) as i32;
    let c1 = (1.0 - f64::from(b1).powi(t)) as f32;
    let c2 = (1.0 - f64::from(b2).powi(t)) as f32;
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps_adam);
    }
}

/// Applies one Adam step to every head tensor. A non-finite gradient aborts
/// the step before anything is modified.
pub fn adam_step(params: &mut HeadParams, grads: &HeadGrads, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    for ((name, p), (_, g)) in params.named().iter().zip(grads.named().iter()) {
        if p.dims() != g.dims() {
            return Err(Error::Shape(format!(
                "{name}: parameter dims {:?} vs gradient dims {:?}",
                p.dims(),
                g.dims()
            )));
        }
        g.ensure_finite(&format!("gradient of {name}"))?;
    }
    state.step_count += 1;
    let step = state.step_count;
    let gs = [&grads.w1, &grads.b1, &grads.w2, &grads.b2];
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(gs).zip(ms).zip(vs) {
        adam_update(p.data_mut(), g.data(), m.data_mut(), v.data_mut(), step, cfg);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f32,
    pub train_accuracy: f32,
    pub val_loss: f32,
    pub val_accuracy: f32,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.get(self.best_epoch.checked_sub(1)?)
    }

    /// Tab-separated table with a header row.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy\tbest\n");
        for r in &self.epochs {
            s.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
                r.epoch,
                r.train_loss,
                r.train_accuracy,
                r.val_loss,
                r.val_accuracy,
                u8::from(r.epoch == self.best_epoch)
            ));
        }
        s
    }
}

/// Mean loss and accuracy of `params` on `data`, evaluated in fixed-size chunks.
pub fn evaluate_features(params: &HeadParams, data: &LabeledFeatures) -> Result<(f32, f32)> {
    if data.is_empty() {
        return Err(Error::Data("cannot evaluate an empty set".into()));
    }
    check_features(params, &data.features)?;
    data.check_labels(params.num_classes(), "evaluation")?;
    const CHUNK: usize = 256;
    let d = params.in_dim();
    let x = data.features.data();
    let (mut loss, mut correct) = (0.0f64, 0usize);
    for (start, labels) in (0..).step_by(CHUNK).zip(data.labels.chunks(CHUNK)) {
        let rows = &x[start * d..(start + labels.len()) * d];
        let fw = forward(params, rows, labels.len());
        let (l, c) = batch_loss(&fw.probs, labels, params.num_classes());
        loss += l;
        correct += c;
    }
    let n = data.len() as f64;
    Ok(((loss / n) as f32, (correct as f64 / n) as f32))
}

/// Trains a fresh head on cached features.
pub fn train_head(
    train: &LabeledFeatures,
    val: &LabeledFeatures,
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<(HeadParams, TrainHistory)> {
    train_head_views(std::slice::from_ref(train), val, num_classes, cfg)
}

/// Like [`train_head`], but epoch `e` draws its training rows from
/// `views[e % views.len()]`; each view is one augmented pass over the same
/// training set.
pub fn train_head_views(
    views: &[LabeledFeatures],
    val: &LabeledFeatures,
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<(HeadParams, TrainHistory)> {
    cfg.validate()?;
    let first = views
        .first()
        .filter(|v| !v.is_empty())
        .ok_or_else(|| Error::Config("training set is empty".into()))?;
    if val.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    if num_classes == 0 {
        return Err(Error::Config("num_classes must be >= 1".into()));
    }
    let dim = first.dim();
    for v in views {
        if v.dim() != dim || v.labels != first.labels {
            return Err(Error::Shape("augmented views disagree on rows or labels".into()));
        }
        v.check_labels(num_classes, "training")?;
    }
    if val.dim() != dim {
        return Err(Error::Shape(format!(
            "train features have {dim} columns, validation {}",
            val.dim()
        )));
    }
    val.check_labels(num_classes, "validation")?;

    let mut params = HeadParams::init(dim, cfg.hidden_units, num_classes, cfg.seed)?;
    let mut adam = AdamState::new(&params)?;
    let mut history = TrainHistory::default();
    let mut best: Option<(f32, HeadParams)> = None;
    let mut since_best = 0usize;
    let n = first.len();

    for epoch in 1..=cfg.epochs {
        let view = &views[(epoch - 1) % views.len()];
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::derive(cfg.seed, rng::SHUFFLE, epoch as u64));

        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for idx in order.chunks(cfg.batch_size) {
            let xb = view.features.gather_rows(idx)?;
            let yb: Vec<usize> = idx.iter().map(|&i| view.labels[i]).collect();
            let (l, c, grads) = backprop(&xb, &yb, &params)?;
            loss_sum += l;
            correct += c;
            adam_step(&mut params, &grads, &mut adam, cfg)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
        }
        let (val_loss, val_accuracy) = evaluate_features(&params, val)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: (loss_sum / n as f64) as f32,
            train_accuracy: (correct as f64 / n as f64) as f32,
            val_loss,
            val_accuracy,
        });

        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, params.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > cfg.patience {
                history.stopped_early = epoch < cfg.epochs;
                break;
            }
        }
    }
    let (_, params) = best.expect("at least one epoch ran");
    Ok((params, history))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Predicted class per row and the probability rows behind it.
pub fn predict(params: &HeadParams, features: &Tensor) -> Result<(Vec<usize>, Tensor)> {
    check_features(params, features)?;
    let probs = params.probabilities(features)?;
    let c = params.num_classes();
    let idx = probs.data().chunks_exact(c).map(argmax).collect();
    Ok((idx, probs))
}

/// A trained head plus what is needed to interpret its outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: HeadParams,
    pub class_names: Vec<String>,
    pub config: TrainConfig,
    pub best_epoch: usize,
}

impl Checkpoint {
    pub fn to_bundle(&self) -> Result<WeightBundle> {
        if self.class_names.len() != self.params.num_classes() {
            return Err(Error::Config(format!(
                "{} class names for a head with {} outputs",
                self.class_names.len(),
                self.params.num_classes()
            )));
        }
        let mut b = self.params.to_bundle()?;
        b.set_class_names(&self.class_names);
        self.config.write_meta(&mut b);
        b.set_meta("best_epoch", self.best_epoch);
        b.set_meta("producer", concat!("slr-core ", env!("CARGO_PKG_VERSION")));
        Ok(b)
    }

    pub fn from_bundle(bundle: &WeightBundle) -> Result<Self> {
        let params = HeadParams::from_bundle(bundle)?;
        let class_names = bundle.class_names()?;
        if class_names.len() != params.num_classes() {
            return Err(Error::Format(format!(
                "checkpoint lists {} classes but the head has {} outputs",
                class_names.len(),
                params.num_classes()
            )));
        }
        let d = TrainConfig::default();
        let get = |k: &str| bundle.meta(&format!("train.{k}"));
        fn parse<T: std::str::FromStr>(v: Option<&str>, default: T) -> T {
            v.and_then(|s| s.parse().ok()).unwrap_or(default)
        }
        let config = TrainConfig {
            epochs: parse(get("epochs"), d.epochs),
            batch_size: parse(get("batch_size"), d.batch_size),
            learning_rate: parse(get("learning_rate"), d.learning_rate),
            beta1: parse(get("beta1"), d.beta1),
            beta2: parse(get("beta2"), d.beta2),
            eps_adam: parse(get("eps_adam"), d.eps_adam),
            patience: parse(get("patience"), d.patience),
            hidden_units: params.hidden(),
            seed: parse(get("seed"), d.seed),
        };
        Ok(Checkpoint {
            params,
            class_names,
            config,
            best_epoch: parse(bundle.meta("best_epoch"), 0),
        })
    }
}
