//! Randomized sweeps shared by the per-module tests and the acceptance run.
//! Each returns the worst error it saw, already divided by its scale.

use rand::Rng;
use slr_core::datapipe::{sample_params, split, AffineParams, AugmentConfig, Labeled};
use slr_core::head::{loss_and_grads, HeadParams, LabeledFeatures};
use slr_core::mobilenet::{build_model, load_weights, random_bundle};
use slr_core::nnops::{self, conv2d, depthwise_conv2d, ConvKind, ConvSpec, Padding};
use slr_core::weights_io::{read_bundle, WeightBundle};
use slr_core::{Error, Tensor};

use super::oracle::{self, Pad};
use super::{random_tensor, rng};

fn random_padding(r: &mut impl Rng) -> (Padding, Pad) {
    if r.gen_bool(0.5) {
        (Padding::Same, Pad::Same)
    } else {
        (Padding::Valid, Pad::Valid)
    }
}

/// Standard or depthwise convolution against the f64 loop. Cases whose
/// valid-padding window does not fit must be rejected with a shape error.
pub fn conv_sweep(cases: usize, seed: u64, depthwise: bool) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < cases {
        let dims = [r.gen_range(1..=2), r.gen_range(1..=8), r.gen_range(1..=8), r.gen_range(1..=8)];
        let co = if depthwise { 1 } else { r.gen_range(1..=8) };
        let kdims = [r.gen_range(1..=5), r.gen_range(1..=5), dims[3], co];
        let stride = r.gen_range(1..=3);
        let (padding, pad) = random_padding(&mut r);
        let x = random_tensor(&mut r, &dims, -1.0, 1.0);
        let k = random_tensor(&mut r, &kdims, -1.0, 1.0);
        let out_ch = if depthwise { dims[3] } else { co };
        let bias = r.gen_bool(0.5).then(|| random_tensor(&mut r, &[out_ch], -1.0, 1.0));
        let kind = if depthwise { ConvKind::Depthwise } else { ConvKind::Standard };
        let spec = ConvSpec::new(kind, k.clone(), bias.clone(), stride, padding).unwrap();
        let got = if depthwise {
            depthwise_conv2d(&x, &spec)
        } else {
            conv2d(&x, &spec)
        };
        let want = oracle::conv2d(
            x.data(),
            dims,
            k.data(),
            kdims,
            bias.as_ref().map(|b| b.data()),
            stride,
            pad,
            depthwise,
        );
        match (got, want) {
            (Ok(got), Some(want)) => {
                assert_eq!(got.dims(), &want.dims[..], "dims for {dims:?} k {kdims:?} s {stride}");
                worst = worst.max(oracle::worst(got.data(), &want));
                done += 1;
            }
            (Err(Error::Shape(_)), None) => {}
            (got, want) => panic!(
                "engine and oracle disagree on validity for {dims:?} k {kdims:?}: {:?} vs {}",
                got.map(|t| t.dims().to_vec()),
                want.is_some()
            ),
        }
    }
    worst
}

pub fn pool_sweep(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut shapes: Vec<[usize; 4]> = vec![[2, 7, 7, 1280]];
    while shapes.len() < cases {
        shapes.push([r.gen_range(1..=3), r.gen_range(1..=8), r.gen_range(1..=8), r.gen_range(1..=8)]);
    }
    let mut worst = 0.0f64;
    for dims in shapes {
        let x = random_tensor(&mut r, &dims, -1.0, 6.0);
        let got = nnops::global_avg_pool(&x).unwrap();
        let want = oracle::global_avg_pool(x.data(), dims);
        assert_eq!(got.dims(), &want.dims[..]);
        worst = worst.max(oracle::worst(got.data(), &want));
    }
    worst
}

/// Single dense layers, the `(4, 1280) × (1280, 1024)` head shape, and
/// two-layer chains where the second layer consumes the engine's own
/// first-layer output.
pub fn dense_sweep(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let layer = |r: &mut rand_chacha::ChaCha8Rng, x: &Tensor, n: usize, relu: bool| {
        let (m, k) = x.as_matrix().unwrap();
        let w = random_tensor(r, &[k, n], -1.0, 1.0);
        let b = random_tensor(r, &[n], -1.0, 1.0);
        let act = if relu { nnops::Activation::Relu } else { nnops::Activation::None };
        let got = nnops::dense(x, &w, &b, act).unwrap();
        let want = oracle::dense(x.data(), w.data(), b.data(), m, k, n, relu);
        assert_eq!(got.dims(), &want.dims[..]);
        let err = oracle::worst(got.data(), &want);
        (got, err)
    };
    let x = random_tensor(&mut r, &[4, 1280], 0.0, 6.0);
    let (_, e) = layer(&mut r, &x, 1024, true);
    worst = worst.max(e);
    for _ in 0..cases {
        let (m, k, n1, n2) = (r.gen_range(1..=8), r.gen_range(1..=8), r.gen_range(1..=8), r.gen_range(1..=8));
        let relu = r.gen_bool(0.5);
        let x = random_tensor(&mut r, &[m, k], -1.0, 1.0);
        let (h, e1) = layer(&mut r, &x, n1, relu);
        let (_, e2) = layer(&mut r, &h, n2, false);
        worst = worst.max(e1).max(e2);
    }
    worst
}

pub struct GradReport {
    pub instances: usize,
    pub components: usize,
    pub failures: usize,
    /// Worst `|analytic − numeric| / max(1e-3·|numeric|, 1e-6)`; ≤ 1 passes.
    pub worst: f64,
}

const FD_STEP: f64 = 1e-4;
/// Instances where some hidden pre-activation is closer than this to the
/// relu kink are redrawn, since a step of `FD_STEP` could cross it.
const KINK_MARGIN: f64 = 1e-2;

/// Head gradients against 64-bit central differences on small random heads.
pub fn gradient_sweep(instances: usize, seed: u64) -> GradReport {
    let mut r = rng(seed);
    let mut report = GradReport {
        instances: 0,
        components: 0,
        failures: 0,
        worst: 0.0,
    };
    while report.instances < instances {
        let d = r.gen_range(2..=8);
        let hidden = r.gen_range(2..=5);
        let classes = r.gen_range(2..=3);
        let batch = r.gen_range(1..=4);
        let x = random_tensor(&mut r, &[batch, d], -1.0, 1.0);
        let labels: Vec<usize> = (0..batch).map(|_| r.gen_range(0..classes)).collect();
        let p = HeadParams::from_parts(
            random_tensor(&mut r, &[d, hidden], -1.0, 1.0),
            random_tensor(&mut r, &[hidden], -0.5, 0.5),
            random_tensor(&mut r, &[hidden, classes], -1.0, 1.0),
            random_tensor(&mut r, &[classes], -0.5, 0.5),
        )
        .unwrap();
        let f64s = |t: &Tensor| t.data().iter().map(|&v| f64::from(v)).collect::<Vec<f64>>();
        let xs = f64s(&x);
        let mut ps = [f64s(&p.w1), f64s(&p.b1), f64s(&p.w2), f64s(&p.b2)];
        let loss = |ps: &[Vec<f64>; 4]| oracle::head_loss(&xs, &labels, d, &ps[0], &ps[1], &ps[2], &ps[3]);

        let near_kink = (0..batch).any(|i| {
            (0..hidden).any(|j| {
                let z = ps[1][j] + (0..d).map(|k| xs[i * d + k] * ps[0][k * hidden + j]).sum::<f64>();
                z.abs() < KINK_MARGIN
            })
        });
        if near_kink {
            continue;
        }
        report.instances += 1;

        let (_, grads) = loss_and_grads(&x, &labels, &p).unwrap();
        for (which, g) in [&grads.w1, &grads.b1, &grads.w2, &grads.b2].into_iter().enumerate() {
            for (i, &analytic) in g.data().iter().enumerate() {
                let orig = ps[which][i];
                ps[which][i] = orig + FD_STEP;
                let up = loss(&ps);
                ps[which][i] = orig - FD_STEP;
                let down = loss(&ps);
                ps[which][i] = orig;

                let numeric = (up - down) / (2.0 * FD_STEP);
                let err = (f64::from(analytic) - numeric).abs() / (1e-3 * numeric.abs()).max(1e-6);
                report.components += 1;
                if err > 1.0 {
                    report.failures += 1;
                }
                report.worst = report.worst.max(err);
            }
        }
    }
    report
}

/// Folded and unfolded random-weight backbones on `inputs` random images;
/// worst absolute feature difference.
pub fn backbone_fold_gap(inputs: usize, seed: u64) -> f32 {
    let model = build_model(1.0, None).unwrap();
    let bundle = random_bundle(&model, seed).unwrap();
    let folded = load_weights(model.clone(), &bundle, true).unwrap();
    let plain = load_weights(model, &bundle, false).unwrap();
    let mut r = rng(seed ^ 0xf01d);
    let mut worst = 0.0f32;
    for _ in 0..inputs {
        let x = random_tensor(&mut r, &[1, 224, 224, 3], 0.0, 1.0);
        let a = folded.forward_features(&x).unwrap();
        let b = plain.forward_features(&x).unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            worst = worst.max((u - v).abs());
        }
    }
    worst
}

/// 30 rows of 1280-dim non-negative features in 3 well separated clusters.
pub fn separable_fixture(seed: u64) -> LabeledFeatures {
    let mut r = rng(seed);
    let (n, d, classes) = (30, 1280, 3);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for j in 0..d {
            let lift = if j % classes == c { 2.0 } else { 0.0 };
            data.push(lift + r.gen_range(0.0..1.0f32));
        }
        labels.push(c);
    }
    LabeledFeatures::new(Tensor::new(vec![n, d], data).unwrap(), labels).unwrap()
}

/// Draws `draws` default transforms for a `w × h` image and returns the
/// ones outside the configured ranges.
pub fn augment_bound_violations(draws: usize, seed: u64, w: u32, h: u32) -> Vec<AffineParams> {
    let cfg = AugmentConfig::default();
    let mut r = rng(seed);
    (0..draws)
        .map(|_| sample_params(&cfg, w, h, &mut r))
        .filter(|p| {
            !(p.rotation_deg.abs() <= 20.0
                && p.dx.abs() <= 0.1 * w as f32
                && p.dy.abs() <= 0.1 * h as f32
                && (0.8..=1.2).contains(&p.scale))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Item {
    pub class: usize,
    pub id: usize,
}

impl Labeled for Item {
    fn class_index(&self) -> usize {
        self.class
    }
}

/// Items numbered in input order, `sizes[c]` of class `c`, interleaved.
pub fn profile_items(sizes: &[usize]) -> Vec<Item> {
    let mut items = Vec::new();
    let mut left = sizes.to_vec();
    while left.iter().any(|&n| n > 0) {
        for (class, n) in left.iter_mut().enumerate() {
            if *n > 0 {
                *n -= 1;
                items.push(Item { class, id: items.len() });
            }
        }
    }
    items
}

/// Checks disjointness, coverage, per-class counts, order preservation and
/// seed determinism of one split.
pub fn check_split(sizes: &[usize], ratio: f64, seed: u64) -> Result<(), String> {
    let names: Vec<String> = (0..sizes.len()).map(|c| format!("c{c}")).collect();
    let items = profile_items(sizes);
    let s = split(items.clone(), &names, ratio, seed).map_err(|e| e.to_string())?;
    let again = split(items.clone(), &names, ratio, seed).map_err(|e| e.to_string())?;
    if s.train != again.train || s.val != again.val {
        return Err("same seed gave different membership".into());
    }
    let mut seen = vec![0u8; items.len()];
    for it in s.train.iter().chain(&s.val) {
        seen[it.id] += 1;
    }
    if let Some(id) = seen.iter().position(|&k| k != 1) {
        return Err(format!("item {id} appears {} times", seen[id]));
    }
    for (c, &n) in sizes.iter().enumerate() {
        let got = s.train.iter().filter(|it| it.class == c).count();
        let want = (ratio * n as f64).round() as usize;
        if got != want {
            return Err(format!("class {c} of {n}: {got} train, expected {want}"));
        }
    }
    for part in [&s.train, &s.val] {
        if part.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err("input order not preserved".into());
        }
    }
    Ok(())
}

/// A bundle with 0–6 random entries of rank 1–4 and some metadata.
pub fn random_weight_bundle(r: &mut impl Rng) -> WeightBundle {
    let mut b = WeightBundle::new();
    for i in 0..r.gen_range(0..=6) {
        let rank = r.gen_range(1..=4);
        let dims: Vec<usize> = (0..rank).map(|_| r.gen_range(1..=5)).collect();
        let n: usize = dims.iter().product();
        let data = (0..n)
            .map(|_| match r.gen_range(0..4) {
                0 => f32::from_bits(r.gen::<u32>() & 0x7f7f_ffff) * if r.gen() { 1.0 } else { -1.0 },
                1 => -0.0,
                _ => r.gen_range(-1e3..1e3),
            })
            .collect();
        let name = format!("layer{i}.{}", ["kernel", "bias", "bn.gamma"][r.gen_range(0..3)]);
        b.insert(name, Tensor::new(dims, data).unwrap()).unwrap();
    }
    for k in 0..r.gen_range(0..4) {
        b.set_meta(format!("key{k}"), r.gen::<u32>());
    }
    b
}

/// Bit-level equality, so `-0.0` and payload bits count.
pub fn bundles_identical(a: &WeightBundle, b: &WeightBundle) -> bool {
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    a.metadata() == b.metadata()
        && a.len() == b.len()
        && a.entries()
            .zip(b.entries())
            .all(|((na, ta), (nb, tb))| na == nb && ta.dims() == tb.dims() && bits(ta) == bits(tb))
}

#[derive(Debug, Default)]
pub struct FuzzReport {
    pub cases: usize,
    pub panics: usize,
    pub rejected: usize,
}

/// Applies random corruptions to `bytes` and parses each result, counting
/// panics and rejections. A mutation that still parses is fine as long as
/// it does not panic.
pub fn fuzz_reader(bytes: &[u8], cases: usize, seed: u64) -> FuzzReport {
    let mut r = rng(seed);
    let mut report = FuzzReport::default();
    for _ in 0..cases {
        let mut m = bytes.to_vec();
        match r.gen_range(0..5) {
            0 => {
                let i = r.gen_range(0..m.len());
                m[i] ^= 1 << r.gen_range(0..8);
            }
            1 => m.truncate(r.gen_range(0..m.len())),
            2 => {
                let i = r.gen_range(0..=m.len());
                let extra: Vec<u8> = (0..r.gen_range(1..8)).map(|_| r.gen()).collect();
                m.splice(i..i, extra);
            }
            3 => {
                if m.len() >= 4 {
                    let i = r.gen_range(0..=m.len() - 4);
                    m[i..i + 4].copy_from_slice(&r.gen::<u32>().to_le_bytes());
                }
            }
            _ => {
                for _ in 0..r.gen_range(1..16) {
                    let i = r.gen_range(0..m.len());
                    m[i] = r.gen();
                }
            }
        }
        report.cases += 1;
        match std::panic::catch_unwind(|| read_bundle(&m)) {
            Err(_) => report.panics += 1,
            Ok(Err(_)) => report.rejected += 1,
            Ok(Ok(_)) => {}
        }
    }
    report
}

/// The hand-encoded single-entry file: one `(2, 2)` tensor `[1, 2, 3, 4]`
/// named `w`, no metadata.
pub fn golden_bytes() -> Vec<u8> {
    let mut g = b"SLRW1".to_vec();
    g.extend_from_slice(&1u32.to_le_bytes());
    g.extend_from_slice(&0u32.to_le_bytes());
    g.extend_from_slice(&1u16.to_le_bytes());
    g.push(b'w');
    g.push(2);
    g.extend_from_slice(&2u32.to_le_bytes());
    g.extend_from_slice(&2u32.to_le_bytes());
    for v in [1.0f32, 2.0, 3.0, 4.0] {
        g.extend_from_slice(&v.to_le_bytes());
    }
    g
}
