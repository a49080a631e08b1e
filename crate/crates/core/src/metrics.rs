//! Evaluation artifacts: confusion matrix, accuracy and loss, and per-frame
//! latency.

use std::fmt::Write as _;
use std::time::Instant;

use image::RgbImage;

use crate::datapipe::{resize_normalize, Sample};
use crate::error::{Error, Result};
use crate::extract::extract_features;
use crate::head::{self, HeadParams, LabeledFeatures};
use crate::mobilenet::Model;

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

/// One-vs-rest counts for a single class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

pub fn confusion(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (i, (&p, &t)) in pred.iter().zip(truth).enumerate() {
        if p >= num_classes || t >= num_classes {
            return Err(Error::Data(format!(
                "pair {i} (true {t}, predicted {p}) outside [0, {num_classes})"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        class_names: (0..num_classes).map(|i| i.to_string()).collect(),
    })
}

impl ConfusionMatrix {
    pub fn with_names(mut self, names: &[String]) -> Result<Self> {
        if names.len() != self.num_classes() {
            return Err(Error::Config(format!(
                "{} names for {} classes",
                names.len(),
                self.num_classes()
            )));
        }
        self.class_names = names.to_vec();
        Ok(self)
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.counts[truth].iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: u64 = (0..self.num_classes()).map(|i| self.counts[i][i]).sum();
        trace as f64 / total as f64
    }

    pub fn class_counts(&self, class: usize) -> ClassCounts {
        let tp = self.counts[class][class];
        let fn_ = self.row_sum(class) - tp;
        let fp = (0..self.num_classes()).map(|t| self.counts[t][class]).sum::<u64>() - tp;
        ClassCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fn_ - fp,
        }
    }

    /// Header row of predicted class names, then one row per true class.
    pub fn to_csv(&self) -> String {
        let esc = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_owned()
            }
        };
        let mut out = String::from("true\\pred");
        for n in &self.class_names {
            out.push(',');
            out.push_str(&esc(n));
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            out.push_str(&esc(name));
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub mean_loss: f64,
    pub samples: usize,
}

impl EvalReport {
    pub fn summary(&self) -> String {
        format!(
            "samples: {}\naccuracy: {:.4}\nloss: {:.4}\n",
            self.samples, self.accuracy, self.mean_loss
        )
    }

    /// `key = value` lines, one per statistic plus per-class counts.
    pub fn to_kv(&self) -> String {
        let mut s = format!(
            "samples = {}\naccuracy = {}\nmean_loss = {}\nnum_classes = {}\n",
            self.samples,
            self.accuracy,
            self.mean_loss,
            self.confusion.num_classes()
        );
        for (i, name) in self.confusion.class_names.iter().enumerate() {
            let c = self.confusion.class_counts(i);
            let _ = writeln!(s, "class.{i}.name = {name}");
            let _ = writeln!(s, "class.{i}.tp = {}\nclass.{i}.fp = {}\nclass.{i}.fn = {}\nclass.{i}.tn = {}", c.tp, c.fp, c.fn_, c.tn);
        }
        s
    }
}

/// Scores `head` on already-extracted features.
pub fn evaluate_features(head: &HeadParams, data: &LabeledFeatures, class_names: &[String]) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Data("cannot evaluate an empty split".into()));
    }
    let (pred, probs) = head::predict(head, &data.features)?;
    let onehot = head::onehot(&data.labels, head.num_classes())?;
    let mean_loss = f64::from(head::cross_entropy(&probs, &onehot)?);
    let confusion = confusion(&pred, &data.labels, head.num_classes())?.with_names(class_names)?;
    Ok(EvalReport {
        accuracy: confusion.accuracy(),
        mean_loss,
        samples: data.len(),
        confusion,
    })
}

/// Resize, extract, and predict over `samples` (no augmentation).
pub fn evaluate(model: &Model, head: &HeadParams, samples: &[Sample], class_names: &[String]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Data("cannot evaluate an empty split".into()));
    }
    let features = extract_features(model, samples.len(), 1, None, |i| Ok(samples[i].image.clone()))?;
    let labels = samples.iter().map(|s| s.class_index).collect();
    evaluate_features(head, &LabeledFeatures::new(features, labels)?, class_names)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatencySummary {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub p99: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-frame timings in milliseconds, warmup excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct LatencyReport {
    pub durations_ms: Vec<f64>,
    pub warmup_frames: usize,
    pub summary: LatencySummary,
    pub environment: String,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

impl LatencySummary {
    pub fn from_durations(d: &[f64]) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Data("no durations to summarize".into()));
        }
        let mut s = d.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 };
        Ok(LatencySummary {
            mean: d.iter().sum::<f64>() / n as f64,
            median,
            p95: percentile(&s, 95.0),
            p99: percentile(&s, 99.0),
            min: s[0],
            max: s[n - 1],
        })
    }
}

pub fn environment_note() -> String {
    format!(
        "os={} arch={} available_parallelism={} timed_threads=1",
        std::env::consts::OS,
        std::env::consts::ARCH,
        std::thread::available_parallelism().map_or(1, |n| n.get())
    )
}

impl LatencyReport {
    pub fn from_durations(durations_ms: Vec<f64>, warmup_frames: usize) -> Result<Self> {
        let summary = LatencySummary::from_durations(&durations_ms)?;
        Ok(LatencyReport {
            durations_ms,
            warmup_frames,
            summary,
            environment: environment_note(),
        })
    }

    pub fn summary_text(&self) -> String {
        let s = &self.summary;
        format!(
            "frames: {} (after {} warmup)\nmean: {:.3} ms\nmedian: {:.3} ms\np95: {:.3} ms\np99: {:.3} ms\n",
            self.durations_ms.len(),
            self.warmup_frames,
            s.mean,
            s.median,
            s.p95,
            s.p99
        )
    }

    pub fn to_kv(&self) -> String {
        let s = &self.summary;
        format!(
            "frames = {}\nwarmup_frames = {}\nmean_ms = {}\nmedian_ms = {}\np95_ms = {}\np99_ms = {}\nmin_ms = {}\nmax_ms = {}\nenvironment = {}\n",
            self.durations_ms.len(),
            self.warmup_frames,
            s.mean,
            s.median,
            s.p95,
            s.p99,
            s.min,
            s.max,
            self.environment
        )
    }

    /// One duration per line, full precision.
    pub fn raw_text(&self) -> String {
        self.durations_ms.iter().map(|d| format!("{d}\n")).collect()
    }
}

pub const DEFAULT_WARMUP: usize = 10;
pub const MIN_TIMED_FRAMES: usize = 30;

/// Full single-frame path: resize and normalize, backbone, head, argmax.
pub fn classify_frame(model: &Model, head: &HeadParams, frame: &RgbImage) -> Result<(usize, f32)> {
    let x = resize_normalize(frame)?;
    let f = model.forward_features(&x)?;
    let (idx, probs) = head::predict(head, &f)?;
    Ok((idx[0], probs.data()[idx[0]]))
}

/// Times [`classify_frame`] on every frame on the calling thread.
pub fn bench_latency(model: &Model, head: &HeadParams, frames: &[RgbImage], warmup: usize) -> Result<LatencyReport> {
    if frames.len() < warmup + MIN_TIMED_FRAMES {
        return Err(Error::Config(format!(
            "{} frames given; need at least warmup ({warmup}) + {MIN_TIMED_FRAMES}",
            frames.len()
        )));
    }
    let mut durations = Vec::with_capacity(frames.len() - warmup);
    for (i, frame) in frames.iter().enumerate() {
        let start = Instant::now();
        let out = classify_frame(model, head, frame)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(out);
        if i >= warmup {
            durations.push(ms);
        }
    }
    LatencyReport::from_durations(durations, warmup)
}
