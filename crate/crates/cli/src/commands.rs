use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use slr_core::datapipe::{
    open_image, parse_manifest, resize_normalize, scan_dataset, split, write_manifest, AugmentConfig,
    ManifestRecord, Partition,
};
use slr_core::extract::{extract_features, AugmentPass};
use slr_core::head::{predict as predict_rows, train_head_views, Checkpoint, LabeledFeatures, TrainConfig};
use slr_core::metrics::{bench_latency, classify_frame, evaluate_features};
use slr_core::mobilenet::{build_model, fixture_deviation, load_weights, random_bundle, Model};
use slr_core::weights_io::WeightBundle;
use slr_core::{Error, Result, Tensor};

use crate::frames::{self, Frame};
use crate::{
    BenchArgs, EvalArgs, ExtractArgs, FrameSourceArgs, InitWeightsArgs, ModelArgs, PredictArgs, PrepareArgs,
    StreamArgs, TrainArgs, VerifyFixtureArgs,
};

/// Fails fast when an output would land in a directory that does not exist.
fn check_output(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(Error::Config(format!(
            "cannot write {}: directory {} does not exist",
            path.display(),
            dir.display()
        ))),
        _ if path.is_dir() => Err(Error::Config(format!("{} is a directory", path.display()))),
        _ => Ok(()),
    }
}

fn check_input(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(path, io::Error::new(io::ErrorKind::NotFound, "no such file")))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn prepare(a: PrepareArgs) -> Result<()> {
    let summary = a.summary.unwrap_or_else(|| with_suffix(&a.out, ".classes.tsv"));
    check_output(&a.out)?;
    check_output(&summary)?;
    let index = scan_dataset(&a.root)?;
    let parts = split(index.entries, &index.class_names, a.ratio, a.seed)?;
    write_text(&a.out, &write_manifest(&parts)?)?;

    let mut table = String::from("index\tclass\ttrain\tval\n");
    for (i, name) in parts.class_names.iter().enumerate() {
        let train = parts.train.iter().filter(|e| e.class_index == i).count();
        let val = parts.val.iter().filter(|e| e.class_index == i).count();
        table.push_str(&format!("{i}\t{name}\t{train}\t{val}\n"));
    }
    write_text(&summary, &table)?;
    print!("{table}");
    println!(
        "{} classes, {} train, {} val -> {}",
        parts.class_names.len(),
        parts.train.len(),
        parts.val.len(),
        a.out.display()
    );
    Ok(())
}

fn read_manifest(path: &Path) -> Result<(Vec<ManifestRecord>, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_manifest(&text)?;
    if parsed.0.is_empty() {
        return Err(Error::Data(format!("manifest {} lists no samples", path.display())));
    }
    Ok(parsed)
}

fn load_backbone(path: &Path) -> Result<Model> {
    let bundle = WeightBundle::read_file(path)?;
    let width = match bundle.meta("width") {
        Some(w) => w
            .parse()
            .map_err(|_| Error::Format(format!("{}: width metadata {w:?} is not a number", path.display())))?,
        None => 1.0,
    };
    load_weights(build_model(width, None)?, &bundle, true)
}

fn load_classifier(m: &ModelArgs) -> Result<(Model, Checkpoint)> {
    check_input(&m.weights)?;
    let ck = Checkpoint::from_bundle(&WeightBundle::read_file(&m.checkpoint)?)?;
    let model = load_backbone(&m.weights)?.with_head(ck.params.clone())?;
    Ok((model, ck))
}

fn labels_tensor(labels: &[usize]) -> Result<Tensor> {
    Tensor::new(vec![labels.len()], labels.iter().map(|&l| l as f32).collect())
}

fn labels_from(t: &Tensor, name: &str) -> Result<Vec<usize>> {
    t.data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f32 {
                Ok(v as usize)
            } else {
                Err(Error::Format(format!("{name} holds a non-index value {v}")))
            }
        })
        .collect()
}

fn features_for(
    model: &Model,
    root: &Path,
    records: &[&ManifestRecord],
    threads: usize,
    pass: Option<AugmentPass>,
) -> Result<Tensor> {
    extract_features(model, records.len(), threads, pass, |i| open_image(records[i].entry.path(root)))
}

pub fn extract(a: ExtractArgs) -> Result<()> {
    check_output(&a.out)?;
    check_input(&a.weights)?;
    let (records, class_names) = read_manifest(&a.manifest)?;
    let model = load_backbone(&a.weights)?;
    if a.threads == 0 {
        return Err(Error::Config("--threads must be >= 1".into()));
    }

    let mut out = WeightBundle::new();
    out.set_class_names(&class_names);
    out.set_meta("feature_dim", model.feature_dim());
    out.set_meta("augment_epochs", a.augment_epochs);
    out.set_meta("seed", a.seed);
    for part in [Partition::Train, Partition::Val] {
        let rows: Vec<&ManifestRecord> = records.iter().filter(|r| r.partition == part).collect();
        if rows.is_empty() {
            continue;
        }
        let labels: Vec<usize> = rows.iter().map(|r| r.entry.class_index).collect();
        let start = Instant::now();
        let feats = features_for(&model, &a.root, &rows, a.threads, None)?;
        println!("{part}: {} samples in {:.1?}", rows.len(), start.elapsed());
        out.insert(format!("features.{part}"), feats)?;
        out.insert(format!("labels.{part}"), labels_tensor(&labels)?)?;
        if part == Partition::Train {
            for epoch in 1..=a.augment_epochs {
                let pass = AugmentPass {
                    config: AugmentConfig::default(),
                    seed: a.seed,
                    epoch,
                };
                let feats = features_for(&model, &a.root, &rows, a.threads, Some(pass))?;
                println!("train (augmented pass {epoch}): {} samples", rows.len());
                out.insert(format!("features.train.aug{epoch}"), feats)?;
            }
        }
    }
    out.write_file(&a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn partition_features(bundle: &WeightBundle, part: &str) -> Result<LabeledFeatures> {
    let get = |name: String| {
        bundle
            .get(&name)
            .cloned()
            .ok_or_else(|| Error::Format(format!("feature file has no '{name}' entry")))
    };
    let labels = labels_from(&get(format!("labels.{part}"))?, &format!("labels.{part}"))?;
    LabeledFeatures::new(get(format!("features.{part}"))?, labels)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let history_path = a.history.unwrap_or_else(|| with_suffix(&a.out, ".history.tsv"));
    check_output(&a.out)?;
    check_output(&history_path)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        patience: a.patience,
        hidden_units: a.hidden_units,
        seed: a.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;

    let bundle = WeightBundle::read_file(&a.features)?;
    let class_names = bundle.class_names()?;
    let train = partition_features(&bundle, "train")?;
    let val = partition_features(&bundle, "val")?;
    let augmented: Vec<LabeledFeatures> = (1..)
        .map_while(|e| bundle.get(&format!("features.train.aug{e}")))
        .map(|f| LabeledFeatures::new(f.clone(), train.labels.clone()))
        .collect::<Result<_>>()?;
    let views = if augmented.is_empty() { vec![train] } else { augmented };

    let (params, history) = train_head_views(&views, &val, class_names.len(), &cfg)?;
    for r in &history.epochs {
        println!(
            "epoch {}/{}  loss {:.4}  accuracy {:.4}  val_loss {:.4}  val_accuracy {:.4}",
            r.epoch, cfg.epochs, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
        );
    }
    if history.stopped_early {
        println!("stopped early after epoch {}", history.epochs.len());
    }
    let best = history.best().expect("training ran at least one epoch");
    println!(
        "best epoch {}: val_loss {:.4}  val_accuracy {:.4}",
        history.best_epoch, best.val_loss, best.val_accuracy
    );

    let ck = Checkpoint {
        params,
        class_names,
        config: cfg,
        best_epoch: history.best_epoch,
    };
    ck.to_bundle()?.write_file(&a.out)?;
    write_text(&history_path, &history.to_tsv())?;
    println!("wrote {} and {}", a.out.display(), history_path.display());
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    for p in a.confusion.iter().chain(&a.report) {
        check_output(p)?;
    }
    let wanted: &[Partition] = match a.partition.as_str() {
        "train" => &[Partition::Train],
        "val" => &[Partition::Val],
        "all" => &[Partition::Train, Partition::Val],
        other => return Err(Error::Config(format!("unknown partition {other:?}; use train, val, or all"))),
    };
    let (records, class_names) = read_manifest(&a.manifest)?;
    let (model, ck) = load_classifier(&a.model)?;
    if class_names != ck.class_names {
        return Err(Error::Config(format!(
            "checkpoint has {} classes ({}) but the manifest has {} ({})",
            ck.class_names.len(),
            preview(&ck.class_names),
            class_names.len(),
            preview(&class_names)
        )));
    }
    let rows: Vec<&ManifestRecord> = records.iter().filter(|r| wanted.contains(&r.partition)).collect();
    if rows.is_empty() {
        return Err(Error::Data(format!("manifest has no {} samples", a.partition)));
    }
    let feats = features_for(&model, &a.root, &rows, a.threads.max(1), None)?;
    let data = LabeledFeatures::new(feats, rows.iter().map(|r| r.entry.class_index).collect())?;
    let report = evaluate_features(&ck.params, &data, &class_names)?;
    print!("{}", report.summary());
    if let Some(p) = &a.confusion {
        write_text(p, &report.confusion.to_csv())?;
    }
    if let Some(p) = &a.report {
        write_text(p, &report.to_kv())?;
    }
    Ok(())
}

fn preview(names: &[String]) -> String {
    let mut s = names.iter().take(5).cloned().collect::<Vec<_>>().join(", ");
    if names.len() > 5 {
        s.push_str(", …");
    }
    s
}

pub fn predict(a: PredictArgs) -> Result<()> {
    if a.top_k == 0 {
        return Err(Error::Config("--top-k must be >= 1".into()));
    }
    let image = open_image(&a.image)?;
    let (model, ck) = load_classifier(&a.model)?;
    let feats = model.forward_features(&resize_normalize(&image)?)?;
    let (_, probs) = predict_rows(&ck.params, &feats)?;
    let mut ranked: Vec<(usize, f32)> = probs.data().iter().copied().enumerate().collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    for (rank, (class, p)) in ranked.iter().take(a.top_k).enumerate() {
        println!("{}\t{}\t{p:.6}", rank + 1, ck.class_names[*class]);
    }
    Ok(())
}

/// All frames from the chosen source, read before any timing starts.
fn collect_frames(source: &FrameSourceArgs) -> Result<Vec<Frame>> {
    match &source.frames {
        Some(dir) => {
            let paths = frames::list_frames(dir)?;
            (0..paths.len()).map(|i| frames::read_dir_frame(&paths, i)).collect()
        }
        None => {
            let mut input = io::stdin().lock();
            let mut out = Vec::new();
            while let Some(f) = frames::read_raw_frame(&mut input)? {
                out.push(f);
            }
            Ok(out)
        }
    }
}

pub fn bench(a: BenchArgs) -> Result<()> {
    check_output(&a.raw)?;
    if let Some(p) = &a.report {
        check_output(p)?;
    }
    let (model, ck) = load_classifier(&a.model)?;
    let images: Vec<_> = collect_frames(&a.source)?.into_iter().map(|f| f.image).collect();
    let report = bench_latency(&model, &ck.params, &images, a.warmup)?;
    print!("{}", report.summary_text());
    write_text(&a.raw, &report.raw_text())?;
    if let Some(p) = &a.report {
        write_text(p, &report.to_kv())?;
    }
    Ok(())
}

pub fn stream(a: StreamArgs) -> Result<()> {
    let (model, ck) = load_classifier(&a.model)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut emit = |frame: Frame| -> Result<()> {
        let start = Instant::now();
        let (class, p) = classify_frame(&model, &ck.params, &frame.image)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        writeln!(out, "{}\t{}\t{p:.6}\t{ms:.3}", frame.id, ck.class_names[class])
            .and_then(|()| out.flush())
            .map_err(|e| Error::io("<stdout>", e))
    };
    match &a.source.frames {
        Some(dir) => {
            let paths = frames::list_frames(dir)?;
            for i in 0..paths.len() {
                emit(frames::read_dir_frame(&paths, i)?)?;
            }
        }
        None => {
            let mut input = io::stdin().lock();
            while let Some(frame) = frames::read_raw_frame(&mut input)? {
                emit(frame)?;
            }
        }
    }
    Ok(())
}

pub fn init_weights(a: InitWeightsArgs) -> Result<()> {
    check_output(&a.out)?;
    let model = build_model(a.width, None)?;
    let mut bundle = random_bundle(&model, a.seed)?;
    bundle.set_meta("width", a.width);
    bundle.set_meta("seed", a.seed);
    bundle.write_file(&a.out)?;
    println!(
        "wrote {} ({} tensors, {} trainable parameters)",
        a.out.display(),
        bundle.len(),
        model.trainable_backbone_params()
    );
    Ok(())
}

pub fn verify_fixture(a: VerifyFixtureArgs) -> Result<()> {
    check_input(&a.fixture)?;
    let model = load_backbone(&a.weights)?;
    let fixture = WeightBundle::read_file(&a.fixture)?;
    let devs = fixture_deviation(&model, &fixture)?;
    if devs.is_empty() {
        return Err(Error::Data(format!("{} holds no fixture.image0 entry", a.fixture.display())));
    }
    for (i, d) in devs.iter().enumerate() {
        println!("fixture.image{i}\tmax_abs_diff {d:.6e}");
    }
    let worst = devs.iter().copied().fold(0.0f32, f32::max);
    if worst < a.tolerance {
        println!("ok: worst {worst:.6e} < {}", a.tolerance);
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "fixture features differ by up to {worst:.6e}, tolerance {}",
            a.tolerance
        )))
    }
}
