use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Write};
use std::path::Path;

use gazeprobe_core::complexity::{profile, read_profiles, subset, write_profiles, ProfileRecord};
use gazeprobe_core::corpus::{filter_min_length, parse_conllu, parse_plain_text, write_plain_text, Document};
use gazeprobe_core::embed::{align, read_embeddings};
use gazeprobe_core::evalx::{correlation_matrix, evaluate_cv, random_baseline, write_correlation_csv};
use gazeprobe_core::experiment::{derive_seed, run_experiment};
use gazeprobe_core::gaze::{
    aggregate_fixations, average_all, import_sentence_metrics, read_fixations, scale_metrics,
    write_sentence_metrics, GazeMetrics, SentenceBounds,
};
use gazeprobe_core::lexicon::load_lexicon;
use gazeprobe_core::probe::{run_probe, write_probe_csv, ProbeConfig, ProbeMode};
use gazeprobe_core::regress::{
    kfold_split, train_multitask_head, train_svr, HeadPipeline, Pipeline, SvrPipeline,
};
use gazeprobe_core::scramble::{scramble_corpus, ScrambleOptions};
use gazeprobe_core::synth::write_demo_inputs;
use gazeprobe_core::{
    ComplexityConfig, ComplexityProfile, Error, HeadParams, Matrix, Metric, Result, SvrParams,
};
use serde_json::json;

use crate::{
    BaselineArgs, Command, EvaluateArgs, GazeArgs, HeadOptions, InputFormat, ModelInputs,
    ProbeArgs, ProfileArgs, ScrambleArgs, SvrOptions, TrainHeadArgs, TrainSvrArgs,
};

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Profile(a) => profile_cmd(a),
        Command::GazeAggregate(a) => gaze_cmd(a),
        Command::Scramble(a) => scramble_cmd(a),
        Command::TrainSvr(a) => train_svr_cmd(a),
        Command::TrainHead(a) => train_head_cmd(a),
        Command::Probe(a) => probe_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Baseline(a) => baseline_cmd(a),
        Command::Run(a) => {
            let bundle = run_experiment(&a.config)?;
            println!("wrote {}", bundle.dir.display());
            for f in &bundle.manifest.files {
                println!("  {f}");
            }
            Ok(())
        }
        Command::Synth(a) => write_demo_inputs(&a.dir, a.sentences, a.seed),
    }
}

/// Missing or unreadable inputs are the caller's mistake, so they are
/// reported as argument errors rather than I/O failures.
fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| match e.kind() {
        ErrorKind::NotFound | ErrorKind::PermissionDenied | ErrorKind::IsADirectory => {
            Error::Argument(format!("cannot open {}: {e}", path.display()))
        }
        _ => Error::Io(e),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_corpus(path: &Path, lang: &str) -> Result<Document> {
    let doc = parse_conllu(open(path)?, lang, &path.display().to_string())?;
    for s in &doc.sentences {
        s.validate()?;
    }
    Ok(doc)
}

fn profile_cmd(a: ProfileArgs) -> Result<()> {
    let doc = filter_min_length(&load_corpus(&a.conllu, &a.lang)?, a.min_tokens);
    let lex = load_lexicon(open(&a.lexicon)?, &a.lang)?;
    let cfg = ComplexityConfig {
        low_frequency_threshold: a.threshold,
        punct_chars_in_word_length: !a.no_punct_chars,
        ..ComplexityConfig::default()
    };
    let records = doc
        .sentences
        .iter()
        .map(|s| {
            Ok(ProfileRecord {
                sentence_id: s.id.clone(),
                language: a.lang.clone(),
                profile: profile(s, &lex, &cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_profiles(&records, create(&a.output)?)
}

fn gaze_cmd(a: GazeArgs) -> Result<()> {
    let raw = match (&a.fixations, &a.metrics) {
        (Some(fix), _) => {
            let conllu = a
                .conllu
                .as_ref()
                .ok_or_else(|| Error::Argument("--fixations needs --conllu for sentence bounds".into()))?;
            let bounds = SentenceBounds::from_document(&load_corpus(conllu, "xx")?);
            let log = read_fixations(open(fix)?)?;
            average_all(&aggregate_fixations(&log, &bounds)?, &bounds)
        }
        (None, Some(m)) => import_sentence_metrics(open(m)?)?,
        (None, None) => return Err(Error::Argument("give --fixations or --metrics".into())),
    };
    let scaled = scale_metrics(&raw)?;
    write_sentence_metrics(&scaled.metrics, create(&a.output)?)?;
    if let Some(p) = &a.scaler {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &scaled.scaler)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

fn scramble_cmd(a: ScrambleArgs) -> Result<()> {
    let format = a.format.unwrap_or_else(|| {
        if a.input.extension().is_some_and(|e| e == "conllu") {
            InputFormat::Conllu
        } else {
            InputFormat::Text
        }
    });
    let source = a.input.display().to_string();
    let doc = match format {
        InputFormat::Conllu => load_corpus(&a.input, &a.lang)?,
        InputFormat::Text => parse_plain_text(open(&a.input)?, &a.lang, &source)?,
    };
    let scrambled = scramble_corpus(
        &doc,
        a.seed,
        ScrambleOptions {
            pin_final_punct: a.pin_final_punct,
        },
    );
    let mut w = create(&a.output)?;
    write_plain_text(&scrambled, &mut w)?;
    w.flush()?;
    Ok(())
}

fn svr_params(o: &SvrOptions, seed: u64) -> SvrParams {
    SvrParams {
        c: o.c,
        epsilon: o.epsilon,
        tol: o.tol,
        max_iter: o.max_iter,
        seed,
        standardize: !o.no_standardize,
    }
}

fn head_params(o: &HeadOptions, seed: u64) -> HeadParams {
    HeadParams {
        lr: o.lr,
        batch: o.batch,
        epochs: o.epochs,
        eval_every: o.eval_every,
        patience: (o.patience > 0).then_some(o.patience),
        validation_fraction: o.validation_fraction,
        standardize: !o.no_standardize,
        seed,
    }
}

fn load_profiles(path: &Path) -> Result<BTreeMap<String, ComplexityProfile>> {
    let mut out = BTreeMap::new();
    for r in read_profiles(open(path)?)? {
        if out.insert(r.sentence_id.clone(), r.profile).is_some() {
            return Err(Error::Duplicate(r.sentence_id));
        }
    }
    Ok(out)
}

fn load_metrics(path: &Path) -> Result<Vec<GazeMetrics>> {
    import_sentence_metrics(open(path)?)
}

fn metric_targets(gaze: &[GazeMetrics]) -> BTreeMap<String, Vec<f64>> {
    gaze.iter()
        .map(|g| (g.sentence_id.clone(), g.values().to_vec()))
        .collect()
}

/// Feature rows and metric rows for the sentences present in both inputs,
/// sorted by id.
fn feature_design(
    profiles: &BTreeMap<String, ComplexityProfile>,
    gaze: &[GazeMetrics],
    group: gazeprobe_core::FeatureGroup,
) -> Result<(Vec<String>, Matrix, Matrix)> {
    let targets = metric_targets(gaze);
    let mut ids = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (id, p) in profiles {
        if let Some(t) = targets.get(id) {
            ids.push(id.clone());
            xs.push(subset(p, group)?);
            ys.push(t.clone());
        }
    }
    if ids.is_empty() {
        return Err(Error::Alignment("no sentence has both a profile and metrics".into()));
    }
    Ok((ids, Matrix::from_rows(&xs)?, Matrix::from_rows(&ys)?))
}

fn train_svr_cmd(a: TrainSvrArgs) -> Result<()> {
    let profiles = load_profiles(&a.profiles)?;
    let gaze = load_metrics(&a.metrics)?;
    let (ids, x, y) = feature_design(&profiles, &gaze, a.group)?;
    let params = svr_params(&a.svr, a.seed);
    let mut models = Vec::new();
    let mut log = csv::Writer::from_writer(Vec::new());
    log.write_record(["metric", "epoch", "dual_objective", "primal_objective"])?;
    for (t, m) in Metric::ALL.into_iter().enumerate() {
        let fit = train_svr(&x, &y.column(t), &params)?;
        if !fit.converged {
            eprintln!("warning: {} did not converge in {} epochs", m.abbrev(), fit.epochs);
        }
        for (e, d) in fit.dual_objective.iter().enumerate() {
            let primal = e
                .checked_sub(1)
                .and_then(|i| fit.primal_objective.get(i))
                .map_or(String::new(), |p| p.to_string());
            log.write_record([m.abbrev().to_string(), e.to_string(), d.to_string(), primal])?;
        }
        models.push(json!({
            "metric": m.abbrev(),
            "weights": fit.model.weights,
            "bias": fit.model.bias,
            "scaler": fit.model.scaler,
            "epochs": fit.epochs,
            "converged": fit.converged,
        }));
    }
    let doc = json!({
        "kind": "svr",
        "feature_group": a.group.as_str(),
        "features": a.group.feature_names(),
        "params": params,
        "models": models,
        "provenance": {
            "profiles": a.profiles.display().to_string(),
            "metrics": a.metrics.display().to_string(),
            "sentences": ids.len(),
            "tool_version": env!("CARGO_PKG_VERSION"),
        },
    });
    write_json(&a.output, &doc)?;
    if let Some(p) = &a.log {
        let bytes = log
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        std::fs::write(p, bytes)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn train_head_cmd(a: TrainHeadArgs) -> Result<()> {
    let emb = read_embeddings(open(&a.embeddings)?)?;
    let gaze = load_metrics(&a.metrics)?;
    let al = align(&emb, &metric_targets(&gaze))?;
    let params = head_params(&a.head, a.seed);
    let model = train_multitask_head(&al.x, &al.y, &params)?;
    if let Some(p) = &a.log {
        let mut w = csv::Writer::from_writer(create(p)?);
        w.write_record(["step", "epoch", "train_loss", "val_loss"])?;
        for r in &model.log {
            w.write_record([
                r.step.to_string(),
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.val_loss.map_or(String::new(), |v| v.to_string()),
            ])?;
        }
        w.flush()?;
    }
    let doc = json!({
        "kind": "head",
        "metrics": Metric::ALL.map(|m| m.abbrev()),
        "params": params,
        "model": model,
        "provenance": {
            "embeddings": a.embeddings.display().to_string(),
            "embedding_provenance": emb.provenance,
            "metrics": a.metrics.display().to_string(),
            "sentences": al.ids.len(),
            "tool_version": env!("CARGO_PKG_VERSION"),
        },
    });
    write_json(&a.output, &doc)
}

fn probe_cmd(a: ProbeArgs) -> Result<()> {
    let pre = read_embeddings(open(&a.pretrained)?)?;
    let ft = read_embeddings(open(&a.finetuned)?)?;
    let profiles = load_profiles(&a.profiles)?;
    let cfg = ProbeConfig {
        folds: a.folds,
        train_size: a.train_size,
        test_size: a.test_size,
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
        mode: if a.single_task { ProbeMode::SingleTask } else { ProbeMode::MultiTask },
        language: a.lang.clone(),
        ..ProbeConfig::default()
    };
    let report = run_probe(&pre, &ft, &profiles, &cfg)?;
    if !report.excluded.is_empty() {
        eprintln!("excluded constant features: {}", report.excluded.join(", "));
    }
    write_probe_csv(&[report], create(&a.output)?)
}

struct Design {
    x: Matrix,
    y: Matrix,
    pipeline: Box<dyn Pipeline>,
    profiles: Option<BTreeMap<String, ComplexityProfile>>,
    gaze: Vec<GazeMetrics>,
}

fn design(i: &ModelInputs) -> Result<Design> {
    let gaze = load_metrics(&i.metrics)?;
    match (&i.profiles, &i.embeddings) {
        (Some(p), _) => {
            let profiles = load_profiles(p)?;
            let (_, x, y) = feature_design(&profiles, &gaze, i.group)?;
            let pipeline = SvrPipeline {
                params: SvrParams {
                    seed: i.seed,
                    ..SvrParams::default()
                },
            };
            Ok(Design {
                x,
                y,
                pipeline: Box::new(pipeline),
                profiles: Some(profiles),
                gaze,
            })
        }
        (None, Some(e)) => {
            let emb = read_embeddings(open(e)?)?;
            let al = align(&emb, &metric_targets(&gaze))?;
            let pipeline = HeadPipeline {
                params: HeadParams {
                    seed: i.seed,
                    ..HeadParams::default()
                },
            };
            Ok(Design {
                x: al.x,
                y: al.y,
                pipeline: Box::new(pipeline),
                profiles: None,
                gaze,
            })
        }
        (None, None) => Err(Error::Argument("give --profiles or --embeddings".into())),
    }
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let d = design(&a.inputs)?;
    let plan = kfold_split(d.x.rows(), a.inputs.folds, a.inputs.seed)?;
    let per_fold = evaluate_cv(&d.x, &d.y, &plan, d.pipeline.as_ref())?;
    let mut w = csv::Writer::from_writer(create(&a.output)?);
    w.write_record(["language", "pipeline", "metric", "fold", "explained_variance", "r_squared", "n"])?;
    for (f, row) in per_fold.iter().enumerate() {
        for (m, s) in Metric::ALL.iter().zip(row) {
            w.write_record([
                a.inputs.lang.clone(),
                d.pipeline.name(),
                m.abbrev().to_string(),
                f.to_string(),
                format!("{:.6}", s.explained_variance),
                format!("{:.6}", s.r_squared),
                s.n.to_string(),
            ])?;
        }
    }
    w.flush()?;
    if let (Some(path), Some(profiles)) = (&a.correlations, &d.profiles) {
        let pairs: Vec<(String, ComplexityProfile)> =
            profiles.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let cm = correlation_matrix(&pairs, &d.gaze)?;
        write_correlation_csv(&cm, create(path)?)?;
    }
    Ok(())
}

fn baseline_cmd(a: BaselineArgs) -> Result<()> {
    if a.seeds == 0 {
        return Err(Error::Argument("--seeds must be at least 1".into()));
    }
    let d = design(&a.inputs)?;
    let seeds: Vec<u64> = (0..a.seeds)
        .map(|i| derive_seed(a.inputs.seed, &format!("baseline/{i}")))
        .collect();
    let runs = random_baseline(&d.x, &d.y, d.pipeline.as_ref(), &seeds, a.inputs.folds, a.inputs.seed)?;
    let mut w = csv::Writer::from_writer(create(&a.output)?);
    w.write_record(["language", "pipeline", "seed", "metric", "explained_variance", "r_squared"])?;
    for run in &runs {
        for (m, s) in Metric::ALL.iter().zip(&run.mean) {
            w.write_record([
                a.inputs.lang.clone(),
                d.pipeline.name(),
                run.seed.to_string(),
                m.abbrev().to_string(),
                format!("{:.6}", s.explained_variance),
                format!("{:.6}", s.r_squared),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
