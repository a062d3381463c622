//! Config-driven experiment runs.
//!
//! A config is a flat `key = value` text file; see `docs/formats.md` for
//! the grammar and the list of keys. A run reads every input, computes all
//! results in memory (languages in parallel), then writes the report
//! bundle into a staging directory that is renamed into place only when
//! everything succeeded.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::complexity::{profile, subset, ComplexityConfig, ComplexityProfile, FeatureGroup};
use crate::corpus::{filter_min_length, parse_conllu, write_plain_text, Document};
use crate::embed::{align, read_embeddings, EmbeddingSet};
use crate::error::{Error, Result};
use crate::evalx::{correlation_matrix, evaluate_cv, random_baseline, write_correlation_csv, ScorePair};
use crate::gaze::{
    aggregate_fixations, average_all, import_sentence_metrics, read_fixations, scale_metrics,
    GazeMetrics, Metric, SentenceBounds,
};
use crate::lexicon::{load_lexicon, FrequencyLexicon};
use crate::matrix::Matrix;
use crate::probe::{run_probe, write_probe_csv, ProbeConfig, ProbeMode, ProbeReport};
use crate::regress::{kfold_split, HeadParams, HeadPipeline, Pipeline, SvrParams, SvrPipeline};
use crate::scramble::{scramble_corpus, ScrambleOptions, SCRAMBLED_SUFFIX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    Svr,
    Head,
    Probe,
    ScrambleEval,
    Baseline,
}

impl PipelineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineKind::Svr => "svr",
            PipelineKind::Head => "head",
            PipelineKind::Probe => "probe",
            PipelineKind::ScrambleEval => "scramble-eval",
            PipelineKind::Baseline => "baseline",
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svr" => Ok(PipelineKind::Svr),
            "head" => Ok(PipelineKind::Head),
            "probe" => Ok(PipelineKind::Probe),
            "scramble-eval" => Ok(PipelineKind::ScrambleEval),
            "baseline" => Ok(PipelineKind::Baseline),
            other => Err(Error::Config(format!("pipeline: unknown kind {other:?}"))),
        }
    }
}

/// Input files for one language. All paths are resolved against the
/// config file's directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LanguageInputs {
    pub conllu: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub fixations: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub embeddings_pretrained: Option<PathBuf>,
    pub embeddings_finetuned: Option<PathBuf>,
    pub embeddings_scrambled: Option<PathBuf>,
}

const LANGUAGE_FIELDS: [&str; 8] = [
    "conllu",
    "lexicon",
    "metrics",
    "fixations",
    "embeddings",
    "embeddings_pretrained",
    "embeddings_finetuned",
    "embeddings_scrambled",
];

impl LanguageInputs {
    fn slot(&mut self, field: &str) -> Option<&mut Option<PathBuf>> {
        Some(match field {
            "conllu" => &mut self.conllu,
            "lexicon" => &mut self.lexicon,
            "metrics" => &mut self.metrics,
            "fixations" => &mut self.fixations,
            "embeddings" => &mut self.embeddings,
            "embeddings_pretrained" => &mut self.embeddings_pretrained,
            "embeddings_finetuned" => &mut self.embeddings_finetuned,
            "embeddings_scrambled" => &mut self.embeddings_scrambled,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pipeline: PipelineKind,
    pub languages: Vec<String>,
    pub inputs: BTreeMap<String, LanguageInputs>,
    pub output: PathBuf,
    pub seed: u64,
    pub folds: usize,
    pub feature_group: FeatureGroup,
    pub min_tokens: usize,
    pub low_frequency_threshold: f64,
    pub baseline_seeds: usize,
    pub head_lr: f64,
    pub head_epochs: usize,
    pub probe_train_size: Option<usize>,
    pub probe_test_size: Option<usize>,
    pub probe_epochs: usize,
    pub probe_lr: f64,
    pub probe_mode: ProbeMode,
    pub pin_final_punct: bool,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

/// Parses config text. Relative paths are joined onto `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(i + 1, "expected key = value"))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::parse(i + 1, "empty key"));
        }
        if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
            return Err(Error::Config(format!("{key}: given more than once")));
        }
    }

    let mut take = |key: &str| entries.remove(key).map(|(_, v)| v);
    let required = |key: &str, v: Option<String>| {
        v.filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Config(format!("{key}: required field is missing")))
    };

    let pipeline: PipelineKind = required("pipeline", take("pipeline"))?.parse()?;
    let languages: Vec<String> = required("languages", take("languages"))?
        .split([',', ' ', '\t'])
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    let output = base_dir.join(required("output", take("output"))?);

    macro_rules! opt {
        ($key:expr, $default:expr) => {
            match take($key) {
                Some(v) => parse_value($key, &v)?,
                None => $default,
            }
        };
    }
    let seed: u64 = opt!("seed", 0);
    let folds: usize = opt!("folds", 5);
    let feature_group = match take("feature_group") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("feature_group: unknown group {v:?}")))?,
        None => FeatureGroup::All,
    };
    let min_tokens: usize = opt!("min_tokens", 5);
    let low_frequency_threshold: f64 = opt!(
        "low_frequency_threshold",
        ComplexityConfig::default().low_frequency_threshold
    );
    let baseline_seeds: usize = opt!("baseline_seeds", 5);
    let head_defaults = HeadParams::default();
    let head_lr: f64 = opt!("head.lr", head_defaults.lr);
    let head_epochs: usize = opt!("head.epochs", head_defaults.epochs);
    let probe_defaults = ProbeConfig::default();
    let probe_train_size = match take("probe.train_size") {
        Some(v) => Some(parse_value("probe.train_size", &v)?),
        None => None,
    };
    let probe_test_size = match take("probe.test_size") {
        Some(v) => Some(parse_value("probe.test_size", &v)?),
        None => None,
    };
    let probe_epochs: usize = opt!("probe.epochs", probe_defaults.epochs);
    let probe_lr: f64 = opt!("probe.lr", probe_defaults.lr);
    let probe_mode = match take("probe.mode").as_deref() {
        None | Some("multi") => ProbeMode::MultiTask,
        Some("single") => ProbeMode::SingleTask,
        Some(other) => {
            return Err(Error::Config(format!("probe.mode: expected multi or single, got {other:?}")))
        }
    };
    let pin_final_punct: bool = opt!("scramble.pin_final_punct", false);

    let mut inputs: BTreeMap<String, LanguageInputs> = languages
        .iter()
        .map(|l| (l.clone(), LanguageInputs::default()))
        .collect();
    for (key, (line, value)) in entries {
        let (lang, field) = key
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("{key}: unknown key (line {line})")))?;
        let li = inputs.get_mut(lang).ok_or_else(|| {
            Error::Config(format!("{key}: language {lang:?} is not listed in languages"))
        })?;
        let slot = li.slot(field).ok_or_else(|| {
            Error::Config(format!(
                "{key}: unknown key (line {line}); language fields are {}",
                LANGUAGE_FIELDS.join(", ")
            ))
        })?;
        *slot = Some(base_dir.join(value));
    }

    if languages.is_empty() {
        return Err(Error::Config("languages: no language given".into()));
    }
    if folds < 2 {
        return Err(Error::Config("folds: need at least 2".into()));
    }
    if pipeline == PipelineKind::Baseline && baseline_seeds == 0 {
        return Err(Error::Config("baseline_seeds: need at least 1".into()));
    }
    Ok(ExperimentConfig {
        pipeline,
        languages,
        inputs,
        output,
        seed,
        folds,
        feature_group,
        min_tokens,
        low_frequency_threshold,
        baseline_seeds,
        head_lr,
        head_epochs,
        probe_train_size,
        probe_test_size,
        probe_epochs,
        probe_lr,
        probe_mode,
        pin_final_punct,
    })
}

/// Stage seed derived from the top-level seed: the first eight bytes
/// (little-endian) of SHA-256 over `"<seed>/<label>"`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{label}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageSeeds {
    pub cv: u64,
    pub model: u64,
    pub probe: u64,
    pub scramble: u64,
    pub baseline: Vec<u64>,
}

impl StageSeeds {
    pub fn derive(cfg: &ExperimentConfig) -> Self {
        StageSeeds {
            cv: derive_seed(cfg.seed, "cv"),
            model: derive_seed(cfg.seed, "model"),
            probe: derive_seed(cfg.seed, "probe"),
            scramble: derive_seed(cfg.seed, "scramble"),
            baseline: (0..cfg.baseline_seeds)
                .map(|i| derive_seed(cfg.seed, &format!("baseline/{i}")))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub pipeline: PipelineKind,
    pub config_sha256: String,
    pub seed: u64,
    pub derived_seeds: StageSeeds,
    pub languages: Vec<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Reads a config file and runs it. Returns the written bundle.
pub fn run_experiment(config_path: &Path) -> Result<Bundle> {
    let bytes = fs::read(config_path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Config("config is not valid UTF-8".into()))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let cfg = parse_config(&text, base)?;
    let hash: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    run_config(&cfg, &hash)
}

/// Runs an already parsed config; `config_sha256` is recorded in the
/// manifest.
pub fn run_config(cfg: &ExperimentConfig, config_sha256: &str) -> Result<Bundle> {
    let seeds = StageSeeds::derive(cfg);
    let results: Vec<Result<LanguageOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .languages
            .iter()
            .map(|lang| {
                let seeds = &seeds;
                scope.spawn(move || run_language(cfg, lang, seeds))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("language worker panicked"))
            .collect()
    });
    let outputs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let files = assemble(cfg, &outputs)?;
    let manifest = Manifest {
        tool: "gazeprobe".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        pipeline: cfg.pipeline,
        config_sha256: config_sha256.to_string(),
        seed: cfg.seed,
        derived_seeds: seeds,
        languages: cfg.languages.clone(),
        files: files.keys().cloned().collect(),
    };
    let mut manifest_json = serde_json::to_vec_pretty(&manifest)?;
    manifest_json.push(b'\n');
    write_bundle(&cfg.output, &files, &manifest_json)?;
    Ok(Bundle {
        dir: cfg.output.clone(),
        manifest,
    })
}

fn write_bundle(out: &Path, files: &BTreeMap<String, Vec<u8>>, manifest: &[u8]) -> Result<()> {
    if out.exists() {
        let is_bundle = out.join("manifest.json").is_file();
        let is_empty = out.is_dir() && fs::read_dir(out)?.next().is_none();
        if !is_bundle && !is_empty {
            return Err(Error::Config(format!(
                "output: {} exists and is not a previous bundle",
                out.display()
            )));
        }
    }
    let mut stage = out.as_os_str().to_owned();
    stage.push(".partial");
    let stage = PathBuf::from(stage);
    if stage.exists() {
        fs::remove_dir_all(&stage)?;
    }
    let written = (|| -> Result<()> {
        fs::create_dir_all(&stage)?;
        for (name, data) in files {
            fs::write(stage.join(name), data)?;
        }
        fs::write(stage.join("manifest.json"), manifest)?;
        if out.exists() {
            fs::remove_dir_all(out)?;
        }
        fs::rename(&stage, out)?;
        Ok(())
    })();
    if written.is_err() {
        let _ = fs::remove_dir_all(&stage);
    }
    written
}

#[derive(Debug, Default)]
struct LanguageOutput {
    lang: String,
    /// `(condition, metric, fold, score)`
    scores: Vec<(String, Metric, usize, ScorePair)>,
    /// `(group, metric, per-fold scores)`
    subsets: Vec<(FeatureGroup, Metric, Vec<ScorePair>)>,
    correlations: Option<Vec<u8>>,
    probe: Option<ProbeReport>,
    /// `(seed, metric, fold-mean score)`
    baseline: Vec<(u64, Metric, ScorePair)>,
    scrambled_text: Option<Vec<u8>>,
    /// `(sentence_id, length features equal, frequency features equal)`
    scramble_check: Vec<(String, bool, Option<bool>)>,
}

fn open(lang: &str, field: &str, path: &Option<PathBuf>) -> Result<BufReader<File>> {
    let path = path.as_ref().ok_or_else(|| {
        Error::Config(format!("{lang}.{field}: required field is missing"))
    })?;
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Config(format!("{lang}.{field}: cannot open {}: {e}", path.display()))
    })
}

struct LanguageData<'a> {
    cfg: &'a ExperimentConfig,
    lang: &'a str,
    inputs: &'a LanguageInputs,
}

impl LanguageData<'_> {
    fn corpus(&self) -> Result<Document> {
        let path = self.inputs.conllu.as_ref().map(|p| p.display().to_string());
        let doc = parse_conllu(
            open(self.lang, "conllu", &self.inputs.conllu)?,
            self.lang,
            path.as_deref().unwrap_or(""),
        )?;
        for s in &doc.sentences {
            s.validate()?;
        }
        Ok(filter_min_length(&doc, self.cfg.min_tokens))
    }

    fn lexicon(&self) -> Result<FrequencyLexicon> {
        load_lexicon(open(self.lang, "lexicon", &self.inputs.lexicon)?, self.lang)
    }

    fn complexity_config(&self) -> ComplexityConfig {
        ComplexityConfig {
            low_frequency_threshold: self.cfg.low_frequency_threshold,
            ..ComplexityConfig::default()
        }
    }

    fn profiles(&self, doc: &Document) -> Result<BTreeMap<String, ComplexityProfile>> {
        let lex = self.lexicon()?;
        let cc = self.complexity_config();
        doc.sentences
            .iter()
            .map(|s| Ok((s.id.clone(), profile(s, &lex, &cc)?)))
            .collect()
    }

    fn embeddings(&self, field: &str, path: &Option<PathBuf>) -> Result<EmbeddingSet> {
        read_embeddings(open(self.lang, field, path)?)
    }

    /// Scaled sentence metrics, restricted to the sentences of `doc` when
    /// one is given.
    fn gaze(&self, doc: Option<&Document>) -> Result<Vec<GazeMetrics>> {
        let raw = if self.inputs.metrics.is_some() {
            import_sentence_metrics(open(self.lang, "metrics", &self.inputs.metrics)?)?
        } else if self.inputs.fixations.is_some() {
            let doc = doc.ok_or_else(|| {
                Error::Config(format!(
                    "{}.conllu: required to aggregate {}.fixations",
                    self.lang, self.lang
                ))
            })?;
            let fixations = read_fixations(open(self.lang, "fixations", &self.inputs.fixations)?)?;
            let bounds = SentenceBounds::from_document(doc);
            average_all(&aggregate_fixations(&fixations, &bounds)?, &bounds)
        } else {
            return Err(Error::Config(format!(
                "{}.metrics: required field is missing (or give {}.fixations)",
                self.lang, self.lang
            )));
        };
        let kept = match doc {
            Some(d) => raw.into_iter().filter(|g| d.get(&g.sentence_id).is_some()).collect(),
            None => raw,
        };
        Ok(scale_metrics(&kept)?.metrics)
    }
}

fn metric_targets(gaze: &[GazeMetrics]) -> BTreeMap<String, Vec<f64>> {
    gaze.iter()
        .map(|g| (g.sentence_id.clone(), g.values().to_vec()))
        .collect()
}

/// Feature rows joined to metric rows, sorted by sentence id.
fn feature_design(
    profiles: &BTreeMap<String, ComplexityProfile>,
    targets: &BTreeMap<String, Vec<f64>>,
    group: FeatureGroup,
) -> Result<(Matrix, Matrix)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (id, p) in profiles {
        if let Some(t) = targets.get(id) {
            xs.push(subset(p, group)?);
            ys.push(t.clone());
        }
    }
    if xs.is_empty() {
        return Err(Error::Alignment("no sentence has both a profile and metrics".into()));
    }
    Ok((Matrix::from_rows(&xs)?, Matrix::from_rows(&ys)?))
}

fn cv_scores(
    x: &Matrix,
    y: &Matrix,
    cfg: &ExperimentConfig,
    seeds: &StageSeeds,
    pipeline: &dyn Pipeline,
) -> Result<Vec<Vec<ScorePair>>> {
    let plan = kfold_split(x.rows(), cfg.folds, seeds.cv)?;
    evaluate_cv(x, y, &plan, pipeline)
}

fn push_scores(out: &mut LanguageOutput, condition: &str, per_fold: &[Vec<ScorePair>]) {
    for (f, row) in per_fold.iter().enumerate() {
        for (m, s) in Metric::ALL.iter().zip(row) {
            out.scores.push((condition.to_string(), *m, f, *s));
        }
    }
}

fn svr_pipeline(seeds: &StageSeeds) -> SvrPipeline {
    SvrPipeline {
        params: SvrParams {
            seed: seeds.model,
            ..SvrParams::default()
        },
    }
}

fn head_pipeline(cfg: &ExperimentConfig, seeds: &StageSeeds) -> HeadPipeline {
    HeadPipeline {
        params: HeadParams {
            lr: cfg.head_lr,
            epochs: cfg.head_epochs,
            seed: seeds.model,
            ..HeadParams::default()
        },
    }
}

fn correlations(profiles: &BTreeMap<String, ComplexityProfile>, gaze: &[GazeMetrics]) -> Result<Vec<u8>> {
    let pairs: Vec<(String, ComplexityProfile)> =
        profiles.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let cm = correlation_matrix(&pairs, gaze)?;
    let mut buf = Vec::new();
    write_correlation_csv(&cm, &mut buf)?;
    Ok(buf)
}

fn run_language(cfg: &ExperimentConfig, lang: &str, seeds: &StageSeeds) -> Result<LanguageOutput> {
    let data = LanguageData {
        cfg,
        lang,
        inputs: &cfg.inputs[lang],
    };
    let mut out = LanguageOutput {
        lang: lang.to_string(),
        ..LanguageOutput::default()
    };
    match cfg.pipeline {
        PipelineKind::Svr => {
            let doc = data.corpus()?;
            let profiles = data.profiles(&doc)?;
            let gaze = data.gaze(Some(&doc))?;
            let targets = metric_targets(&gaze);
            let svr = svr_pipeline(seeds);
            let (x, y) = feature_design(&profiles, &targets, cfg.feature_group)?;
            push_scores(&mut out, cfg.feature_group.as_str(), &cv_scores(&x, &y, cfg, seeds, &svr)?);
            for g in FeatureGroup::SUBSETS {
                let (x, y) = feature_design(&profiles, &targets, g)?;
                let per_fold = cv_scores(&x, &y, cfg, seeds, &svr)?;
                for (mi, m) in Metric::ALL.into_iter().enumerate() {
                    out.subsets.push((g, m, per_fold.iter().map(|r| r[mi]).collect()));
                }
            }
            out.correlations = Some(correlations(&profiles, &gaze)?);
        }
        PipelineKind::Head => {
            let doc = data.inputs.conllu.as_ref().map(|_| data.corpus()).transpose()?;
            let gaze = data.gaze(doc.as_ref())?;
            let emb = data.embeddings("embeddings", &data.inputs.embeddings)?;
            let a = align(&emb, &metric_targets(&gaze))?;
            let head = head_pipeline(cfg, seeds);
            push_scores(&mut out, "embeddings", &cv_scores(&a.x, &a.y, cfg, seeds, &head)?);
            if let (Some(doc), Some(_)) = (&doc, &data.inputs.lexicon) {
                out.correlations = Some(correlations(&data.profiles(doc)?, &gaze)?);
            }
        }
        PipelineKind::Baseline => {
            let (x, y, pipeline): (Matrix, Matrix, Box<dyn Pipeline>) =
                if data.inputs.embeddings.is_some() {
                    let doc = data.inputs.conllu.as_ref().map(|_| data.corpus()).transpose()?;
                    let gaze = data.gaze(doc.as_ref())?;
                    let emb = data.embeddings("embeddings", &data.inputs.embeddings)?;
                    let a = align(&emb, &metric_targets(&gaze))?;
                    (a.x, a.y, Box::new(head_pipeline(cfg, seeds)))
                } else {
                    let doc = data.corpus()?;
                    let profiles = data.profiles(&doc)?;
                    let gaze = data.gaze(Some(&doc))?;
                    let (x, y) = feature_design(&profiles, &metric_targets(&gaze), cfg.feature_group)?;
                    (x, y, Box::new(svr_pipeline(seeds)))
                };
            push_scores(&mut out, "true", &cv_scores(&x, &y, cfg, seeds, pipeline.as_ref())?);
            for run in random_baseline(&x, &y, pipeline.as_ref(), &seeds.baseline, cfg.folds, seeds.cv)? {
                for (m, s) in Metric::ALL.into_iter().zip(&run.mean) {
                    out.baseline.push((run.seed, m, *s));
                }
            }
        }
        PipelineKind::Probe => {
            let doc = data.corpus()?;
            let profiles = data.profiles(&doc)?;
            let pre = data.embeddings("embeddings_pretrained", &data.inputs.embeddings_pretrained)?;
            let ft = data.embeddings("embeddings_finetuned", &data.inputs.embeddings_finetuned)?;
            let n = profiles.len();
            let test_size = cfg.probe_test_size.unwrap_or(n / cfg.folds);
            let pcfg = ProbeConfig {
                folds: cfg.folds,
                train_size: cfg.probe_train_size.unwrap_or(n - test_size.min(n)),
                test_size,
                epochs: cfg.probe_epochs,
                lr: cfg.probe_lr,
                seed: seeds.probe,
                mode: cfg.probe_mode,
                language: lang.to_string(),
                ..ProbeConfig::default()
            };
            out.probe = Some(run_probe(&pre, &ft, &profiles, &pcfg)?);
        }
        PipelineKind::ScrambleEval => {
            let doc = data.corpus()?;
            let scrambled = scramble_corpus(
                &doc,
                seeds.scramble,
                ScrambleOptions {
                    pin_final_punct: cfg.pin_final_punct,
                },
            );
            let mut text = Vec::new();
            write_plain_text(&scrambled, &mut text)?;
            out.scrambled_text = Some(text);

            let lex = data.inputs.lexicon.as_ref().map(|_| data.lexicon()).transpose()?;
            let cc = data.complexity_config();
            for (orig, scr) in doc.sentences.iter().zip(&scrambled.sentences) {
                let length_equal = orig.word_count() == scr.word_count()
                    && orig.surface_text().chars().filter(|c| !c.is_whitespace()).count()
                        == scr.surface_text().chars().filter(|c| !c.is_whitespace()).count();
                let frequency_equal = match &lex {
                    Some(lex) => {
                        let p = profile(orig, lex, &cc)?;
                        let q = profile(scr, lex, &cc)?;
                        Some(
                            subset(&p, FeatureGroup::Frequency)? == subset(&q, FeatureGroup::Frequency)?
                                && subset(&p, FeatureGroup::Length)? == subset(&q, FeatureGroup::Length)?,
                        )
                    }
                    None => None,
                };
                out.scramble_check.push((orig.id.clone(), length_equal, frequency_equal));
            }

            if data.inputs.embeddings.is_some() || data.inputs.embeddings_scrambled.is_some() {
                let gaze = data.gaze(Some(&doc))?;
                let targets = metric_targets(&gaze);
                let orig = data.embeddings("embeddings", &data.inputs.embeddings)?;
                let scr = strip_scrambled_suffix(
                    &data.embeddings("embeddings_scrambled", &data.inputs.embeddings_scrambled)?,
                )?;
                let head = head_pipeline(cfg, seeds);
                for (condition, emb) in [("original", &orig), ("scrambled", &scr)] {
                    let a = align(emb, &targets)?;
                    push_scores(&mut out, condition, &cv_scores(&a.x, &a.y, cfg, seeds, &head)?);
                }
            }
        }
    }
    Ok(out)
}

/// Maps `<id>-scrambled` rows back to `<id>` so they align with the
/// original sentence's targets.
fn strip_scrambled_suffix(set: &EmbeddingSet) -> Result<EmbeddingSet> {
    let mut out = EmbeddingSet::new(set.dim(), set.provenance.clone())?;
    for (id, v) in set.iter() {
        out.insert(id.strip_suffix(SCRAMBLED_SUFFIX).unwrap_or(id), v.to_vec())?;
    }
    Ok(out)
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn assemble(cfg: &ExperimentConfig, outputs: &[LanguageOutput]) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    let pipeline = cfg.pipeline.as_str();

    let score_rows: Vec<Vec<String>> = outputs
        .iter()
        .flat_map(|o| {
            o.scores.iter().map(move |(cond, m, f, s)| {
                vec![
                    o.lang.clone(),
                    pipeline.to_string(),
                    cond.clone(),
                    m.abbrev().to_string(),
                    f.to_string(),
                    fmt6(s.explained_variance),
                    fmt6(s.r_squared),
                    s.n.to_string(),
                ]
            })
        })
        .collect();
    if !score_rows.is_empty() {
        files.insert(
            "scores.csv".into(),
            csv_bytes(
                &["language", "pipeline", "condition", "metric", "fold", "explained_variance", "r_squared", "n"],
                score_rows,
            )?,
        );
    }

    let subset_rows: Vec<Vec<String>> = outputs
        .iter()
        .flat_map(|o| {
            o.subsets.iter().map(move |(g, m, folds)| {
                let ev: Vec<f64> = folds.iter().map(|s| s.explained_variance).collect();
                let r2: Vec<f64> = folds.iter().map(|s| s.r_squared).collect();
                let (ev_m, ev_sd) = mean_sd(&ev);
                let (r2_m, r2_sd) = mean_sd(&r2);
                vec![
                    o.lang.clone(),
                    g.as_str().to_string(),
                    m.abbrev().to_string(),
                    fmt6(ev_m),
                    fmt6(ev_sd),
                    fmt6(r2_m),
                    fmt6(r2_sd),
                    folds.len().to_string(),
                ]
            })
        })
        .collect();
    if !subset_rows.is_empty() {
        files.insert(
            "svr_subsets.csv".into(),
            csv_bytes(
                &["language", "feature_group", "metric", "mean_ev", "sd_ev", "mean_r2", "sd_r2", "folds"],
                subset_rows,
            )?,
        );
    }

    let baseline_rows: Vec<Vec<String>> = outputs
        .iter()
        .flat_map(|o| {
            o.baseline.iter().map(move |(seed, m, s)| {
                vec![
                    o.lang.clone(),
                    pipeline.to_string(),
                    seed.to_string(),
                    m.abbrev().to_string(),
                    fmt6(s.explained_variance),
                    fmt6(s.r_squared),
                ]
            })
        })
        .collect();
    if !baseline_rows.is_empty() {
        files.insert(
            "baseline.csv".into(),
            csv_bytes(
                &["language", "pipeline", "seed", "metric", "explained_variance", "r_squared"],
                baseline_rows,
            )?,
        );
    }

    let reports: Vec<ProbeReport> = outputs.iter().filter_map(|o| o.probe.clone()).collect();
    if !reports.is_empty() {
        let mut buf = Vec::new();
        write_probe_csv(&reports, &mut buf)?;
        files.insert("probe.csv".into(), buf);
    }

    let check_rows: Vec<Vec<String>> = outputs
        .iter()
        .flat_map(|o| {
            o.scramble_check.iter().map(move |(id, len_eq, freq_eq)| {
                vec![
                    o.lang.clone(),
                    id.clone(),
                    len_eq.to_string(),
                    freq_eq.map_or("NA".to_string(), |b| b.to_string()),
                ]
            })
        })
        .collect();
    if !check_rows.is_empty() {
        files.insert(
            "scramble_check.csv".into(),
            csv_bytes(&["language", "sentence_id", "length_equal", "features_equal"], check_rows)?,
        );
    }

    for o in outputs {
        if let Some(c) = &o.correlations {
            files.insert(format!("correlations_{}.csv", o.lang), c.clone());
        }
        if let Some(t) = &o.scrambled_text {
            files.insert(format!("scrambled_{}.txt", o.lang), t.clone());
        }
    }
    Ok(files)
}
