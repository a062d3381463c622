//! Sentence-level eye-tracking metrics.
//!
//! Raw fixation logs are reduced per participant to fixation count (FC),
//! total fixation duration (TFD), first-pass duration (FPD) and
//! regression duration (RD), averaged over participants, then min-max
//! scaled to 0-100 per dataset.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "FC")]
    FixationCount,
    #[serde(rename = "TFD")]
    TotalFixationDuration,
    #[serde(rename = "FPD")]
    FirstPassDuration,
    #[serde(rename = "RD")]
    RegressionDuration,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::FixationCount,
        Metric::TotalFixationDuration,
        Metric::FirstPassDuration,
        Metric::RegressionDuration,
    ];

    pub fn abbrev(self) -> &'static str {
        match self {
            Metric::FixationCount => "FC",
            Metric::TotalFixationDuration => "TFD",
            Metric::FirstPassDuration => "FPD",
            Metric::RegressionDuration => "RD",
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            Metric::FixationCount => "fixation_count",
            Metric::TotalFixationDuration => "total_fixation_duration",
            Metric::FirstPassDuration => "first_pass_duration",
            Metric::RegressionDuration => "regression_duration",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.abbrev().eq_ignore_ascii_case(s) || m.column() == s)
            .ok_or_else(|| Error::Argument(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub participant_id: String,
    pub sentence_id: String,
    pub seq: u64,
    pub token_index: usize,
    pub duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeMetrics {
    pub sentence_id: String,
    pub fixation_count: f64,
    pub total_fixation_duration: f64,
    pub first_pass_duration: f64,
    pub regression_duration: f64,
}

impl GazeMetrics {
    pub fn zero(sentence_id: impl Into<String>) -> Self {
        GazeMetrics {
            sentence_id: sentence_id.into(),
            fixation_count: 0.0,
            total_fixation_duration: 0.0,
            first_pass_duration: 0.0,
            regression_duration: 0.0,
        }
    }

    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::FixationCount => self.fixation_count,
            Metric::TotalFixationDuration => self.total_fixation_duration,
            Metric::FirstPassDuration => self.first_pass_duration,
            Metric::RegressionDuration => self.regression_duration,
        }
    }

    pub fn set(&mut self, m: Metric, v: f64) {
        match m {
            Metric::FixationCount => self.fixation_count = v,
            Metric::TotalFixationDuration => self.total_fixation_duration = v,
            Metric::FirstPassDuration => self.first_pass_duration = v,
            Metric::RegressionDuration => self.regression_duration = v,
        }
    }

    pub fn values(&self) -> [f64; 4] {
        Metric::ALL.map(|m| self.get(m))
    }
}

/// Known sentences and their token counts, used to validate fixations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentenceBounds {
    order: Vec<String>,
    lengths: HashMap<String, usize>,
}

impl SentenceBounds {
    pub fn from_document(doc: &Document) -> Self {
        let mut b = SentenceBounds::default();
        for s in &doc.sentences {
            b.insert(&s.id, s.tokens.len());
        }
        b
    }

    pub fn insert(&mut self, id: &str, n_tokens: usize) {
        if self.lengths.insert(id.to_string(), n_tokens).is_none() {
            self.order.push(id.to_string());
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantMetrics {
    pub participant_id: String,
    pub metrics: GazeMetrics,
}

#[derive(Default)]
struct Accum {
    count: f64,
    total: f64,
    first_pass: f64,
    regression: f64,
    max_token: usize,
    first_pass_open: bool,
    first_pass_done: bool,
}

/// Reduces a fixation log to per-participant sentence metrics.
///
/// The log must be grouped by participant and ordered by `seq` within a
/// participant. Each participant's log is one trial: the first pass on a
/// sentence ends when gaze first moves to another sentence, and a fixation
/// is a regression when its token lies left of the rightmost token already
/// fixated in that sentence. Every sentence in `bounds` gets an entry per
/// participant, zero when it was never fixated.
pub fn aggregate_fixations(
    fixations: &[Fixation],
    bounds: &SentenceBounds,
) -> Result<Vec<ParticipantMetrics>> {
    let mut out = Vec::new();
    let mut finished: HashSet<&str> = HashSet::new();
    let mut i = 0;
    while i < fixations.len() {
        let pid = fixations[i].participant_id.as_str();
        if !finished.insert(pid) {
            return Err(Error::Ordering(format!(
                "participant {pid} appears in more than one block"
            )));
        }
        let mut acc: HashMap<&str, Accum> = HashMap::new();
        let mut prev_seq: Option<u64> = None;
        let mut prev_sentence: Option<&str> = None;
        while i < fixations.len() && fixations[i].participant_id == pid {
            let f = &fixations[i];
            i += 1;
            if let Some(p) = prev_seq {
                if f.seq <= p {
                    return Err(Error::Ordering(format!(
                        "participant {pid}: seq {} follows {p}",
                        f.seq
                    )));
                }
            }
            prev_seq = Some(f.seq);
            let n_tokens = *bounds
                .lengths
                .get(&f.sentence_id)
                .ok_or_else(|| Error::Mapping(f.sentence_id.clone()))?;
            if f.token_index == 0 || f.token_index > n_tokens {
                return Err(Error::Mapping(format!(
                    "{} has no token {}",
                    f.sentence_id, f.token_index
                )));
            }
            if !(f.duration_ms > 0.0) || !f.duration_ms.is_finite() {
                return Err(Error::Range(format!(
                    "fixation duration {} must be positive",
                    f.duration_ms
                )));
            }

            if let Some(prev) = prev_sentence {
                if prev != f.sentence_id {
                    if let Some(a) = acc.get_mut(prev) {
                        if a.first_pass_open {
                            a.first_pass_open = false;
                            a.first_pass_done = true;
                        }
                    }
                }
            }
            let a = acc.entry(f.sentence_id.as_str()).or_default();
            if a.count == 0.0 && !a.first_pass_done {
                a.first_pass_open = true;
            }
            a.count += 1.0;
            a.total += f.duration_ms;
            if a.first_pass_open {
                a.first_pass += f.duration_ms;
            }
            if f.token_index < a.max_token {
                a.regression += f.duration_ms;
            }
            a.max_token = a.max_token.max(f.token_index);
            prev_sentence = Some(f.sentence_id.as_str());
        }
        for id in &bounds.order {
            let metrics = match acc.get(id.as_str()) {
                Some(a) => GazeMetrics {
                    sentence_id: id.clone(),
                    fixation_count: a.count,
                    total_fixation_duration: a.total,
                    first_pass_duration: a.first_pass,
                    regression_duration: a.regression,
                },
                None => GazeMetrics::zero(id.clone()),
            };
            out.push(ParticipantMetrics {
                participant_id: pid.to_string(),
                metrics,
            });
        }
    }
    Ok(out)
}

/// Mean of each metric over the participants who fixated the sentence at
/// least once.
pub fn average_participants(metrics: &[ParticipantMetrics], sentence_id: &str) -> Result<GazeMetrics> {
    let seen: Vec<&GazeMetrics> = metrics
        .iter()
        .map(|p| &p.metrics)
        .filter(|m| m.sentence_id == sentence_id && m.fixation_count > 0.0)
        .collect();
    if seen.is_empty() {
        return Err(Error::MissingData(format!(
            "no participant fixated sentence {sentence_id}"
        )));
    }
    let n = seen.len() as f64;
    let mut avg = GazeMetrics::zero(sentence_id);
    for m in Metric::ALL {
        avg.set(m, seen.iter().map(|g| g.get(m)).sum::<f64>() / n);
    }
    Ok(avg)
}

/// Averages every sentence that has data, in `bounds` order; sentences
/// nobody fixated are skipped.
pub fn average_all(metrics: &[ParticipantMetrics], bounds: &SentenceBounds) -> Vec<GazeMetrics> {
    bounds
        .ids()
        .iter()
        .filter_map(|id| average_participants(metrics, id).ok())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScaler {
    pub min: BTreeMap<Metric, f64>,
    pub max: BTreeMap<Metric, f64>,
}

impl MetricScaler {
    pub fn scale(&self, m: Metric, v: f64) -> f64 {
        let lo = self.min[&m];
        let hi = self.max[&m];
        (v - lo) / (hi - lo) * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledDataset {
    pub metrics: Vec<GazeMetrics>,
    pub scaler: MetricScaler,
}

/// Per-metric min-max scaling onto [0, 100].
pub fn scale_metrics(dataset: &[GazeMetrics]) -> Result<ScaledDataset> {
    if dataset.len() < 2 {
        return Err(Error::Degenerate(
            "scaling needs at least two sentences".to_string(),
        ));
    }
    let mut scaler = MetricScaler {
        min: BTreeMap::new(),
        max: BTreeMap::new(),
    };
    for m in Metric::ALL {
        let lo = dataset.iter().map(|g| g.get(m)).fold(f64::INFINITY, f64::min);
        let hi = dataset
            .iter()
            .map(|g| g.get(m))
            .fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::Degenerate(format!(
                "metric {} is constant ({lo}) and cannot be scaled",
                m.column()
            )));
        }
        scaler.min.insert(m, lo);
        scaler.max.insert(m, hi);
    }
    let metrics = dataset
        .iter()
        .map(|g| {
            let mut s = g.clone();
            for m in Metric::ALL {
                s.set(m, scaler.scale(m, g.get(m)));
            }
            s
        })
        .collect();
    Ok(ScaledDataset { metrics, scaler })
}

const FIXATION_COLUMNS: [&str; 5] = [
    "participant_id",
    "sentence_id",
    "seq",
    "token_index",
    "duration_ms",
];

fn column_positions(headers: &csv::StringRecord, names: &[&str]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h.trim() == *n)
                .ok_or_else(|| Error::Schema(format!("missing column {n:?}")))
        })
        .collect()
}

pub fn read_fixations<R: Read>(input: R) -> Result<Vec<Fixation>> {
    let mut rdr = csv::Reader::from_reader(input);
    let pos = column_positions(&rdr.headers()?.clone(), &FIXATION_COLUMNS)?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let field = |k: usize| rec.get(pos[k]).unwrap_or("").trim();
        let bad = |k: usize| Error::parse(line, format!("bad {} {:?}", FIXATION_COLUMNS[k], field(k)));
        out.push(Fixation {
            participant_id: field(0).to_string(),
            sentence_id: field(1).to_string(),
            seq: field(2).parse().map_err(|_| bad(2))?,
            token_index: field(3).parse().map_err(|_| bad(3))?,
            duration_ms: field(4).parse().map_err(|_| bad(4))?,
        });
    }
    Ok(out)
}

/// Reads sentence-level metrics (`sentence_id` plus the four metric
/// columns).
pub fn import_sentence_metrics<R: Read>(input: R) -> Result<Vec<GazeMetrics>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut names = vec!["sentence_id"];
    names.extend(Metric::ALL.map(|m| m.column()));
    let pos = column_positions(&rdr.headers()?.clone(), &names)?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let mut g = GazeMetrics::zero(rec.get(pos[0]).unwrap_or("").trim());
        for (k, m) in Metric::ALL.into_iter().enumerate() {
            let raw = rec.get(pos[k + 1]).unwrap_or("").trim();
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::parse(line, format!("bad {} {raw:?}", m.column())))?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Range(format!(
                    "line {line}: {} = {v} must be a finite non-negative number",
                    m.column()
                )));
            }
            g.set(m, v);
        }
        out.push(g);
    }
    Ok(out)
}

pub fn write_sentence_metrics<W: Write>(metrics: &[GazeMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sentence_id"];
    header.extend(Metric::ALL.map(|m| m.column()));
    w.write_record(&header)?;
    for g in metrics {
        let mut row = vec![g.sentence_id.clone()];
        row.extend(g.values().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fix(p: &str, s: &str, seq: u64, tok: usize, dur: f64) -> Fixation {
        Fixation {
            participant_id: p.into(),
            sentence_id: s.into(),
            seq,
            token_index: tok,
            duration_ms: dur,
        }
    }

    fn bounds() -> SentenceBounds {
        let mut b = SentenceBounds::default();
        b.insert("s", 5);
        b.insert("t", 5);
        b
    }

    fn metrics_for<'a>(out: &'a [ParticipantMetrics], s: &str) -> &'a GazeMetrics {
        &out.iter().find(|p| p.metrics.sentence_id == s).unwrap().metrics
    }

    #[test]
    fn regression_within_single_pass() {
        let log = [
            fix("p", "s", 1, 1, 100.0),
            fix("p", "s", 2, 2, 150.0),
            fix("p", "s", 3, 1, 80.0),
            fix("p", "s", 4, 3, 120.0),
        ];
        let out = aggregate_fixations(&log, &bounds()).unwrap();
        let g = metrics_for(&out, "s");
        assert_eq!(g.values(), [4.0, 450.0, 450.0, 80.0]);
    }

    #[test]
    fn first_pass_ends_at_first_exit() {
        let log = [
            fix("p", "s", 1, 1, 100.0),
            fix("p", "t", 2, 1, 90.0),
            fix("p", "s", 3, 2, 200.0),
        ];
        let out = aggregate_fixations(&log, &bounds()).unwrap();
        assert_eq!(metrics_for(&out, "s").values(), [2.0, 300.0, 100.0, 0.0]);
    }

    #[test]
    fn unfixated_sentence_is_zero() {
        let log = [fix("p", "t", 1, 1, 90.0)];
        let out = aggregate_fixations(&log, &bounds()).unwrap();
        assert_eq!(metrics_for(&out, "s").values(), [0.0; 4]);
    }

    #[test]
    fn unknown_sentence_and_bad_order() {
        assert!(matches!(
            aggregate_fixations(&[fix("p", "zzz", 1, 1, 10.0)], &bounds()),
            Err(Error::Mapping(_))
        ));
        let log = [fix("p", "s", 2, 1, 10.0), fix("p", "s", 1, 2, 10.0)];
        assert!(matches!(
            aggregate_fixations(&log, &bounds()),
            Err(Error::Ordering(_))
        ));
        let log = [
            fix("p", "s", 1, 1, 10.0),
            fix("q", "s", 1, 1, 10.0),
            fix("p", "s", 2, 1, 10.0),
        ];
        assert!(matches!(
            aggregate_fixations(&log, &bounds()),
            Err(Error::Ordering(_))
        ));
    }

    fn pm(p: &str, fc: f64, tfd: f64) -> ParticipantMetrics {
        ParticipantMetrics {
            participant_id: p.into(),
            metrics: GazeMetrics {
                sentence_id: "s".into(),
                fixation_count: fc,
                total_fixation_duration: tfd,
                first_pass_duration: 0.0,
                regression_duration: 0.0,
            },
        }
    }

    #[test]
    fn averaging() {
        let two = [pm("a", 1.0, 10.0), pm("b", 1.0, 20.0)];
        assert_eq!(average_participants(&two, "s").unwrap().total_fixation_duration, 15.0);
        let one = [pm("a", 3.0, 10.0)];
        assert_eq!(average_participants(&one, "s").unwrap(), one[0].metrics);
        let three = [pm("a", 2.0, 0.0), pm("b", 4.0, 0.0), pm("c", 6.0, 0.0)];
        assert_eq!(average_participants(&three, "s").unwrap().fixation_count, 4.0);
        // skipped trials do not deflate the mean
        let skip = [pm("a", 2.0, 10.0), pm("b", 0.0, 0.0)];
        assert_eq!(average_participants(&skip, "s").unwrap().total_fixation_duration, 10.0);
        assert!(matches!(
            average_participants(&[], "s"),
            Err(Error::MissingData(_))
        ));
    }

    fn tfd_only(values: &[f64]) -> Vec<GazeMetrics> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| GazeMetrics {
                sentence_id: format!("s{i}"),
                fixation_count: v,
                total_fixation_duration: v,
                first_pass_duration: v,
                regression_duration: v,
            })
            .collect()
    }

    #[test]
    fn min_max_scaling() {
        let s = scale_metrics(&tfd_only(&[200.0, 500.0, 800.0])).unwrap();
        let tfd: Vec<f64> = s.metrics.iter().map(|g| g.total_fixation_duration).collect();
        assert_eq!(tfd, [0.0, 50.0, 100.0]);
        let s = scale_metrics(&tfd_only(&[0.0, 100.0])).unwrap();
        assert_eq!(s.metrics[1].regression_duration, 100.0);
        assert_eq!(s.metrics[0].regression_duration, 0.0);
        let s = scale_metrics(&tfd_only(&[1.0, 2.0, 4.0])).unwrap();
        assert!((s.metrics[1].fixation_count - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_metric_is_degenerate() {
        let mut d = tfd_only(&[1.0, 2.0]);
        d[0].regression_duration = 5.0;
        d[1].regression_duration = 5.0;
        match scale_metrics(&d) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("regression_duration")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn metric_csv_import() {
        let hdr = "sentence_id,fixation_count,total_fixation_duration,first_pass_duration,regression_duration\n";
        let one = format!("{hdr}s1,3,600,400,50\n");
        let m = import_sentence_metrics(one.as_bytes()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].first_pass_duration, 400.0);
        let neg = format!("{hdr}s1,3,600,400,-3\n");
        assert!(matches!(
            import_sentence_metrics(neg.as_bytes()),
            Err(Error::Range(_))
        ));
        assert!(import_sentence_metrics(hdr.as_bytes()).unwrap().is_empty());
        assert!(matches!(
            import_sentence_metrics("sentence_id,fixation_count\n".as_bytes()),
            Err(Error::Schema(_))
        ));
    }

    proptest! {
        #[test]
        fn scaling_preserves_order(v in proptest::collection::vec(0.0f64..1e4, 2..40)) {
            prop_assume!(v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > v.iter().cloned().fold(f64::INFINITY, f64::min));
            let s = scale_metrics(&tfd_only(&v)).unwrap();
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(s.metrics[i].total_fixation_duration <= s.metrics[j].total_fixation_duration);
                    }
                }
                prop_assert!((0.0..=100.0).contains(&s.metrics[i].total_fixation_duration));
            }
        }

        #[test]
        fn averaging_commutes_with_rescaling(vals in proptest::collection::vec(1.0f64..500.0, 1..8), k in 0.1f64..10.0) {
            let ps: Vec<_> = vals.iter().enumerate().map(|(i, &v)| pm(&i.to_string(), v, v * 3.0)).collect();
            let scaled: Vec<_> = vals.iter().enumerate().map(|(i, &v)| pm(&i.to_string(), v * k, v * 3.0 * k)).collect();
            let a = average_participants(&ps, "s").unwrap();
            let b = average_participants(&scaled, "s").unwrap();
            prop_assert!((a.total_fixation_duration * k - b.total_fixation_duration).abs() < 1e-9 * b.total_fixation_duration.max(1.0));
        }
    }
}
