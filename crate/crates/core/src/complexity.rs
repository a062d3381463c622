//! The nine sentence-level complexity features and their groupings.
//!
//! Punctuation tokens are excluded from every count. Structural features
//! need a dependency tree; sentences whose annotation was dropped (see
//! [`crate::scramble`]) only get the length and frequency features.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Upos};
use crate::error::{Error, Result};
use crate::lexicon::FrequencyLexicon;

/// Feature names in table order.
pub const FEATURE_NAMES: [&str; 9] = [
    "sentence_length",
    "avg_word_length",
    "avg_word_frequency",
    "n_low_frequency_words",
    "lexical_density",
    "parse_tree_depth",
    "avg_dep_link_length",
    "max_dep_link_length",
    "n_verbal_heads",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityConfig {
    /// Words with a Zipf frequency strictly below this count as low frequency.
    pub low_frequency_threshold: f64,
    pub content_upos: BTreeSet<Upos>,
    /// Count the characters of punctuation tokens in the numerator of the
    /// average word length (the denominator is always the word count).
    pub punct_chars_in_word_length: bool,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        ComplexityConfig {
            low_frequency_threshold: 4.0,
            content_upos: [Upos::Noun, Upos::Propn, Upos::Verb, Upos::Adj, Upos::Adv]
                .into_iter()
                .collect(),
            punct_chars_in_word_length: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntacticFeatures {
    pub parse_tree_depth: usize,
    pub avg_dep_link_length: f64,
    pub max_dep_link_length: usize,
    pub n_verbal_heads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub sentence_length: usize,
    pub avg_word_length: f64,
    pub avg_word_frequency: f64,
    pub n_low_frequency_words: usize,
    pub lexical_density: f64,
    /// `None` when the sentence carries no dependency annotation.
    pub syntax: Option<SyntacticFeatures>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    Length,
    Frequency,
    Structural,
    All,
}

impl FeatureGroup {
    pub const SUBSETS: [FeatureGroup; 4] = [
        FeatureGroup::Length,
        FeatureGroup::Frequency,
        FeatureGroup::Structural,
        FeatureGroup::All,
    ];

    /// Column indices into the nine-feature vector.
    pub fn indices(self) -> &'static [usize] {
        match self {
            FeatureGroup::Length => &[0, 1],
            FeatureGroup::Frequency => &[2, 3],
            FeatureGroup::Structural => &[4, 5, 6, 7, 8],
            FeatureGroup::All => &[0, 1, 2, 3, 4, 5, 6, 7, 8],
        }
    }

    pub fn feature_names(self) -> Vec<&'static str> {
        self.indices().iter().map(|&i| FEATURE_NAMES[i]).collect()
    }

    pub fn needs_syntax(self) -> bool {
        matches!(self, FeatureGroup::Structural | FeatureGroup::All)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Length => "length",
            FeatureGroup::Frequency => "frequency",
            FeatureGroup::Structural => "structural",
            FeatureGroup::All => "all",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "length" => Ok(FeatureGroup::Length),
            "frequency" => Ok(FeatureGroup::Frequency),
            "structural" => Ok(FeatureGroup::Structural),
            "all" => Ok(FeatureGroup::All),
            other => Err(Error::Argument(format!("unknown feature group {other:?}"))),
        }
    }
}

impl ComplexityProfile {
    /// All nine values in table order; fails when the structural part is
    /// missing.
    pub fn to_vec(&self) -> Result<Vec<f64>> {
        let syn = self.syntax.ok_or_else(|| {
            Error::MissingSyntax("profile has no structural features".to_string())
        })?;
        Ok(vec![
            self.sentence_length as f64,
            self.avg_word_length,
            self.avg_word_frequency,
            self.n_low_frequency_words as f64,
            self.lexical_density,
            syn.parse_tree_depth as f64,
            syn.avg_dep_link_length,
            syn.max_dep_link_length as f64,
            syn.n_verbal_heads as f64,
        ])
    }

    /// Value of feature `i` (table order), `None` for a missing structural
    /// feature.
    pub fn feature(&self, i: usize) -> Option<f64> {
        match i {
            0 => Some(self.sentence_length as f64),
            1 => Some(self.avg_word_length),
            2 => Some(self.avg_word_frequency),
            3 => Some(self.n_low_frequency_words as f64),
            4 => Some(self.lexical_density),
            5..=8 => self.syntax.map(|s| match i {
                5 => s.parse_tree_depth as f64,
                6 => s.avg_dep_link_length,
                7 => s.max_dep_link_length as f64,
                _ => s.n_verbal_heads as f64,
            }),
            _ => None,
        }
    }
}

pub fn profile(
    s: &Sentence,
    lex: &FrequencyLexicon,
    cfg: &ComplexityConfig,
) -> Result<ComplexityProfile> {
    let words: Vec<_> = s.words().collect();
    if words.is_empty() {
        return Err(Error::Degenerate(format!(
            "sentence {} has no non-punctuation tokens",
            s.id
        )));
    }
    let n = words.len() as f64;

    let mut chars: usize = words.iter().map(|t| t.char_length()).sum();
    if cfg.punct_chars_in_word_length {
        chars += s
            .tokens
            .iter()
            .filter(|t| t.is_punct())
            .map(|t| t.char_length())
            .sum::<usize>();
    }

    let mut freqs: Vec<f64> = words.iter().map(|t| lex.zipf(&t.surface)).collect();
    // summed in sorted order so the mean does not depend on word order
    freqs.sort_by(f64::total_cmp);
    let n_low = freqs
        .iter()
        .filter(|&&z| z < cfg.low_frequency_threshold)
        .count();
    let n_content = words
        .iter()
        .filter(|t| cfg.content_upos.contains(&t.upos))
        .count();

    let syntax = if s.has_syntax() {
        Some(syntactic_features(s))
    } else {
        None
    };

    Ok(ComplexityProfile {
        sentence_length: words.len(),
        avg_word_length: chars as f64 / n,
        avg_word_frequency: freqs.iter().sum::<f64>() / n,
        n_low_frequency_words: n_low,
        lexical_density: n_content as f64 / n,
        syntax,
    })
}

/// Assumes `s` has passed [`Sentence::validate`] and has heads.
fn syntactic_features(s: &Sentence) -> SyntacticFeatures {
    let n = s.tokens.len();
    let heads: Vec<usize> = s.tokens.iter().map(|t| t.head.unwrap_or(0)).collect();

    // Root sits at depth 1.
    let mut depth = vec![0usize; n + 1];
    fn depth_of(i: usize, heads: &[usize], depth: &mut [usize]) -> usize {
        if i == 0 {
            return 0;
        }
        if depth[i] == 0 {
            depth[i] = depth_of(heads[i - 1], heads, depth) + 1;
        }
        depth[i]
    }
    let parse_tree_depth = (1..=n)
        .map(|i| depth_of(i, &heads, &mut depth))
        .max()
        .unwrap_or(1);

    let links: Vec<usize> = s
        .tokens
        .iter()
        .filter(|t| !t.is_punct())
        .filter_map(|t| match t.head {
            Some(h) if h > 0 => Some(t.index.abs_diff(h)),
            _ => None,
        })
        .collect();
    let (avg_link, max_link) = if links.is_empty() {
        (0.0, 0)
    } else {
        (
            links.iter().sum::<usize>() as f64 / links.len() as f64,
            *links.iter().max().unwrap(),
        )
    };

    let mut has_dependent = vec![false; n + 1];
    let mut has_cop = vec![false; n + 1];
    for t in &s.tokens {
        if let Some(h) = t.head {
            has_dependent[h] = true;
            let rel = t.deprel.as_deref().unwrap_or("");
            if rel.split(':').next() == Some("cop") {
                has_cop[h] = true;
            }
        }
    }
    let mut verbal_heads = 0;
    for t in &s.tokens {
        if t.upos == Upos::Verb && has_dependent[t.index] {
            verbal_heads += 1;
        } else if t.head == Some(0) && t.upos != Upos::Verb && has_cop[t.index] {
            verbal_heads += 1;
        }
    }

    SyntacticFeatures {
        parse_tree_depth,
        avg_dep_link_length: avg_link,
        max_dep_link_length: max_link,
        n_verbal_heads: verbal_heads,
    }
}

/// The group's features in table order.
pub fn subset(p: &ComplexityProfile, g: FeatureGroup) -> Result<Vec<f64>> {
    g.indices()
        .iter()
        .map(|&i| {
            p.feature(i).ok_or_else(|| {
                Error::MissingSyntax(format!(
                    "{} features requested for a sentence without a parse",
                    g
                ))
            })
        })
        .collect()
}

/// A profiled sentence as stored in the profile CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRecord {
    pub sentence_id: String,
    pub language: String,
    pub profile: ComplexityProfile,
}

/// CSV with header `sentence_id,language,<nine features>`; missing
/// structural features are written as `NA`.
pub fn write_profiles<W: Write>(records: &[ProfileRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sentence_id", "language"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.sentence_id.clone(), r.language.clone()];
        for i in 0..FEATURE_NAMES.len() {
            row.push(match r.profile.feature(i) {
                Some(v) => format_feature(i, v),
                None => "NA".to_string(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn format_feature(i: usize, v: f64) -> String {
    match i {
        0 | 3 | 5 | 7 | 8 => format!("{}", v as i64),
        _ => format!("{v}"),
    }
}

pub fn read_profiles<R: Read>(input: R) -> Result<Vec<ProfileRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("profile CSV lacks column {name:?}")))
    };
    let id_col = col("sentence_id")?;
    let lang_col = col("language")?;
    let feat_cols: Vec<usize> = FEATURE_NAMES
        .iter()
        .map(|n| col(n))
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let mut vals = [None; 9];
        for (k, &c) in feat_cols.iter().enumerate() {
            let raw = rec.get(c).unwrap_or("").trim();
            if raw == "NA" {
                continue;
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::parse(line, format!("bad value {raw:?} for {}", FEATURE_NAMES[k])))?;
            vals[k] = Some(v);
        }
        let req = |k: usize| {
            vals[k].ok_or_else(|| Error::parse(line, format!("{} may not be NA", FEATURE_NAMES[k])))
        };
        let syntax = match (vals[5], vals[6], vals[7], vals[8]) {
            (Some(d), Some(a), Some(m), Some(v)) => Some(SyntacticFeatures {
                parse_tree_depth: d as usize,
                avg_dep_link_length: a,
                max_dep_link_length: m as usize,
                n_verbal_heads: v as usize,
            }),
            (None, None, None, None) => None,
            _ => return Err(Error::parse(line, "structural features partially NA")),
        };
        out.push(ProfileRecord {
            sentence_id: rec.get(id_col).unwrap_or("").to_string(),
            language: rec.get(lang_col).unwrap_or("").to_string(),
            profile: ComplexityProfile {
                sentence_length: req(0)? as usize,
                avg_word_length: req(1)?,
                avg_word_frequency: req(2)?,
                n_low_frequency_words: req(3)? as usize,
                lexical_density: req(4)?,
                syntax,
            },
        });
    }
    Ok(out)
}
