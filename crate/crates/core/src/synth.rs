//! Seeded synthetic corpora, metrics and embeddings for tests, benchmarks
//! and demo runs.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::complexity::{profile, ComplexityConfig, ComplexityProfile, SyntacticFeatures};
use crate::corpus::{write_conllu, Document, Sentence, Token, Upos};
use crate::embed::{write_embeddings, EmbeddingSet};
use crate::error::Result;
use crate::gaze::{write_sentence_metrics, GazeMetrics};
use crate::lexicon::{write_lexicon, FrequencyLexicon};
use crate::scramble::SCRAMBLED_SUFFIX;

const WORD_TAGS: [Upos; 9] = [
    Upos::Noun,
    Upos::Noun,
    Upos::Verb,
    Upos::Adj,
    Upos::Det,
    Upos::Adp,
    Upos::Adv,
    Upos::Pron,
    Upos::Propn,
];

fn random_word(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(2..=10);
    (0..len)
        .map(|_| (b'a' + rng.random_range(0..26u8)) as char)
        .collect()
}

/// A parsed corpus of `n` sentences and a lexicon covering its words.
///
/// Sentence lengths are uniform in 5..=40 words, plus a final period.
/// Each sentence draws its own share of low-frequency words (Zipf below
/// 4), so the low-frequency count is only loosely tied to length. Trees
/// are random recursive trees over a shuffled order of positions.
pub fn synthetic_corpus(n: usize, seed: u64) -> (Document, FrequencyLexicon) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lex = FrequencyLexicon::new("xx");
    let mut frequent = Vec::new();
    let mut rare = Vec::new();
    while frequent.len() < 300 {
        let w = random_word(&mut rng);
        if !lex.contains(&w) {
            lex.insert(&w, rng.random_range(4.5..7.0)).expect("in range");
            frequent.push(w);
        }
    }
    while rare.len() < 300 {
        let w = random_word(&mut rng);
        if !lex.contains(&w) {
            lex.insert(&w, rng.random_range(1.0..3.5)).expect("in range");
            rare.push(w);
        }
    }

    let mut doc = Document::new("xx", "synthetic");
    for s in 0..n {
        let len = rng.random_range(5..=40usize);
        let p_rare: f64 = rng.random_range(0.0..0.6);
        let mut order: Vec<usize> = (1..=len).collect();
        order.shuffle(&mut rng);
        let mut heads = vec![0usize; len + 1];
        for k in 1..len {
            heads[order[k]] = order[rng.random_range(0..k)];
        }
        let mut tokens: Vec<Token> = (1..=len)
            .map(|i| {
                let pool = if rng.random_bool(p_rare) { &rare } else { &frequent };
                let w = pool.choose(&mut rng).expect("non-empty").clone();
                let head = heads[i];
                Token {
                    index: i,
                    lemma: w.clone(),
                    surface: w,
                    upos: *WORD_TAGS.choose(&mut rng).expect("non-empty"),
                    head: Some(head),
                    deprel: Some(if head == 0 { "root" } else { "dep" }.to_string()),
                }
            })
            .collect();
        tokens.push(Token {
            index: len + 1,
            surface: ".".into(),
            lemma: ".".into(),
            upos: Upos::Punct,
            head: Some(order[0]),
            deprel: Some("punct".into()),
        });
        doc.sentences.push(Sentence {
            id: format!("syn{s:04}"),
            tokens,
            lang: "xx".into(),
            text_id: format!("text{}", s / 10),
        });
    }
    (doc, lex)
}

/// Profiles every sentence of `doc` with the default configuration.
pub fn profile_all(doc: &Document, lex: &FrequencyLexicon) -> BTreeMap<String, ComplexityProfile> {
    let cfg = ComplexityConfig::default();
    doc.sentences
        .iter()
        .map(|s| (s.id.clone(), profile(s, lex, &cfg).expect("synthetic sentences have words")))
        .collect()
}

/// Metrics that grow linearly with sentence length plus Gaussian noise
/// with standard deviation `noise` (in units of the slope).
pub fn length_driven_metrics(
    profiles: &BTreeMap<String, ComplexityProfile>,
    noise: f64,
    seed: u64,
) -> Vec<GazeMetrics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slopes = [1.1, 240.0, 170.0, 35.0];
    profiles
        .iter()
        .map(|(id, p)| {
            let l = p.sentence_length as f64;
            let mut v = [0.0; 4];
            for (k, s) in slopes.iter().enumerate() {
                let e: f64 = rng.sample(StandardNormal);
                v[k] = (s * (l + noise * e)).max(0.0);
            }
            GazeMetrics {
                sentence_id: id.clone(),
                fixation_count: v[0],
                total_fixation_duration: v[1],
                first_pass_duration: v[2],
                regression_duration: v[3],
            }
        })
        .collect()
}

/// `n` profiles with mutually independent feature values.
pub fn random_profiles(n: usize, seed: u64) -> BTreeMap<String, ComplexityProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let p = ComplexityProfile {
                sentence_length: rng.random_range(5..=40),
                avg_word_length: rng.random_range(3.0..9.0),
                avg_word_frequency: rng.random_range(2.0..7.0),
                n_low_frequency_words: rng.random_range(0..=12),
                lexical_density: rng.random_range(0.3..0.9),
                syntax: Some(SyntacticFeatures {
                    parse_tree_depth: rng.random_range(2..=9),
                    avg_dep_link_length: rng.random_range(1.0..4.0),
                    max_dep_link_length: rng.random_range(2..=15),
                    n_verbal_heads: rng.random_range(0..=5),
                }),
            };
            (format!("p{i:04}"), p)
        })
        .collect()
}

/// Standard normal vectors for every profiled sentence.
pub fn noise_embeddings(
    profiles: &BTreeMap<String, ComplexityProfile>,
    dim: usize,
    seed: u64,
) -> EmbeddingSet {
    encoding_embeddings(profiles, dim, &[], seed)
}

/// Noise vectors whose first coordinates carry the given features
/// exactly: coordinate `k` equals feature `features[k]` (table order).
pub fn encoding_embeddings(
    profiles: &BTreeMap<String, ComplexityProfile>,
    dim: usize,
    features: &[usize],
    seed: u64,
) -> EmbeddingSet {
    assert!(features.len() <= dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = EmbeddingSet::new(dim, format!("synthetic encoding {features:?}")).expect("dim > 0");
    for (id, p) in profiles {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for (k, &f) in features.iter().enumerate() {
            v[k] = p.feature(f).expect("synthetic profiles are complete");
        }
        set.insert(id.clone(), v).expect("valid row");
    }
    set
}

/// Writes a complete synthetic input set for language `xx` into `dir`:
///
/// - `xx.conllu`, `xx.lexicon.tsv`: corpus and lexicon;
/// - `xx.metrics.csv`: unscaled sentence metrics driven by length;
/// - `xx.emb.tsv`: embeddings encoding length and word frequency;
/// - `xx.pre.tsv`, `xx.ft.tsv`: noise and feature-encoding embeddings for
///   probing;
/// - `xx.scrambled.tsv`: noise embeddings keyed by scrambled ids.
pub fn write_demo_inputs(dir: &Path, n: usize, seed: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (doc, lex) = synthetic_corpus(n, seed);
    let profiles = profile_all(&doc, &lex);
    write_conllu(&doc, BufWriter::new(File::create(dir.join("xx.conllu"))?))?;
    write_lexicon(&lex, BufWriter::new(File::create(dir.join("xx.lexicon.tsv"))?))?;
    let metrics = length_driven_metrics(&profiles, 1.0, seed.wrapping_add(1));
    write_sentence_metrics(&metrics, File::create(dir.join("xx.metrics.csv"))?)?;
    let emb = encoding_embeddings(&profiles, 8, &[0, 2], seed.wrapping_add(2));
    write_embeddings(&emb, BufWriter::new(File::create(dir.join("xx.emb.tsv"))?))?;
    let pre = noise_embeddings(&profiles, 8, seed.wrapping_add(3));
    write_embeddings(&pre, BufWriter::new(File::create(dir.join("xx.pre.tsv"))?))?;
    let ft = encoding_embeddings(&profiles, 8, &[0, 1, 2, 4], seed.wrapping_add(4));
    write_embeddings(&ft, BufWriter::new(File::create(dir.join("xx.ft.tsv"))?))?;
    let noise = noise_embeddings(&profiles, 8, seed.wrapping_add(5));
    let mut scrambled = EmbeddingSet::new(8, "synthetic scrambled")?;
    for (id, v) in noise.iter() {
        scrambled.insert(format!("{id}{SCRAMBLED_SUFFIX}"), v.to_vec())?;
    }
    write_embeddings(&scrambled, BufWriter::new(File::create(dir.join("xx.scrambled.tsv"))?))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_valid_and_deterministic() {
        let (a, lex) = synthetic_corpus(30, 1);
        let (b, _) = synthetic_corpus(30, 1);
        assert_eq!(a, b);
        for s in &a.sentences {
            s.validate().unwrap();
            assert!(s.word_count() >= 5);
        }
        assert_eq!(profile_all(&a, &lex).len(), 30);
    }
}
