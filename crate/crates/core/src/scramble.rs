//! Word-order scrambling for the shuffled-input control.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{Document, Sentence};

pub const SCRAMBLED_SUFFIX: &str = "-scrambled";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScrambleOptions {
    /// Keep a sentence-final punctuation token at the end.
    pub pin_final_punct: bool,
}

/// Shuffles whole tokens (surface, lemma and tag move together), renumbers
/// them and drops the dependency annotation, which no longer applies.
pub fn scramble_sentence(s: &Sentence, seed: u64, opts: ScrambleOptions) -> Sentence {
    let mut tokens = s.tokens.clone();
    let pinned = if opts.pin_final_punct && tokens.last().is_some_and(|t| t.is_punct()) {
        tokens.pop()
    } else {
        None
    };
    tokens.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    tokens.extend(pinned);
    for (i, t) in tokens.iter_mut().enumerate() {
        t.index = i + 1;
        t.head = None;
        t.deprel = None;
    }
    Sentence {
        id: format!("{}{SCRAMBLED_SUFFIX}", s.id),
        tokens,
        lang: s.lang.clone(),
        text_id: s.text_id.clone(),
    }
}

/// Per-sentence seed: `seed` XOR the first eight bytes of SHA-256(id).
pub fn sentence_seed(seed: u64, id: &str) -> u64 {
    let digest = Sha256::digest(id.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(bytes)
}

pub fn scramble_corpus(doc: &Document, seed: u64, opts: ScrambleOptions) -> Document {
    Document {
        sentences: doc
            .sentences
            .iter()
            .map(|s| scramble_sentence(s, sentence_seed(seed, &s.id), opts))
            .collect(),
        lang: doc.lang.clone(),
        source: doc.source.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::{profile, subset, ComplexityConfig, FeatureGroup};
    use crate::corpus::write_plain_text;
    use crate::error::Error;
    use crate::synth::synthetic_corpus;

    fn sorted_surfaces(s: &Sentence) -> Vec<String> {
        let mut v: Vec<String> = s.tokens.iter().map(|t| t.surface.clone()).collect();
        v.sort();
        v
    }

    #[test]
    fn single_token_identity() {
        let (doc, _) = synthetic_corpus(1, 0);
        let mut s = doc.sentences[0].clone();
        s.tokens.truncate(1);
        s.tokens[0].head = Some(0);
        let out = scramble_sentence(&s, 3, ScrambleOptions::default());
        assert_eq!(out.id, format!("{}-scrambled", s.id));
        assert_eq!(out.tokens[0].surface, s.tokens[0].surface);
        assert_eq!(out.tokens[0].head, None);
    }

    #[test]
    fn deterministic_and_multiset_preserving() {
        let (doc, _) = synthetic_corpus(20, 4);
        for s in &doc.sentences {
            let a = scramble_sentence(s, 9, ScrambleOptions::default());
            assert_eq!(a, scramble_sentence(s, 9, ScrambleOptions::default()));
            assert_eq!(sorted_surfaces(&a), sorted_surfaces(s));
            a.validate().unwrap();
        }
    }

    #[test]
    fn pinned_final_punct_stays_last() {
        let (doc, _) = synthetic_corpus(20, 5);
        for s in &doc.sentences {
            let a = scramble_sentence(s, 1, ScrambleOptions { pin_final_punct: true });
            assert_eq!(a.tokens.last().unwrap().surface, ".");
        }
    }

    #[test]
    fn corpus_level() {
        let (doc, lex) = synthetic_corpus(15, 6);
        let a = scramble_corpus(&doc, 42, ScrambleOptions::default());
        let b = scramble_corpus(&doc, 42, ScrambleOptions::default());
        assert_eq!(a.len(), 15);
        let (mut ta, mut tb) = (Vec::new(), Vec::new());
        write_plain_text(&a, &mut ta).unwrap();
        write_plain_text(&b, &mut tb).unwrap();
        assert_eq!(ta, tb);
        assert!(a.sentences.iter().all(|s| s.id.ends_with(SCRAMBLED_SUFFIX)));
        assert!(scramble_corpus(&Document::default(), 1, ScrambleOptions::default()).is_empty());

        let cfg = ComplexityConfig::default();
        for (orig, scr) in doc.sentences.iter().zip(&a.sentences) {
            let p = profile(orig, &lex, &cfg).unwrap();
            let q = profile(scr, &lex, &cfg).unwrap();
            assert_eq!(subset(&p, FeatureGroup::Length).unwrap(), subset(&q, FeatureGroup::Length).unwrap());
            assert_eq!(subset(&p, FeatureGroup::Frequency).unwrap(), subset(&q, FeatureGroup::Frequency).unwrap());
            assert!(matches!(subset(&q, FeatureGroup::Structural), Err(Error::MissingSyntax(_))));
        }
    }
}
