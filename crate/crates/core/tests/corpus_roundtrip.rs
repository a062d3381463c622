use gazeprobe_core::corpus::{filter_min_length, parse_conllu, parse_plain_text, write_conllu, write_plain_text};
use gazeprobe_core::lexicon::{load_lexicon, write_lexicon};
use gazeprobe_core::synth::synthetic_corpus;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conllu_write_parse_is_idempotent(n in 1usize..20, seed in any::<u64>()) {
        let (doc, _) = synthetic_corpus(n, seed);
        let mut first = Vec::new();
        write_conllu(&doc, &mut first).unwrap();
        let parsed = parse_conllu(first.as_slice(), "xx", "synthetic").unwrap();
        prop_assert_eq!(&parsed.sentences, &doc.sentences);
        let mut second = Vec::new();
        write_conllu(&parsed, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn filter_is_monotone(n in 1usize..30, seed in any::<u64>(), a in 0usize..45, b in 0usize..45) {
        let (doc, _) = synthetic_corpus(n, seed);
        let (lo, hi) = (a.min(b), a.max(b));
        let loose = filter_min_length(&doc, lo);
        let strict = filter_min_length(&doc, hi);
        prop_assert!(strict.len() <= loose.len());
        for s in &strict.sentences {
            prop_assert!(loose.get(&s.id).is_some());
            prop_assert!(s.word_count() >= hi);
        }
    }
}

#[test]
fn plain_text_round_trip() {
    let (doc, _) = synthetic_corpus(10, 3);
    let mut text = Vec::new();
    write_plain_text(&doc, &mut text).unwrap();
    let back = parse_plain_text(text.as_slice(), "xx", "plain").unwrap();
    assert_eq!(back.len(), doc.len());
    for (a, b) in doc.sentences.iter().zip(&back.sentences) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.surface_text(), b.surface_text());
        assert!(b.tokens.iter().all(|t| t.head == Some(if t.index == 1 { 0 } else { 1 })));
    }
}

#[test]
fn lexicon_round_trip() {
    let (doc, lex) = synthetic_corpus(5, 8);
    let mut buf = Vec::new();
    write_lexicon(&lex, &mut buf).unwrap();
    let back = load_lexicon(buf.as_slice(), "xx").unwrap();
    assert_eq!(back.len(), lex.len());
    for s in &doc.sentences {
        for t in s.words() {
            assert_eq!(back.zipf(&t.surface), lex.zipf(&t.surface));
        }
    }
}
