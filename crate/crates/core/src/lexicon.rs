//! Zipf-scale word frequency lookup backed by a `word<TAB>zipf` file.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const ZIPF_MAX: f64 = 9.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyLexicon {
    lang: String,
    entries: HashMap<String, f64>,
    floor: f64,
}

impl FrequencyLexicon {
    pub fn new(lang: impl Into<String>) -> Self {
        FrequencyLexicon {
            lang: lang.into(),
            entries: HashMap::new(),
            floor: 0.0,
        }
    }

    /// Value returned for words missing from the list.
    pub fn with_floor(mut self, floor: f64) -> Result<Self> {
        check_range(floor, "floor")?;
        self.floor = floor;
        Ok(self)
    }

    pub fn insert(&mut self, word: &str, zipf: f64) -> Result<()> {
        check_range(zipf, word)?;
        self.entries.insert(fold(word), zipf);
        Ok(())
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(&fold(word))
    }

    pub fn zipf(&self, word: &str) -> f64 {
        self.entries.get(&fold(word)).copied().unwrap_or(self.floor)
    }
}

fn fold(word: &str) -> String {
    word.to_lowercase()
}

fn check_range(v: f64, what: &str) -> Result<()> {
    if !(0.0..=ZIPF_MAX).contains(&v) {
        return Err(Error::Range(format!(
            "zipf value {v} for {what:?} outside [0, {ZIPF_MAX}]"
        )));
    }
    Ok(())
}

/// Loads a `word<TAB>zipf` list. Blank lines are ignored and later
/// duplicates overwrite earlier ones.
pub fn load_lexicon<R: BufRead>(input: R, lang: &str) -> Result<FrequencyLexicon> {
    let mut lex = FrequencyLexicon::new(lang);
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (word, value) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "expected word<TAB>zipf"))?;
        let zipf: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("non-numeric zipf {value:?}")))?;
        if !(0.0..=ZIPF_MAX).contains(&zipf) {
            return Err(Error::Range(format!(
                "line {lineno}: zipf {zipf} outside [0, {ZIPF_MAX}]"
            )));
        }
        lex.entries.insert(fold(word), zipf);
    }
    Ok(lex)
}

/// Writes entries sorted by word, in the format [`load_lexicon`] reads.
pub fn write_lexicon<W: Write>(lex: &FrequencyLexicon, mut out: W) -> Result<()> {
    let mut words: Vec<(&String, &f64)> = lex.entries.iter().collect();
    words.sort_by(|a, b| a.0.cmp(b.0));
    for (w, z) in words {
        writeln!(out, "{w}\t{z}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loads_pairs() {
        let lex = load_lexicon("the\t7.0\ndog\t4.8".as_bytes(), "en").unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.zipf("dog"), 4.8);
    }

    #[test]
    fn bad_number_reports_line() {
        match load_lexicon("dog\tabc".as_bytes(), "en") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(matches!(
            load_lexicon("dog\t9.5".as_bytes(), "en"),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn empty_stream_gives_floor() {
        let lex = load_lexicon("".as_bytes(), "en").unwrap();
        assert!(lex.is_empty());
        assert_eq!(lex.zipf("anything"), 0.0);
    }

    #[test]
    fn case_folded_lookup() {
        let lex = load_lexicon("the\t7.0\njanus\t2.9\n".as_bytes(), "en").unwrap();
        assert_eq!(lex.zipf("The"), 7.0);
        assert_eq!(lex.zipf("Janus"), 2.9);
        assert_eq!(lex.zipf("absent"), 0.0);
    }

    #[test]
    fn duplicates_keep_last() {
        let lex = load_lexicon("a\t1.0\na\t2.0\n".as_bytes(), "en").unwrap();
        assert_eq!(lex.zipf("a"), 2.0);
    }

    proptest! {
        #[test]
        fn lookup_total_and_in_range(word in "\\PC{0,12}", floor in 0.0f64..=9.0) {
            let lex = load_lexicon("the\t7.0\n".as_bytes(), "en").unwrap().with_floor(floor).unwrap();
            let z = lex.zipf(&word);
            prop_assert!((0.0..=9.0).contains(&z));
            prop_assert_eq!(z, lex.zipf(&word.to_lowercase()));
        }
    }
}
