//! Document model and CoNLL-U / plain-text ingestion.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Universal POS tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Upos {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
}

impl Upos {
    pub const ALL: [Upos; 17] = [
        Upos::Adj,
        Upos::Adp,
        Upos::Adv,
        Upos::Aux,
        Upos::Cconj,
        Upos::Det,
        Upos::Intj,
        Upos::Noun,
        Upos::Num,
        Upos::Part,
        Upos::Pron,
        Upos::Propn,
        Upos::Punct,
        Upos::Sconj,
        Upos::Sym,
        Upos::Verb,
        Upos::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Upos::Adj => "ADJ",
            Upos::Adp => "ADP",
            Upos::Adv => "ADV",
            Upos::Aux => "AUX",
            Upos::Cconj => "CCONJ",
            Upos::Det => "DET",
            Upos::Intj => "INTJ",
            Upos::Noun => "NOUN",
            Upos::Num => "NUM",
            Upos::Part => "PART",
            Upos::Pron => "PRON",
            Upos::Propn => "PROPN",
            Upos::Punct => "PUNCT",
            Upos::Sconj => "SCONJ",
            Upos::Sym => "SYM",
            Upos::Verb => "VERB",
            Upos::X => "X",
        }
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Upos {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Upos::ALL
            .iter()
            .copied()
            .find(|u| u.as_str() == s)
            .ok_or_else(|| format!("unknown UPOS tag {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub upos: Upos,
    /// Governor index, 0 for the root. `None` once word order has been
    /// scrambled and the annotation no longer applies.
    pub head: Option<usize>,
    pub deprel: Option<String>,
}

impl Token {
    pub fn char_length(&self) -> usize {
        self.surface.chars().count()
    }

    pub fn is_punct(&self) -> bool {
        self.upos == Upos::Punct
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<Token>,
    pub lang: String,
    pub text_id: String,
}

impl Sentence {
    /// Validates index contiguity and, when heads are present, the
    /// single-rooted tree shape.
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(Error::structure(&self.id, "sentence has no tokens"));
        }
        for (pos, t) in self.tokens.iter().enumerate() {
            if t.index != pos + 1 {
                return Err(Error::structure(
                    &self.id,
                    format!("token indices not contiguous at {}", t.index),
                ));
            }
            if t.surface.is_empty() {
                return Err(Error::structure(
                    &self.id,
                    format!("empty surface at token {}", t.index),
                ));
            }
        }
        if !self.has_syntax() {
            if self.tokens.iter().any(|t| t.head.is_some()) {
                return Err(Error::structure(&self.id, "heads only partially present"));
            }
            return Ok(());
        }
        let heads: Vec<usize> = self.tokens.iter().map(|t| t.head.unwrap()).collect();
        let mut roots = 0;
        for (pos, &h) in heads.iter().enumerate() {
            if h > n {
                return Err(Error::structure(
                    &self.id,
                    format!("token {} points to missing head {h}", pos + 1),
                ));
            }
            if h == pos + 1 {
                return Err(Error::structure(
                    &self.id,
                    format!("token {h} is its own head"),
                ));
            }
            if h == 0 {
                roots += 1;
            }
        }
        if roots != 1 {
            return Err(Error::structure(
                &self.id,
                format!("expected exactly one root, found {roots}"),
            ));
        }
        // Every token must reach the root within n steps.
        for start in 1..=n {
            let mut cur = start;
            let mut steps = 0;
            while cur != 0 {
                cur = heads[cur - 1];
                steps += 1;
                if steps > n {
                    return Err(Error::structure(
                        &self.id,
                        format!("cycle through token {start}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn has_syntax(&self) -> bool {
        !self.tokens.is_empty() && self.tokens.iter().all(|t| t.head.is_some())
    }

    /// Tokens other than punctuation.
    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| !t.is_punct())
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }

    /// Surface tokens joined by single spaces.
    pub fn surface_text(&self) -> String {
        let forms: Vec<&str> = self.tokens.iter().map(|t| t.surface.as_str()).collect();
        forms.join(" ")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub sentences: Vec<Sentence>,
    pub lang: String,
    pub source: String,
}

impl Document {
    pub fn new(lang: impl Into<String>, source: impl Into<String>) -> Self {
        Document {
            sentences: Vec::new(),
            lang: lang.into(),
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.id == id)
    }

    fn push_checked(&mut self, s: Sentence, seen: &mut HashSet<String>) -> Result<()> {
        if !seen.insert(s.id.clone()) {
            return Err(Error::Duplicate(s.id));
        }
        self.sentences.push(s);
        Ok(())
    }
}

/// Parses a CoNLL-U stream.
///
/// Multiword range lines (`3-4`) and empty nodes (`5.1`) are skipped.
/// `# sent_id = ...` comments name the following sentence; otherwise ids
/// are `s<ordinal>` (1-based). `# newdoc id = ...` and `# text_id = ...`
/// set the text grouping, which defaults to the document source.
pub fn parse_conllu<R: BufRead>(input: R, lang: &str, source: &str) -> Result<Document> {
    let mut doc = Document::new(lang, source);
    let mut seen = HashSet::new();
    let mut text_id = source.to_string();
    let mut pending_id: Option<String> = None;
    let mut pending_text_id: Option<String> = None;
    let mut tokens: Vec<Token> = Vec::new();
    let mut ordinal = 0usize;

    let mut flush = |tokens: &mut Vec<Token>,
                     pending_id: &mut Option<String>,
                     pending_text_id: &mut Option<String>,
                     text_id: &str,
                     doc: &mut Document|
     -> Result<()> {
        if tokens.is_empty() {
            *pending_id = None;
            return Ok(());
        }
        ordinal += 1;
        let s = Sentence {
            id: pending_id.take().unwrap_or_else(|| format!("s{ordinal}")),
            tokens: std::mem::take(tokens),
            lang: lang.to_string(),
            text_id: pending_text_id.take().unwrap_or_else(|| text_id.to_string()),
        };
        s.validate()?;
        doc.push_checked(s, &mut seen)
    };

    for (lineno, line) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, &mut pending_id, &mut pending_text_id, &text_id, &mut doc)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                let value = value.trim().to_string();
                match key.trim() {
                    "sent_id" => pending_id = Some(value),
                    "newdoc id" => text_id = value,
                    "text_id" => pending_text_id = Some(value),
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                lineno,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let index: usize = id
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad token id {id:?}")))?;
        if index == 0 {
            return Err(Error::parse(lineno, "token id must be >= 1"));
        }
        let upos: Upos = cols[3].parse().map_err(|e| Error::parse(lineno, e))?;
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad head {:?}", cols[6])))?;
        if cols[1].is_empty() {
            return Err(Error::parse(lineno, "empty form"));
        }
        tokens.push(Token {
            index,
            surface: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos,
            head: Some(head),
            deprel: Some(cols[7].to_string()),
        });
    }
    flush(&mut tokens, &mut pending_id, &mut pending_text_id, &text_id, &mut doc)?;
    Ok(doc)
}

/// Writes the retained fields back out as CoNLL-U. Sentences without
/// dependency annotation get `_` in the head and deprel columns, which
/// [`parse_conllu`] does not accept; use [`write_plain_text`] for those.
pub fn write_conllu<W: Write>(doc: &Document, mut out: W) -> Result<()> {
    for s in &doc.sentences {
        writeln!(out, "# sent_id = {}", s.id)?;
        writeln!(out, "# text_id = {}", s.text_id)?;
        writeln!(out, "# text = {}", s.surface_text())?;
        for t in &s.tokens {
            let head = t.head.map_or_else(|| "_".to_string(), |h| h.to_string());
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
                t.index,
                t.surface,
                t.lemma,
                t.upos,
                head,
                t.deprel.as_deref().unwrap_or("_"),
            )?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One sentence per line, whitespace tokenized. A line of the form
/// `<id>\t<text>` carries its own id; otherwise ids are `s<ordinal>`.
/// Tokens are tagged `X` and attached in a flat tree under token 1.
pub fn parse_plain_text<R: BufRead>(input: R, lang: &str, source: &str) -> Result<Document> {
    let mut doc = Document::new(lang, source);
    let mut seen = HashSet::new();
    let mut ordinal = 0usize;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        ordinal += 1;
        let (id, text) = match line.split_once('\t') {
            Some((id, text)) => (id.trim().to_string(), text),
            None => (format!("s{ordinal}"), line.as_str()),
        };
        let tokens: Vec<Token> = text
            .split_whitespace()
            .enumerate()
            .map(|(i, w)| Token {
                index: i + 1,
                surface: w.to_string(),
                lemma: w.to_string(),
                upos: Upos::X,
                head: Some(if i == 0 { 0 } else { 1 }),
                deprel: Some(if i == 0 { "root" } else { "dep" }.to_string()),
            })
            .collect();
        if tokens.is_empty() {
            continue;
        }
        let s = Sentence {
            id,
            tokens,
            lang: lang.to_string(),
            text_id: source.to_string(),
        };
        s.validate()?;
        doc.push_checked(s, &mut seen)?;
    }
    Ok(doc)
}

/// `<id>\t<surface tokens separated by spaces>` per sentence.
pub fn write_plain_text<W: Write>(doc: &Document, mut out: W) -> Result<()> {
    for s in &doc.sentences {
        writeln!(out, "{}\t{}", s.id, s.surface_text())?;
    }
    Ok(())
}

/// Keeps sentences with at least `min_tokens` non-punctuation tokens.
pub fn filter_min_length(doc: &Document, min_tokens: usize) -> Document {
    Document {
        sentences: doc
            .sentences
            .iter()
            .filter(|s| s.word_count() >= min_tokens)
            .cloned()
            .collect(),
        lang: doc.lang.clone(),
        source: doc.source.clone(),
    }
}
