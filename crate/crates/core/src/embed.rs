//! Sentence embedding files.
//!
//! ```text
//! #dim=<d>\t#provenance=<free text>
//! <sentence_id>\t<v1> <v2> ... <vd>
//! ```
//!
//! Rows are written in lexicographic id order with 9 significant digits.
//! See `docs/formats.md` for the full grammar.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    pub provenance: String,
}

impl EmbeddingSet {
    pub fn new(dim: usize, provenance: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingSet {
            dim,
            vectors: BTreeMap::new(),
            provenance: provenance.into(),
        })
    }

    pub fn insert(&mut self, id: impl Into<String>, v: Vec<f64>) -> Result<()> {
        let id = id.into();
        if v.len() != self.dim {
            return Err(Error::Dimension {
                sentence_id: id,
                expected: self.dim,
                found: v.len(),
            });
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::Value(format!("non-finite component {bad} in {id}")));
        }
        if self.vectors.contains_key(&id) {
            return Err(Error::Duplicate(id));
        }
        self.vectors.insert(id, v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    /// Entries in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

pub fn read_embeddings<R: BufRead>(input: R) -> Result<EmbeddingSet> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(1, "missing header"))?;
    let header = header.trim_end_matches('\r');
    let (dim_part, prov_part) = header.split_once('\t').unwrap_or((header, ""));
    let dim: usize = dim_part
        .strip_prefix("#dim=")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::parse(1, format!("bad dimension field {dim_part:?}")))?;
    let provenance = if prov_part.is_empty() {
        String::new()
    } else {
        prov_part
            .strip_prefix("#provenance=")
            .ok_or_else(|| Error::parse(1, format!("bad provenance field {prov_part:?}")))?
            .to_string()
    };
    let mut set = EmbeddingSet::new(dim, provenance).map_err(|_| Error::parse(1, "dimension must be positive"))?;

    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "expected <id>\\t<values>"))?;
        let v = values
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("bad component {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        set.insert(id, v)?;
    }
    Ok(set)
}

pub fn write_embeddings<W: Write>(set: &EmbeddingSet, mut out: W) -> Result<()> {
    writeln!(out, "#dim={}\t#provenance={}", set.dim, set.provenance)?;
    for (id, v) in &set.vectors {
        let rendered: Vec<String> = v.iter().map(|&x| format_sig(x, 9)).collect();
        writeln!(out, "{id}\t{}", rendered.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// C `%.{sig}g`-style rendering.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= sig as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Embeddings joined to per-sentence targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub ids: Vec<String>,
    pub x: Matrix,
    pub y: Matrix,
    /// Embedded sentences with no target.
    pub missing_targets: Vec<String>,
    /// Target sentences with no embedding.
    pub missing_embeddings: Vec<String>,
}

/// Rows for the ids present on both sides, sorted by id.
pub fn align(set: &EmbeddingSet, targets: &BTreeMap<String, Vec<f64>>) -> Result<Alignment> {
    let width = targets.values().next().map_or(0, Vec::len);
    let mut ids = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut missing_targets = Vec::new();
    for (id, v) in set.iter() {
        match targets.get(id) {
            Some(t) => {
                if t.len() != width {
                    return Err(Error::Argument(format!(
                        "target row {id} has {} values, expected {width}",
                        t.len()
                    )));
                }
                ids.push(id.to_string());
                xs.extend_from_slice(v);
                ys.extend_from_slice(t);
            }
            None => missing_targets.push(id.to_string()),
        }
    }
    let missing_embeddings: Vec<String> = targets
        .keys()
        .filter(|k| set.get(k).is_none())
        .cloned()
        .collect();
    if ids.is_empty() {
        return Err(Error::Alignment(
            "no sentence id is shared by embeddings and targets".into(),
        ));
    }
    let n = ids.len();
    Ok(Alignment {
        ids,
        x: Matrix::from_vec(n, set.dim, xs)?,
        y: Matrix::from_vec(n, width, ys)?,
        missing_targets,
        missing_embeddings,
    })
}
