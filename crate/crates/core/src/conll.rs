//! CoNLL-style column file reading and writing.
//!
//! One token per line, whitespace-separated columns, a blank line between
//! sentences, UTF-8 throughout. The canonical form written by
//! [`write_conll`] uses single spaces and exactly one blank line between
//! sentences; [`parse_conll`] is more lenient in what it accepts.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::alphabet::{composite_join, LabelAlphabet};
use crate::corpus::{repair_bio, Corpus, CorpusRole, Example, Labeling, Sentence};
use crate::error::{Error, Result};

/// Maps file columns to fields. `pos` and `chunk` must be given together;
/// they are fused into composite `POS|CHUNK` labels on `y1`.
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub n_columns: usize,
    pub token: usize,
    pub pos: Option<usize>,
    pub chunk: Option<usize>,
    pub ner: Option<usize>,
    /// When set, entity labels are validated against this alphabet and any
    /// unknown (unrepairable) label rejects the file. When unset the
    /// alphabet is induced from the data (always including `O`).
    pub ner_alphabet: Option<Arc<LabelAlphabet>>,
}

impl ColumnSpec {
    /// `token pos chunk ner`, the CoNLL 2003 layout.
    pub fn conll2003() -> Self {
        ColumnSpec {
            n_columns: 4,
            token: 0,
            pos: Some(1),
            chunk: Some(2),
            ner: Some(3),
            ner_alphabet: None,
        }
    }

    /// `token pos chunk`, a syntax-only layout.
    pub fn syntactic() -> Self {
        ColumnSpec {
            n_columns: 3,
            token: 0,
            pos: Some(1),
            chunk: Some(2),
            ner: None,
            ner_alphabet: None,
        }
    }

    /// `token ner`, an entity-only layout.
    pub fn ner_only() -> Self {
        ColumnSpec {
            n_columns: 2,
            token: 0,
            pos: None,
            chunk: None,
            ner: Some(1),
            ner_alphabet: None,
        }
    }

    /// `token` alone.
    pub fn tokens_only() -> Self {
        ColumnSpec {
            n_columns: 1,
            token: 0,
            pos: None,
            chunk: None,
            ner: None,
            ner_alphabet: None,
        }
    }

    pub fn with_ner_alphabet(mut self, alphabet: Arc<LabelAlphabet>) -> Self {
        self.ner_alphabet = Some(alphabet);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.pos.is_some() != self.chunk.is_some() {
            return Err(Error::config("pos and chunk columns must be given together"));
        }
        let mut seen = vec![false; self.n_columns];
        let mut mark = |idx: Option<usize>| -> Result<()> {
            if let Some(i) = idx {
                if i >= self.n_columns {
                    return Err(Error::config(format!(
                        "column {i} out of range for {} columns",
                        self.n_columns
                    )));
                }
                if seen[i] {
                    return Err(Error::config(format!("column {i} assigned twice")));
                }
                seen[i] = true;
            }
            Ok(())
        };
        mark(Some(self.token))?;
        mark(self.pos)?;
        mark(self.chunk)?;
        mark(self.ner)?;
        if seen.iter().any(|&s| !s) {
            return Err(Error::config("every column must be assigned a field"));
        }
        Ok(())
    }
}

/// Result of parsing a column file.
#[derive(Debug)]
pub struct ParsedCorpus {
    pub corpus: Corpus,
    /// Number of `I-X -> B-X` rewrites applied across all BIO columns.
    pub bio_repairs: usize,
}

struct RawSentence {
    /// (1-based line number, column fields) per token.
    rows: Vec<(usize, Vec<String>)>,
}

/// Parses a CoNLL column file into a corpus. Sentence ids are assigned by
/// file order, zero-padded so lexicographic order matches file order.
pub fn parse_conll(text: &str, spec: &ColumnSpec, role: CorpusRole) -> Result<ParsedCorpus> {
    spec.validate()?;

    let mut sentences: Vec<RawSentence> = Vec::new();
    let mut current: Vec<(usize, Vec<String>)> = Vec::new();
    for (lineno0, line) in text.lines().enumerate() {
        let lineno = lineno0 + 1;
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(RawSentence {
                    rows: std::mem::take(&mut current),
                });
            }
            continue;
        }
        let fields: Vec<String> = line.split_whitespace().map(|f| f.to_string()).collect();
        if fields.len() != spec.n_columns {
            return Err(Error::parse(
                lineno,
                format!("expected {} columns, found {}", spec.n_columns, fields.len()),
            ));
        }
        current.push((lineno, fields));
    }
    if !current.is_empty() {
        sentences.push(RawSentence { rows: current });
    }

    let mut bio_repairs = 0usize;
    // Per sentence: tokens, composite y1 labels, ner labels, per-token lines.
    let mut prepared: Vec<(Vec<String>, Option<Vec<String>>, Option<Vec<String>>, Vec<usize>)> =
        Vec::new();
    for raw in &sentences {
        let lines: Vec<usize> = raw.rows.iter().map(|(l, _)| *l).collect();
        let tokens: Vec<String> = raw.rows.iter().map(|(_, f)| f[spec.token].clone()).collect();
        let y1 = match (spec.pos, spec.chunk) {
            (Some(p), Some(c)) => {
                let pos: Vec<String> = raw.rows.iter().map(|(_, f)| f[p].clone()).collect();
                let mut chunk: Vec<String> = raw.rows.iter().map(|(_, f)| f[c].clone()).collect();
                bio_repairs += repair_bio(&mut chunk);
                Some(
                    pos.iter()
                        .zip(&chunk)
                        .map(|(p, c)| composite_join(p, c))
                        .collect(),
                )
            }
            _ => None,
        };
        let y2 = spec.ner.map(|n| {
            let mut ner: Vec<String> = raw.rows.iter().map(|(_, f)| f[n].clone()).collect();
            bio_repairs += repair_bio(&mut ner);
            ner
        });
        prepared.push((tokens, y1, y2, lines));
    }

    // Entity alphabet: provided (validate) or induced from repaired labels.
    let ner_alphabet: Option<Arc<LabelAlphabet>> = if spec.ner.is_some() {
        match &spec.ner_alphabet {
            Some(a) => {
                for (_, _, y2, lines) in &prepared {
                    if let Some(labels) = y2 {
                        for (label, line) in labels.iter().zip(lines) {
                            if a.index_of(label).is_none() {
                                return Err(Error::parse(
                                    *line,
                                    format!("unknown entity label {label:?}"),
                                ));
                            }
                        }
                    }
                }
                Some(a.clone())
            }
            None => {
                let mut set: BTreeSet<String> = BTreeSet::new();
                set.insert("O".to_string());
                for (_, _, y2, _) in &prepared {
                    if let Some(labels) = y2 {
                        set.extend(labels.iter().cloned());
                    }
                }
                if set.len() < 2 {
                    set.insert("B-MISC".to_string());
                    set.insert("I-MISC".to_string());
                }
                Some(Arc::new(LabelAlphabet::new(
                    "ner",
                    set.into_iter().collect(),
                    true,
                )?))
            }
        }
    } else {
        None
    };

    // Composite syntactic alphabet, induced from the file.
    let syn_alphabet: Option<Arc<LabelAlphabet>> = if spec.pos.is_some() {
        let mut set: BTreeSet<String> = BTreeSet::new();
        for (_, y1, _, _) in &prepared {
            if let Some(labels) = y1 {
                set.extend(labels.iter().cloned());
            }
        }
        if set.is_empty() {
            None
        } else {
            if set.len() < 2 {
                set.insert(composite_join("NN", "O"));
                set.insert(composite_join("NNP", "B-NP"));
            }
            Some(Arc::new(LabelAlphabet::new(
                "syntactic",
                set.into_iter().collect(),
                false,
            )?))
        }
    } else {
        None
    };

    let width = prepared.len().to_string().len().max(6);
    let mut examples = Vec::with_capacity(prepared.len());
    for (i, (tokens, y1, y2, lines)) in prepared.into_iter().enumerate() {
        let first_line = lines[0];
        let id = format!("{i:0width$}");
        let sentence = Sentence::new(id, tokens)
            .map_err(|e| Error::parse(first_line, e.to_string()))?;
        let y1 = match (y1, &syn_alphabet) {
            (Some(labels), Some(a)) => Some(
                Labeling::new(a.clone(), &labels)
                    .map_err(|e| Error::parse(first_line, e.to_string()))?,
            ),
            _ => None,
        };
        let y2 = match (y2, &ner_alphabet) {
            (Some(labels), Some(a)) => Some(
                Labeling::new(a.clone(), &labels)
                    .map_err(|e| Error::parse(first_line, e.to_string()))?,
            ),
            _ => None,
        };
        examples.push(Example::new(sentence, y1, y2)?);
    }

    Ok(ParsedCorpus {
        corpus: Corpus::new(examples, role)?,
        bio_repairs,
    })
}

/// Writes a corpus in canonical column form. Round-trips byte-for-byte with
/// [`parse_conll`] on well-formed input.
pub fn write_conll(corpus: &Corpus, spec: &ColumnSpec) -> Result<String> {
    spec.validate()?;
    let mut blocks: Vec<String> = Vec::with_capacity(corpus.len());
    for ex in corpus.iter() {
        let id = ex.sentence().id();
        let n = ex.sentence().len();
        let y1 = ex.y1();
        let y2 = ex.y2();
        if spec.pos.is_some() && y1.is_none() {
            return Err(Error::data(format!("example {id}: missing y1 labeling")));
        }
        if spec.ner.is_some() && y2.is_none() {
            return Err(Error::data(format!("example {id}: missing y2 labeling")));
        }
        let mut block = String::new();
        for t in 0..n {
            let mut fields: Vec<&str> = vec![""; spec.n_columns];
            fields[spec.token] = ex.sentence().token(t);
            if let (Some(p), Some(c)) = (spec.pos, spec.chunk) {
                let label = y1.unwrap().label(t);
                let (pos, chunk) = crate::alphabet::composite_split(label).ok_or_else(|| {
                    Error::data(format!("example {id}: label {label:?} is not composite"))
                })?;
                fields[p] = pos;
                fields[c] = chunk;
            }
            if let Some(nc) = spec.ner {
                fields[nc] = y2.unwrap().label(t);
            }
            block.push_str(&fields.join(" "));
            block.push('\n');
        }
        blocks.push(block);
    }
    Ok(blocks.join("\n"))
}
