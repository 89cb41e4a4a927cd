//! Sentences, labelings, spans and corpora.
//!
//! All types here are immutable after construction and cheap to share
//! across threads.

use std::sync::Arc;

use crate::alphabet::{bio_parts, composite_split, LabelAlphabet};
use crate::error::{Error, Result};

/// A tokenized sentence with a stable identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    id: String,
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::data("sentence must have at least one token"));
        }
        for tok in &tokens {
            if tok.is_empty() || tok.contains('\t') || tok.contains('\n') {
                return Err(Error::data(format!("bad token {tok:?}")));
            }
        }
        Ok(Sentence {
            id: id.into(),
            tokens,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// A label sequence over a shared alphabet. For BIO alphabets the sequence
/// is guaranteed well-formed: `I-X` only ever follows `B-X` or `I-X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    alphabet: Arc<LabelAlphabet>,
    indices: Vec<usize>,
}

impl Labeling {
    pub fn new<S: AsRef<str>>(alphabet: Arc<LabelAlphabet>, labels: &[S]) -> Result<Self> {
        let mut indices = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            let idx = alphabet
                .index_of(l)
                .ok_or_else(|| Error::data(format!("label {l:?} not in alphabet")))?;
            indices.push(idx);
        }
        Self::from_indices(alphabet, indices)
    }

    pub fn from_indices(alphabet: Arc<LabelAlphabet>, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::data("empty labeling"));
        }
        for &i in &indices {
            if i >= alphabet.len() {
                return Err(Error::data(format!("label index {i} out of range")));
            }
        }
        if alphabet.bio_scheme() {
            let labels: Vec<&str> = indices.iter().map(|&i| alphabet.label(i)).collect();
            if !is_wellformed_bio(&labels) {
                return Err(Error::data(format!("ill-formed BIO sequence {labels:?}")));
            }
        }
        Ok(Labeling { alphabet, indices })
    }

    pub fn alphabet(&self) -> &Arc<LabelAlphabet> {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn index(&self, i: usize) -> usize {
        self.indices[i]
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn label(&self, i: usize) -> &str {
        self.alphabet.label(self.indices[i])
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.indices.iter().map(|&i| self.alphabet.label(i))
    }

    /// Projects a composite `POS|CHUNK` labeling onto its chunk-BIO layer.
    /// The result uses a freshly derived BIO alphabet.
    pub fn project_chunk(&self) -> Result<Labeling> {
        let mut chunks = Vec::with_capacity(self.len());
        for l in self.labels() {
            let (_, chunk) = composite_split(l)
                .ok_or_else(|| Error::data(format!("label {l:?} is not composite")))?;
            chunks.push(chunk.to_string());
        }
        let mut labels: Vec<String> = chunks.clone();
        labels.sort();
        labels.dedup();
        if !labels.iter().any(|l| l == "O") {
            labels.push("O".to_string());
        }
        // a single chunk tag plus O still needs |labels| >= 2
        if labels.len() < 2 {
            labels.push("B-NP".to_string());
        }
        let alphabet = Arc::new(LabelAlphabet::new(
            format!("{}-chunk", self.alphabet.task_name()),
            labels,
            true,
        )?);
        Labeling::new(alphabet, &chunks)
    }

    /// The POS components of a composite labeling.
    pub fn project_pos(&self) -> Result<Vec<&str>> {
        self.labels()
            .map(|l| {
                composite_split(l)
                    .map(|(pos, _)| pos)
                    .ok_or_else(|| Error::data(format!("label {l:?} is not composite")))
            })
            .collect()
    }
}

/// True when `I-X` only ever follows `B-X` or `I-X`.
pub fn is_wellformed_bio(labels: &[&str]) -> bool {
    let mut prev: Option<&str> = None;
    for &l in labels {
        if let Some(('I', stem)) = bio_parts(l) {
            match prev.and_then(bio_parts) {
                Some((_, prev_stem)) if prev_stem == stem => {}
                _ => return false,
            }
        }
        prev = Some(l);
    }
    true
}

/// Rewrites every `I-X` with an incompatible predecessor to `B-X`, in place.
/// Returns the number of rewrites.
pub fn repair_bio(labels: &mut [String]) -> usize {
    let mut repairs = 0;
    for i in 0..labels.len() {
        if let Some(('I', stem)) = bio_parts(&labels[i]) {
            let ok = i > 0
                && matches!(bio_parts(&labels[i - 1]), Some((_, prev)) if prev == stem);
            if !ok {
                let stem = stem.to_string();
                labels[i] = format!("B-{stem}");
                repairs += 1;
            }
        }
    }
    repairs
}

/// A typed token span; `start` inclusive, `end` exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

impl Span {
    pub fn new(start: usize, end: usize, kind: impl Into<String>) -> Self {
        assert!(start < end, "span must be non-empty");
        Span {
            start,
            end,
            kind: kind.into(),
        }
    }
}

/// Extracts maximal `B-X (I-X)*` runs as spans, left to right.
///
/// Panics when the labeling's alphabet is not a BIO scheme; callers must
/// project composite labelings first.
pub fn extract_spans(labeling: &Labeling) -> Vec<Span> {
    assert!(
        labeling.alphabet().bio_scheme(),
        "extract_spans requires a BIO alphabet"
    );
    let mut spans = Vec::new();
    let mut open: Option<(usize, String)> = None;
    for (i, label) in labeling.labels().enumerate() {
        match bio_parts(label) {
            Some(('B', stem)) => {
                if let Some((start, kind)) = open.take() {
                    spans.push(Span::new(start, i, kind));
                }
                open = Some((i, stem.to_string()));
            }
            Some(('I', _)) => {
                // well-formedness guarantees the open span matches
            }
            _ => {
                if let Some((start, kind)) = open.take() {
                    spans.push(Span::new(start, i, kind));
                }
            }
        }
    }
    if let Some((start, kind)) = open {
        spans.push(Span::new(start, labeling.len(), kind));
    }
    spans
}

/// Re-encodes spans as a BIO labeling of the given length. Spans must be
/// disjoint and sorted; gaps become `O`.
pub fn spans_to_bio(
    spans: &[Span],
    len: usize,
    alphabet: Arc<LabelAlphabet>,
) -> Result<Labeling> {
    let mut labels = vec!["O".to_string(); len];
    for span in spans {
        if span.end > len {
            return Err(Error::data(format!("span {span:?} exceeds length {len}")));
        }
        labels[span.start] = format!("B-{}", span.kind);
        for slot in labels.iter_mut().take(span.end).skip(span.start + 1) {
            *slot = format!("I-{}", span.kind);
        }
    }
    Labeling::new(alphabet, &labels)
}

/// Which labelings a corpus is expected to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusRole {
    /// Labeled for the syntactic task: `y1` present on every example.
    Labeled1,
    /// Labeled for the entity task: `y2` present on every example.
    Labeled2,
    /// Unlabeled as far as the entity task is concerned: `y2` absent
    /// everywhere; `y1` may or may not be present.
    Unlabeled,
    /// Held-out data; may carry either or both labelings.
    Test,
}

impl CorpusRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorpusRole::Labeled1 => "labeled-1",
            CorpusRole::Labeled2 => "labeled-2",
            CorpusRole::Unlabeled => "unlabeled",
            CorpusRole::Test => "test",
        }
    }
}

/// One sentence with its optional per-task labelings.
#[derive(Debug, Clone)]
pub struct Example {
    sentence: Sentence,
    y1: Option<Labeling>,
    y2: Option<Labeling>,
}

impl Example {
    pub fn new(sentence: Sentence, y1: Option<Labeling>, y2: Option<Labeling>) -> Result<Self> {
        for (name, labeling) in [("y1", &y1), ("y2", &y2)] {
            if let Some(l) = labeling {
                if l.len() != sentence.len() {
                    return Err(Error::data(format!(
                        "example {}: {name} length {} != sentence length {}",
                        sentence.id(),
                        l.len(),
                        sentence.len()
                    )));
                }
            }
        }
        Ok(Example { sentence, y1, y2 })
    }

    pub fn sentence(&self) -> &Sentence {
        &self.sentence
    }

    pub fn y1(&self) -> Option<&Labeling> {
        self.y1.as_ref()
    }

    pub fn y2(&self) -> Option<&Labeling> {
        self.y2.as_ref()
    }

    /// The labeling for a task, if present.
    pub fn labeling(&self, task: crate::tagger::Task) -> Option<&Labeling> {
        match task {
            crate::tagger::Task::Syntactic => self.y1(),
            crate::tagger::Task::Entity => self.y2(),
        }
    }

    pub fn with_y1(self, y1: Option<Labeling>) -> Result<Self> {
        Example::new(self.sentence, y1, self.y2)
    }

    pub fn with_y2(self, y2: Option<Labeling>) -> Result<Self> {
        Example::new(self.sentence, self.y1, y2)
    }
}

/// A role-tagged sequence of examples.
#[derive(Debug, Clone)]
pub struct Corpus {
    examples: Vec<Example>,
    role: CorpusRole,
}

impl Corpus {
    pub fn new(examples: Vec<Example>, role: CorpusRole) -> Result<Self> {
        for ex in &examples {
            let id = ex.sentence().id();
            match role {
                CorpusRole::Labeled1 if ex.y1().is_none() => {
                    return Err(Error::data(format!("example {id}: labeled-1 corpus needs y1")));
                }
                CorpusRole::Labeled2 if ex.y2().is_none() => {
                    return Err(Error::data(format!("example {id}: labeled-2 corpus needs y2")));
                }
                CorpusRole::Unlabeled if ex.y2().is_some() => {
                    return Err(Error::data(format!(
                        "example {id}: unlabeled corpus must not carry y2"
                    )));
                }
                _ => {}
            }
        }
        Ok(Corpus { examples, role })
    }

    pub fn empty(role: CorpusRole) -> Self {
        Corpus {
            examples: Vec::new(),
            role,
        }
    }

    pub fn role(&self) -> CorpusRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, i: usize) -> &Example {
        &self.examples[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn mean_len(&self) -> f64 {
        if self.examples.is_empty() {
            return 0.0;
        }
        let total: usize = self.examples.iter().map(|e| e.sentence().len()).sum();
        total as f64 / self.examples.len() as f64
    }
}
