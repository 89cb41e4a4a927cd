//! Common interface over the trainable sequence labelers.

use std::sync::Arc;

use crate::alphabet::LabelAlphabet;
use crate::corpus::{Corpus, Labeling, Sentence};
use crate::error::{Error, Result};

/// Which of the two coupled tasks a model or corpus column belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Task 1: composite POS/chunk labels.
    Syntactic,
    /// Task 2: entity BIO labels.
    Entity,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Syntactic => "syntactic",
            Task::Entity => "entity",
        }
    }
}

/// A trained sequence labeler: decoding plus a confidence statistic.
///
/// Implementations are immutable after training; decoding is read-only and
/// may run on many sentences in parallel.
pub trait Tagger: Send + Sync {
    fn alphabet(&self) -> &Arc<LabelAlphabet>;

    /// The model's best labeling for a sentence.
    fn decode(&self, sentence: &Sentence) -> Labeling;

    /// `1 - exp(-(best - second) / n)`: the length-normalized margin between
    /// the two best decodes, mapped into `[0, 1]`. Degenerate single-path
    /// models return 1.
    fn confidence(&self, sentence: &Sentence) -> f64;
}

/// One weighted training instance. `extra` is an optional per-token feature
/// channel; generative learners ignore it.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub sentence: Sentence,
    pub labeling: Labeling,
    pub weight: f64,
    pub extra: Option<Vec<String>>,
}

impl TrainItem {
    pub fn new(sentence: Sentence, labeling: Labeling) -> Self {
        TrainItem {
            sentence,
            labeling,
            weight: 1.0,
            extra: None,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_extra(mut self, extra: Vec<String>) -> Self {
        self.extra = Some(extra);
        self
    }
}

/// Turns a labeled corpus into unit-weight training items for a task.
pub fn corpus_items(corpus: &Corpus, task: Task) -> Result<Vec<TrainItem>> {
    let mut items = Vec::with_capacity(corpus.len());
    for ex in corpus.iter() {
        let labeling = ex.labeling(task).ok_or_else(|| {
            Error::data(format!(
                "example {}: missing {} labeling",
                ex.sentence().id(),
                task.as_str()
            ))
        })?;
        items.push(TrainItem::new(ex.sentence().clone(), labeling.clone()));
    }
    Ok(items)
}

/// A training procedure that produces a [`Tagger`].
pub trait Learner: Send + Sync {
    fn name(&self) -> &'static str;

    /// Trains on weighted items. All labelings must share one alphabet.
    fn train(&self, items: &[TrainItem]) -> Result<Box<dyn Tagger>>;
}

/// Checks that items are non-empty and share a single alphabet, returning it.
pub fn shared_alphabet(items: &[TrainItem]) -> Result<Arc<LabelAlphabet>> {
    let first = items
        .first()
        .ok_or_else(|| Error::data("empty training set"))?;
    let alphabet = first.labeling.alphabet().clone();
    for item in items {
        if item.labeling.alphabet().as_ref() != alphabet.as_ref() {
            return Err(Error::data("training items use different alphabets"));
        }
        if item.labeling.len() != item.sentence.len() {
            return Err(Error::data(format!(
                "example {}: labeling/sentence length mismatch",
                item.sentence.id()
            )));
        }
        if let Some(extra) = &item.extra {
            if extra.len() != item.sentence.len() {
                return Err(Error::data(format!(
                    "example {}: extra feature channel length mismatch",
                    item.sentence.id()
                )));
            }
        }
        if !item.weight.is_finite() || item.weight < 0.0 {
            return Err(Error::data("item weights must be finite and non-negative"));
        }
    }
    Ok(alphabet)
}
