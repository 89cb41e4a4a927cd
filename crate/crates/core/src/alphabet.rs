//! Label alphabets and label-string helpers.
//!
//! Two label conventions are used throughout the crate:
//!
//! * BIO span encoding (`B-PER`, `I-PER`, `O`, ...) for entity and chunk
//!   layers.
//! * Composite syntactic labels of the form `POS|CHUNK` (for example
//!   `NNP|B-NP`), where a part-of-speech tag and a chunk-BIO tag are glued
//!   into one atomic label. Learners treat the pair as a single symbol; the
//!   helpers below take it apart for evaluation and constraint checking.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Separator between the POS and chunk components of a composite label.
pub const COMPOSITE_SEP: char = '|';

/// A finite, ordered set of labels for one tagging task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAlphabet {
    task_name: String,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    bio_scheme: bool,
}

impl LabelAlphabet {
    /// Builds an alphabet, validating uniqueness and (for BIO schemes) the
    /// `O` / `B-X` / `I-X` shape of every label.
    pub fn new(
        task_name: impl Into<String>,
        labels: Vec<String>,
        bio_scheme: bool,
    ) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::data("alphabet needs at least 2 labels"));
        }
        let mut index = HashMap::new();
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::data("empty label"));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate label {label:?}")));
            }
        }
        if bio_scheme {
            if !index.contains_key("O") {
                return Err(Error::data("BIO alphabet must contain O"));
            }
            for label in &labels {
                if label != "O" && bio_parts(label).is_none() {
                    return Err(Error::data(format!(
                        "label {label:?} is neither O nor B-X/I-X"
                    )));
                }
            }
        }
        Ok(LabelAlphabet {
            task_name: task_name.into(),
            labels,
            index,
            bio_scheme,
        })
    }

    /// The default entity alphabet: `O` plus B/I over PER, ORG, LOC, MISC.
    pub fn default_ner() -> Arc<Self> {
        Self::ner_over_types(&["PER", "ORG", "LOC", "MISC"])
    }

    /// An entity alphabet over the given type stems.
    pub fn ner_over_types(types: &[&str]) -> Arc<Self> {
        let mut labels = vec!["O".to_string()];
        for t in types {
            labels.push(format!("B-{t}"));
            labels.push(format!("I-{t}"));
        }
        Arc::new(Self::new("ner", labels, true).expect("builtin alphabet is valid"))
    }

    pub fn task_name(&self) -> &str {
        &self.task_name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false // |labels| >= 2 by construction
    }

    pub fn bio_scheme(&self) -> bool {
        self.bio_scheme
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// Splits a BIO label into its marker and stem: `B-PER` -> `('B', "PER")`.
/// Returns `None` for `O` or anything else that does not look like B-X/I-X.
pub fn bio_parts(label: &str) -> Option<(char, &str)> {
    let rest = label
        .strip_prefix("B-")
        .map(|s| ('B', s))
        .or_else(|| label.strip_prefix("I-").map(|s| ('I', s)))?;
    if rest.1.is_empty() {
        None
    } else {
        Some(rest)
    }
}

/// Glues a POS tag and a chunk tag into one composite label.
pub fn composite_join(pos: &str, chunk: &str) -> String {
    format!("{pos}{COMPOSITE_SEP}{chunk}")
}

/// Splits a composite `POS|CHUNK` label. Returns `None` when the separator
/// is missing.
pub fn composite_split(label: &str) -> Option<(&str, &str)> {
    let (pos, chunk) = label.split_once(COMPOSITE_SEP)?;
    if pos.is_empty() || chunk.is_empty() {
        None
    } else {
        Some((pos, chunk))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_and_duplicate_alphabets() {
        assert!(LabelAlphabet::new("t", vec!["X".into()], false).is_err());
        assert!(LabelAlphabet::new("t", vec!["X".into(), "X".into()], false).is_err());
        assert!(LabelAlphabet::new("t", vec!["X".into(), "".into()], false).is_err());
    }

    #[test]
    fn bio_scheme_requires_o_and_shape() {
        assert!(LabelAlphabet::new("t", vec!["B-PER".into(), "I-PER".into()], true).is_err());
        assert!(LabelAlphabet::new("t", vec!["O".into(), "PER".into()], true).is_err());
        let a = LabelAlphabet::new("t", vec!["O".into(), "B-PER".into(), "I-PER".into()], true);
        assert!(a.is_ok());
    }

    #[test]
    fn default_ner_has_nine_labels() {
        let a = LabelAlphabet::default_ner();
        assert_eq!(a.len(), 9);
        assert!(a.bio_scheme());
        assert_eq!(a.index_of("O"), Some(0));
    }

    #[test]
    fn bio_and_composite_helpers() {
        assert_eq!(bio_parts("B-PER"), Some(('B', "PER")));
        assert_eq!(bio_parts("I-NP"), Some(('I', "NP")));
        assert_eq!(bio_parts("O"), None);
        assert_eq!(bio_parts("B-"), None);
        assert_eq!(composite_split("NNP|B-NP"), Some(("NNP", "B-NP")));
        assert_eq!(composite_split("NNP"), None);
        assert_eq!(composite_join("NNP", "B-NP"), "NNP|B-NP");
    }
}
