//! Constraint-coupled semi-supervised sequence labeling.
//!
//! Two related tagging tasks — syntactic chunking/POS tagging and named
//! entity recognition — are linked by a compatibility function over their
//! output sequences. A small labeled set seeds a tagger; decodes of an
//! unlabeled pool are kept only when they are compatible with the other
//! task's labels, and the tagger is retrained on the augmented set. The
//! crate provides the taggers (a first-order HMM and an averaged structured
//! perceptron), the constraint machinery, the one-sided/two-sided/self
//! training loops, evaluation (span F1, token accuracy, McNemar tests),
//! analysis tools (discrimination, weak usefulness, uncorrelation, exact
//! bound verification), and a synthetic corpus generator for end-to-end
//! experiments.

pub mod alphabet;
pub mod analysis;
pub mod conll;
pub mod constraints;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod hmm;
pub mod perceptron;
pub mod synth;
pub mod tagger;
pub mod training;

pub use alphabet::{bio_parts, composite_join, composite_split, LabelAlphabet};
pub use conll::{parse_conll, write_conll, ColumnSpec, ParsedCorpus};
pub use constraints::{check_full, count_compatible, ConstraintFunction, ConstraintKind};
pub use corpus::{
    extract_spans, is_wellformed_bio, repair_bio, spans_to_bio, Corpus, CorpusRole, Example,
    Labeling, Sentence, Span,
};
pub use error::{Error, Result};
pub use eval::{
    mcnemar, span_f1, task_span_f1, token_accuracy, AccuracyMode, McnemarReport, McnemarUnit,
    MetricReport, Verdict, WinTieLose,
};
pub use hmm::{HmmLearner, HmmModel};
pub use perceptron::{PerceptronLearner, PerceptronModel};
pub use synth::{generate, split, SplitCorpora, SplitSizes, SynthConfig, UnlabMode};
pub use tagger::{corpus_items, Learner, Tagger, Task, TrainItem};
pub use training::{
    apply_weighting, one_sided_hints, self_train, trace_to_tsv, two_sided_hints, HintsOutcome,
    IterationRecord, TrainConfig, TwoSidedOutcome, WeightMode,
};
