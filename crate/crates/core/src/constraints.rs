//! Compatibility functions between syntactic and entity label sequences.
//!
//! A constraint is a per-position decision table over (POS tag, chunk tag,
//! entity category) triples, where the entity category is `B`, `I` or `O`.
//! The built-in `full` set encodes two requirements: proper nouns must sit
//! inside entities, and entities must stay inside single noun phrases; a
//! proper noun outside any NP escapes both (anything goes there, which
//! keeps the rule tables total). The `pos-only` and `np-only` ablations
//! each keep one requirement; both retain the escape so the three sets
//! stay pointwise nested: full => pos-only, full => np-only.

use crate::alphabet::{bio_parts, composite_split, LabelAlphabet};
use crate::corpus::Labeling;
use crate::error::{Error, Result};
use crate::hmm::bio_transition_mask;

/// Enumeration ceiling for [`count_compatible`].
pub const ENUMERATION_GUARD: f64 = 1e6;

/// Which built-in rule set to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Full,
    PosOnly,
    NpOnly,
    Constant,
}

impl ConstraintKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintKind::Full => "full",
            ConstraintKind::PosOnly => "pos-only",
            ConstraintKind::NpOnly => "np-only",
            ConstraintKind::Constant => "constant",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(ConstraintKind::Full),
            "pos-only" | "pos" => Ok(ConstraintKind::PosOnly),
            "np-only" | "np" => Ok(ConstraintKind::NpOnly),
            "constant" | "const" => Ok(ConstraintKind::Constant),
            other => Err(Error::config(format!("unknown constraint {other:?}"))),
        }
    }
}

/// Set of entity categories a rule admits, as a bitmask over B/I/O.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NerSet(u8);

impl NerSet {
    pub const BEGIN: NerSet = NerSet(1);
    pub const INSIDE: NerSet = NerSet(2);
    pub const OUTSIDE: NerSet = NerSet(4);
    pub const ANY: NerSet = NerSet(7);

    pub fn union(self, other: NerSet) -> NerSet {
        NerSet(self.0 | other.0)
    }

    fn admits(self, category: NerSet) -> bool {
        self.0 & category.0 != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PosPattern {
    Any,
    /// NNP or NNPS.
    ProperNoun,
    Exact(String),
}

impl PosPattern {
    fn matches(&self, pos: &str) -> bool {
        match self {
            PosPattern::Any => true,
            PosPattern::ProperNoun => pos == "NNP" || pos == "NNPS",
            PosPattern::Exact(p) => p == pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChunkPattern {
    Any,
    /// Anything that is not `B-NP` or `I-NP`.
    NonNp,
    Exact(String),
}

impl ChunkPattern {
    fn matches(&self, chunk: &str) -> bool {
        match self {
            ChunkPattern::Any => true,
            ChunkPattern::NonNp => chunk != "B-NP" && chunk != "I-NP",
            ChunkPattern::Exact(c) => c == chunk,
        }
    }
}

/// One per-position rule; the first matching rule decides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub pos: PosPattern,
    pub chunk: ChunkPattern,
    pub allowed: NerSet,
}

/// A deterministic, position-decomposable compatibility function.
#[derive(Debug, Clone)]
pub struct ConstraintFunction {
    name: String,
    rules: Vec<Rule>,
}

impl ConstraintFunction {
    pub fn make(kind: ConstraintKind) -> ConstraintFunction {
        use ChunkPattern as C;
        use PosPattern as P;
        let rule = |pos: P, chunk: C, allowed: NerSet| Rule { pos, chunk, allowed };
        let rules = match kind {
            ConstraintKind::Full => vec![
                rule(P::ProperNoun, C::Exact("B-NP".into()), NerSet::BEGIN),
                rule(
                    P::ProperNoun,
                    C::Exact("I-NP".into()),
                    NerSet::BEGIN.union(NerSet::INSIDE),
                ),
                rule(P::ProperNoun, C::NonNp, NerSet::ANY),
                rule(
                    P::Any,
                    C::Exact("B-NP".into()),
                    NerSet::BEGIN.union(NerSet::OUTSIDE),
                ),
                rule(P::Any, C::Exact("I-NP".into()), NerSet::ANY),
                rule(P::Any, C::NonNp, NerSet::OUTSIDE),
            ],
            ConstraintKind::PosOnly => vec![
                rule(P::ProperNoun, C::NonNp, NerSet::ANY),
                rule(P::ProperNoun, C::Any, NerSet::BEGIN.union(NerSet::INSIDE)),
                rule(P::Any, C::Any, NerSet::ANY),
            ],
            ConstraintKind::NpOnly => vec![
                rule(P::ProperNoun, C::NonNp, NerSet::ANY),
                rule(
                    P::Any,
                    C::Exact("B-NP".into()),
                    NerSet::BEGIN.union(NerSet::OUTSIDE),
                ),
                rule(P::Any, C::Exact("I-NP".into()), NerSet::ANY),
                rule(P::Any, C::NonNp, NerSet::OUTSIDE),
            ],
            ConstraintKind::Constant => vec![rule(P::Any, C::Any, NerSet::ANY)],
        };
        ConstraintFunction {
            name: kind.as_str().to_string(),
            rules,
        }
    }

    pub fn full() -> ConstraintFunction {
        Self::make(ConstraintKind::Full)
    }

    pub fn constant() -> ConstraintFunction {
        Self::make(ConstraintKind::Constant)
    }

    /// Parses a custom rules file. One rule per line:
    ///
    /// ```text
    /// # pos-pattern  chunk-pattern  allowed
    /// NNP*  B-NP   B
    /// NNP*  I-NP   B,I
    /// NNP*  other  any
    /// ?     B-NP   B,O
    /// ?     I-NP   B,I,O
    /// ?     other  O
    /// ```
    ///
    /// Patterns: `?` matches anything, `NNP*` matches NNP/NNPS, `other`
    /// matches non-NP chunks, anything else matches literally. Allowed sets
    /// are `any` or a comma list over `B`, `I`, `O`. The first matching
    /// rule decides; a position no rule matches is incompatible.
    pub fn from_rules_text(name: impl Into<String>, text: &str) -> Result<ConstraintFunction> {
        let mut rules = Vec::new();
        for (lineno0, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    lineno0 + 1,
                    format!("expected 3 fields, found {}", fields.len()),
                ));
            }
            let pos = match fields[0] {
                "?" => PosPattern::Any,
                "NNP*" => PosPattern::ProperNoun,
                p => PosPattern::Exact(p.to_string()),
            };
            let chunk = match fields[1] {
                "?" => ChunkPattern::Any,
                "other" => ChunkPattern::NonNp,
                c => ChunkPattern::Exact(c.to_string()),
            };
            let mut allowed = NerSet(0);
            if fields[2] == "any" {
                allowed = NerSet::ANY;
            } else {
                for part in fields[2].split(',') {
                    allowed = allowed.union(match part {
                        "B" => NerSet::BEGIN,
                        "I" => NerSet::INSIDE,
                        "O" => NerSet::OUTSIDE,
                        other => {
                            return Err(Error::parse(
                                lineno0 + 1,
                                format!("unknown entity category {other:?}"),
                            ))
                        }
                    });
                }
            }
            rules.push(Rule { pos, chunk, allowed });
        }
        if rules.is_empty() {
            return Err(Error::config("rules file defines no rules"));
        }
        Ok(ConstraintFunction {
            name: name.into(),
            rules,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The compatibility verdict for one (POS, chunk, entity label) triple.
    pub fn check_position(&self, pos: &str, chunk: &str, ner: &str) -> bool {
        let category = match bio_parts(ner) {
            Some(('B', _)) => NerSet::BEGIN,
            Some(('I', _)) => NerSet::INSIDE,
            _ if ner == "O" => NerSet::OUTSIDE,
            _ => return false,
        };
        for rule in &self.rules {
            if rule.pos.matches(pos) && rule.chunk.matches(chunk) {
                return rule.allowed.admits(category);
            }
        }
        false
    }

    /// Whole-sequence compatibility: the conjunction of per-position
    /// verdicts over aligned labelings. `y1` must carry composite
    /// `POS|CHUNK` labels; `y2` must be BIO.
    pub fn check(&self, y1: &Labeling, y2: &Labeling) -> Result<bool> {
        if y1.len() != y2.len() {
            return Err(Error::data(format!(
                "labelings have different lengths ({} vs {})",
                y1.len(),
                y2.len()
            )));
        }
        for t in 0..y1.len() {
            let l1 = y1.label(t);
            let (pos, chunk) = composite_split(l1)
                .ok_or_else(|| Error::data(format!("label {l1:?} is not composite")))?;
            if !self.check_position(pos, chunk, y2.label(t)) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// The full rule set's verdict; the operation the rest of the crate quotes.
pub fn check_full(y1: &Labeling, y2: &Labeling) -> Result<bool> {
    ConstraintFunction::full().check(y1, y2)
}

/// Counts entity labelings compatible with `y1` by exhaustive enumeration
/// over well-formed BIO sequences. Errors when `|labels|^n` exceeds
/// [`ENUMERATION_GUARD`].
pub fn count_compatible(
    y1: &Labeling,
    alphabet2: &std::sync::Arc<LabelAlphabet>,
    chi: &ConstraintFunction,
) -> Result<usize> {
    let mut count = 0usize;
    for_each_wellformed(y1.len(), alphabet2, |indices| {
        let y2 = Labeling::from_indices(alphabet2.clone(), indices.to_vec())
            .expect("enumeration yields well-formed labelings");
        if chi.check(y1, &y2)? {
            count += 1;
        }
        Ok(())
    })?;
    Ok(count)
}

/// Visits every well-formed label sequence of length `n` over the alphabet.
pub fn for_each_wellformed<F>(
    n: usize,
    alphabet: &std::sync::Arc<LabelAlphabet>,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(&[usize]) -> Result<()>,
{
    let k = alphabet.len();
    let total = (k as f64).powi(n as i32);
    if total > ENUMERATION_GUARD {
        return Err(Error::GuardExceeded(format!(
            "{k}^{n} = {total} exceeds {ENUMERATION_GUARD}"
        )));
    }
    let (allowed_start, allowed) = bio_transition_mask(alphabet);
    let mut stack = vec![0usize; n];
    fn rec<F>(
        t: usize,
        n: usize,
        k: usize,
        allowed_start: &[bool],
        allowed: &[Vec<bool>],
        stack: &mut Vec<usize>,
        visit: &mut F,
    ) -> Result<()>
    where
        F: FnMut(&[usize]) -> Result<()>,
    {
        if t == n {
            return visit(stack);
        }
        for y in 0..k {
            let ok = if t == 0 {
                allowed_start[y]
            } else {
                allowed[stack[t - 1]][y]
            };
            if ok {
                stack[t] = y;
                rec(t + 1, n, k, allowed_start, allowed, stack, visit)?;
            }
        }
        Ok(())
    }
    rec(0, n, k, &allowed_start, &allowed, &mut stack, &mut visit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::composite_join;
    use std::sync::Arc;

    /// The introduction sentence's syntactic layer:
    /// POS = NNP NNP VBD TO NNP NN, chunks = [NP NP] VP PP [NP] [NP].
    pub(crate) fn intro_y1() -> Labeling {
        let pos = ["NNP", "NNP", "VBD", "TO", "NNP", "NN"];
        let chunk = ["B-NP", "I-NP", "B-VP", "B-PP", "B-NP", "B-NP"];
        let labels: Vec<String> = pos
            .iter()
            .zip(&chunk)
            .map(|(p, c)| composite_join(p, c))
            .collect();
        let mut unique = labels.clone();
        unique.sort();
        unique.dedup();
        let alphabet = Arc::new(LabelAlphabet::new("syntactic", unique, false).unwrap());
        Labeling::new(alphabet, &labels).unwrap()
    }

    fn ner(labels: &[&str]) -> Labeling {
        Labeling::new(LabelAlphabet::default_ner(), labels).unwrap()
    }

    #[test]
    fn intro_golden_candidates() {
        let y1 = intro_y1();
        let chi = ConstraintFunction::full();
        let ner1 = ner(&["B-PER", "I-PER", "I-PER", "O", "B-ORG", "O"]);
        let ner2 = ner(&["B-PER", "I-PER", "O", "O", "O", "O"]);
        let ner3 = ner(&["B-PER", "I-PER", "O", "O", "B-ORG", "I-ORG"]);
        let ner4 = ner(&["B-PER", "I-PER", "O", "O", "B-ORG", "O"]);
        assert!(!chi.check(&y1, &ner1).unwrap(), "entity inside a VP");
        assert!(!chi.check(&y1, &ner2).unwrap(), "NNP outside any entity");
        assert!(!chi.check(&y1, &ner3).unwrap(), "entity spanning two NPs");
        assert!(chi.check(&y1, &ner4).unwrap());
    }

    #[test]
    fn ablations_on_the_intro_candidates() {
        let y1 = intro_y1();
        let pos_only = ConstraintFunction::make(ConstraintKind::PosOnly);
        let np_only = ConstraintFunction::make(ConstraintKind::NpOnly);
        let constant = ConstraintFunction::constant();
        let ner2 = ner(&["B-PER", "I-PER", "O", "O", "O", "O"]);
        let ner3 = ner(&["B-PER", "I-PER", "O", "O", "B-ORG", "I-ORG"]);
        // pos-only has no NP check, so NER3 passes; NER2 still violates it
        assert!(pos_only.check(&y1, &ner3).unwrap());
        assert!(!pos_only.check(&y1, &ner2).unwrap());
        // np-only rejects the NP-crossing NER3 but accepts NER2
        assert!(!np_only.check(&y1, &ner3).unwrap());
        assert!(np_only.check(&y1, &ner2).unwrap());
        assert!(constant.check(&y1, &ner2).unwrap());
        assert!(constant.check(&y1, &ner3).unwrap());
    }

    #[test]
    fn proper_noun_outside_np_escapes() {
        let alphabet = Arc::new(
            LabelAlphabet::new(
                "syntactic",
                vec![composite_join("NNP", "B-VP"), composite_join("NN", "O")],
                false,
            )
            .unwrap(),
        );
        let y1 = Labeling::new(alphabet, &[composite_join("NNP", "B-VP")]).unwrap();
        let chi = ConstraintFunction::full();
        for labels in [["O"], ["B-PER"]] {
            assert!(chi.check(&y1, &ner(&labels)).unwrap());
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let y1 = intro_y1();
        let y2 = ner(&["O"]);
        assert!(ConstraintFunction::full().check(&y1, &y2).is_err());
    }

    #[test]
    fn count_compatible_examples() {
        // all (VBD, B-VP): every position forces O
        let alphabet = Arc::new(
            LabelAlphabet::new(
                "syntactic",
                vec![composite_join("VBD", "B-VP"), composite_join("NN", "O")],
                false,
            )
            .unwrap(),
        );
        let label = composite_join("VBD", "B-VP");
        let y1 = Labeling::new(alphabet.clone(), &[label.clone(), label.clone(), label]).unwrap();
        let chi = ConstraintFunction::full();
        assert_eq!(count_compatible(&y1, &LabelAlphabet::default_ner(), &chi).unwrap(), 1);

        // single (NNP, B-NP) token: exactly the four B-* labels
        let alphabet = Arc::new(
            LabelAlphabet::new(
                "syntactic",
                vec![composite_join("NNP", "B-NP"), composite_join("NN", "O")],
                false,
            )
            .unwrap(),
        );
        let y1 = Labeling::new(alphabet, &[composite_join("NNP", "B-NP")]).unwrap();
        assert_eq!(count_compatible(&y1, &LabelAlphabet::default_ner(), &chi).unwrap(), 4);
    }

    #[test]
    fn wellformed_bio_count_length_two() {
        // 5 starts (O or B-t); O continues 5 ways, each B-t continues 6 ways
        let alphabet = Arc::new(
            LabelAlphabet::new(
                "syntactic",
                vec![composite_join("NN", "O"), composite_join("DT", "O")],
                false,
            )
            .unwrap(),
        );
        let label = composite_join("NN", "O");
        let y1 = Labeling::new(alphabet, &[label.clone(), label]).unwrap();
        let constant = ConstraintFunction::constant();
        let count = count_compatible(&y1, &LabelAlphabet::default_ner(), &constant).unwrap();
        assert_eq!(count, 29);
    }

    #[test]
    fn guard_rejects_huge_enumerations() {
        let y1 = intro_y1();
        let alphabet = LabelAlphabet::default_ner();
        let long: Vec<String> = (0..12).map(|_| y1.label(0).to_string()).collect();
        let y1_long = Labeling::new(y1.alphabet().clone(), &long).unwrap();
        let err = count_compatible(&y1_long, &alphabet, &ConstraintFunction::constant());
        assert!(matches!(err, Err(Error::GuardExceeded(_))));
    }

    #[test]
    fn constant_accepts_everything() {
        let y1 = intro_y1();
        let chi = ConstraintFunction::constant();
        assert!(chi.check(&y1, &ner(&["O"; 6])).unwrap());
    }

    #[test]
    fn rules_file_round_trip_matches_builtin() {
        let text = "\
# the full rule set, spelled out
NNP*  B-NP   B
NNP*  I-NP   B,I
NNP*  other  any
?     B-NP   B,O
?     I-NP   B,I,O
?     other  O
";
        let parsed = ConstraintFunction::from_rules_text("custom-full", text).unwrap();
        let builtin = ConstraintFunction::full();
        let y1 = intro_y1();
        let candidates = [
            vec!["B-PER", "I-PER", "I-PER", "O", "B-ORG", "O"],
            vec!["B-PER", "I-PER", "O", "O", "O", "O"],
            vec!["B-PER", "I-PER", "O", "O", "B-ORG", "I-ORG"],
            vec!["B-PER", "I-PER", "O", "O", "B-ORG", "O"],
            vec!["O", "O", "O", "O", "O", "O"],
        ];
        for c in candidates {
            let y2 = ner(&c);
            assert_eq!(
                parsed.check(&y1, &y2).unwrap(),
                builtin.check(&y1, &y2).unwrap()
            );
        }
    }

    #[test]
    fn monotonicity_of_strength_pointwise() {
        // random (pos, chunk, ner) triples; full => pos-only, full => np-only
        let pos_tags = ["NNP", "NNPS", "NN", "DT", "VBD", "TO", "RB"];
        let chunk_tags = ["B-NP", "I-NP", "B-VP", "I-VP", "B-PP", "O"];
        let ner_tags = ["B-PER", "I-PER", "O"];
        let full = ConstraintFunction::full();
        let pos_only = ConstraintFunction::make(ConstraintKind::PosOnly);
        let np_only = ConstraintFunction::make(ConstraintKind::NpOnly);
        let constant = ConstraintFunction::constant();
        for p in pos_tags {
            for c in chunk_tags {
                for n in ner_tags {
                    let f = full.check_position(p, c, n);
                    let po = pos_only.check_position(p, c, n);
                    let np = np_only.check_position(p, c, n);
                    let k = constant.check_position(p, c, n);
                    assert!(!f || po, "full admits ({p},{c},{n}) but pos-only rejects");
                    assert!(!f || np, "full admits ({p},{c},{n}) but np-only rejects");
                    assert!(k, "constant must admit ({p},{c},{n})");
                    // full is exactly the conjunction of the ablations
                    assert_eq!(f, po && np, "({p},{c},{n})");
                }
            }
        }
    }

    #[test]
    fn decomposes_over_positions() {
        let y1 = intro_y1();
        let chi = ConstraintFunction::full();
        let y2 = ner(&["B-PER", "I-PER", "O", "O", "B-ORG", "O"]);
        let per_position: Vec<bool> = (0..y1.len())
            .map(|t| {
                let (p, c) = composite_split(y1.label(t)).unwrap();
                chi.check_position(p, c, y2.label(t))
            })
            .collect();
        assert_eq!(
            chi.check(&y1, &y2).unwrap(),
            per_position.iter().all(|&b| b)
        );
    }
}
