//! Ground-truth joint corpus generator.
//!
//! Sentences are built constraint-first: sample a chunk segmentation, place
//! entity spans strictly inside noun phrases, assign proper-noun tags only
//! inside entities (plus a configurable rate of escape-hatch proper nouns
//! outside any NP), then draw words from per-(POS, entity type) categorical
//! distributions that are fixed once per seed. Every generated triple
//! satisfies the full constraint by construction, and the per-state word
//! distributions keep both labeling tasks learnable by first-order models.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::alphabet::{composite_join, LabelAlphabet};
use crate::corpus::{Corpus, CorpusRole, Example, Labeling, Sentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub entity_types: Vec<String>,
    pub mean_len: f64,
    pub max_len: usize,
    /// Probability that the next chunk segment is an NP.
    pub np_rate: f64,
    /// Probability that an entity token is tagged NNP (vs NN).
    pub nnp_in_np_rate: f64,
    /// Probability that an NP hosts an entity span.
    pub entity_in_np_rate: f64,
    /// Dirichlet concentration of the per-state word distributions; smaller
    /// is sharper.
    pub emission_concentration: f64,
    /// Probability that a token outside any NP is tagged NNP.
    pub exception_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 400,
            entity_types: vec!["PER".into(), "ORG".into(), "LOC".into(), "MISC".into()],
            mean_len: 10.0,
            max_len: 30,
            np_rate: 0.5,
            nnp_in_np_rate: 0.75,
            entity_in_np_rate: 0.5,
            emission_concentration: 0.08,
            exception_rate: 0.01,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 10 {
            return Err(Error::config("vocab_size must be at least 10"));
        }
        if self.entity_types.is_empty() {
            return Err(Error::config("at least one entity type is required"));
        }
        for t in &self.entity_types {
            if t.is_empty() || t.chars().any(|c| c.is_whitespace() || c == '|' || c == '-') {
                return Err(Error::config(format!("bad entity type {t:?}")));
            }
        }
        if !(self.mean_len >= 2.0) {
            return Err(Error::config("mean_len must be at least 2"));
        }
        if (self.max_len as f64) < self.mean_len {
            return Err(Error::config("max_len must be at least mean_len"));
        }
        for (name, p) in [
            ("np_rate", self.np_rate),
            ("nnp_in_np_rate", self.nnp_in_np_rate),
            ("entity_in_np_rate", self.entity_in_np_rate),
            ("exception_rate", self.exception_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0,1], got {p}")));
            }
        }
        if !(self.emission_concentration > 0.0) {
            return Err(Error::config("emission_concentration must be positive"));
        }
        if self.nnp_in_np_rate > 0.0
            && self.entity_in_np_rate == 0.0
            && self.exception_rate == 0.0
        {
            return Err(Error::config(
                "nnp_in_np_rate > 0 needs entities or exceptions to place proper nouns in",
            ));
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn from_text(text: &str) -> Result<SynthConfig> {
        let mut cfg = SynthConfig::default();
        for (lineno0, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = lineno0 + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, "expected key = value"))?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| Error::parse(lineno, format!("bad {what}: {value:?}"));
            match key {
                "vocab_size" => cfg.vocab_size = value.parse().map_err(|_| bad("integer"))?,
                "entity_types" => {
                    cfg.entity_types = value.split(',').map(|t| t.trim().to_string()).collect()
                }
                "mean_len" => cfg.mean_len = value.parse().map_err(|_| bad("number"))?,
                "max_len" => cfg.max_len = value.parse().map_err(|_| bad("integer"))?,
                "np_rate" => cfg.np_rate = value.parse().map_err(|_| bad("number"))?,
                "nnp_in_np_rate" => {
                    cfg.nnp_in_np_rate = value.parse().map_err(|_| bad("number"))?
                }
                "entity_in_np_rate" => {
                    cfg.entity_in_np_rate = value.parse().map_err(|_| bad("number"))?
                }
                "emission_concentration" => {
                    cfg.emission_concentration = value.parse().map_err(|_| bad("number"))?
                }
                "exception_rate" => {
                    cfg.exception_rate = value.parse().map_err(|_| bad("number"))?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad("integer"))?,
                other => return Err(Error::parse(lineno, format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        format!(
            "vocab_size = {}\nentity_types = {}\nmean_len = {}\nmax_len = {}\nnp_rate = {}\n\
             nnp_in_np_rate = {}\nentity_in_np_rate = {}\nemission_concentration = {}\n\
             exception_rate = {}\nseed = {}\n",
            self.vocab_size,
            self.entity_types.join(","),
            self.mean_len,
            self.max_len,
            self.np_rate,
            self.nnp_in_np_rate,
            self.entity_in_np_rate,
            self.emission_concentration,
            self.exception_rate,
            self.seed
        )
    }

    /// The entity alphabet this configuration generates over.
    pub fn ner_alphabet(&self) -> Arc<LabelAlphabet> {
        let types: Vec<&str> = self.entity_types.iter().map(|s| s.as_str()).collect();
        LabelAlphabet::ner_over_types(&types)
    }

    /// The fixed composite syntactic alphabet this configuration generates
    /// over, independent of any particular sample.
    pub fn syntactic_alphabet(&self) -> Arc<LabelAlphabet> {
        let mut labels = Vec::new();
        for pos in ["NNP", "NN", "JJ", "DT"] {
            for chunk in ["B-NP", "I-NP"] {
                labels.push(composite_join(pos, chunk));
            }
        }
        for pos in ["VBD", "VBZ"] {
            for chunk in ["B-VP", "I-VP"] {
                labels.push(composite_join(pos, chunk));
            }
        }
        for pos in ["IN", "TO"] {
            for chunk in ["B-PP", "I-PP"] {
                labels.push(composite_join(pos, chunk));
            }
        }
        for pos in ["RB", "CC", "NNP"] {
            labels.push(composite_join(pos, "O"));
        }
        labels.sort();
        Arc::new(LabelAlphabet::new("syntactic", labels, false).expect("fixed alphabet is valid"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SegmentKind {
    Np,
    Vp,
    Pp,
    Other,
}

/// Where a token sits relative to entity spans; span-initial and
/// span-internal tokens get separate word distributions so boundaries stay
/// learnable by first-order taggers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum EntityRole {
    None,
    Begin(String),
    Inside(String),
}

/// Fraction of the vocabulary reserved for name words.
const NAME_BLOCK_FRACTION: f64 = 0.4;
/// Within a type's name slice, the share reserved for span-initial words.
const BEGIN_SLICE_FRACTION: f64 = 0.6;
/// Probability that an ordinary NP noun is drawn from the name block
/// instead of the context block (name words doubling as common nouns).
const NAME_AS_NOUN_RATE: f64 = 0.15;

/// Per-(POS, entity role) categorical word distributions over a partitioned
/// vocabulary, drawn once per seed from symmetric Dirichlets. Each entity
/// type owns a slice of the name block (split into span-initial and
/// span-internal words); the plain-POS states share the context block.
/// Escape-hatch proper nouns outside NPs draw from the whole name block,
/// and ordinary NP nouns borrow name words at a fixed rate, so the
/// entity-vs-outside decision is genuinely ambiguous for part of the data.
struct EmissionTable {
    cumulative: HashMap<(String, EntityRole), (usize, Vec<f64>)>,
    name_block: usize,
}

impl EmissionTable {
    fn draw(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> EmissionTable {
        let gamma = Gamma::new(cfg.emission_concentration, 1.0).expect("valid gamma");
        let v = cfg.vocab_size;
        let name_block = ((v as f64 * NAME_BLOCK_FRACTION) as usize).max(cfg.entity_types.len() * 4);
        let per_type = name_block / cfg.entity_types.len();
        let begin_len = ((per_type as f64 * BEGIN_SLICE_FRACTION) as usize).max(2);

        let mut dirichlet = |offset: usize, len: usize, rng: &mut ChaCha8Rng| {
            let mut weights: Vec<f64> = (0..len).map(|_| gamma.sample(rng).max(1e-300)).collect();
            let total: f64 = weights.iter().sum();
            let mut acc = 0.0;
            for w in weights.iter_mut() {
                acc += *w / total;
                *w = acc;
            }
            (offset, weights)
        };

        let mut cumulative = HashMap::new();
        for (i, t) in cfg.entity_types.iter().enumerate() {
            let slice = i * per_type;
            let begin = dirichlet(slice, begin_len, rng);
            let inside = dirichlet(slice + begin_len, per_type - begin_len, rng);
            for pos in ["NNP", "NN"] {
                cumulative.insert((pos.to_string(), EntityRole::Begin(t.clone())), begin.clone());
                cumulative.insert((pos.to_string(), EntityRole::Inside(t.clone())), inside.clone());
            }
        }
        for pos in ["NN", "JJ", "DT", "VBD", "VBZ", "IN", "TO", "RB", "CC"] {
            let d = dirichlet(name_block, v - name_block, rng);
            cumulative.insert((pos.to_string(), EntityRole::None), d);
        }
        // escape-hatch proper nouns look like names
        let d = dirichlet(0, name_block, rng);
        cumulative.insert(("NNP".to_string(), EntityRole::None), d);

        EmissionTable {
            cumulative,
            name_block,
        }
    }

    fn sample_word(&self, pos: &str, role: &EntityRole, rng: &mut ChaCha8Rng) -> usize {
        if pos == "NN" && *role == EntityRole::None && rng.random_bool(NAME_AS_NOUN_RATE) {
            return rng.random_range(0..self.name_block);
        }
        let key = (pos.to_string(), role.clone());
        let (offset, cumulative) = self
            .cumulative
            .get(&key)
            .expect("every generated state has a distribution");
        let u: f64 = rng.random();
        offset + cumulative.partition_point(|&c| c < u).min(cumulative.len() - 1)
    }
}

/// Generates a corpus of `(sentence, y1, y2)` triples. Every triple
/// satisfies the full constraint by construction.
pub fn generate(cfg: &SynthConfig, n_sentences: usize) -> Result<Corpus> {
    cfg.validate()?;
    if n_sentences == 0 {
        return Err(Error::config("n_sentences must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let emissions = EmissionTable::draw(cfg, &mut rng);
    let syn_alphabet = cfg.syntactic_alphabet();
    let ner_alphabet = cfg.ner_alphabet();
    let length_dist = Poisson::new(cfg.mean_len - 1.0).expect("validated mean");
    let np_len = Poisson::new(1.8).expect("fixed");
    let other_len = Poisson::new(0.6).expect("fixed");
    let ent_len = Poisson::new(1.0).expect("fixed");

    let width = n_sentences.to_string().len().max(6);
    let mut examples = Vec::with_capacity(n_sentences);
    for i in 0..n_sentences {
        let n = ((length_dist.sample(&mut rng) as usize) + 1).clamp(1, cfg.max_len);
        let mut chunk = vec![String::new(); n];
        let mut pos = vec![String::new(); n];
        let mut ner = vec!["O".to_string(); n];
        let mut entity_at: Vec<EntityRole> = vec![EntityRole::None; n];

        let mut t = 0usize;
        while t < n {
            let kind = if rng.random_bool(cfg.np_rate) {
                SegmentKind::Np
            } else {
                *[SegmentKind::Vp, SegmentKind::Pp, SegmentKind::Other]
                    .choose(&mut rng)
                    .unwrap()
            };
            let raw = match kind {
                SegmentKind::Np => np_len.sample(&mut rng) as usize,
                _ => other_len.sample(&mut rng) as usize,
            };
            let seg_len = (raw + 1).min(n - t);
            match kind {
                SegmentKind::Np => {
                    for (j, slot) in chunk[t..t + seg_len].iter_mut().enumerate() {
                        *slot = if j == 0 { "B-NP".into() } else { "I-NP".into() };
                    }
                    if rng.random_bool(cfg.entity_in_np_rate) {
                        let offset = rng.random_range(0..seg_len);
                        let max_len = seg_len - offset;
                        let e_len = ((ent_len.sample(&mut rng) as usize) + 1).min(max_len);
                        let ty = cfg.entity_types.choose(&mut rng).unwrap().clone();
                        for j in 0..e_len {
                            let p = t + offset + j;
                            if j == 0 {
                                ner[p] = format!("B-{ty}");
                                entity_at[p] = EntityRole::Begin(ty.clone());
                            } else {
                                ner[p] = format!("I-{ty}");
                                entity_at[p] = EntityRole::Inside(ty.clone());
                            }
                        }
                    }
                    for j in 0..seg_len {
                        let p = t + j;
                        pos[p] = if entity_at[p] != EntityRole::None {
                            if rng.random_bool(cfg.nnp_in_np_rate) {
                                "NNP".into()
                            } else {
                                "NN".into()
                            }
                        } else {
                            let r: f64 = rng.random();
                            if r < 0.5 {
                                "NN".into()
                            } else if r < 0.75 {
                                "JJ".into()
                            } else {
                                "DT".into()
                            }
                        };
                    }
                }
                SegmentKind::Vp | SegmentKind::Pp => {
                    let (b, i_tag, choices) = match kind {
                        SegmentKind::Vp => ("B-VP", "I-VP", ["VBD", "VBZ"]),
                        _ => ("B-PP", "I-PP", ["IN", "TO"]),
                    };
                    for j in 0..seg_len {
                        let p = t + j;
                        chunk[p] = if j == 0 { b.into() } else { i_tag.into() };
                        pos[p] = (*choices.choose(&mut rng).unwrap()).into();
                    }
                }
                SegmentKind::Other => {
                    for j in 0..seg_len {
                        let p = t + j;
                        chunk[p] = "O".into();
                        pos[p] = if rng.random_bool(cfg.exception_rate) {
                            "NNP".into()
                        } else {
                            (*["RB", "CC"].choose(&mut rng).unwrap()).into()
                        };
                    }
                }
            }
            t += seg_len;
        }

        let tokens: Vec<String> = (0..n)
            .map(|p| {
                let w = emissions.sample_word(&pos[p], &entity_at[p], &mut rng);
                format!("w{w}")
            })
            .collect();
        let y1_labels: Vec<String> = pos
            .iter()
            .zip(&chunk)
            .map(|(p, c)| composite_join(p, c))
            .collect();
        let sentence = Sentence::new(format!("{i:0width$}"), tokens)?;
        let y1 = Labeling::new(syn_alphabet.clone(), &y1_labels)?;
        let y2 = Labeling::new(ner_alphabet.clone(), &ner)?;
        examples.push(Example::new(sentence, Some(y1), Some(y2))?);
    }
    Corpus::new(examples, CorpusRole::Test)
}

/// Sizes of the four experiment splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub d1: usize,
    pub d2: usize,
    pub unlab: usize,
    pub test: usize,
}

/// What the unlabeled split exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnlabMode {
    /// Keep `y1`, hide `y2` (one-sided experiments).
    OneSided,
    /// Hide both labelings (two-sided experiments).
    TwoSided,
}

#[derive(Debug)]
pub struct SplitCorpora {
    pub d1: Corpus,
    pub d2: Corpus,
    pub unlab: Corpus,
    pub test: Corpus,
}

/// Disjoint seeded split with role labels attached.
pub fn split(corpus: &Corpus, sizes: SplitSizes, seed: u64, mode: UnlabMode) -> Result<SplitCorpora> {
    let total = sizes.d1 + sizes.d2 + sizes.unlab + sizes.test;
    if total > corpus.len() {
        return Err(Error::data(format!(
            "split sizes sum to {total} but corpus has {} examples",
            corpus.len()
        )));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let take = |range: std::ops::Range<usize>| -> Vec<&Example> {
        order[range].iter().map(|&i| corpus.get(i)).collect()
    };
    let a = sizes.d1;
    let b = a + sizes.d2;
    let c = b + sizes.unlab;
    let d = c + sizes.test;

    let d1 = take(0..a)
        .into_iter()
        .map(|ex| ex.clone().with_y2(None))
        .collect::<Result<Vec<_>>>()?;
    let d2 = take(a..b)
        .into_iter()
        .map(|ex| ex.clone().with_y1(None))
        .collect::<Result<Vec<_>>>()?;
    let unlab = take(b..c)
        .into_iter()
        .map(|ex| {
            let ex = ex.clone().with_y2(None)?;
            match mode {
                UnlabMode::OneSided => Ok(ex),
                UnlabMode::TwoSided => ex.with_y1(None),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let test = take(c..d).into_iter().cloned().collect();

    Ok(SplitCorpora {
        d1: Corpus::new(d1, CorpusRole::Labeled1)?,
        d2: Corpus::new(d2, CorpusRole::Labeled2)?,
        unlab: Corpus::new(unlab, CorpusRole::Unlabeled)?,
        test: Corpus::new(test, CorpusRole::Test)?,
    })
}
