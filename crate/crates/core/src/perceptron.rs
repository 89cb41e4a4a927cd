//! Averaged structured perceptron sequence labeler.
//!
//! Feature templates (version `v1`), per position: current word, lowercased
//! word, 3-character prefix and suffix, a capitalization flag, the previous
//! and next words, and an optional extra per-token feature channel. Label
//! transitions (including from a virtual start) carry their own dense
//! weights. Inference is Viterbi over summed weights; ties break toward the
//! lowest label index. Training shuffles example order with a seeded
//! ChaCha8 stream, so results are deterministic given (corpus order, seed).

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alphabet::LabelAlphabet;
use crate::corpus::{Corpus, Labeling, Sentence};
use crate::error::{Error, Result};
use crate::hmm::bio_transition_mask;
use crate::tagger::{corpus_items, shared_alphabet, Learner, Tagger, Task, TrainItem};

pub const TEMPLATE_VERSION: &str = "v1";

const FORMAT_HEADER: &str = "seqhints-perceptron v1";

/// One weight table: sparse per-label emission weights keyed by feature
/// string, plus dense transition weights ((K+1) x K, row 0 = from start).
#[derive(Debug, Clone, Default)]
struct WeightSet {
    emit: HashMap<String, Vec<f64>>,
    trans: Vec<Vec<f64>>,
}

impl WeightSet {
    fn zeros(k: usize) -> Self {
        WeightSet {
            emit: HashMap::new(),
            trans: vec![vec![0.0; k]; k + 1],
        }
    }
}

#[derive(Debug, Clone)]
pub struct PerceptronModel {
    alphabet: Arc<LabelAlphabet>,
    template_version: String,
    /// Averaged weights; these drive decoding.
    averaged: WeightSet,
    /// Final-iterate weights, kept for diagnostics.
    last: WeightSet,
    steps: u64,
    updates: u64,
    allowed_start: Vec<bool>,
    allowed: Vec<Vec<bool>>,
}

/// Which weight table to decode with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Averaged,
    LastIterate,
}

impl PerceptronModel {
    /// Trains on a labeled corpus.
    pub fn train(corpus: &Corpus, task: Task, epochs: usize, seed: u64) -> Result<PerceptronModel> {
        if corpus.is_empty() {
            return Err(Error::data("cannot train on an empty corpus"));
        }
        let items = corpus_items(corpus, task)?;
        Self::train_items(&items, epochs, seed)
    }

    /// Trains on weighted items; update magnitudes scale with item weight.
    pub fn train_items(items: &[TrainItem], epochs: usize, seed: u64) -> Result<PerceptronModel> {
        if epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        let alphabet = shared_alphabet(items)?;
        let k = alphabet.len();
        let (allowed_start, allowed) = bio_transition_mask(&alphabet);

        let mut cur = WeightSet::zeros(k);
        // accumulator for the averaging pass; emissions use lazy folding
        let mut acc_emit: HashMap<String, Vec<f64>> = HashMap::new();
        let mut acc_trans = vec![vec![0.0f64; k]; k + 1];
        let mut last_touched: HashMap<String, u64> = HashMap::new();
        let mut step: u64 = 0;
        let mut updates: u64 = 0;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..items.len()).collect();

        let mut feature_buf: Vec<String> = Vec::new();
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &idx in &order {
                let item = &items[idx];
                step += 1;
                let (pred, _) = decode_with(
                    &cur,
                    &alphabet,
                    &allowed_start,
                    &allowed,
                    &item.sentence,
                    item.extra.as_deref(),
                );
                if pred.indices() != item.labeling.indices() {
                    updates += 1;
                    let w = item.weight;
                    let n = item.sentence.len();
                    for t in 0..n {
                        let g = item.labeling.index(t);
                        let p = pred.index(t);
                        if g != p {
                            feature_buf.clear();
                            push_features(
                                item.sentence.tokens(),
                                item.extra.as_deref(),
                                t,
                                &mut feature_buf,
                            );
                            for f in &feature_buf {
                                let row = touch(
                                    f,
                                    k,
                                    step,
                                    &mut cur.emit,
                                    &mut acc_emit,
                                    &mut last_touched,
                                );
                                row[g] += w;
                                row[p] -= w;
                            }
                        }
                        let g_prev = if t == 0 { 0 } else { item.labeling.index(t - 1) + 1 };
                        let p_prev = if t == 0 { 0 } else { pred.index(t - 1) + 1 };
                        if (g_prev, g) != (p_prev, p) {
                            cur.trans[g_prev][g] += w;
                            cur.trans[p_prev][p] -= w;
                        }
                    }
                }
                for (row_acc, row_cur) in acc_trans.iter_mut().zip(&cur.trans) {
                    for (a, c) in row_acc.iter_mut().zip(row_cur) {
                        *a += c;
                    }
                }
            }
        }

        // fold outstanding emission weights: a value set during step p is
        // the post-step value for steps p..=S, i.e. S - p + 1 terms
        for (f, row) in &cur.emit {
            let since = step + 1 - last_touched.get(f).copied().unwrap_or(step + 1);
            if since > 0 {
                let acc = acc_emit.entry(f.clone()).or_insert_with(|| vec![0.0; k]);
                for (a, c) in acc.iter_mut().zip(row) {
                    *a += c * since as f64;
                }
            }
        }

        let steps_f = step as f64;
        let mut averaged = WeightSet::zeros(k);
        for (f, row) in acc_emit {
            let mean: Vec<f64> = row.iter().map(|a| a / steps_f).collect();
            if mean.iter().any(|&x| x != 0.0) {
                averaged.emit.insert(f, mean);
            }
        }
        for (row_avg, row_acc) in averaged.trans.iter_mut().zip(&acc_trans) {
            for (m, a) in row_avg.iter_mut().zip(row_acc) {
                *m = a / steps_f;
            }
        }
        cur.emit.retain(|_, row| row.iter().any(|&x| x != 0.0));

        Ok(PerceptronModel {
            alphabet,
            template_version: TEMPLATE_VERSION.to_string(),
            averaged,
            last: cur,
            steps: step,
            updates,
            allowed_start,
            allowed,
        })
    }

    pub fn alphabet(&self) -> &Arc<LabelAlphabet> {
        &self.alphabet
    }

    pub fn template_version(&self) -> &str {
        &self.template_version
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Viterbi decode with the averaged weights and an optional extra
    /// feature channel.
    pub fn decode_with_extra(
        &self,
        sentence: &Sentence,
        extra: Option<&[String]>,
    ) -> (Labeling, f64) {
        decode_with(
            &self.averaged,
            &self.alphabet,
            &self.allowed_start,
            &self.allowed,
            sentence,
            extra,
        )
    }

    /// Decode with an explicitly chosen weight table.
    pub fn decode_kind(
        &self,
        sentence: &Sentence,
        extra: Option<&[String]>,
        kind: WeightKind,
    ) -> (Labeling, f64) {
        let weights = match kind {
            WeightKind::Averaged => &self.averaged,
            WeightKind::LastIterate => &self.last,
        };
        decode_with(
            weights,
            &self.alphabet,
            &self.allowed_start,
            &self.allowed,
            sentence,
            extra,
        )
    }

    /// Margin-based confidence, `1 - exp(-(best - second)/n)`.
    pub fn confidence_with_extra(&self, sentence: &Sentence, extra: Option<&[String]>) -> f64 {
        let (best, second) = two_best_scores(
            &self.averaged,
            &self.alphabet,
            &self.allowed_start,
            &self.allowed,
            sentence,
            extra,
        );
        match second {
            Some(s) => {
                let margin = (best - s).max(0.0);
                1.0 - (-margin / sentence.len() as f64).exp()
            }
            None => 1.0,
        }
    }

    /// Serializes the model; mirrors the HMM text format (17 significant
    /// digits, fixed order) so models round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(FORMAT_HEADER);
        out.push('\n');
        out.push_str(&format!("task {}\n", self.alphabet.task_name()));
        out.push_str(&format!("bio {}\n", self.alphabet.bio_scheme()));
        out.push_str(&format!("templates {}\n", self.template_version));
        out.push_str(&format!("labels {}\n", self.alphabet.len()));
        for l in self.alphabet.labels() {
            out.push_str(l);
            out.push('\n');
        }
        out.push_str(&format!("steps {}\n", self.steps));
        out.push_str(&format!("updates {}\n", self.updates));
        for (name, set) in [("averaged", &self.averaged), ("last", &self.last)] {
            out.push_str(&format!("{name}_trans\n"));
            for row in &set.trans {
                let line = row
                    .iter()
                    .map(|&x| format!("{x:.16e}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                out.push_str(&line);
                out.push('\n');
            }
            let mut feats: Vec<(&String, &Vec<f64>)> = set.emit.iter().collect();
            feats.sort_by(|a, b| a.0.cmp(b.0));
            let n_rows: usize = feats
                .iter()
                .map(|(_, row)| row.iter().filter(|&&x| x != 0.0).count())
                .sum();
            out.push_str(&format!("{name}_features {n_rows}\n"));
            for (f, row) in feats {
                for (l, &x) in row.iter().enumerate() {
                    if x != 0.0 {
                        out.push_str(&format!("{f}\t{l}\t{x:.16e}\n"));
                    }
                }
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<PerceptronModel> {
        let mut lines = text.lines();
        let mut next = |what: &str| -> Result<&str> {
            lines
                .next()
                .ok_or_else(|| Error::ModelFormat(format!("missing {what}")))
        };
        if next("header")? != FORMAT_HEADER {
            return Err(Error::ModelFormat("bad header".into()));
        }
        let task = next("task")?
            .strip_prefix("task ")
            .ok_or_else(|| Error::ModelFormat("bad task line".into()))?
            .to_string();
        let bio: bool = field(next("bio")?, "bio ")?;
        let templates = next("templates")?
            .strip_prefix("templates ")
            .ok_or_else(|| Error::ModelFormat("bad templates line".into()))?
            .to_string();
        let k: usize = field(next("labels")?, "labels ")?;
        let mut labels = Vec::with_capacity(k);
        for _ in 0..k {
            labels.push(next("label")?.to_string());
        }
        let steps: u64 = field(next("steps")?, "steps ")?;
        let updates: u64 = field(next("updates")?, "updates ")?;

        let mut sets = Vec::new();
        for name in ["averaged", "last"] {
            let marker = next("trans marker")?;
            if marker != format!("{name}_trans") {
                return Err(Error::ModelFormat(format!("expected {name}_trans")));
            }
            let mut trans = Vec::with_capacity(k + 1);
            for _ in 0..=k {
                let row: std::result::Result<Vec<f64>, _> = next("trans row")?
                    .split_whitespace()
                    .map(|f| f.parse::<f64>())
                    .collect();
                let row = row.map_err(|e| Error::ModelFormat(format!("bad float: {e}")))?;
                if row.len() != k {
                    return Err(Error::ModelFormat("transition row width".into()));
                }
                trans.push(row);
            }
            let count_line = next("features count")?;
            let n: usize = count_line
                .strip_prefix(&format!("{name}_features "))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::ModelFormat(format!("bad line {count_line:?}")))?;
            let mut emit: HashMap<String, Vec<f64>> = HashMap::new();
            for _ in 0..n {
                let line = next("feature row")?;
                let mut parts = line.split('\t');
                let (f, l, x) = (parts.next(), parts.next(), parts.next());
                let (f, l, x) = match (f, l, x) {
                    (Some(f), Some(l), Some(x)) => (f, l, x),
                    _ => return Err(Error::ModelFormat(format!("bad feature row {line:?}"))),
                };
                let l: usize = l
                    .parse()
                    .map_err(|_| Error::ModelFormat("bad label index".into()))?;
                let x: f64 = x
                    .parse()
                    .map_err(|_| Error::ModelFormat("bad weight".into()))?;
                if l >= k {
                    return Err(Error::ModelFormat("label index out of range".into()));
                }
                emit.entry(f.to_string()).or_insert_with(|| vec![0.0; k])[l] = x;
            }
            sets.push(WeightSet { emit, trans });
        }
        let last = sets.pop().unwrap();
        let averaged = sets.pop().unwrap();
        if next("end")? != "end" {
            return Err(Error::ModelFormat("missing end marker".into()));
        }

        let alphabet = Arc::new(LabelAlphabet::new(task, labels, bio)?);
        let (allowed_start, allowed) = bio_transition_mask(&alphabet);
        Ok(PerceptronModel {
            alphabet,
            template_version: templates,
            averaged,
            last,
            steps,
            updates,
            allowed_start,
            allowed,
        })
    }
}

impl Tagger for PerceptronModel {
    fn alphabet(&self) -> &Arc<LabelAlphabet> {
        &self.alphabet
    }

    fn decode(&self, sentence: &Sentence) -> Labeling {
        self.decode_with_extra(sentence, None).0
    }

    fn confidence(&self, sentence: &Sentence) -> f64 {
        self.confidence_with_extra(sentence, None)
    }
}

/// Perceptron training configuration usable as a generic [`Learner`].
#[derive(Debug, Clone)]
pub struct PerceptronLearner {
    pub epochs: usize,
    pub seed: u64,
}

impl Default for PerceptronLearner {
    fn default() -> Self {
        PerceptronLearner { epochs: 5, seed: 1 }
    }
}

impl Learner for PerceptronLearner {
    fn name(&self) -> &'static str {
        "perceptron"
    }

    fn train(&self, items: &[TrainItem]) -> Result<Box<dyn Tagger>> {
        Ok(Box::new(PerceptronModel::train_items(
            items,
            self.epochs,
            self.seed,
        )?))
    }
}

fn field<T: std::str::FromStr>(line: &str, prefix: &str) -> Result<T> {
    line.strip_prefix(prefix)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::ModelFormat(format!("bad line {line:?}")))
}

fn push_features(tokens: &[String], extra: Option<&[String]>, t: usize, out: &mut Vec<String>) {
    let word = &tokens[t];
    out.push(format!("w={word}"));
    out.push(format!("lw={}", word.to_lowercase()));
    let chars: Vec<char> = word.chars().collect();
    let p3: String = chars.iter().take(3).collect();
    let s3: String = chars.iter().rev().take(3).rev().collect();
    out.push(format!("p3={p3}"));
    out.push(format!("s3={s3}"));
    let cap = chars.first().map(|c| c.is_uppercase()).unwrap_or(false);
    out.push(format!("cap={}", u8::from(cap)));
    match t.checked_sub(1).and_then(|i| tokens.get(i)) {
        Some(prev) => out.push(format!("w-1={prev}")),
        None => out.push("w-1=<s>".to_string()),
    }
    match tokens.get(t + 1) {
        Some(next) => out.push(format!("w+1={next}")),
        None => out.push("w+1=</s>".to_string()),
    }
    if let Some(extra) = extra {
        out.push(format!("x={}", extra[t]));
    }
}

fn touch<'a>(
    feature: &str,
    k: usize,
    step: u64,
    cur: &'a mut HashMap<String, Vec<f64>>,
    acc: &mut HashMap<String, Vec<f64>>,
    last_touched: &mut HashMap<String, u64>,
) -> &'a mut Vec<f64> {
    let prev = last_touched.insert(feature.to_string(), step).unwrap_or(0);
    let row = cur
        .entry(feature.to_string())
        .or_insert_with(|| vec![0.0; k]);
    // the held value was the post-step value for steps prev..step-1;
    // fold those terms in before this step mutates the row
    let since = step - prev;
    if since > 0 && prev > 0 {
        let acc_row = acc
            .entry(feature.to_string())
            .or_insert_with(|| vec![0.0; k]);
        for (a, c) in acc_row.iter_mut().zip(row.iter()) {
            *a += c * since as f64;
        }
    }
    row
}

fn emission_scores(
    weights: &WeightSet,
    k: usize,
    tokens: &[String],
    extra: Option<&[String]>,
    t: usize,
    buf: &mut Vec<String>,
) -> Vec<f64> {
    buf.clear();
    push_features(tokens, extra, t, buf);
    let mut scores = vec![0.0f64; k];
    for f in buf.iter() {
        if let Some(row) = weights.emit.get(f) {
            for (s, w) in scores.iter_mut().zip(row) {
                *s += w;
            }
        }
    }
    scores
}

fn decode_with(
    weights: &WeightSet,
    alphabet: &Arc<LabelAlphabet>,
    allowed_start: &[bool],
    allowed: &[Vec<bool>],
    sentence: &Sentence,
    extra: Option<&[String]>,
) -> (Labeling, f64) {
    let k = alphabet.len();
    let n = sentence.len();
    assert!(
        extra.map(|e| e.len() == n).unwrap_or(true),
        "extra feature channel length mismatch"
    );
    let mut buf = Vec::new();
    let mut score = vec![vec![f64::NEG_INFINITY; k]; n];
    let mut back = vec![vec![0usize; k]; n];

    let e0 = emission_scores(weights, k, sentence.tokens(), extra, 0, &mut buf);
    for y in 0..k {
        if allowed_start[y] {
            score[0][y] = weights.trans[0][y] + e0[y];
        }
    }
    for t in 1..n {
        let et = emission_scores(weights, k, sentence.tokens(), extra, t, &mut buf);
        for y in 0..k {
            let mut best = f64::NEG_INFINITY;
            let mut best_prev = 0usize;
            for prev in 0..k {
                if !allowed[prev][y] {
                    continue;
                }
                let s = score[t - 1][prev] + weights.trans[prev + 1][y];
                if s > best {
                    best = s;
                    best_prev = prev;
                }
            }
            score[t][y] = best + et[y];
            back[t][y] = best_prev;
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_y = 0usize;
    for y in 0..k {
        if score[n - 1][y] > best {
            best = score[n - 1][y];
            best_y = y;
        }
    }
    let mut indices = vec![0usize; n];
    indices[n - 1] = best_y;
    for t in (1..n).rev() {
        indices[t - 1] = back[t][indices[t]];
    }
    let labeling = Labeling::from_indices(alphabet.clone(), indices)
        .expect("masked decode yields a valid labeling");
    (labeling, best)
}

fn two_best_scores(
    weights: &WeightSet,
    alphabet: &Arc<LabelAlphabet>,
    allowed_start: &[bool],
    allowed: &[Vec<bool>],
    sentence: &Sentence,
    extra: Option<&[String]>,
) -> (f64, Option<f64>) {
    let k = alphabet.len();
    let n = sentence.len();
    let mut buf = Vec::new();
    let mut beam: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); k]; n];
    let e0 = emission_scores(weights, k, sentence.tokens(), extra, 0, &mut buf);
    for y in 0..k {
        if allowed_start[y] {
            beam[0][y].push(weights.trans[0][y] + e0[y]);
        }
    }
    for t in 1..n {
        let et = emission_scores(weights, k, sentence.tokens(), extra, t, &mut buf);
        for y in 0..k {
            let mut cands: Vec<f64> = Vec::new();
            for prev in 0..k {
                if !allowed[prev][y] {
                    continue;
                }
                for &s in &beam[t - 1][prev] {
                    cands.push(s + weights.trans[prev + 1][y] + et[y]);
                }
            }
            cands.sort_by(|a, b| b.partial_cmp(a).unwrap());
            cands.truncate(2);
            beam[t][y] = cands;
        }
    }
    let mut finals: Vec<f64> = Vec::new();
    for y in 0..k {
        finals.extend(beam[n - 1][y].iter().copied());
    }
    finals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let best = finals.first().copied().unwrap_or(f64::NEG_INFINITY);
    (best, finals.get(1).copied())
}
