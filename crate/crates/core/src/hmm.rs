//! First-order generative HMM sequence labeler.
//!
//! Training replaces rare words (corpus count <= `prune_threshold`) with a
//! single `*unknown*` token before counting, then applies additive
//! smoothing with concentration `alpha` to every distribution. Start and
//! stop are virtual states: the start state carries its own smoothed
//! distribution over first labels, and each label carries a smoothed
//! Bernoulli stop probability.
//!
//! A sequence is scored as
//! `log P(y1|start) + sum log P(yt|yt-1) + log P(stop|yn) + sum log P(wt|yt)`.
//!
//! When the label alphabet is a BIO scheme, decoding only considers
//! well-formed sequences (`I-X` reachable from `B-X`/`I-X` only), so decoder
//! output always satisfies the labeling invariant.

use std::collections::HashMap;
use std::sync::Arc;

use crate::alphabet::{bio_parts, LabelAlphabet};
use crate::corpus::{Corpus, Labeling, Sentence};
use crate::error::{Error, Result};
use crate::tagger::{corpus_items, shared_alphabet, Learner, Tagger, Task, TrainItem};

pub const DEFAULT_ALPHA: f64 = 0.001;
pub const DEFAULT_PRUNE_THRESHOLD: usize = 1;

/// The distinguished vocabulary entry rare and unseen words map to.
pub const UNKNOWN_TOKEN: &str = "*unknown*";

const FORMAT_HEADER: &str = "seqhints-hmm v1";

#[derive(Debug, Clone)]
pub struct HmmModel {
    alphabet: Arc<LabelAlphabet>,
    vocab: Vec<String>,
    vocab_index: HashMap<String, usize>,
    unknown: usize,
    alpha: f64,
    start: Vec<f64>,
    trans: Vec<Vec<f64>>,
    stop: Vec<f64>,
    emit: Vec<Vec<f64>>,
    // log-space copies used by decoding
    log_start: Vec<f64>,
    log_trans: Vec<Vec<f64>>,
    log_stop: Vec<f64>,
    log_emit: Vec<Vec<f64>>,
    // allowed[prev][next]; trivial for non-BIO alphabets
    allowed_start: Vec<bool>,
    allowed: Vec<Vec<bool>>,
}

impl HmmModel {
    /// Maximum-likelihood counts with additive smoothing over a labeled
    /// corpus.
    pub fn train(
        corpus: &Corpus,
        task: Task,
        alpha: f64,
        prune_threshold: usize,
    ) -> Result<HmmModel> {
        if corpus.is_empty() {
            return Err(Error::data("cannot train on an empty corpus"));
        }
        let items = corpus_items(corpus, task)?;
        Self::train_items(&items, alpha, prune_threshold)
    }

    /// As [`HmmModel::train`], over weighted items. Counts accumulate item
    /// weights; pruning uses raw (unweighted) occurrence counts.
    pub fn train_items(
        items: &[TrainItem],
        alpha: f64,
        prune_threshold: usize,
    ) -> Result<HmmModel> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::config(format!("alpha must be positive, got {alpha}")));
        }
        let alphabet = shared_alphabet(items)?;
        let k = alphabet.len();

        let mut word_counts: HashMap<&str, usize> = HashMap::new();
        for item in items {
            for tok in item.sentence.tokens() {
                *word_counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        let mut vocab: Vec<String> = word_counts
            .iter()
            .filter(|(_, &c)| c > prune_threshold)
            .map(|(w, _)| w.to_string())
            .collect();
        vocab.sort();
        vocab.push(UNKNOWN_TOKEN.to_string());
        let vocab_index: HashMap<String, usize> = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let unknown = vocab.len() - 1;
        let v = vocab.len();

        let mut start_count = vec![0.0f64; k];
        let mut trans_count = vec![vec![0.0f64; k]; k];
        let mut stop_count = vec![0.0f64; k];
        let mut emit_count = vec![vec![0.0f64; v]; k];
        let mut occ = vec![0.0f64; k];
        let mut start_mass = 0.0f64;

        for item in items {
            let w = item.weight;
            if w == 0.0 {
                continue;
            }
            let n = item.sentence.len();
            start_mass += w;
            start_count[item.labeling.index(0)] += w;
            stop_count[item.labeling.index(n - 1)] += w;
            for t in 0..n {
                let y = item.labeling.index(t);
                occ[y] += w;
                let word = item.sentence.token(t);
                let wi = *vocab_index.get(word).unwrap_or(&unknown);
                emit_count[y][wi] += w;
                if t + 1 < n {
                    trans_count[y][item.labeling.index(t + 1)] += w;
                }
            }
        }

        let start: Vec<f64> = start_count
            .iter()
            .map(|&c| (c + alpha) / (start_mass + k as f64 * alpha))
            .collect();
        let trans: Vec<Vec<f64>> = trans_count
            .iter()
            .map(|row| {
                let out: f64 = row.iter().sum();
                row.iter()
                    .map(|&c| (c + alpha) / (out + k as f64 * alpha))
                    .collect()
            })
            .collect();
        let stop: Vec<f64> = stop_count
            .iter()
            .zip(&occ)
            .map(|(&s, &o)| (s + alpha) / (o + 2.0 * alpha))
            .collect();
        let emit: Vec<Vec<f64>> = emit_count
            .iter()
            .zip(&occ)
            .map(|(row, &o)| {
                row.iter()
                    .map(|&c| (c + alpha) / (o + v as f64 * alpha))
                    .collect()
            })
            .collect();

        Self::from_parts(alphabet, vocab, alpha, start, trans, stop, emit)
    }

    /// Assembles a model from explicit probability tables, validating
    /// stochasticity. The last vocabulary entry must be [`UNKNOWN_TOKEN`].
    pub fn from_parts(
        alphabet: Arc<LabelAlphabet>,
        vocab: Vec<String>,
        alpha: f64,
        start: Vec<f64>,
        trans: Vec<Vec<f64>>,
        stop: Vec<f64>,
        emit: Vec<Vec<f64>>,
    ) -> Result<HmmModel> {
        let k = alphabet.len();
        let v = vocab.len();
        if vocab.last().map(|s| s.as_str()) != Some(UNKNOWN_TOKEN) {
            return Err(Error::data(format!(
                "vocabulary must end with {UNKNOWN_TOKEN:?}"
            )));
        }
        if start.len() != k || trans.len() != k || stop.len() != k || emit.len() != k {
            return Err(Error::data("table dimensions do not match alphabet"));
        }
        let check_row = |row: &[f64], what: &str| -> Result<()> {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::data(format!("{what} row sums to {sum}, not 1")));
            }
            if row.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
                return Err(Error::data(format!("{what} row has a non-positive entry")));
            }
            Ok(())
        };
        check_row(&start, "start")?;
        for row in &trans {
            if row.len() != k {
                return Err(Error::data("transition row has wrong width"));
            }
            check_row(row, "transition")?;
        }
        for row in &emit {
            if row.len() != v {
                return Err(Error::data("emission row has wrong width"));
            }
            check_row(row, "emission")?;
        }
        for &p in &stop {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::data(format!("stop probability {p} outside (0,1)")));
            }
        }

        let vocab_index: HashMap<String, usize> = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let unknown = v - 1;
        let log_start = start.iter().map(|p| p.ln()).collect();
        let log_trans = trans
            .iter()
            .map(|row| row.iter().map(|p| p.ln()).collect())
            .collect();
        let log_stop = stop.iter().map(|p| p.ln()).collect();
        let log_emit = emit
            .iter()
            .map(|row: &Vec<f64>| row.iter().map(|p| p.ln()).collect())
            .collect();
        let (allowed_start, allowed) = bio_transition_mask(&alphabet);

        Ok(HmmModel {
            alphabet,
            vocab,
            vocab_index,
            unknown,
            alpha,
            start,
            trans,
            stop,
            emit,
            log_start,
            log_trans,
            log_stop,
            log_emit,
            allowed_start,
            allowed,
        })
    }

    pub fn alphabet(&self) -> &Arc<LabelAlphabet> {
        &self.alphabet
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn start_prob(&self, label: usize) -> f64 {
        self.start[label]
    }

    pub fn transition_prob(&self, from: usize, to: usize) -> f64 {
        self.trans[from][to]
    }

    pub fn stop_prob(&self, label: usize) -> f64 {
        self.stop[label]
    }

    pub fn emission_prob(&self, label: usize, word: &str) -> f64 {
        let wi = *self.vocab_index.get(word).unwrap_or(&self.unknown);
        self.emit[label][wi]
    }

    fn word_index(&self, word: &str) -> usize {
        *self.vocab_index.get(word).unwrap_or(&self.unknown)
    }

    /// Argmax labeling under the joint log-probability, with its score.
    /// Ties are broken toward the lowest label index at every backpointer.
    pub fn viterbi_decode(&self, sentence: &Sentence) -> (Labeling, f64) {
        let k = self.alphabet.len();
        let n = sentence.len();
        let mut score = vec![vec![f64::NEG_INFINITY; k]; n];
        let mut back = vec![vec![0usize; k]; n];

        let w0 = self.word_index(sentence.token(0));
        for y in 0..k {
            if self.allowed_start[y] {
                score[0][y] = self.log_start[y] + self.log_emit[y][w0];
            }
        }
        for t in 1..n {
            let wt = self.word_index(sentence.token(t));
            for y in 0..k {
                let mut best = f64::NEG_INFINITY;
                let mut best_prev = 0usize;
                for prev in 0..k {
                    if !self.allowed[prev][y] {
                        continue;
                    }
                    let s = score[t - 1][prev] + self.log_trans[prev][y];
                    if s > best {
                        best = s;
                        best_prev = prev;
                    }
                }
                score[t][y] = best + self.log_emit[y][wt];
                back[t][y] = best_prev;
            }
        }

        let mut best = f64::NEG_INFINITY;
        let mut best_y = 0usize;
        for y in 0..k {
            let s = score[n - 1][y] + self.log_stop[y];
            if s > best {
                best = s;
                best_y = y;
            }
        }
        let mut indices = vec![0usize; n];
        indices[n - 1] = best_y;
        for t in (1..n).rev() {
            indices[t - 1] = back[t][indices[t]];
        }
        let labeling = Labeling::from_indices(self.alphabet.clone(), indices)
            .expect("masked decode yields a valid labeling");
        (labeling, best)
    }

    /// Joint log-probability of a specific labeling.
    pub fn sequence_log_prob(&self, sentence: &Sentence, labeling: &Labeling) -> Result<f64> {
        if labeling.alphabet().as_ref() != self.alphabet.as_ref() {
            return Err(Error::data("labeling alphabet does not match model"));
        }
        if labeling.len() != sentence.len() {
            return Err(Error::data("labeling/sentence length mismatch"));
        }
        let n = sentence.len();
        let mut total = self.log_start[labeling.index(0)];
        for t in 0..n {
            let y = labeling.index(t);
            total += self.log_emit[y][self.word_index(sentence.token(t))];
            if t + 1 < n {
                total += self.log_trans[y][labeling.index(t + 1)];
            }
        }
        total += self.log_stop[labeling.index(n - 1)];
        Ok(total)
    }

    /// Scores of the best and (if any) second-best decodes.
    fn two_best_scores(&self, sentence: &Sentence) -> (f64, Option<f64>) {
        let k = self.alphabet.len();
        let n = sentence.len();
        // per (position, label): up to two (score, ...) entries, best first
        let mut beam: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); k]; n];

        let w0 = self.word_index(sentence.token(0));
        for y in 0..k {
            if self.allowed_start[y] {
                beam[0][y].push(self.log_start[y] + self.log_emit[y][w0]);
            }
        }
        for t in 1..n {
            let wt = self.word_index(sentence.token(t));
            for y in 0..k {
                let mut cands: Vec<f64> = Vec::new();
                for prev in 0..k {
                    if !self.allowed[prev][y] {
                        continue;
                    }
                    for &s in &beam[t - 1][prev] {
                        cands.push(s + self.log_trans[prev][y] + self.log_emit[y][wt]);
                    }
                }
                cands.sort_by(|a, b| b.partial_cmp(a).unwrap());
                cands.truncate(2);
                beam[t][y] = cands;
            }
        }
        let mut finals: Vec<f64> = Vec::new();
        for y in 0..k {
            for &s in &beam[n - 1][y] {
                finals.push(s + self.log_stop[y]);
            }
        }
        finals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let best = finals.first().copied().unwrap_or(f64::NEG_INFINITY);
        (best, finals.get(1).copied())
    }

    /// `1 - exp(-(best - second)/n)`. Returns 1 when no second decode
    /// exists (single-label alphabets).
    pub fn confidence(&self, sentence: &Sentence) -> f64 {
        let (best, second) = self.two_best_scores(sentence);
        match second {
            Some(s) => {
                let margin = (best - s).max(0.0);
                1.0 - (-margin / sentence.len() as f64).exp()
            }
            None => 1.0,
        }
    }

    /// Serializes the model in a versioned text format: label list,
    /// vocabulary, probability tables in fixed order, 17 significant
    /// decimal digits, so models round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(FORMAT_HEADER);
        out.push('\n');
        out.push_str(&format!("task {}\n", self.alphabet.task_name()));
        out.push_str(&format!("bio {}\n", self.alphabet.bio_scheme()));
        out.push_str(&format!("alpha {}\n", fmt_f64(self.alpha)));
        out.push_str(&format!("labels {}\n", self.alphabet.len()));
        for l in self.alphabet.labels() {
            out.push_str(l);
            out.push('\n');
        }
        out.push_str(&format!("vocab {}\n", self.vocab.len()));
        for w in &self.vocab {
            out.push_str(w);
            out.push('\n');
        }
        out.push_str("start\n");
        out.push_str(&row_to_text(&self.start));
        out.push_str("trans\n");
        for row in &self.trans {
            out.push_str(&row_to_text(row));
        }
        out.push_str("stop\n");
        out.push_str(&row_to_text(&self.stop));
        out.push_str("emit\n");
        for row in &self.emit {
            out.push_str(&row_to_text(row));
        }
        out.push_str("end\n");
        out
    }

    /// Reads a model back from its text form.
    pub fn from_text(text: &str) -> Result<HmmModel> {
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
        let bio: bool = parse_field(next("bio")?, "bio ")?;
        let alpha: f64 = parse_field(next("alpha")?, "alpha ")?;
        let k: usize = parse_field(next("labels")?, "labels ")?;
        let mut labels = Vec::with_capacity(k);
        for _ in 0..k {
            labels.push(next("label")?.to_string());
        }
        let v: usize = parse_field(next("vocab")?, "vocab ")?;
        let mut vocab = Vec::with_capacity(v);
        for _ in 0..v {
            vocab.push(next("word")?.to_string());
        }
        expect_line(next("start marker")?, "start")?;
        let start = row_from_text(next("start row")?, k)?;
        expect_line(next("trans marker")?, "trans")?;
        let mut trans = Vec::with_capacity(k);
        for _ in 0..k {
            trans.push(row_from_text(next("trans row")?, k)?);
        }
        expect_line(next("stop marker")?, "stop")?;
        let stop = row_from_text(next("stop row")?, k)?;
        expect_line(next("emit marker")?, "emit")?;
        let mut emit = Vec::with_capacity(k);
        for _ in 0..k {
            emit.push(row_from_text(next("emit row")?, v)?);
        }
        expect_line(next("end marker")?, "end")?;

        let alphabet = Arc::new(LabelAlphabet::new(task, labels, bio)?);
        Self::from_parts(alphabet, vocab, alpha, start, trans, stop, emit)
    }
}

impl Tagger for HmmModel {
    fn alphabet(&self) -> &Arc<LabelAlphabet> {
        &self.alphabet
    }

    fn decode(&self, sentence: &Sentence) -> Labeling {
        self.viterbi_decode(sentence).0
    }

    fn confidence(&self, sentence: &Sentence) -> f64 {
        HmmModel::confidence(self, sentence)
    }
}

/// HMM training configuration usable as a generic [`Learner`].
#[derive(Debug, Clone)]
pub struct HmmLearner {
    pub alpha: f64,
    pub prune_threshold: usize,
}

impl Default for HmmLearner {
    fn default() -> Self {
        HmmLearner {
            alpha: DEFAULT_ALPHA,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
        }
    }
}

impl Learner for HmmLearner {
    fn name(&self) -> &'static str {
        "hmm"
    }

    fn train(&self, items: &[TrainItem]) -> Result<Box<dyn Tagger>> {
        Ok(Box::new(HmmModel::train_items(
            items,
            self.alpha,
            self.prune_threshold,
        )?))
    }
}

/// Start/transition masks keeping BIO decoding well-formed. Non-BIO
/// alphabets get all-true masks.
pub(crate) fn bio_transition_mask(alphabet: &LabelAlphabet) -> (Vec<bool>, Vec<Vec<bool>>) {
    let k = alphabet.len();
    if !alphabet.bio_scheme() {
        return (vec![true; k], vec![vec![true; k]; k]);
    }
    let mut start = vec![true; k];
    let mut allowed = vec![vec![true; k]; k];
    for next in 0..k {
        if let Some(('I', stem)) = bio_parts(alphabet.label(next)) {
            start[next] = false;
            for prev in 0..k {
                let ok = matches!(bio_parts(alphabet.label(prev)), Some((_, p)) if p == stem);
                allowed[prev][next] = ok;
            }
        }
    }
    (start, allowed)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn row_to_text(row: &[f64]) -> String {
    let mut s = row
        .iter()
        .map(|&x| fmt_f64(x))
        .collect::<Vec<_>>()
        .join(" ");
    s.push('\n');
    s
}

fn row_from_text(line: &str, expect: usize) -> Result<Vec<f64>> {
    let row: std::result::Result<Vec<f64>, _> =
        line.split_whitespace().map(|f| f.parse::<f64>()).collect();
    let row = row.map_err(|e| Error::ModelFormat(format!("bad float: {e}")))?;
    if row.len() != expect {
        return Err(Error::ModelFormat(format!(
            "expected {expect} values, found {}",
            row.len()
        )));
    }
    Ok(row)
}

fn parse_field<T: std::str::FromStr>(line: &str, prefix: &str) -> Result<T> {
    line.strip_prefix(prefix)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::ModelFormat(format!("bad line {line:?}")))
}

fn expect_line(line: &str, want: &str) -> Result<()> {
    if line == want {
        Ok(())
    } else {
        Err(Error::ModelFormat(format!("expected {want:?}, found {line:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, CorpusRole, Example};

    fn xy_alphabet() -> Arc<LabelAlphabet> {
        Arc::new(LabelAlphabet::new("t", vec!["X".into(), "Y".into()], false).unwrap())
    }

    fn one_sentence_corpus() -> Corpus {
        let alphabet = xy_alphabet();
        let s = Sentence::new("0", vec!["a".into(), "b".into()]).unwrap();
        let y = Labeling::new(alphabet, &["X", "Y"]).unwrap();
        let ex = Example::new(s, None, Some(y)).unwrap();
        Corpus::new(vec![ex], CorpusRole::Labeled2).unwrap()
    }

    #[test]
    fn transition_smoothing_matches_hand_count() {
        // one X -> Y transition, smoothed over 2 successor labels
        let alpha = DEFAULT_ALPHA;
        let model = HmmModel::train(&one_sentence_corpus(), Task::Entity, alpha, 0).unwrap();
        let x = model.alphabet().index_of("X").unwrap();
        let y = model.alphabet().index_of("Y").unwrap();
        let expect = (1.0 + alpha) / (1.0 + 2.0 * alpha);
        assert!((model.transition_prob(x, y) - expect).abs() < 1e-15);
        assert!((model.transition_prob(x, x) - alpha / (1.0 + 2.0 * alpha)).abs() < 1e-15);
    }

    #[test]
    fn pruning_noop_when_all_words_frequent() {
        let alphabet = xy_alphabet();
        let mut examples = Vec::new();
        for i in 0..2 {
            let s = Sentence::new(format!("{i}"), vec!["a".into(), "b".into()]).unwrap();
            let y = Labeling::new(alphabet.clone(), &["X", "Y"]).unwrap();
            examples.push(Example::new(s, None, Some(y)).unwrap());
        }
        let corpus = Corpus::new(examples, CorpusRole::Labeled2).unwrap();
        let m0 = HmmModel::train(&corpus, Task::Entity, DEFAULT_ALPHA, 0).unwrap();
        let m1 = HmmModel::train(&corpus, Task::Entity, DEFAULT_ALPHA, 1).unwrap();
        assert_eq!(m0.to_text(), m1.to_text());
    }

    #[test]
    fn rejects_empty_corpus_and_bad_alpha() {
        let corpus = Corpus::empty(CorpusRole::Labeled2);
        assert!(HmmModel::train(&corpus, Task::Entity, DEFAULT_ALPHA, 1).is_err());
        assert!(HmmModel::train(&one_sentence_corpus(), Task::Entity, 0.0, 1).is_err());
        assert!(HmmModel::train(&one_sentence_corpus(), Task::Entity, -1.0, 1).is_err());
    }

    #[test]
    fn forced_path_decodes_deterministically() {
        // "a" is only ever emitted from X
        let alphabet = xy_alphabet();
        let mut examples = Vec::new();
        for i in 0..3 {
            let s = Sentence::new(format!("{i}"), vec!["a".into(), "a".into()]).unwrap();
            let y = Labeling::new(alphabet.clone(), &["X", "X"]).unwrap();
            examples.push(Example::new(s, None, Some(y)).unwrap());
        }
        for i in 3..5 {
            let s = Sentence::new(format!("{i}"), vec!["b".into()]).unwrap();
            let y = Labeling::new(alphabet.clone(), &["Y"]).unwrap();
            examples.push(Example::new(s, None, Some(y)).unwrap());
        }
        let corpus = Corpus::new(examples, CorpusRole::Labeled2).unwrap();
        let model = HmmModel::train(&corpus, Task::Entity, DEFAULT_ALPHA, 0).unwrap();
        let s = Sentence::new("t", vec!["a".into(), "a".into(), "a".into()]).unwrap();
        let (labeling, score) = model.viterbi_decode(&s);
        let got: Vec<&str> = labeling.labels().collect();
        assert_eq!(got, ["X", "X", "X"]);
        // decoded score equals the labeling's own log-probability
        let lp = model.sequence_log_prob(&s, &labeling).unwrap();
        assert!((score - lp).abs() < 1e-12);
    }

    #[test]
    fn single_token_log_prob_unrolls() {
        let model = HmmModel::train(&one_sentence_corpus(), Task::Entity, DEFAULT_ALPHA, 0).unwrap();
        let s = Sentence::new("t", vec!["a".into()]).unwrap();
        let x = model.alphabet().index_of("X").unwrap();
        let labeling = Labeling::new(model.alphabet().clone(), &["X"]).unwrap();
        let lp = model.sequence_log_prob(&s, &labeling).unwrap();
        let expect = model.start_prob(x).ln()
            + model.emission_prob(x, "a").ln()
            + model.stop_prob(x).ln();
        assert!((lp - expect).abs() < 1e-12);
    }

    #[test]
    fn unknown_words_map_to_unknown_token() {
        let model = HmmModel::train(&one_sentence_corpus(), Task::Entity, DEFAULT_ALPHA, 0).unwrap();
        let x = model.alphabet().index_of("X").unwrap();
        assert_eq!(
            model.emission_prob(x, "never-seen").to_bits(),
            model.emission_prob(x, UNKNOWN_TOKEN).to_bits()
        );
    }

    #[test]
    fn duplicating_a_sentence_raises_its_probability() {
        let alphabet = xy_alphabet();
        let s1 = Sentence::new("0", vec!["a".into(), "b".into()]).unwrap();
        let y1 = Labeling::new(alphabet.clone(), &["X", "Y"]).unwrap();
        let s2 = Sentence::new("1", vec!["b".into(), "a".into()]).unwrap();
        let y2 = Labeling::new(alphabet.clone(), &["Y", "X"]).unwrap();
        let base = vec![
            Example::new(s1.clone(), None, Some(y1.clone())).unwrap(),
            Example::new(s2.clone(), None, Some(y2.clone())).unwrap(),
        ];
        let mut doubled = base.clone();
        doubled.push(Example::new(s2.clone(), None, Some(y2.clone())).unwrap());

        let m1 = HmmModel::train(
            &Corpus::new(base, CorpusRole::Labeled2).unwrap(),
            Task::Entity,
            DEFAULT_ALPHA,
            0,
        )
        .unwrap();
        let m2 = HmmModel::train(
            &Corpus::new(doubled, CorpusRole::Labeled2).unwrap(),
            Task::Entity,
            DEFAULT_ALPHA,
            0,
        )
        .unwrap();
        let decoded = m1.decode(&s2);
        let before = m1.sequence_log_prob(&s2, &decoded).unwrap();
        // score the same labeling under the retrained model
        let relabeled = Labeling::new(m2.alphabet().clone(), &decoded.labels().collect::<Vec<_>>())
            .unwrap();
        let after = m2.sequence_log_prob(&s2, &relabeled).unwrap();
        assert!(after >= before - 1e-12, "before={before} after={after}");
    }

    #[test]
    fn bio_decode_is_wellformed() {
        let alphabet = LabelAlphabet::default_ner();
        let mut examples = Vec::new();
        let rows: Vec<(Vec<&str>, Vec<&str>)> = vec![
            (vec!["john", "smith", "ran"], vec!["B-PER", "I-PER", "O"]),
            (vec!["acme", "hired", "john"], vec!["B-ORG", "O", "B-PER"]),
        ];
        for (i, (toks, labs)) in rows.iter().enumerate() {
            let s = Sentence::new(
                format!("{i}"),
                toks.iter().map(|t| t.to_string()).collect(),
            )
            .unwrap();
            let y = Labeling::new(alphabet.clone(), labs).unwrap();
            examples.push(Example::new(s, None, Some(y)).unwrap());
        }
        let corpus = Corpus::new(examples, CorpusRole::Labeled2).unwrap();
        let model = HmmModel::train(&corpus, Task::Entity, DEFAULT_ALPHA, 0).unwrap();
        // decoding arbitrary sentences never produces orphan I-X
        let s = Sentence::new("t", vec!["smith".into(), "smith".into(), "xyz".into()]).unwrap();
        let _ = model.decode(&s); // Labeling construction panics if ill-formed
    }

    #[test]
    fn confidence_bounds() {
        let model = HmmModel::train(&one_sentence_corpus(), Task::Entity, DEFAULT_ALPHA, 0).unwrap();
        let s = Sentence::new("t", vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let c = model.confidence(&s);
        assert!((0.0..1.0).contains(&c), "confidence {c}");
        // deterministic
        assert_eq!(c.to_bits(), model.confidence(&s).to_bits());
    }

    #[test]
    fn single_label_alphabet_needs_two_labels_anyway() {
        // alphabets require >= 2 labels, so the degenerate single-path case
        // is exercised through a forced-path model instead; the ceiling is
        // still reachable via identical scores.
        let alphabet = xy_alphabet();
        let s = Sentence::new("0", vec!["a".into()]).unwrap();
        let y = Labeling::new(alphabet, &["X"]).unwrap();
        let ex = Example::new(s, None, Some(y)).unwrap();
        let corpus = Corpus::new(vec![ex], CorpusRole::Labeled2).unwrap();
        let model = HmmModel::train(&corpus, Task::Entity, DEFAULT_ALPHA, 0).unwrap();
        let s = Sentence::new("t", vec!["a".into()]).unwrap();
        let c = model.confidence(&s);
        assert!((0.0..1.0).contains(&c));
    }

    #[test]
    fn serialization_round_trips_exactly() {
        let model = HmmModel::train(&one_sentence_corpus(), Task::Entity, DEFAULT_ALPHA, 0).unwrap();
        let text = model.to_text();
        let back = HmmModel::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        let s = Sentence::new("t", vec!["a".into(), "q".into()]).unwrap();
        let (l1, s1) = model.viterbi_decode(&s);
        let (l2, s2) = back.viterbi_decode(&s);
        assert_eq!(s1.to_bits(), s2.to_bits());
        assert_eq!(l1.indices(), l2.indices());
    }

    #[test]
    fn trained_rows_are_stochastic() {
        let model = HmmModel::train(&one_sentence_corpus(), Task::Entity, DEFAULT_ALPHA, 1).unwrap();
        let k = model.alphabet().len();
        let sum: f64 = (0..k).map(|y| model.start_prob(y)).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        for from in 0..k {
            let sum: f64 = (0..k).map(|to| model.transition_prob(from, to)).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            let sum: f64 = model.vocab().iter().map(|w| model.emission_prob(from, w)).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            let p = model.stop_prob(from);
            assert!(p > 0.0 && p < 1.0);
        }
    }
}
