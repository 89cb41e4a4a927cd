//! Span F-score, token accuracy, and McNemar significance testing.

use std::collections::HashSet;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::corpus::{extract_spans, Corpus, Labeling};
use crate::error::{Error, Result};
use crate::tagger::Task;

/// Discordant-pair ceiling below which the exact binomial test is used.
pub const EXACT_TEST_LIMIT: usize = 25;

/// Precision/recall/F1 with the underlying span counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: Option<f64>,
    pub gold_spans: usize,
    pub predicted_spans: usize,
    pub matched_spans: usize,
}

impl MetricReport {
    fn from_counts(gold: usize, predicted: usize, matched: usize) -> MetricReport {
        let (precision, recall) = if gold == 0 && predicted == 0 {
            (1.0, 1.0)
        } else {
            // empty predictions score precision 0, not 1
            let p = if predicted == 0 { 0.0 } else { matched as f64 / predicted as f64 };
            let r = if gold == 0 { 0.0 } else { matched as f64 / gold as f64 };
            (p, r)
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        MetricReport {
            precision,
            recall,
            f1,
            accuracy: None,
            gold_spans: gold,
            predicted_spans: predicted,
            matched_spans: matched,
        }
    }

    pub fn tsv_header() -> &'static str {
        "precision\trecall\tf1\taccuracy\tgold_spans\tpredicted_spans\tmatched_spans"
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}",
            self.precision,
            self.recall,
            self.f1,
            self.accuracy.map_or("-".to_string(), |a| format!("{a:.6}")),
            self.gold_spans,
            self.predicted_spans,
            self.matched_spans
        )
    }
}

impl std::fmt::Display for MetricReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "P={:.4} R={:.4} F1={:.4} (gold {}, predicted {}, matched {})",
            self.precision, self.recall, self.f1, self.gold_spans, self.predicted_spans,
            self.matched_spans
        )?;
        if let Some(a) = self.accuracy {
            write!(f, " acc={a:.4}")?;
        }
        Ok(())
    }
}

/// Micro-averaged exact span+type F1 over aligned labelings.
pub fn span_f1(gold: &[&Labeling], pred: &[&Labeling]) -> Result<MetricReport> {
    if gold.len() != pred.len() {
        return Err(Error::data(format!(
            "corpus sizes differ ({} vs {})",
            gold.len(),
            pred.len()
        )));
    }
    let mut gold_n = 0;
    let mut pred_n = 0;
    let mut matched = 0;
    for (g, p) in gold.iter().zip(pred) {
        if g.len() != p.len() {
            return Err(Error::data("labeling length mismatch"));
        }
        if !g.alphabet().bio_scheme() || !p.alphabet().bio_scheme() {
            return Err(Error::data("span F1 requires BIO alphabets"));
        }
        let g_spans: HashSet<_> = extract_spans(g).into_iter().collect();
        let p_spans: HashSet<_> = extract_spans(p).into_iter().collect();
        gold_n += g_spans.len();
        pred_n += p_spans.len();
        matched += g_spans.intersection(&p_spans).count();
    }
    Ok(MetricReport::from_counts(gold_n, pred_n, matched))
}

/// Span F1 of predictions against a corpus's gold labelings for one task.
/// Composite syntactic labelings are projected onto their chunk layer.
pub fn task_span_f1(gold: &Corpus, pred: &[Labeling], task: Task) -> Result<MetricReport> {
    if gold.len() != pred.len() {
        return Err(Error::data("prediction count does not match corpus"));
    }
    let mut g_col = Vec::with_capacity(gold.len());
    let mut p_col = Vec::with_capacity(gold.len());
    for (ex, p) in gold.iter().zip(pred) {
        let g = ex.labeling(task).ok_or_else(|| {
            Error::data(format!("example {}: missing gold labeling", ex.sentence().id()))
        })?;
        match task {
            Task::Entity => {
                g_col.push(g.clone());
                p_col.push(p.clone());
            }
            Task::Syntactic => {
                g_col.push(g.project_chunk()?);
                p_col.push(p.project_chunk()?);
            }
        }
    }
    let g_refs: Vec<&Labeling> = g_col.iter().collect();
    let p_refs: Vec<&Labeling> = p_col.iter().collect();
    span_f1(&g_refs, &p_refs)
}

/// What counts as a correct token for [`token_accuracy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyMode {
    /// The whole label string must match (for composites: both components).
    Full,
    /// Only the POS component of composite labels must match.
    PosComponent,
}

/// Fraction of matching tokens across aligned labelings.
pub fn token_accuracy(
    gold: &[&Labeling],
    pred: &[&Labeling],
    mode: AccuracyMode,
) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(Error::data("corpus sizes differ"));
    }
    let mut total = 0usize;
    let mut correct = 0usize;
    for (g, p) in gold.iter().zip(pred) {
        if g.len() != p.len() {
            return Err(Error::data("labeling length mismatch"));
        }
        for t in 0..g.len() {
            total += 1;
            let hit = match mode {
                AccuracyMode::Full => g.label(t) == p.label(t),
                AccuracyMode::PosComponent => {
                    let gp = crate::alphabet::composite_split(g.label(t))
                        .ok_or_else(|| Error::data("label is not composite"))?
                        .0;
                    let pp = crate::alphabet::composite_split(p.label(t))
                        .ok_or_else(|| Error::data("label is not composite"))?
                        .0;
                    gp == pp
                }
            };
            if hit {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::data("no tokens to score"));
    }
    Ok(correct as f64 / total as f64)
}

/// Unit of analysis for McNemar's test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McnemarUnit {
    /// Whole-sequence exact match (the default; both tasks emit whole
    /// sequences and the 0/1 loss is over the entire structure).
    Sentence,
    /// Per-token match.
    Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    WinA,
    WinB,
    Tie,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::WinA => "win-a",
            Verdict::WinB => "win-b",
            Verdict::Tie => "tie",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMethod {
    ExactBinomial,
    ChiSquare,
}

#[derive(Debug, Clone)]
pub struct McnemarReport {
    /// Units A got right and B got wrong.
    pub b: usize,
    /// Units A got wrong and B got right.
    pub c: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub verdict: Verdict,
    pub method: TestMethod,
    pub unit: McnemarUnit,
}

impl McnemarReport {
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{:.6}\t{:.6e}\t{}",
            self.b,
            self.c,
            self.statistic,
            self.p_value,
            self.verdict.as_str()
        )
    }
}

/// Paired significance test between two systems on shared gold data.
/// Significance threshold is 95%; non-significant differences are ties.
pub fn mcnemar(
    system_a: &[Labeling],
    system_b: &[Labeling],
    gold: &[&Labeling],
    unit: McnemarUnit,
) -> Result<McnemarReport> {
    if gold.is_empty() {
        return Err(Error::data("empty corpora"));
    }
    if system_a.len() != gold.len() || system_b.len() != gold.len() {
        return Err(Error::data("system outputs do not align with gold"));
    }
    let mut b = 0usize;
    let mut c = 0usize;
    for i in 0..gold.len() {
        let g = gold[i];
        let a = &system_a[i];
        let bb = &system_b[i];
        if a.len() != g.len() || bb.len() != g.len() {
            return Err(Error::data("labeling length mismatch"));
        }
        match unit {
            McnemarUnit::Sentence => {
                let a_ok = (0..g.len()).all(|t| a.label(t) == g.label(t));
                let b_ok = (0..g.len()).all(|t| bb.label(t) == g.label(t));
                match (a_ok, b_ok) {
                    (true, false) => b += 1,
                    (false, true) => c += 1,
                    _ => {}
                }
            }
            McnemarUnit::Token => {
                for t in 0..g.len() {
                    let a_ok = a.label(t) == g.label(t);
                    let b_ok = bb.label(t) == g.label(t);
                    match (a_ok, b_ok) {
                        (true, false) => b += 1,
                        (false, true) => c += 1,
                        _ => {}
                    }
                }
            }
        }
    }

    let n = b + c;
    let (statistic, p_value, method) = if n < EXACT_TEST_LIMIT {
        let p = exact_binomial_two_sided(b.min(c), n);
        (b.min(c) as f64, p, TestMethod::ExactBinomial)
    } else {
        let diff = (b as f64 - c as f64).abs() - 1.0;
        let stat = diff * diff / n as f64;
        let chi = ChiSquared::new(1.0).expect("df 1");
        (stat, 1.0 - chi.cdf(stat), TestMethod::ChiSquare)
    };
    let verdict = if p_value < 0.05 && b != c {
        if b > c {
            Verdict::WinA
        } else {
            Verdict::WinB
        }
    } else {
        Verdict::Tie
    };
    Ok(McnemarReport {
        b,
        c,
        statistic,
        p_value,
        verdict,
        method,
        unit,
    })
}

/// Two-sided exact binomial p-value: doubled lower tail of Binomial(n, 1/2)
/// at `k`, capped at 1. Exact in f64 for n < 25.
fn exact_binomial_two_sided(k: usize, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut tail = 0.0f64;
    for i in 0..=k {
        tail += binomial(n, i);
    }
    let p = 2.0 * tail / 2f64.powi(n as i32);
    p.min(1.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut num = 1.0f64;
    for i in 0..k {
        num = num * (n - i) as f64 / (i + 1) as f64;
    }
    num.round()
}

/// Win/tie/lose tallies across experiment cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WinTieLose {
    pub win: usize,
    pub tie: usize,
    pub lose: usize,
}

impl WinTieLose {
    /// Records a verdict from system A's point of view.
    pub fn record(&mut self, verdict: Verdict) {
        match verdict {
            Verdict::WinA => self.win += 1,
            Verdict::Tie => self.tie += 1,
            Verdict::WinB => self.lose += 1,
        }
    }
}
