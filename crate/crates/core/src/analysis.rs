//! Empirical estimators and brute-force verifiers for the framework's
//! definitions: discrimination, weak usefulness, uncorrelation, and the
//! error-bound inequality behind one-sided learning.
//!
//! On the weak-usefulness conditions: the operational form checked here is
//! (1) the hypothesis puts probability at least epsilon on every output,
//! and (2) no off-diagonal conditional concentrates beyond its prior,
//! `P[f=y | h=y'] <= P[f=y] + epsilon` for `y != y'`. Together with
//! `epsilon <= min_y P[f=y]` these premises provably imply the verified
//! bound (each conditional term is at most `(1 + eps/p_y) <= 2`, so the
//! error mass is at most `2 * sum_{k in A} c_k (|Y|-1)`), which is what
//! makes the bound checker a meaningful test rather than a coin flip.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::constraints::{for_each_wellformed, ConstraintFunction};
use crate::corpus::{Corpus, Labeling};
use crate::error::{Error, Result};
use crate::tagger::{Tagger, Task};

/// `2 |V| (|Y| - 1)`: the discrimination threshold under per-vertex
/// (Hamming) loss for structures with `mean_len` vertices.
pub fn hamming_threshold(mean_len: f64, labels_per_vertex: usize) -> f64 {
    assert!(labels_per_vertex >= 2, "need at least two labels per vertex");
    assert!(mean_len >= 1.0, "need at least one vertex");
    2.0 * mean_len * (labels_per_vertex as f64 - 1.0)
}

/// Discrimination of a constraint for an initial predictor, with the
/// thresholds it should be compared against.
#[derive(Debug, Clone)]
pub struct DiscriminationReport {
    pub constraint_name: String,
    pub compatible_count: usize,
    pub pool_size: usize,
    /// `pool_size / compatible_count`; `+inf` when nothing is compatible.
    pub discrimination: f64,
    pub infinite: bool,
    pub mean_len: f64,
    pub labels_per_vertex: usize,
    /// `2 (|Y|^V - 1)`, the whole-structure 0/1-loss threshold.
    pub threshold_zero_one: f64,
    /// `2 |V| (|Y| - 1)`, the Hamming-loss threshold.
    pub threshold_hamming: f64,
    /// `4 (|Y|^V - 1)^2`, the two-sided 0/1-loss threshold.
    pub threshold_zero_one_two_sided: f64,
    /// `4 |V|^2 (|Y| - 1)^2`, the two-sided Hamming threshold.
    pub threshold_hamming_two_sided: f64,
    /// (sentence length, pool count, compatible count), ascending length.
    pub per_length: Vec<(usize, usize, usize)>,
}

impl DiscriminationReport {
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:.4}\t{:.6e}\t{:.6}",
            self.constraint_name,
            self.compatible_count,
            self.pool_size,
            if self.infinite { "inf".to_string() } else { format!("{:.4}", self.discrimination) },
            self.mean_len,
            self.threshold_zero_one,
            self.threshold_hamming,
        )
    }
}

impl std::fmt::Display for DiscriminationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "constraint {}: {} of {} pool decodes compatible, discrimination {}",
            self.constraint_name,
            self.compatible_count,
            self.pool_size,
            if self.infinite { "inf".to_string() } else { format!("{:.2}", self.discrimination) },
        )?;
        writeln!(
            f,
            "  thresholds: 0/1 {:.3e}, hamming {:.1} (two-sided {:.3e} / {:.1})",
            self.threshold_zero_one,
            self.threshold_hamming,
            self.threshold_zero_one_two_sided,
            self.threshold_hamming_two_sided
        )?;
        for (len, pool, compat) in &self.per_length {
            writeln!(f, "  len {len}: {compat}/{pool} compatible")?;
        }
        Ok(())
    }
}

/// Decodes every pool sentence with `h0` and measures how often the decode
/// is compatible with the pool's gold syntactic labels.
pub fn discrimination(
    chi: &ConstraintFunction,
    pool: &Corpus,
    h0: &dyn Tagger,
) -> Result<DiscriminationReport> {
    if pool.is_empty() {
        return Err(Error::data("empty pool"));
    }
    let mut compatible = 0usize;
    let mut per_length: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for ex in pool.iter() {
        let y1 = ex.y1().ok_or_else(|| {
            Error::data(format!("example {}: pool needs y1", ex.sentence().id()))
        })?;
        let decoded = h0.decode(ex.sentence());
        let ok = chi.check(y1, &decoded)?;
        let slot = per_length.entry(ex.sentence().len()).or_insert((0, 0));
        slot.0 += 1;
        if ok {
            compatible += 1;
            slot.1 += 1;
        }
    }
    let pool_size = pool.len();
    let infinite = compatible == 0;
    let discrimination = if infinite {
        f64::INFINITY
    } else {
        pool_size as f64 / compatible as f64
    };
    let mean_len = pool.mean_len();
    let k = h0.alphabet().len() as f64;
    let whole = k.powf(mean_len) - 1.0;
    Ok(DiscriminationReport {
        constraint_name: chi.name().to_string(),
        compatible_count: compatible,
        pool_size,
        discrimination,
        infinite,
        mean_len,
        labels_per_vertex: h0.alphabet().len(),
        threshold_zero_one: 2.0 * whole,
        threshold_hamming: hamming_threshold(mean_len.max(1.0), h0.alphabet().len()),
        threshold_zero_one_two_sided: 4.0 * whole * whole,
        threshold_hamming_two_sided: 4.0 * mean_len * mean_len * (k - 1.0) * (k - 1.0),
        per_length: per_length
            .into_iter()
            .map(|(len, (pool, compat))| (len, pool, compat))
            .collect(),
    })
}

/// Event space for the weak-usefulness check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UsefulnessMode {
    /// Per-token labels under the Hamming decomposition.
    PerToken,
    /// Whole label sequences; requires uniform sentence length and an
    /// enumerable output space.
    WholeSequence,
}

#[derive(Debug, Clone)]
pub struct LabelUsefulness {
    pub label: String,
    pub h_freq: f64,
    pub f_freq: f64,
    /// Worst off-diagonal conditional `P[f=label | h=y']` over `y'`.
    pub worst_conditional: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct UsefulnessReport {
    pub mode: UsefulnessMode,
    pub epsilon: f64,
    /// Every output carries hypothesis mass at least epsilon.
    pub cond1_pass: bool,
    /// Smallest `P[h=y] - epsilon` over the output space.
    pub cond1_margin: f64,
    /// No off-diagonal conditional exceeds prior + epsilon.
    pub cond2_pass: bool,
    /// Smallest `P[f=y] + epsilon - P[f=y | h=y']` over checked pairs;
    /// `None` when every pair is vacuous (empty conditioning events).
    pub cond2_margin: Option<f64>,
    pub per_label: Vec<LabelUsefulness>,
    pub samples: usize,
}

impl UsefulnessReport {
    pub fn weakly_useful(&self) -> bool {
        self.cond1_pass && self.cond2_pass
    }
}

impl std::fmt::Display for UsefulnessReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "weak usefulness at eps={}: cond1 {} (margin {:.4}), cond2 {} ({})",
            self.epsilon,
            if self.cond1_pass { "pass" } else { "fail" },
            self.cond1_margin,
            if self.cond2_pass { "pass" } else { "fail" },
            match self.cond2_margin {
                Some(m) => format!("margin {m:.4}"),
                None => "vacuous".to_string(),
            }
        )?;
        for l in &self.per_label {
            writeln!(
                f,
                "  {}: h-freq {:.4}, f-freq {:.4}, worst conditional {}",
                l.label,
                l.h_freq,
                l.f_freq,
                l.worst_conditional
                    .map_or("-".to_string(), |c| format!("{c:.4}"))
            )?;
        }
        Ok(())
    }
}

/// Empirically checks the weak-usefulness conditions of `h` against gold
/// labels. See the module docs for the exact conditions.
pub fn check_weakly_useful(
    h: &dyn Tagger,
    reference: &Corpus,
    task: Task,
    epsilon: f64,
    mode: UsefulnessMode,
) -> Result<UsefulnessReport> {
    if reference.is_empty() {
        return Err(Error::data("empty reference corpus"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config("epsilon must lie in (0,1)"));
    }

    // joint[(h event, f event)] counts, plus the full event space
    let mut joint: HashMap<(String, String), usize> = HashMap::new();
    let mut samples = 0usize;
    let mut space: Vec<String> = Vec::new();
    match mode {
        UsefulnessMode::PerToken => {
            space = h.alphabet().labels().to_vec();
            for ex in reference.iter() {
                let gold = ex.labeling(task).ok_or_else(|| {
                    Error::data(format!("example {}: missing gold labels", ex.sentence().id()))
                })?;
                let decoded = h.decode(ex.sentence());
                for t in 0..gold.len() {
                    samples += 1;
                    *joint
                        .entry((decoded.label(t).to_string(), gold.label(t).to_string()))
                        .or_insert(0) += 1;
                }
            }
        }
        UsefulnessMode::WholeSequence => {
            let n = reference.get(0).sentence().len();
            for ex in reference.iter() {
                if ex.sentence().len() != n {
                    return Err(Error::data(
                        "whole-sequence mode requires uniform sentence length",
                    ));
                }
            }
            for_each_wellformed(n, h.alphabet(), |indices| {
                let key: Vec<&str> = indices.iter().map(|&i| h.alphabet().label(i)).collect();
                space.push(key.join(" "));
                Ok(())
            })?;
            for ex in reference.iter() {
                let gold = ex.labeling(task).ok_or_else(|| {
                    Error::data(format!("example {}: missing gold labels", ex.sentence().id()))
                })?;
                let decoded = h.decode(ex.sentence());
                samples += 1;
                let hk = decoded.labels().collect::<Vec<_>>().join(" ");
                let fk = gold.labels().collect::<Vec<_>>().join(" ");
                *joint.entry((hk, fk)).or_insert(0) += 1;
            }
        }
    }

    let total = samples as f64;
    let mut h_freq: HashMap<&str, f64> = HashMap::new();
    let mut f_freq: HashMap<&str, f64> = HashMap::new();
    for ((hy, fy), &c) in &joint {
        *h_freq.entry(hy.as_str()).or_insert(0.0) += c as f64 / total;
        *f_freq.entry(fy.as_str()).or_insert(0.0) += c as f64 / total;
    }

    let mut cond1_margin = f64::INFINITY;
    for y in &space {
        let p = h_freq.get(y.as_str()).copied().unwrap_or(0.0);
        cond1_margin = cond1_margin.min(p - epsilon);
    }

    let mut cond2_margin: Option<f64> = None;
    let mut worst: HashMap<&str, f64> = HashMap::new();
    for y_prime in &space {
        let hp = h_freq.get(y_prime.as_str()).copied().unwrap_or(0.0);
        if hp == 0.0 {
            continue; // vacuous: h never produces this output
        }
        for y in &space {
            if y == y_prime {
                continue;
            }
            let j = joint
                .get(&(y_prime.clone(), y.clone()))
                .copied()
                .unwrap_or(0) as f64
                / total;
            let conditional = j / hp;
            let prior = f_freq.get(y.as_str()).copied().unwrap_or(0.0);
            let margin = prior + epsilon - conditional;
            cond2_margin = Some(cond2_margin.map_or(margin, |m: f64| m.min(margin)));
            let w = worst.entry(y.as_str()).or_insert(0.0);
            *w = w.max(conditional);
        }
    }

    let per_label = space
        .iter()
        .map(|y| LabelUsefulness {
            label: y.clone(),
            h_freq: h_freq.get(y.as_str()).copied().unwrap_or(0.0),
            f_freq: f_freq.get(y.as_str()).copied().unwrap_or(0.0),
            worst_conditional: worst.get(y.as_str()).copied(),
        })
        .collect();

    Ok(UsefulnessReport {
        mode,
        epsilon,
        cond1_pass: cond1_margin >= 0.0,
        cond1_margin,
        cond2_pass: cond2_margin.map_or(true, |m| m >= 0.0),
        cond2_margin,
        per_label,
        samples,
    })
}

/// Corpus-level surrogate for uncorrelation: for deterministic decoders the
/// per-instance conditional independence holds degenerately, so this
/// measures association between the two decoders' per-token outputs across
/// the pool instead, as `max |P(a,b) - P(a)P(b)|`.
#[derive(Debug, Clone)]
pub struct UncorrelationReport {
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passes: bool,
    /// Set when the pool is too small to support the estimate.
    pub underpowered: bool,
    pub sentences: usize,
    pub tokens: usize,
}

impl std::fmt::Display for UncorrelationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "max |P(a,b) - P(a)P(b)| = {:.4} over {} tokens ({} sentences): {}{}",
            self.max_deviation,
            self.tokens,
            self.sentences,
            if self.passes { "pass" } else { "fail" },
            if self.underpowered { " [underpowered]" } else { "" }
        )
    }
}

pub fn check_uncorrelated(
    h1: &dyn Tagger,
    h2: &dyn Tagger,
    pool: &Corpus,
    tolerance: f64,
) -> Result<UncorrelationReport> {
    if pool.is_empty() {
        return Err(Error::data("empty pool"));
    }
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut m1: HashMap<usize, f64> = HashMap::new();
    let mut m2: HashMap<usize, f64> = HashMap::new();
    let mut tokens = 0usize;
    for ex in pool.iter() {
        let a = h1.decode(ex.sentence());
        let b = h2.decode(ex.sentence());
        for t in 0..ex.sentence().len() {
            tokens += 1;
            *joint.entry((a.index(t), b.index(t))).or_insert(0.0) += 1.0;
            *m1.entry(a.index(t)).or_insert(0.0) += 1.0;
            *m2.entry(b.index(t)).or_insert(0.0) += 1.0;
        }
    }
    let total = tokens as f64;
    let mut max_deviation = 0.0f64;
    for a in m1.keys() {
        for b in m2.keys() {
            let j = joint.get(&(*a, *b)).copied().unwrap_or(0.0) / total;
            let p = (m1[a] / total) * (m2[b] / total);
            max_deviation = max_deviation.max((j - p).abs());
        }
    }
    Ok(UncorrelationReport {
        max_deviation,
        tolerance,
        passes: max_deviation <= tolerance,
        underpowered: pool.len() < 2 || tokens < 30,
        sentences: pool.len(),
        tokens,
    })
}

/// A finite toy instance for exact bound verification: a distribution over
/// support points, deterministic target and hypothesis outputs per point,
/// and the compatible output set.
#[derive(Debug, Clone)]
pub struct BoundInstance {
    pub labels: Vec<String>,
    /// (point name, probability, target output index, hypothesis output index)
    pub points: Vec<(String, f64, usize, usize)>,
    /// Indices of the compatible output set.
    pub compatible: Vec<usize>,
    pub epsilon: f64,
}

impl BoundInstance {
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() < 2 {
            return Err(Error::data("need at least two outputs"));
        }
        if self.labels.len() > 64 {
            return Err(Error::GuardExceeded(
                "output space too large to enumerate".into(),
            ));
        }
        if self.points.is_empty() {
            return Err(Error::data("no support points"));
        }
        let mass: f64 = self.points.iter().map(|(_, p, _, _)| p).sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::data(format!("point probabilities sum to {mass}")));
        }
        for (name, p, f, h) in &self.points {
            if *p < 0.0 {
                return Err(Error::data(format!("point {name}: negative probability")));
            }
            if *f >= self.labels.len() || *h >= self.labels.len() {
                return Err(Error::data(format!("point {name}: label out of range")));
            }
        }
        if self.compatible.is_empty() {
            return Err(Error::data("compatible set is empty"));
        }
        for &k in &self.compatible {
            if k >= self.labels.len() {
                return Err(Error::data("compatible set index out of range"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::data("epsilon must lie in (0,1)"));
        }
        Ok(())
    }

    /// Parses the documented text format:
    ///
    /// ```text
    /// labels a b c
    /// epsilon 0.05
    /// compatible a b
    /// point x1 0.25 a b
    /// point x2 0.75 b b
    /// ```
    pub fn from_text(text: &str) -> Result<BoundInstance> {
        let mut labels: Vec<String> = Vec::new();
        let mut epsilon = None;
        let mut compatible_names: Vec<String> = Vec::new();
        let mut raw_points: Vec<(usize, String, f64, String, String)> = Vec::new();
        for (lineno0, line) in text.lines().enumerate() {
            let line = line.trim();
            let lineno = lineno0 + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "labels" => labels = fields[1..].iter().map(|s| s.to_string()).collect(),
                "epsilon" => {
                    epsilon = Some(
                        fields
                            .get(1)
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| Error::parse(lineno, "bad epsilon"))?,
                    )
                }
                "compatible" => {
                    compatible_names = fields[1..].iter().map(|s| s.to_string()).collect()
                }
                "point" => {
                    if fields.len() != 5 {
                        return Err(Error::parse(lineno, "point needs: name prob f h"));
                    }
                    let prob: f64 = fields[2]
                        .parse()
                        .map_err(|_| Error::parse(lineno, "bad probability"))?;
                    raw_points.push((
                        lineno,
                        fields[1].to_string(),
                        prob,
                        fields[3].to_string(),
                        fields[4].to_string(),
                    ));
                }
                other => return Err(Error::parse(lineno, format!("unknown directive {other:?}"))),
            }
        }
        let index = |lineno: usize, name: &str| -> Result<usize> {
            labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| Error::parse(lineno, format!("unknown label {name:?}")))
        };
        let mut points = Vec::with_capacity(raw_points.len());
        for (lineno, name, prob, f, h) in raw_points {
            points.push((name, prob, index(lineno, &f)?, index(lineno, &h)?));
        }
        let compatible = compatible_names
            .iter()
            .map(|n| index(0, n))
            .collect::<Result<Vec<_>>>()?;
        let instance = BoundInstance {
            labels,
            points,
            compatible,
            epsilon: epsilon.ok_or_else(|| Error::data("missing epsilon"))?,
        };
        instance.validate()?;
        Ok(instance)
    }

    /// Draws random instances until one satisfies the premises. Returns
    /// `None` when `max_attempts` rejections pass without a hit.
    pub fn random_satisfying(seed: u64, max_attempts: usize) -> Option<BoundInstance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = Gamma::new(6.0, 1.0).expect("fixed shape");
        for _ in 0..max_attempts {
            let m = rng.random_range(2..=4usize);
            let mut cells: Vec<f64> = (0..m * m).map(|_| gamma.sample(&mut rng)).collect();
            let total: f64 = cells.iter().sum();
            for c in cells.iter_mut() {
                *c /= total;
            }
            let labels: Vec<String> = (0..m).map(|i| format!("y{i}")).collect();
            let mut points = Vec::with_capacity(m * m);
            for h in 0..m {
                for f in 0..m {
                    points.push((format!("x{h}{f}"), cells[h * m + f], f, h));
                }
            }
            let n_compat = rng.random_range(1..=m);
            let mut outputs: Vec<usize> = (0..m).collect();
            outputs.shuffle(&mut rng);
            let mut compatible: Vec<usize> = outputs[..n_compat].to_vec();
            compatible.sort_unstable();
            let instance = BoundInstance {
                labels,
                points,
                compatible,
                epsilon: 0.01,
            };
            if let Ok(report) = verify_theorem1_bound(&instance) {
                if report.premises_met {
                    return Some(instance);
                }
            }
        }
        None
    }
}

use rand::seq::SliceRandom;

/// Both sides of the error-bound inequality, computed exactly.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub premises_met: bool,
    pub premise_note: String,
    /// `P[h(x) in A \ {l} | f(x) = l]` per output `l`; `None` when
    /// `P[f = l] = 0`.
    pub lefts: Vec<(String, Option<f64>)>,
    /// `2 * sum_{k in A} c_k * (|Y| - 1)`.
    pub right: f64,
    /// Whether every computed left side is at most the right side.
    pub holds: bool,
}

impl std::fmt::Display for BoundReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "premises {}: {}",
            if self.premises_met { "met" } else { "unmet" },
            self.premise_note
        )?;
        for (label, left) in &self.lefts {
            match left {
                Some(v) => writeln!(f, "  left[{label}] = {v:.6}")?,
                None => writeln!(f, "  left[{label}] undefined (zero prior)")?,
            }
        }
        writeln!(f, "  right = {:.6}", self.right)?;
        writeln!(f, "  bound {}", if self.holds { "holds" } else { "VIOLATED" })
    }
}

/// Computes `P[h in A\{l} | f=l] <= 2 sum_{k in A} c_k (|Y|-1)` for every
/// output `l` by exact enumeration over the instance's support.
pub fn verify_theorem1_bound(instance: &BoundInstance) -> Result<BoundReport> {
    instance.validate()?;
    let m = instance.labels.len();
    let mut c = vec![0.0f64; m]; // P[h = k]
    let mut p = vec![0.0f64; m]; // P[f = l]
    let mut joint = vec![vec![0.0f64; m]; m]; // P[h = k, f = l]
    for (_, prob, f, h) in &instance.points {
        c[*h] += prob;
        p[*f] += prob;
        joint[*h][*f] += prob;
    }

    // premises: coverage, bounded off-diagonal conditionals, small epsilon
    let eps = instance.epsilon;
    let mut notes: Vec<String> = Vec::new();
    if let Some(k) = (0..m).find(|&k| c[k] < eps) {
        notes.push(format!(
            "P[h={}] = {:.4} < eps",
            instance.labels[k], c[k]
        ));
    }
    'outer: for k in 0..m {
        if c[k] == 0.0 {
            continue;
        }
        for l in 0..m {
            if l == k {
                continue;
            }
            let conditional = joint[k][l] / c[k];
            if conditional > p[l] + eps + 1e-12 {
                notes.push(format!(
                    "P[f={} | h={}] = {:.4} exceeds prior {:.4} + eps",
                    instance.labels[l], instance.labels[k], conditional, p[l]
                ));
                break 'outer;
            }
        }
    }
    if let Some(l) = (0..m).find(|&l| p[l] < eps) {
        notes.push(format!(
            "eps exceeds prior P[f={}] = {:.4}",
            instance.labels[l], p[l]
        ));
    }
    let premises_met = notes.is_empty();

    let in_a = |k: usize| instance.compatible.contains(&k);
    let right: f64 =
        2.0 * (m as f64 - 1.0) * (0..m).filter(|&k| in_a(k)).map(|k| c[k]).sum::<f64>();
    let mut lefts = Vec::with_capacity(m);
    let mut holds = true;
    for l in 0..m {
        if p[l] == 0.0 {
            lefts.push((instance.labels[l].clone(), None));
            continue;
        }
        let mass: f64 = (0..m)
            .filter(|&k| k != l && in_a(k))
            .map(|k| joint[k][l])
            .sum();
        let left = mass / p[l];
        if left > right + 1e-12 {
            holds = false;
        }
        lefts.push((instance.labels[l].clone(), Some(left)));
    }

    Ok(BoundReport {
        premises_met,
        premise_note: if premises_met {
            "all conditions satisfied".to_string()
        } else {
            notes.join("; ")
        },
        lefts,
        right,
        holds,
    })
}

/// A tagger that labels each token by hashing it with a salt; used to build
/// statistically independent decoders for uncorrelation checks and tests.
pub struct HashTagger {
    alphabet: Arc<crate::alphabet::LabelAlphabet>,
    salt: u64,
}

impl HashTagger {
    pub fn new(alphabet: Arc<crate::alphabet::LabelAlphabet>, salt: u64) -> HashTagger {
        HashTagger { alphabet, salt }
    }
}

impl Tagger for HashTagger {
    fn alphabet(&self) -> &Arc<crate::alphabet::LabelAlphabet> {
        &self.alphabet
    }

    fn decode(&self, sentence: &crate::corpus::Sentence) -> Labeling {
        use std::hash::{Hash, Hasher};
        let indices: Vec<usize> = sentence
            .tokens()
            .iter()
            .map(|tok| {
                let mut hasher = std::collections::hash_map::DefaultHasher::new();
                self.salt.hash(&mut hasher);
                tok.hash(&mut hasher);
                // avoid BIO-invalid outputs by only emitting O/B-style labels
                let mut idx = (hasher.finish() % self.alphabet.len() as u64) as usize;
                if self.alphabet.bio_scheme() {
                    while matches!(
                        crate::alphabet::bio_parts(self.alphabet.label(idx)),
                        Some(('I', _))
                    ) {
                        idx = (idx + 1) % self.alphabet.len();
                    }
                }
                idx
            })
            .collect();
        Labeling::from_indices(self.alphabet.clone(), indices)
            .expect("hash tagger avoids inside tags")
    }

    fn confidence(&self, _sentence: &crate::corpus::Sentence) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::LabelAlphabet;
    use crate::corpus::{CorpusRole, Example, Sentence};
    use crate::synth::{generate, SynthConfig};

    struct OracleTagger {
        alphabet: Arc<LabelAlphabet>,
        map: HashMap<String, Labeling>,
    }

    impl Tagger for OracleTagger {
        fn alphabet(&self) -> &Arc<LabelAlphabet> {
            &self.alphabet
        }
        fn decode(&self, sentence: &Sentence) -> Labeling {
            self.map[sentence.id()].clone()
        }
        fn confidence(&self, _s: &Sentence) -> f64 {
            1.0
        }
    }

    fn oracle_for(corpus: &Corpus, task: Task) -> OracleTagger {
        let map: HashMap<String, Labeling> = corpus
            .iter()
            .map(|ex| {
                (
                    ex.sentence().id().to_string(),
                    ex.labeling(task).unwrap().clone(),
                )
            })
            .collect();
        OracleTagger {
            alphabet: map.values().next().unwrap().alphabet().clone(),
            map,
        }
    }

    #[test]
    fn hamming_threshold_examples() {
        assert_eq!(hamming_threshold(26.0, 9), 416.0);
        assert_eq!(hamming_threshold(1.0, 2), 2.0);
        assert_eq!(hamming_threshold(10.0, 3), 40.0);
    }

    #[test]
    fn constant_constraint_has_discrimination_one() {
        let corpus = generate(&SynthConfig::default(), 60).unwrap();
        let h0 = oracle_for(&corpus, Task::Entity);
        let chi = ConstraintFunction::constant();
        let report = discrimination(&chi, &corpus, &h0).unwrap();
        assert_eq!(report.discrimination, 1.0);
        assert_eq!(report.compatible_count, report.pool_size);
    }

    #[test]
    fn true_labels_under_correct_constraint_are_fully_compatible() {
        let corpus = generate(&SynthConfig::default(), 60).unwrap();
        let h0 = oracle_for(&corpus, Task::Entity);
        let chi = ConstraintFunction::full();
        let report = discrimination(&chi, &corpus, &h0).unwrap();
        assert_eq!(report.discrimination, 1.0);
    }

    #[test]
    fn perfect_predictor_is_weakly_useful() {
        let corpus = generate(&SynthConfig::default(), 120).unwrap();
        let h = oracle_for(&corpus, Task::Entity);
        let report =
            check_weakly_useful(&h, &corpus, Task::Entity, 0.005, UsefulnessMode::PerToken)
                .unwrap();
        // h = f: every off-diagonal joint cell is empty, so condition 2
        // holds with zero conditionals; condition 1 needs label coverage
        assert!(report.cond2_pass);
        for l in &report.per_label {
            assert_eq!(l.h_freq, l.f_freq);
        }
    }

    #[test]
    fn constant_predictor_fails_condition_one() {
        let corpus = generate(&SynthConfig::default(), 40).unwrap();
        let alphabet = corpus.get(0).y2().unwrap().alphabet().clone();
        struct AlwaysO(Arc<LabelAlphabet>);
        impl Tagger for AlwaysO {
            fn alphabet(&self) -> &Arc<LabelAlphabet> {
                &self.0
            }
            fn decode(&self, s: &Sentence) -> Labeling {
                Labeling::from_indices(self.0.clone(), vec![0; s.len()]).unwrap()
            }
            fn confidence(&self, _s: &Sentence) -> f64 {
                1.0
            }
        }
        let h = AlwaysO(alphabet);
        let report =
            check_weakly_useful(&h, &corpus, Task::Entity, 0.01, UsefulnessMode::PerToken)
                .unwrap();
        assert!(!report.cond1_pass);
    }

    #[test]
    fn usefulness_report_is_internally_consistent() {
        // recompute frequencies with an independent counting pass
        let corpus = generate(&SynthConfig::default(), 80).unwrap();
        let h = HashTagger::new(corpus.get(0).y2().unwrap().alphabet().clone(), 99);
        let report =
            check_weakly_useful(&h, &corpus, Task::Entity, 0.01, UsefulnessMode::PerToken)
                .unwrap();
        let mut h_counts: HashMap<String, usize> = HashMap::new();
        let mut f_counts: HashMap<String, usize> = HashMap::new();
        let mut total = 0usize;
        for ex in corpus.iter() {
            let d = h.decode(ex.sentence());
            let g = ex.y2().unwrap();
            for t in 0..g.len() {
                total += 1;
                *h_counts.entry(d.label(t).to_string()).or_insert(0) += 1;
                *f_counts.entry(g.label(t).to_string()).or_insert(0) += 1;
            }
        }
        assert_eq!(total, report.samples);
        for l in &report.per_label {
            let hf = h_counts.get(&l.label).copied().unwrap_or(0) as f64 / total as f64;
            let ff = f_counts.get(&l.label).copied().unwrap_or(0) as f64 / total as f64;
            assert!((hf - l.h_freq).abs() < 1e-12);
            assert!((ff - l.f_freq).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_decoders_pass_uncorrelation() {
        let corpus = generate(&SynthConfig::default(), 400).unwrap();
        let alphabet = corpus.get(0).y2().unwrap().alphabet().clone();
        let h1 = HashTagger::new(alphabet.clone(), 1);
        let h2 = HashTagger::new(alphabet, 2);
        let report = check_uncorrelated(&h1, &h2, &corpus, 0.05).unwrap();
        assert!(report.passes, "deviation {}", report.max_deviation);
        assert!(!report.underpowered);
    }

    #[test]
    fn identical_decoders_fail_uncorrelation() {
        let corpus = generate(&SynthConfig::default(), 200).unwrap();
        let alphabet = corpus.get(0).y2().unwrap().alphabet().clone();
        let h1 = HashTagger::new(alphabet.clone(), 1);
        let h2 = HashTagger::new(alphabet, 1);
        let report = check_uncorrelated(&h1, &h2, &corpus, 0.05).unwrap();
        assert!(!report.passes, "deviation {}", report.max_deviation);
    }

    #[test]
    fn single_sentence_pool_is_flagged_underpowered() {
        let cfg = SynthConfig::default();
        let corpus = generate(&cfg, 10).unwrap();
        let one = Corpus::new(vec![corpus.get(0).clone()], CorpusRole::Test).unwrap();
        let alphabet = corpus.get(0).y2().unwrap().alphabet().clone();
        let h1 = HashTagger::new(alphabet.clone(), 1);
        let h2 = HashTagger::new(alphabet, 2);
        let report = check_uncorrelated(&h1, &h2, &one, 0.05).unwrap();
        assert!(report.underpowered);
    }

    #[test]
    fn bound_trivial_cases() {
        // A = {l}: the left side is empty for l and bounded elsewhere
        let instance = BoundInstance {
            labels: vec!["a".into(), "b".into()],
            points: vec![
                ("x1".into(), 0.30, 0, 0),
                ("x2".into(), 0.25, 1, 0),
                ("x3".into(), 0.20, 0, 1),
                ("x4".into(), 0.25, 1, 1),
            ],
            compatible: vec![0],
            epsilon: 0.01,
        };
        let report = verify_theorem1_bound(&instance).unwrap();
        assert!(report.holds, "{report}");
        // A = everything: right side is at least 2, the left at most 1
        let instance = BoundInstance {
            compatible: vec![0, 1],
            ..instance
        };
        let report = verify_theorem1_bound(&instance).unwrap();
        assert!(report.right >= 2.0 - 1e-12);
        assert!(report.holds);
    }

    #[test]
    fn random_satisfying_instances_exist_and_respect_bound() {
        let mut found = 0;
        for seed in 0..20u64 {
            if let Some(instance) = BoundInstance::random_satisfying(seed, 200) {
                found += 1;
                let report = verify_theorem1_bound(&instance).unwrap();
                assert!(report.premises_met);
                assert!(report.holds, "seed {seed}: {report}");
            }
        }
        assert!(found >= 15, "only {found}/20 seeds produced instances");
    }

    #[test]
    fn instance_text_round_trip() {
        let text = "\
labels a b c
epsilon 0.02
compatible a c
point x1 0.2 a a
point x2 0.3 b b
point x3 0.25 c c
point x4 0.25 a b
";
        let instance = BoundInstance::from_text(text).unwrap();
        assert_eq!(instance.labels, ["a", "b", "c"]);
        assert_eq!(instance.compatible, [0, 2]);
        assert_eq!(instance.points.len(), 4);
        let report = verify_theorem1_bound(&instance).unwrap();
        assert_eq!(report.lefts.len(), 3);
        assert!(BoundInstance::from_text("labels a\nepsilon 0.1\ncompatible a\npoint x 1.0 a a\n").is_err());
    }

    #[test]
    fn example_with_unmet_premises_reports_it() {
        let instance = BoundInstance {
            labels: vec!["a".into(), "b".into()],
            // h never outputs b, so coverage fails
            points: vec![("x1".into(), 0.5, 0, 0), ("x2".into(), 0.5, 1, 0)],
            compatible: vec![0],
            epsilon: 0.05,
        };
        let report = verify_theorem1_bound(&instance).unwrap();
        assert!(!report.premises_met);
    }
}
