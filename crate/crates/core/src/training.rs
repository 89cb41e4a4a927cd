//! Self-training, one-sided and two-sided constraint-filtered training
//! loops.
//!
//! All three loops share the same skeleton: train on the labeled seed data,
//! decode the unlabeled pool, keep the decodes the constraint accepts, add
//! them to the training set, retrain, repeat. Previously added examples are
//! re-decoded every iteration; their labels are replaced with the new
//! model's output and examples whose fresh decode no longer passes the
//! constraint are evicted, so the augmented set satisfies the constraint at
//! every iteration. Self-training is the same loop with the constant
//! constraint.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraints::ConstraintFunction;
use crate::corpus::{Corpus, CorpusRole, Example, Labeling};
use crate::error::{Error, Result};
use crate::eval::task_span_f1;
use crate::tagger::{corpus_items, Learner, Tagger, Task, TrainItem};

/// How augmented examples are weighted during retraining.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightMode {
    /// Scale so the added mass equals the labeled mass.
    Equal,
    /// Fixed weight per added example; `Fraction(1.0)` is plain addition.
    Fraction(f64),
    /// Weight each example by its decode confidence at extraction time.
    ConfidenceScored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Keep only the R most confident compatible examples per iteration.
    pub top_r: Option<usize>,
    /// Two-sided loops: start the working pool at this many examples and
    /// grow it by the same amount per iteration. Defaults to `10 * top_r`
    /// when `top_r` is set.
    pub pool_growth: Option<usize>,
    /// One-sided loops: gate the top-R confidence ranking.
    pub confidence_filter: bool,
    pub unlabeled_weight: WeightMode,
    pub seed: u64,
}

impl TrainConfig {
    pub fn one_sided_default() -> TrainConfig {
        TrainConfig {
            iterations: 3,
            top_r: None,
            pool_growth: None,
            confidence_filter: false,
            unlabeled_weight: WeightMode::Fraction(1.0),
            seed: 0,
        }
    }

    pub fn two_sided_default() -> TrainConfig {
        TrainConfig {
            iterations: 10,
            top_r: Some(50),
            pool_growth: None,
            confidence_filter: false,
            unlabeled_weight: WeightMode::Fraction(1.0),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if let Some(r) = self.top_r {
            if r == 0 {
                return Err(Error::config("top_r must be positive"));
            }
        }
        if let Some(g) = self.pool_growth {
            if g == 0 {
                return Err(Error::config("pool_growth must be positive"));
            }
            if self.top_r.is_none() {
                return Err(Error::config("pool_growth requires top_r"));
            }
        }
        if self.confidence_filter && self.top_r.is_none() {
            return Err(Error::config("confidence_filter requires top_r"));
        }
        if let WeightMode::Fraction(w) = self.unlabeled_weight {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::config("fraction weight must be positive"));
            }
        }
        Ok(())
    }

    /// The working-pool growth per iteration for two-sided loops.
    pub fn effective_pool_growth(&self) -> Option<usize> {
        self.pool_growth.or(self.top_r.map(|r| 10 * r))
    }
}

/// Per-iteration weights for a batch of added examples.
pub fn apply_weighting(
    mode: &WeightMode,
    n_added: usize,
    labeled_mass: f64,
    confidences: &[f64],
) -> Vec<f64> {
    match mode {
        WeightMode::Equal => {
            if n_added == 0 {
                Vec::new()
            } else {
                vec![labeled_mass / n_added as f64; n_added]
            }
        }
        WeightMode::Fraction(w) => vec![*w; n_added],
        WeightMode::ConfidenceScored => confidences.to_vec(),
    }
}

/// One row of a training trace. Iteration 0 describes the seed model.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Unlabeled examples examined this iteration.
    pub pool_size: usize,
    /// Newly added examples.
    pub added: usize,
    /// Previously added examples dropped after re-decoding.
    pub evicted: usize,
    /// Size of the augmented set after this iteration.
    pub total_added: usize,
    /// Entity-task dev metric, when a dev set was given.
    pub dev_metric: Option<f64>,
    /// Syntactic-task dev metric (two-sided loops only).
    pub dev_metric_secondary: Option<f64>,
}

pub fn trace_to_tsv(trace: &[IterationRecord]) -> String {
    let mut out = String::from("iteration\tpool\tadded\tevicted\ttotal\tdev\tdev2\n");
    for r in trace {
        let dev = r.dev_metric.map_or("-".into(), |d| format!("{d:.6}"));
        let dev2 = r.dev_metric_secondary.map_or("-".into(), |d| format!("{d:.6}"));
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.iteration, r.pool_size, r.added, r.evicted, r.total_added, dev, dev2
        ));
    }
    out
}

/// One augmented example in its final state.
#[derive(Debug, Clone)]
pub struct AddedExample {
    /// Index into the unlabeled corpus.
    pub unlab_index: usize,
    pub labeling: Labeling,
    pub confidence: f64,
    pub weight: f64,
}

pub struct HintsOutcome {
    pub model: Box<dyn Tagger>,
    pub trace: Vec<IterationRecord>,
    /// Iteration the returned model comes from (0 = seed model).
    pub best_iteration: usize,
    /// The augmented set after the final iteration.
    pub final_added: Vec<AddedExample>,
}

impl HintsOutcome {
    /// The final augmented examples as a corpus, for export or auditing.
    pub fn augmented_corpus(&self, unlab: &Corpus) -> Result<Corpus> {
        let examples = self
            .final_added
            .iter()
            .map(|a| {
                Example::new(
                    unlab.get(a.unlab_index).sentence().clone(),
                    unlab.get(a.unlab_index).y1().cloned(),
                    Some(a.labeling.clone()),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(examples, CorpusRole::Test)
    }
}

/// One-sided training: augment the entity task's training set with pool
/// sentences whose decode is compatible with the pool's gold syntactic
/// labels.
pub fn one_sided_hints(
    learner: &dyn Learner,
    d: &Corpus,
    d_unlab: &Corpus,
    chi: &ConstraintFunction,
    cfg: &TrainConfig,
    dev: Option<&Corpus>,
) -> Result<HintsOutcome> {
    for ex in d_unlab.iter() {
        if ex.y1().is_none() {
            return Err(Error::data(format!(
                "example {}: one-sided pool must carry y1",
                ex.sentence().id()
            )));
        }
        if ex.y2().is_some() {
            return Err(Error::data(format!(
                "example {}: pool already carries y2 (role violation)",
                ex.sentence().id()
            )));
        }
    }
    one_sided_loop(learner, d, d_unlab, Some(chi), cfg, dev)
}

/// Self-training: the same loop with the constant constraint, i.e. every
/// decode is kept (subject to the optional confidence filter).
pub fn self_train(
    learner: &dyn Learner,
    d: &Corpus,
    unlab: &Corpus,
    cfg: &TrainConfig,
    dev: Option<&Corpus>,
) -> Result<HintsOutcome> {
    for ex in unlab.iter() {
        if ex.y2().is_some() {
            return Err(Error::data(format!(
                "example {}: pool already carries y2 (role violation)",
                ex.sentence().id()
            )));
        }
    }
    one_sided_loop(learner, d, unlab, None, cfg, dev)
}

fn one_sided_loop(
    learner: &dyn Learner,
    d: &Corpus,
    unlab: &Corpus,
    chi: Option<&ConstraintFunction>,
    cfg: &TrainConfig,
    dev: Option<&Corpus>,
) -> Result<HintsOutcome> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::data("labeled corpus is empty"));
    }
    let base = corpus_items(d, Task::Entity)?;
    let labeled_mass = base.len() as f64;
    let need_confidence =
        cfg.confidence_filter || cfg.unlabeled_weight == WeightMode::ConfidenceScored;

    let mut model = learner.train(&base)?;
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let dev0 = dev_metric(model.as_ref(), dev, Task::Entity)?;
    trace.push(IterationRecord {
        iteration: 0,
        pool_size: 0,
        added: 0,
        evicted: 0,
        total_added: 0,
        dev_metric: dev0,
        dev_metric_secondary: None,
    });
    let mut best: Option<(f64, usize)> = dev0.map(|m| (m, 0));
    let mut best_snapshot: Option<BTreeMap<usize, (Labeling, f64)>> = None;

    let mut added_set: BTreeMap<usize, (Labeling, f64)> = BTreeMap::new();
    for iteration in 1..=cfg.iterations {
        // decode the whole pool with the current model
        let mut candidates: Vec<(usize, Labeling, f64)> = Vec::new();
        for (idx, ex) in unlab.iter().enumerate() {
            let decoded = model.decode(ex.sentence());
            let compatible = match chi {
                Some(chi) => chi.check(ex.y1().expect("validated"), &decoded)?,
                None => true,
            };
            if compatible {
                let conf = if need_confidence {
                    model.confidence(ex.sentence())
                } else {
                    0.0
                };
                candidates.push((idx, decoded, conf));
            }
        }
        if cfg.confidence_filter {
            if let Some(r) = cfg.top_r {
                candidates.sort_by(|a, b| {
                    b.2.partial_cmp(&a.2)
                        .unwrap()
                        .then_with(|| unlab.get(a.0).sentence().id().cmp(unlab.get(b.0).sentence().id()))
                });
                candidates.truncate(r);
            }
        }
        let new_set: BTreeMap<usize, (Labeling, f64)> = candidates
            .into_iter()
            .map(|(idx, labeling, conf)| (idx, (labeling, conf)))
            .collect();

        let added = new_set.keys().filter(|k| !added_set.contains_key(k)).count();
        let evicted = added_set.keys().filter(|k| !new_set.contains_key(k)).count();
        let unchanged = new_set == added_set;
        added_set = new_set;

        if !unchanged {
            model = retrain_augmented(learner, &base, unlab, &added_set, cfg, labeled_mass)?;
        }
        let dev_m = dev_metric(model.as_ref(), dev, Task::Entity)?;
        trace.push(IterationRecord {
            iteration,
            pool_size: unlab.len(),
            added,
            evicted,
            total_added: added_set.len(),
            dev_metric: dev_m,
            dev_metric_secondary: None,
        });
        if let Some(m) = dev_m {
            if best.map_or(true, |(b, _)| m > b) {
                best = Some((m, iteration));
                best_snapshot = Some(added_set.clone());
            }
        }
    }

    let weights = apply_weighting(
        &cfg.unlabeled_weight,
        added_set.len(),
        labeled_mass,
        &added_set.values().map(|(_, c)| *c).collect::<Vec<_>>(),
    );
    let final_added: Vec<AddedExample> = added_set
        .iter()
        .zip(&weights)
        .map(|((idx, (labeling, conf)), w)| AddedExample {
            unlab_index: *idx,
            labeling: labeling.clone(),
            confidence: *conf,
            weight: *w,
        })
        .collect();

    let (model, best_iteration) = match (dev, best, best_snapshot) {
        (Some(_), Some((_, 0)), _) | (Some(_), None, _) => {
            // the seed model won; retrain it from the base items
            (learner.train(&base)?, 0)
        }
        (Some(_), Some((_, it)), Some(snapshot)) => (
            retrain_augmented(learner, &base, unlab, &snapshot, cfg, labeled_mass)?,
            it,
        ),
        _ => (model, cfg.iterations),
    };

    Ok(HintsOutcome {
        model,
        trace,
        best_iteration,
        final_added,
    })
}

fn retrain_augmented(
    learner: &dyn Learner,
    base: &[TrainItem],
    unlab: &Corpus,
    added_set: &BTreeMap<usize, (Labeling, f64)>,
    cfg: &TrainConfig,
    labeled_mass: f64,
) -> Result<Box<dyn Tagger>> {
    let confs: Vec<f64> = added_set.values().map(|(_, c)| *c).collect();
    let weights = apply_weighting(&cfg.unlabeled_weight, added_set.len(), labeled_mass, &confs);
    let mut items = base.to_vec();
    for ((idx, (labeling, _)), w) in added_set.iter().zip(&weights) {
        items.push(
            TrainItem::new(unlab.get(*idx).sentence().clone(), labeling.clone()).with_weight(*w),
        );
    }
    learner.train(&items)
}

fn dev_metric(model: &dyn Tagger, dev: Option<&Corpus>, task: Task) -> Result<Option<f64>> {
    let Some(dev) = dev else { return Ok(None) };
    let preds: Vec<Labeling> = dev.iter().map(|ex| model.decode(ex.sentence())).collect();
    Ok(Some(task_span_f1(dev, &preds, task)?.f1))
}

/// One augmented example of a two-sided run, carrying both decodes.
#[derive(Debug, Clone)]
pub struct TwoSidedAdded {
    pub unlab_index: usize,
    pub y1: Labeling,
    pub y2: Labeling,
    pub mean_confidence: f64,
}

pub struct TwoSidedOutcome {
    pub model1: Box<dyn Tagger>,
    pub model2: Box<dyn Tagger>,
    pub trace: Vec<IterationRecord>,
    pub best_iteration1: usize,
    pub best_iteration2: usize,
    pub final_added: Vec<TwoSidedAdded>,
}

/// Two-sided training: decode fully unlabeled sentences with both models,
/// keep the pairs the constraint accepts (the top R by mean confidence when
/// `top_r` is set), and feed each side its own decode. The working pool
/// starts at `pool_growth` seeded random examples and grows by the same
/// amount per iteration, sampling without replacement.
pub fn two_sided_hints(
    learner1: &dyn Learner,
    learner2: &dyn Learner,
    d1: &Corpus,
    d2: &Corpus,
    d_unlab: &Corpus,
    chi: &ConstraintFunction,
    cfg: &TrainConfig,
    dev: Option<&Corpus>,
) -> Result<TwoSidedOutcome> {
    cfg.validate()?;
    if d1.is_empty() || d2.is_empty() {
        return Err(Error::data("both labeled corpora must be non-empty"));
    }
    for ex in d_unlab.iter() {
        if ex.y1().is_some() || ex.y2().is_some() {
            return Err(Error::data(format!(
                "example {}: two-sided pool must be fully unlabeled (role violation)",
                ex.sentence().id()
            )));
        }
    }
    let base1 = corpus_items(d1, Task::Syntactic)?;
    let base2 = corpus_items(d2, Task::Entity)?;
    let mass1 = base1.len() as f64;
    let mass2 = base2.len() as f64;

    let mut model1 = learner1.train(&base1)?;
    let mut model2 = learner2.train(&base2)?;

    let mut order: Vec<usize> = (0..d_unlab.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order.shuffle(&mut rng);
    let growth = cfg.effective_pool_growth();

    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let dev1 = dev_metric(model1.as_ref(), dev, Task::Syntactic)?;
    let dev2 = dev_metric(model2.as_ref(), dev, Task::Entity)?;
    trace.push(IterationRecord {
        iteration: 0,
        pool_size: 0,
        added: 0,
        evicted: 0,
        total_added: 0,
        dev_metric: dev2,
        dev_metric_secondary: dev1,
    });
    let mut best1: Option<(f64, usize)> = dev1.map(|m| (m, 0));
    let mut best2: Option<(f64, usize)> = dev2.map(|m| (m, 0));
    let mut snapshot1: Option<BTreeMap<usize, (Labeling, Labeling, f64)>> = None;
    let mut snapshot2: Option<BTreeMap<usize, (Labeling, Labeling, f64)>> = None;

    let mut added_set: BTreeMap<usize, (Labeling, Labeling, f64)> = BTreeMap::new();
    for iteration in 1..=cfg.iterations {
        let working = match growth {
            Some(g) => &order[..(iteration * g).min(order.len())],
            None => &order[..],
        };
        let mut candidates: Vec<(usize, Labeling, Labeling, f64)> = Vec::new();
        for &idx in working {
            let sentence = d_unlab.get(idx).sentence();
            let y1 = model1.decode(sentence);
            let y2 = model2.decode(sentence);
            if chi.check(&y1, &y2)? {
                let conf = 0.5 * (model1.confidence(sentence) + model2.confidence(sentence));
                candidates.push((idx, y1, y2, conf));
            }
        }
        if let Some(r) = cfg.top_r {
            candidates.sort_by(|a, b| {
                b.3.partial_cmp(&a.3)
                    .unwrap()
                    .then_with(|| d_unlab.get(a.0).sentence().id().cmp(d_unlab.get(b.0).sentence().id()))
            });
            candidates.truncate(r);
        }
        let new_set: BTreeMap<usize, (Labeling, Labeling, f64)> = candidates
            .into_iter()
            .map(|(idx, y1, y2, conf)| (idx, (y1, y2, conf)))
            .collect();
        let added = new_set.keys().filter(|k| !added_set.contains_key(k)).count();
        let evicted = added_set.keys().filter(|k| !new_set.contains_key(k)).count();
        let unchanged = new_set == added_set;
        added_set = new_set;

        if !unchanged {
            let confs: Vec<f64> = added_set.values().map(|(_, _, c)| *c).collect();
            let w1 = apply_weighting(&cfg.unlabeled_weight, added_set.len(), mass1, &confs);
            let w2 = apply_weighting(&cfg.unlabeled_weight, added_set.len(), mass2, &confs);
            let mut items1 = base1.clone();
            let mut items2 = base2.clone();
            for (((idx, (y1, y2, _)), w1), w2) in added_set.iter().zip(&w1).zip(&w2) {
                let sentence = d_unlab.get(*idx).sentence().clone();
                items1.push(TrainItem::new(sentence.clone(), y1.clone()).with_weight(*w1));
                items2.push(TrainItem::new(sentence, y2.clone()).with_weight(*w2));
            }
            model1 = learner1.train(&items1)?;
            model2 = learner2.train(&items2)?;
        }

        let dev1 = dev_metric(model1.as_ref(), dev, Task::Syntactic)?;
        let dev2 = dev_metric(model2.as_ref(), dev, Task::Entity)?;
        trace.push(IterationRecord {
            iteration,
            pool_size: working.len(),
            added,
            evicted,
            total_added: added_set.len(),
            dev_metric: dev2,
            dev_metric_secondary: dev1,
        });
        if let Some(m) = dev1 {
            if best1.map_or(true, |(b, _)| m > b) {
                best1 = Some((m, iteration));
                snapshot1 = Some(added_set.clone());
            }
        }
        if let Some(m) = dev2 {
            if best2.map_or(true, |(b, _)| m > b) {
                best2 = Some((m, iteration));
                snapshot2 = Some(added_set.clone());
            }
        }
    }

    let final_added: Vec<TwoSidedAdded> = added_set
        .iter()
        .map(|(idx, (y1, y2, conf))| TwoSidedAdded {
            unlab_index: *idx,
            y1: y1.clone(),
            y2: y2.clone(),
            mean_confidence: *conf,
        })
        .collect();

    let best_model1 = match &snapshot1 {
        Some(s) => Some(retrain_two_sided_side(learner1, &base1, d_unlab, s, cfg, mass1, true)?),
        None => None,
    };
    let best_model2 = match &snapshot2 {
        Some(s) => Some(retrain_two_sided_side(learner2, &base2, d_unlab, s, cfg, mass2, false)?),
        None => None,
    };
    let (model1, best_iteration1) =
        pick_best(dev, best1, best_model1, model1, learner1, &base1, cfg.iterations)?;
    let (model2, best_iteration2) =
        pick_best(dev, best2, best_model2, model2, learner2, &base2, cfg.iterations)?;

    Ok(TwoSidedOutcome {
        model1,
        model2,
        trace,
        best_iteration1,
        best_iteration2,
        final_added,
    })
}

fn retrain_two_sided_side(
    learner: &dyn Learner,
    base: &[TrainItem],
    unlab: &Corpus,
    added_set: &BTreeMap<usize, (Labeling, Labeling, f64)>,
    cfg: &TrainConfig,
    labeled_mass: f64,
    side_one: bool,
) -> Result<Box<dyn Tagger>> {
    let confs: Vec<f64> = added_set.values().map(|(_, _, c)| *c).collect();
    let weights = apply_weighting(&cfg.unlabeled_weight, added_set.len(), labeled_mass, &confs);
    let mut items = base.to_vec();
    for ((idx, (y1, y2, _)), w) in added_set.iter().zip(&weights) {
        let labeling = if side_one { y1 } else { y2 };
        items.push(
            TrainItem::new(unlab.get(*idx).sentence().clone(), labeling.clone()).with_weight(*w),
        );
    }
    learner.train(&items)
}

#[allow(clippy::too_many_arguments)]
fn pick_best(
    dev: Option<&Corpus>,
    best: Option<(f64, usize)>,
    best_model: Option<Box<dyn Tagger>>,
    final_model: Box<dyn Tagger>,
    learner: &dyn Learner,
    base: &[TrainItem],
    iterations: usize,
) -> Result<(Box<dyn Tagger>, usize)> {
    match (dev, best, best_model) {
        (Some(_), Some((_, 0)), _) | (Some(_), None, _) => Ok((learner.train(base)?, 0)),
        (Some(_), Some((_, it)), Some(m)) => Ok((m, it)),
        _ => Ok((final_model, iterations)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::HmmLearner;
    use crate::synth::{generate, split, SplitSizes, SynthConfig, UnlabMode};

    fn small_world() -> crate::synth::SplitCorpora {
        let cfg = SynthConfig { seed: 11, ..SynthConfig::default() };
        let corpus = generate(&cfg, 260).unwrap();
        split(
            &corpus,
            SplitSizes { d1: 50, d2: 40, unlab: 120, test: 50 },
            5,
            UnlabMode::OneSided,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::one_sided_default();
        assert!(cfg.validate().is_ok());
        cfg.iterations = 0;
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            pool_growth: Some(10),
            top_r: None,
            ..TrainConfig::one_sided_default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            confidence_filter: true,
            top_r: None,
            ..TrainConfig::one_sided_default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(
            TrainConfig::two_sided_default().effective_pool_growth(),
            Some(500)
        );
    }

    #[test]
    fn weighting_examples() {
        let w = apply_weighting(&WeightMode::Fraction(1.0), 3, 50.0, &[]);
        assert_eq!(w, vec![1.0, 1.0, 1.0]);
        let w = apply_weighting(&WeightMode::Fraction(0.1), 100, 50.0, &[]);
        assert_eq!(w.len(), 100);
        assert!((w.iter().sum::<f64>() - 10.0).abs() < 1e-9);
        let w = apply_weighting(&WeightMode::Equal, 200, 50.0, &[]);
        assert!((w[0] - 0.25).abs() < 1e-12);
        let confs = [0.5, 0.75];
        let w = apply_weighting(&WeightMode::ConfidenceScored, 2, 50.0, &confs);
        assert_eq!(w, confs.to_vec());
    }

    #[test]
    fn empty_pool_returns_seed_model() {
        let world = small_world();
        let empty = Corpus::empty(CorpusRole::Unlabeled);
        let learner = HmmLearner::default();
        let chi = ConstraintFunction::full();
        let cfg = TrainConfig::one_sided_default();
        let outcome = one_sided_hints(&learner, &world.d2, &empty, &chi, &cfg, None).unwrap();
        assert!(outcome.final_added.is_empty());
        assert_eq!(outcome.trace.len(), cfg.iterations + 1);
        for row in &outcome.trace {
            assert_eq!(row.total_added, 0);
        }
        // identical to training on the labeled data alone
        let base = learner
            .train(&corpus_items(&world.d2, Task::Entity).unwrap())
            .unwrap();
        for ex in world.test.iter().take(10) {
            assert_eq!(
                outcome.model.decode(ex.sentence()).indices(),
                base.decode(ex.sentence()).indices()
            );
        }
    }

    #[test]
    fn self_train_equals_one_sided_with_constant_constraint() {
        let world = small_world();
        let learner = HmmLearner::default();
        let chi = ConstraintFunction::constant();
        let cfg = TrainConfig {
            iterations: 2,
            ..TrainConfig::one_sided_default()
        };
        let a = one_sided_hints(&learner, &world.d2, &world.unlab, &chi, &cfg, Some(&world.test))
            .unwrap();
        let b = self_train(&learner, &world.d2, &world.unlab, &cfg, Some(&world.test)).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best_iteration, b.best_iteration);
        assert_eq!(a.final_added.len(), b.final_added.len());
        for (x, y) in a.final_added.iter().zip(&b.final_added) {
            assert_eq!(x.unlab_index, y.unlab_index);
            assert_eq!(x.labeling.indices(), y.labeling.indices());
            assert_eq!(x.weight.to_bits(), y.weight.to_bits());
        }
    }

    #[test]
    fn augmentation_is_chi_sound() {
        let world = small_world();
        let learner = HmmLearner::default();
        let chi = ConstraintFunction::full();
        let cfg = TrainConfig::one_sided_default();
        let outcome =
            one_sided_hints(&learner, &world.d2, &world.unlab, &chi, &cfg, None).unwrap();
        // re-check the final augmented corpus from scratch
        for added in &outcome.final_added {
            let y1 = world.unlab.get(added.unlab_index).y1().unwrap();
            assert!(chi.check(y1, &added.labeling).unwrap());
        }
        assert!(!outcome.final_added.is_empty(), "nothing was ever added");
    }

    #[test]
    fn pool_role_violations_are_rejected() {
        let world = small_world();
        let learner = HmmLearner::default();
        let chi = ConstraintFunction::full();
        let cfg = TrainConfig::one_sided_default();
        // test corpus still carries y2: not a valid pool
        let err = one_sided_hints(&learner, &world.d2, &world.test, &chi, &cfg, None);
        assert!(err.is_err());
        let err = self_train(&learner, &world.d2, &world.test, &cfg, None);
        assert!(err.is_err());
        // one-sided pool must carry y1
        let cfg2 = SynthConfig { seed: 11, ..SynthConfig::default() };
        let corpus = generate(&cfg2, 60).unwrap();
        let stripped = split(
            &corpus,
            SplitSizes { d1: 0, d2: 10, unlab: 40, test: 10 },
            5,
            UnlabMode::TwoSided,
        )
        .unwrap();
        let err = one_sided_hints(&learner, &world.d2, &stripped.unlab, &chi, &cfg, None);
        assert!(err.is_err());
    }

    #[test]
    fn determinism_across_runs() {
        let world = small_world();
        let learner = HmmLearner::default();
        let chi = ConstraintFunction::full();
        let cfg = TrainConfig {
            iterations: 2,
            top_r: Some(20),
            confidence_filter: true,
            ..TrainConfig::one_sided_default()
        };
        let a = one_sided_hints(&learner, &world.d2, &world.unlab, &chi, &cfg, Some(&world.test))
            .unwrap();
        let b = one_sided_hints(&learner, &world.d2, &world.unlab, &chi, &cfg, Some(&world.test))
            .unwrap();
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn two_sided_runs_and_grows_pool_monotonically() {
        let cfg_s = SynthConfig { seed: 13, ..SynthConfig::default() };
        let corpus = generate(&cfg_s, 400).unwrap();
        let world = split(
            &corpus,
            SplitSizes { d1: 80, d2: 60, unlab: 200, test: 60 },
            5,
            UnlabMode::TwoSided,
        )
        .unwrap();
        let learner = HmmLearner::default();
        let chi = ConstraintFunction::full();
        let cfg = TrainConfig {
            iterations: 4,
            top_r: Some(15),
            pool_growth: Some(40),
            ..TrainConfig::two_sided_default()
        };
        let outcome = two_sided_hints(
            &learner, &learner, &world.d1, &world.d2, &world.unlab, &chi, &cfg,
            Some(&world.test),
        )
        .unwrap();
        assert_eq!(outcome.trace.len(), 5);
        for (i, row) in outcome.trace.iter().enumerate().skip(1) {
            assert_eq!(row.pool_size, (i * 40).min(200));
            assert!(row.total_added <= 15);
        }
        // added pairs satisfy the constraint
        for added in &outcome.final_added {
            assert!(chi.check(&added.y1, &added.y2).unwrap());
        }
        // clamping: growth bigger than the pool uses the whole pool
        let cfg = TrainConfig {
            iterations: 2,
            top_r: Some(15),
            pool_growth: Some(1000),
            ..TrainConfig::two_sided_default()
        };
        let outcome = two_sided_hints(
            &learner, &learner, &world.d1, &world.d2, &world.unlab, &chi, &cfg, None,
        )
        .unwrap();
        assert_eq!(outcome.trace[1].pool_size, 200);
    }

    #[test]
    fn trace_tsv_has_expected_shape() {
        let trace = vec![
            IterationRecord {
                iteration: 0,
                pool_size: 0,
                added: 0,
                evicted: 0,
                total_added: 0,
                dev_metric: Some(0.5),
                dev_metric_secondary: None,
            },
            IterationRecord {
                iteration: 1,
                pool_size: 10,
                added: 4,
                evicted: 0,
                total_added: 4,
                dev_metric: None,
                dev_metric_secondary: None,
            },
        ];
        let tsv = trace_to_tsv(&trace);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("iteration\t"));
        assert!(lines[1].contains("0.500000"));
        assert!(lines[2].contains('-'));
    }
}
