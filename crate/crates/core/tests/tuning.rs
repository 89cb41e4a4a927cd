//! Temporary calibration harness; prints benchmark numbers per seed.

use seqhints_core::constraints::ConstraintFunction;
use seqhints_core::eval::task_span_f1;
use seqhints_core::hmm::HmmLearner;
use seqhints_core::synth::{generate, split, SplitSizes, SynthConfig, UnlabMode};
use seqhints_core::tagger::{corpus_items, Learner, Task};
use seqhints_core::training::{one_sided_hints, self_train, TrainConfig, WeightMode};
use seqhints_core::Corpus;

fn test_f1(model: &dyn seqhints_core::Tagger, test: &Corpus) -> f64 {
    let preds: Vec<_> = test.iter().map(|ex| model.decode(ex.sentence())).collect();
    task_span_f1(test, &preds, Task::Entity).unwrap().f1
}

#[test]
#[ignore]
fn learning_curve() {
    let learner = HmmLearner::default();
    for (vocab, conc, nnp, ent) in [
        (150usize, 0.05f64, 0.9f64, 0.6f64),
        (400, 0.08, 0.75, 0.5),
    ] {
        let cfg = SynthConfig {
            vocab_size: vocab,
            emission_concentration: conc,
            nnp_in_np_rate: nnp,
            entity_in_np_rate: ent,
            seed: 1000,
            ..SynthConfig::default()
        };
        println!("=== vocab {vocab} conc {conc} nnp {nnp} ent {ent}");
        let corpus = generate(&cfg, 4500).unwrap();
        let world = split(
            &corpus,
            SplitSizes { d1: 0, d2: 4000, unlab: 0, test: 500 },
            0,
            UnlabMode::OneSided,
        )
        .unwrap();
        for n in [100usize, 500, 2000, 4000] {
            let items: Vec<_> = corpus_items(&world.d2, Task::Entity)
                .unwrap()
                .into_iter()
                .take(n)
                .collect();
            let model = learner.train(&items).unwrap();
            let f = test_f1(model.as_ref(), &world.test);
            let preds: Vec<_> = world
                .test
                .iter()
                .map(|ex| model.decode(ex.sentence()))
                .collect();
            let golds: Vec<_> = world.test.iter().map(|ex| ex.y2().unwrap()).collect();
            let pred_refs: Vec<&seqhints_core::Labeling> = preds.iter().collect();
            let acc = seqhints_core::eval::token_accuracy(
                &golds,
                &pred_refs,
                seqhints_core::eval::AccuracyMode::Full,
            )
            .unwrap();
            println!("  n={n}: span-F1 {f:.4}, token acc {acc:.4}");
        }
    }
}

#[test]
#[ignore]
fn config_sweep() {
    // (vocab, concentration, nnp_rate, entity_rate)
    let candidates = [
        (150usize, 0.15f64, 0.85f64, 0.6f64),
        (150, 0.05, 0.90, 0.6),
        (250, 0.10, 0.90, 0.5),
        (100, 0.20, 0.85, 0.7),
    ];
    for (vocab, conc, nnp, ent) in candidates {
        println!("=== vocab {vocab} conc {conc} nnp {nnp} ent {ent}");
        run_benchmark(3, |seed| SynthConfig {
            vocab_size: vocab,
            emission_concentration: conc,
            nnp_in_np_rate: nnp,
            entity_in_np_rate: ent,
            seed: 1000 + seed,
            ..SynthConfig::default()
        });
    }
}

#[test]
#[ignore]
fn one_sided_benchmark_sweep() {
    run_benchmark(10, |seed| SynthConfig {
        seed: 1000 + seed,
        ..SynthConfig::default()
    });
}

fn run_benchmark(n_seeds: u64, make_cfg: impl Fn(u64) -> SynthConfig) {
    let learner = HmmLearner::default();
    let chi = ConstraintFunction::full();
    let mut mean_base = 0.0;
    let mut mean_hints = 0.0;
    let mut mean_selft = 0.0;
    let mut hints_beats_selft = 0;
    for seed in 0..n_seeds {
        let cfg = make_cfg(seed);
        let corpus = generate(&cfg, 2600).unwrap();
        let world = split(
            &corpus,
            SplitSizes { d1: 0, d2: 100, unlab: 2000, test: 500 },
            seed,
            UnlabMode::OneSided,
        )
        .unwrap();

        let base_items = corpus_items(&world.d2, Task::Entity).unwrap();
        let baseline = learner.train(&base_items).unwrap();
        let f_base = test_f1(baseline.as_ref(), &world.test);

        let cfg_hints = TrainConfig {
            iterations: 3,
            seed,
            ..TrainConfig::one_sided_default()
        };
        let hints = one_sided_hints(&learner, &world.d2, &world.unlab, &chi, &cfg_hints, None)
            .unwrap();
        let f_hints = test_f1(hints.model.as_ref(), &world.test);

        let cfg_selft = TrainConfig {
            iterations: 3,
            top_r: Some(500),
            confidence_filter: true,
            unlabeled_weight: WeightMode::Fraction(1.0),
            seed,
            ..TrainConfig::one_sided_default()
        };
        let selft = self_train(&learner, &world.d2, &world.unlab, &cfg_selft, None).unwrap();
        let f_selft = test_f1(selft.model.as_ref(), &world.test);

        println!(
            "seed {seed}: base {f_base:.4} hints {f_hints:.4} selft {f_selft:.4}  added(h) {}",
            hints.final_added.len()
        );
        mean_base += f_base;
        mean_hints += f_hints;
        mean_selft += f_selft;
        if f_hints > f_selft {
            hints_beats_selft += 1;
        }
    }
    let n = n_seeds as f64;
    println!(
        "MEANS base {:.4} hints {:.4} selft {:.4} | hints>selft {}/{}",
        mean_base / n,
        mean_hints / n,
        mean_selft / n,
        hints_beats_selft,
        n_seeds
    );
}
