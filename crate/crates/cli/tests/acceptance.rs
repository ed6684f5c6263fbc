//! Acceptance gate for the pipeline. Each test covers one criterion,
//! prints a single PASS/FAIL line, and pins its tolerances in code.
//!
//! Oracles are implemented independently of the library code they
//! check (brute-force summations, O(n^2) ranking, hand-enumerated
//! fixtures) so agreement is evidence, not tautology.

use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::Rng;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;
use xling_cli::commands;
use xling_cli::config::{EncoderConfig, RunConfig, StageConfig};
use xling_core::corpus::{
    build_triplets, mix_languages, preprocess, FilterConfig, NliExample, NliLabel,
};
use xling_core::encoder::{cosine, EncoderSpec, PoolingStrategy, SentenceModel, Vocab};
use xling_core::eval::{
    eval_classification_knn, eval_crosslingual_matrix, eval_sts, knn_classify, pearson, spearman,
    KnnConfig,
};
use xling_core::objectives::{cosine_regression_loss, mnr_loss, MnrlConfig};
use xling_core::report::{render_report, Layout, ReportRow};
use xling_core::rng::rng_for;
use xling_core::synthbench::{make_pseudo_languages, run_desk_experiment, DeskConfig, SynthSizes};
use xling_core::trainer::Recipe;

fn verdict(criterion: usize, name: &str, pass: bool) {
    println!(
        "[criterion {criterion}] {name}: {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed");
}

// ---------------------------------------------------------------- C1

/// Brute-force MNRL: mean over anchors of softmax cross-entropy over
/// the 2n-candidate score row, computed by direct summation.
fn oracle_mnrl(a: &Array2<f64>, p: &Array2<f64>, h: &Array2<f64>, scale: f64) -> f64 {
    let n = a.nrows();
    let cos = |x: ndarray::ArrayView1<f64>, y: ndarray::ArrayView1<f64>| {
        x.dot(&y) / (x.dot(&x).sqrt() * y.dot(&y).sqrt())
    };
    let mut loss = 0.0;
    for i in 0..n {
        let mut denom = 0.0;
        for j in 0..n {
            denom += (scale * cos(a.row(i), p.row(j))).exp();
        }
        for j in 0..n {
            denom += (scale * cos(a.row(i), h.row(j))).exp();
        }
        let true_score = scale * cos(a.row(i), p.row(i));
        loss += denom.ln() - true_score;
    }
    loss / n as f64
}

fn oracle_regression(u: &Array2<f64>, v: &Array2<f64>, gold: &[f64]) -> f64 {
    let n = u.nrows();
    let mut loss = 0.0;
    for i in 0..n {
        let (ui, vi) = (u.row(i), v.row(i));
        let cos = ui.dot(&vi) / (ui.dot(&ui).sqrt() * vi.dot(&vi).sqrt());
        let diff = cos - gold[i] / 5.0;
        loss += diff * diff;
    }
    loss / n as f64
}

fn random_matrix(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0) + 0.1)
}

/// Central finite difference of `f` along every coordinate of a copy
/// of `m`, compared against analytic `grad`.
fn gradient_matches(
    m: &Array2<f64>,
    grad: &Array2<f64>,
    mut f: impl FnMut(&Array2<f64>) -> f64,
) -> bool {
    const STEP: f64 = 1e-4;
    const REL: f64 = 1e-3;
    for idx in 0..m.len() {
        let (r, c) = (idx / m.ncols(), idx % m.ncols());
        let mut hi = m.clone();
        hi[(r, c)] += STEP;
        let mut lo = m.clone();
        lo[(r, c)] -= STEP;
        let fd = (f(&hi) - f(&lo)) / (2.0 * STEP);
        let g = grad[(r, c)];
        if (fd - g).abs() > REL * fd.abs().max(g.abs()).max(1.0) {
            return false;
        }
    }
    true
}

#[test]
fn criterion_1_loss_oracle_equivalence() {
    const TOL: f64 = 1e-9;
    let started = Instant::now();
    let mut rng = rng_for(1, "acceptance-c1");
    let mut pass = true;
    for case in 0..200 {
        let n = rng.gen_range(1..=4);
        let d = rng.gen_range(1..=8);
        let a = random_matrix(&mut rng, n, d);
        let p = random_matrix(&mut rng, n, d);
        let h = random_matrix(&mut rng, n, d);
        let scale = rng.gen_range(1.0..30.0);
        let cfg = MnrlConfig { scale };
        let out = mnr_loss(&a, &p, &h, &cfg).unwrap();
        pass &= (out.loss - oracle_mnrl(&a, &p, &h, scale)).abs() <= TOL;

        let gold: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=5.0)).collect();
        let reg = cosine_regression_loss(&a, &p, &gold).unwrap();
        pass &= (reg.loss - oracle_regression(&a, &p, &gold)).abs() <= TOL;

        // Finite-difference gradient checks on a subset (every input
        // of every 10th batch) keep the runtime budget.
        if case % 10 == 0 {
            let loss_a = |x: &Array2<f64>| mnr_loss(x, &p, &h, &cfg).unwrap().loss;
            let loss_p = |x: &Array2<f64>| mnr_loss(&a, x, &h, &cfg).unwrap().loss;
            let loss_h = |x: &Array2<f64>| mnr_loss(&a, &p, x, &cfg).unwrap().loss;
            pass &= gradient_matches(&a, &out.grad_anchors, loss_a);
            pass &= gradient_matches(&p, &out.grad_positives, loss_p);
            pass &= gradient_matches(&h, &out.grad_hard_negatives, loss_h);
            let reg_u = |x: &Array2<f64>| cosine_regression_loss(x, &p, &gold).unwrap().loss;
            let reg_v = |x: &Array2<f64>| cosine_regression_loss(&a, x, &gold).unwrap().loss;
            pass &= gradient_matches(&a, &reg.grad_u, reg_u);
            pass &= gradient_matches(&p, &reg.grad_v, reg_v);
        }
    }
    pass &= started.elapsed().as_secs_f64() < 30.0;
    verdict(1, "loss oracle equivalence (1e-9) + gradient checks", pass);
}

// ---------------------------------------------------------------- C2

/// O(n^2) average ranks: 1-based count of strictly smaller values plus
/// half-open share of the tie group.
fn oracle_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Textbook product-moment formula by direct summation.
fn oracle_pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

#[test]
fn criterion_2_correlation_oracle_equivalence() {
    const TOL: f64 = 1e-12;
    let started = Instant::now();
    let mut rng = rng_for(2, "acceptance-c2");
    let mut pass = true;
    let mut tie_instances = 0;
    for case in 0..1000 {
        let n = rng.gen_range(3..=40);
        let quantize = case % 5 == 0;
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let v: f64 = rng.gen_range(-10.0..10.0);
                    if quantize {
                        (v * 0.5).round() * 2.0
                    } else {
                        v
                    }
                })
                .collect()
        };
        let mut xs = draw(&mut rng);
        let mut ys = draw(&mut rng);
        // Dodge the degenerate constant-sequence case.
        if xs.windows(2).all(|w| w[0] == w[1]) {
            xs[0] += 1.0;
        }
        if ys.windows(2).all(|w| w[0] == w[1]) {
            ys[0] += 1.0;
        }
        let has_ties = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            s.windows(2).any(|w| w[0] == w[1])
        };
        if has_ties(&xs) || has_ties(&ys) {
            tie_instances += 1;
        }
        pass &= (pearson(&xs, &ys).unwrap() - oracle_pearson(&xs, &ys)).abs() <= TOL;
        let oracle_rho = oracle_pearson(&oracle_ranks(&xs), &oracle_ranks(&ys));
        pass &= (spearman(&xs, &ys).unwrap() - oracle_rho).abs() <= TOL;
    }
    pass &= tie_instances >= 100;
    pass &= started.elapsed().as_secs_f64() < 10.0;
    verdict(2, "correlation oracle equivalence (1e-12, with ties)", pass);
}

// ------------------------------------------------------------- C3/C4

/// Thresholds locked after the calibration sweep recorded in the
/// benchmark defaults; see `DeskConfig::default`.
const EMERGENCE_MARGIN: f64 = 0.20;
const TWO_STEP_SLACK: f64 = 0.02;
const CONTROL_BAND: f64 = 0.15;

#[test]
fn criterion_3_desk_scale_crosslingual_emergence() {
    let started = Instant::now();
    let config = DeskConfig::default();
    assert_eq!(config.seeds.len(), 3);
    let report = run_desk_experiment(&config).unwrap();
    let vanilla_x = report.median_crosslingual(Recipe::Vanilla);
    let one_x = report.median_crosslingual(Recipe::OneStep);
    let one_m = report.median_monolingual(Recipe::OneStep);
    let two_m = report.median_monolingual(Recipe::TwoStep);
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "  cross-lingual medians: vanilla {vanilla_x:+.4}, one-step {one_x:+.4}; \
         monolingual medians: one-step {one_m:+.4}, two-step {two_m:+.4}; {elapsed:.0}s"
    );
    let pass = one_x >= vanilla_x + EMERGENCE_MARGIN
        && two_m >= one_m - TWO_STEP_SLACK
        && elapsed < 600.0;
    verdict(3, "desk-scale cross-lingual emergence", pass);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[test]
fn criterion_4_no_free_alignment_control() {
    let mut config = DeskConfig::default();
    // Train on one pseudo-language only; evaluation still spans both.
    config.train_languages = Some(vec!["pl0".to_string()]);
    let report = run_desk_experiment(&config).unwrap();

    // Median over seeds of each cell class, per recipe.
    let cell_median = |recipe: Recipe, pick: &dyn Fn(&str, &str) -> bool| -> f64 {
        let mut by_seed: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for row in &report.rows {
            if row.recipe == recipe && pick(&row.lang1, &row.lang2) {
                by_seed.entry(row.seed).or_default().push(row.spearman);
            }
        }
        median(
            by_seed
                .values()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                .collect(),
        )
    };
    let heldout_mono = |a: &str, b: &str| a == "pl1" && b == "pl1";
    let cross = |a: &str, b: &str| a != b;

    let mut pass = true;
    for recipe in [Recipe::OneStep, Recipe::TwoStep] {
        let d_mono = cell_median(recipe, &heldout_mono) - cell_median(Recipe::Vanilla, &heldout_mono);
        let d_cross = cell_median(recipe, &cross) - cell_median(Recipe::Vanilla, &cross);
        println!(
            "  {recipe:?}: held-out monolingual delta {d_mono:+.4}, cross-lingual delta {d_cross:+.4}"
        );
        pass &= d_mono.abs() <= CONTROL_BAND && d_cross.abs() <= CONTROL_BAND;
    }
    verdict(4, "no-free-alignment control (one-language training)", pass);
}

// ---------------------------------------------------------------- C5

fn write_tiny_corpus(dir: &Path) -> RunConfig {
    let mut rng = rng_for(5, "acceptance-c5");
    let word = |rng: &mut rand_chacha::ChaCha8Rng| format!("w{}", rng.gen_range(0..25));
    let sentence = |rng: &mut rand_chacha::ChaCha8Rng| {
        (0..4).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
    };
    for lang in ["aa", "bb"] {
        let mut nli = String::new();
        for _ in 0..25 {
            let p = sentence(&mut rng);
            nli.push_str(&format!("{p}\t{p} more\tentailment\n"));
            nli.push_str(&format!("{p}\tnot {}\tcontradiction\n", sentence(&mut rng)));
        }
        std::fs::write(dir.join(format!("{lang}_nli.tsv")), nli).unwrap();
        for split in ["train", "test"] {
            let mut sts = String::new();
            for i in 0..20 {
                sts.push_str(&format!(
                    "{}\t{}\t{:.2}\n",
                    sentence(&mut rng),
                    sentence(&mut rng),
                    (i % 6) as f64
                ));
            }
            std::fs::write(dir.join(format!("{lang}_sts_{split}.tsv")), sts).unwrap();
        }
    }
    let manifest = dir.join("manifest.toml");
    let mut text = String::new();
    for lang in ["aa", "bb"] {
        text.push_str(&format!(
            "[languages.{lang}]\nnli_train = {:?}\nsts_train = {:?}\nsts_test = {:?}\n\n",
            dir.join(format!("{lang}_nli.tsv")),
            dir.join(format!("{lang}_sts_train.tsv")),
            dir.join(format!("{lang}_sts_test.tsv")),
        ));
    }
    std::fs::write(&manifest, text).unwrap();
    RunConfig {
        manifest,
        recipe: "two_step".to_string(),
        seed: 13,
        output_dir: dir.join("out"),
        crosslingual: true,
        encoder: EncoderConfig {
            dim: 16,
            layers: 1,
            heads: 2,
            ffn_dim: 32,
            max_len: 12,
        },
        nli: StageConfig {
            epochs: 1,
            batch_size: 4,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            mnrl_scale: 20.0,
        },
        sts: StageConfig {
            epochs: 1,
            batch_size: 4,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            mnrl_scale: 20.0,
        },
        ..RunConfig::default()
    }
}

#[test]
fn criterion_5_pipeline_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_tiny_corpus(tmp.path());

    let run_all = || -> BTreeMap<String, Vec<u8>> {
        commands::cmd_prepare(&config).unwrap();
        commands::cmd_train(&config).unwrap();
        let dir = commands::cmd_eval(&config).unwrap();
        let mut files = BTreeMap::new();
        for rel in [
            "prepared/triplets.tsv",
            "prepared/sts_train.tsv",
            "prepared/stats.json",
            "models/step1-nli.model",
            "models/step2-sts.model",
            "train_report.json",
            "eval/rows.tsv",
            "eval/tables.txt",
        ] {
            files.insert(rel.to_string(), std::fs::read(dir.join(rel)).unwrap());
        }
        files
    };

    let first = run_all();
    std::fs::remove_dir_all(&config.output_dir).unwrap();
    let second = run_all();
    let mut pass = true;
    for (rel, bytes) in &first {
        pass &= second[rel] == *bytes;
    }
    verdict(5, "prepare/train/eval byte-identical across runs", pass);
}

// ---------------------------------------------------------------- C6

#[test]
fn criterion_6_knn_separable_clusters_and_tie_oracle() {
    let mut pass = true;

    // Two classes of mutually identical texts: within-class distance
    // is exactly zero, so every k in the grid must classify perfectly
    // and validation ties must pick the smallest k.
    let mut docs = Vec::new();
    for (label, text) in [("red", "alpha alpha alpha"), ("blue", "beta beta beta")] {
        // 13 train docs per class keeps every k in the default grid
        // (up to 25) usable against the 26-point training set.
        for i in 0..39 {
            use xling_core::corpus::{LabeledDoc, Split};
            let split = match i % 3 {
                0 => Split::Train,
                1 => Split::Val,
                _ => Split::Test,
            };
            docs.push(LabeledDoc {
                text: text.to_string(),
                label: label.to_string(),
                language: "xx".to_string(),
                split,
            });
        }
    }
    let vocab = Vocab::from_texts(docs.iter().map(|d| d.text.as_str()));
    let spec = EncoderSpec {
        dim: 16,
        layers: 1,
        heads: 2,
        ffn_dim: 32,
        max_len: 8,
        ..Default::default()
    };
    let mut model = SentenceModel::new(spec, vocab, PoolingStrategy::Mean, 6).unwrap();
    let cfg = KnnConfig::default();
    for &k in &cfg.k_grid {
        let single = KnnConfig {
            p: cfg.p,
            k_grid: vec![k],
        };
        let result =
            eval_classification_knn(&mut model, &docs, &single, PoolingStrategy::Mean).unwrap();
        pass &= result.accuracy == 1.0;
    }
    let full = eval_classification_knn(&mut model, &docs, &cfg, PoolingStrategy::Mean).unwrap();
    pass &= full.chosen_k == 1 && full.accuracy == 1.0;

    // Hand-enumerated tie fixture on 1-D embeddings:
    // train = A@0, B@1, A@2, B@3.
    let train: Vec<(Vec<f64>, &str)> = vec![
        (vec![0.0], "A"),
        (vec![1.0], "B"),
        (vec![2.0], "A"),
        (vec![3.0], "B"),
    ];
    // k=2 at 1.4: neighbors B(0.4), A(0.6) -> vote tie -> nearest is B.
    pass &= knn_classify(&train, &[1.4], 2, 2.0) == "B";
    // k=1 at 1.5: B and A tie at distance 0.5 -> neighborhood expands
    // to both -> vote tie -> lowest-index nearest (B@1) decides.
    pass &= knn_classify(&train, &[1.5], 1, 2.0) == "B";
    // k=3 at 0.1: A(0.1), B(0.9), A(1.9) -> majority A.
    pass &= knn_classify(&train, &[0.1], 3, 2.0) == "A";

    // One-hot embeddings: all distinct-point distances are equal under
    // any order, so p=1 and p=2 agree on every decision.
    let onehot: Vec<(Vec<f64>, &str)> = (0..6)
        .map(|i| {
            let mut v = vec![0.0; 6];
            v[i] = 1.0;
            (v, if i % 2 == 0 { "even" } else { "odd" })
        })
        .collect();
    for i in 0..6 {
        let mut q = vec![0.0; 6];
        q[i] = 0.9;
        for k in [1, 3] {
            pass &= knn_classify(&onehot, &q, k, 1.0) == knn_classify(&onehot, &q, k, 2.0);
        }
    }

    verdict(6, "knn separable clusters + hand-enumerated tie oracle", pass);
}

// ---------------------------------------------------------------- C7

const PROP_CASES: u32 = 128; // >= 100 required

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> std::result::Result<(), proptest::test_runner::TestCaseError>,
) -> bool {
    let mut runner = TestRunner::new(PropConfig {
        cases: PROP_CASES,
        ..PropConfig::default()
    });
    let ok = runner.run(&strategy, test).is_ok();
    if !ok {
        println!("  property failed: {name}");
    }
    ok
}

fn nli_group_strategy() -> impl Strategy<Value = Vec<NliExample>> {
    // Up to 8 premises, each with random entailment/neutral/
    // contradiction hypotheses (possibly missing a pool).
    proptest::collection::vec(
        (
            0usize..8,
            proptest::collection::vec((0usize..3, "[a-z]{1,6}"), 1..5),
        ),
        1..8,
    )
    .prop_map(|groups| {
        let mut out = Vec::new();
        for (pid, hyps) in groups {
            for (kind, text) in hyps {
                out.push(NliExample {
                    premise: format!("premise {pid}"),
                    hypothesis: format!("{kind} {text}"),
                    label: match kind {
                        0 => NliLabel::Entailment,
                        1 => NliLabel::Neutral,
                        _ => NliLabel::Contradiction,
                    },
                    language: "xx".to_string(),
                });
            }
        }
        out
    })
}

#[test]
fn criterion_7_invariant_property_suite() {
    let mut pass = true;

    pass &= run_property(
        "triplet label provenance",
        (nli_group_strategy(), any::<u64>()),
        |(examples, seed)| {
            let build = build_triplets(&examples, seed);
            for t in &build.triplets {
                let from_pool = |label: NliLabel, hyp: &str| {
                    examples.iter().any(|e| {
                        e.premise == t.anchor && e.hypothesis == hyp && e.label == label
                    })
                };
                prop_assert!(from_pool(NliLabel::Entailment, &t.positive));
                prop_assert!(from_pool(NliLabel::Contradiction, &t.hard_negative));
            }
            Ok(())
        },
    );

    pass &= run_property(
        "language mixing preserves the multiset",
        (
            proptest::collection::btree_map(
                "[a-z]{1,4}",
                proptest::collection::vec("[a-z]{1,8}", 0..20),
                1..5,
            ),
            any::<u64>(),
        ),
        |(corpora, seed)| {
            let total: usize = corpora.values().map(Vec::len).sum();
            prop_assume!(total > 0);
            let mixed = mix_languages(&corpora, seed).unwrap();
            let mut expect: Vec<String> = corpora.values().flatten().cloned().collect();
            let mut got = mixed.clone();
            expect.sort();
            got.sort();
            prop_assert_eq!(expect, got);
            Ok(())
        },
    );

    pass &= run_property(
        "preprocessing is idempotent",
        ("\\PC{0,60}", any::<[bool; 5]>()),
        |(text, flags)| {
            let cfg = FilterConfig {
                strip_punctuation: flags[0],
                strip_urls: flags[1],
                strip_hashtags: flags[2],
                strip_roman: flags[3],
                collapse_whitespace: flags[4],
            };
            let once = preprocess(&text, &cfg);
            prop_assert_eq!(preprocess(&once, &cfg), once);
            Ok(())
        },
    );

    pass &= run_property(
        "similarity scoring is invariant to embedding scale",
        (
            proptest::collection::vec(
                (
                    proptest::collection::vec(-1.0f64..1.0, 4),
                    proptest::collection::vec(-1.0f64..1.0, 4),
                    0.01f64..100.0,
                    0.01f64..100.0,
                ),
                3..12,
            ),
            proptest::collection::vec(0.0f64..5.0, 12),
        ),
        |(pairs, gold)| {
            let mut plain = Vec::new();
            let mut scaled = Vec::new();
            for (u, v, su, sv) in &pairs {
                let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
                prop_assume!(norm(u) > 1e-6 && norm(v) > 1e-6);
                let ua = ndarray::Array1::from_vec(u.clone());
                let va = ndarray::Array1::from_vec(v.clone());
                plain.push(cosine(ua.view(), va.view()).unwrap());
                let ub = ua.mapv(|x| x * su);
                let vb = va.mapv(|x| x * sv);
                scaled.push(cosine(ub.view(), vb.view()).unwrap());
            }
            let gold = &gold[..pairs.len()];
            prop_assume!(!plain.windows(2).all(|w| w[0] == w[1]));
            prop_assume!(!gold.windows(2).all(|w| w[0] == w[1]));
            let r1 = spearman(&plain, gold).unwrap();
            let r2 = spearman(&scaled, gold).unwrap();
            prop_assert!((r1 - r2).abs() < 1e-9);
            Ok(())
        },
    );

    pass &= run_property(
        "cross-lingual matrix diagonal equals monolingual scores",
        (any::<u64>(), 1u64..10_000),
        |(model_seed, data_seed)| {
            let pseudo = xling_core::synthbench::PseudoLangSpec {
                n_langs: 2,
                base_vocab_size: 40,
                synonyms_per_value: 2,
                permutation_seed: data_seed,
                disjoint_surface_forms: true,
            };
            let sizes = SynthSizes {
                nli_groups: 2,
                sts_train_pairs: 2,
                sts_test_pairs: 12,
                cls_docs: 6,
            };
            let base = xling_core::synthbench::make_base_task(data_seed, &pseudo, &sizes);
            let tasks = make_pseudo_languages(&base, &pseudo);
            let languages: Vec<String> = tasks.keys().cloned().collect();
            let sts: BTreeMap<String, Vec<_>> = tasks
                .iter()
                .map(|(k, v)| (k.clone(), v.sts_test.clone()))
                .collect();
            let vocab = Vocab::from_texts(
                sts.values()
                    .flatten()
                    .flat_map(|p| [p.sentence1.as_str(), p.sentence2.as_str()]),
            );
            let spec = EncoderSpec {
                dim: 8,
                layers: 1,
                heads: 2,
                ffn_dim: 16,
                max_len: 8,
                ..Default::default()
            };
            let mut model =
                SentenceModel::new(spec, vocab, PoolingStrategy::Mean, model_seed).unwrap();
            let matrix =
                eval_crosslingual_matrix(&mut model, &sts, &languages, PoolingStrategy::Mean)
                    .unwrap();
            for (i, lang) in languages.iter().enumerate() {
                let mono = eval_sts(&mut model, &sts[lang], PoolingStrategy::Mean).unwrap();
                prop_assert!((matrix.scores[i][i] - mono.spearman).abs() < 1e-12);
            }
            Ok(())
        },
    );

    verdict(7, "invariant property suite (>=100 cases each)", pass);
}

// ---------------------------------------------------------------- C8

fn fixture_rows(path: &str) -> Vec<ReportRow> {
    let full = Path::new(env!("CARGO_MANIFEST_DIR")).join(path);
    let text = std::fs::read_to_string(&full).unwrap();
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        rows.push(ReportRow {
            model: cols[0].to_string(),
            recipe: cols[1].to_string(),
            lang1: cols[2].to_string(),
            lang2: cols[3].to_string(),
            metric: cols[4].to_string(),
            value: match cols[5] {
                "-" => None,
                v => Some(v.parse().unwrap()),
            },
            n: cols[6].parse().unwrap(),
        });
    }
    rows
}

fn column_of(rendered: &str, header: &str) -> Vec<String> {
    let lines: Vec<&str> = rendered.lines().collect();
    let cols: Vec<&str> = lines[0].split_whitespace().collect();
    let idx = cols.iter().position(|c| *c == header).unwrap();
    lines[1..]
        .iter()
        .map(|l| {
            l.split_whitespace()
                .nth(idx + 1) // +1 for the row label
                .unwrap()
                .to_string()
        })
        .collect()
}

#[test]
fn criterion_8_published_table_fixture_replay() {
    let mut pass = true;

    // Zero-shot comparison table: languages x models, one column per
    // multilingual model, unsupported cells rendered "-".
    let zero_shot = fixture_rows("tests/fixtures/zero_shot_rows.tsv");
    let rendered = render_report(&zero_shot, Layout::ZeroShotTable).unwrap();
    let sts_column = column_of(&rendered, "IndicSBERT-STS");
    pass &= sts_column
        == ["0.82", "0.82", "0.81", "0.81", "0.82", "0.82", "0.83", "0.75", "0.78", "0.77"];
    let mbert_column = column_of(&rendered, "mBERT");
    pass &= mbert_column[7] == "-"; // Odia is unsupported there
    pass &= rendered == render_report(&zero_shot, Layout::ZeroShotTable).unwrap();

    // Cross-lingual grid: the English row of the two-step model.
    let english = fixture_rows("tests/fixtures/crosslingual_english_rows.tsv");
    let rendered = render_report(&english, Layout::CrosslingualMatrix).unwrap();
    let lines: Vec<&str> = rendered.lines().collect();
    let cells: Vec<&str> = lines[1].split_whitespace().skip(1).collect();
    pass &= cells
        == [
            "0.85", "0.8", "0.8", "0.8", "0.79", "0.8", "0.79", "0.8", "0.72", "0.77", "0.76",
        ];

    verdict(8, "published-table fixture replay (bit-exact)", pass);
}
