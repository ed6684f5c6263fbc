// Calibration harness for the pseudo-language desk experiment.
// Run: cargo run --release -p xling-core --example desk_cal -- \
//   [--seeds 1,2,3] [--nli-epochs N] [--sts-epochs N] [--bs N] [--lr F]
//   [--scale F] [--groups N] [--dim N] [--layers N]

use std::time::Instant;
use xling_core::synthbench::{run_desk_experiment, DeskConfig};
use xling_core::trainer::Recipe;

fn main() {
    let mut config = DeskConfig::default();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut i = 0;
    while i < args.len() {
        let val = args.get(i + 1).expect("flag needs a value").clone();
        match args[i].as_str() {
            "--seeds" => config.seeds = val.split(',').map(|s| s.parse().unwrap()).collect(),
            "--nli-epochs" => config.nli_epochs = val.parse().unwrap(),
            "--sts-epochs" => config.sts_epochs = val.parse().unwrap(),
            "--bs" => config.batch_size = val.parse().unwrap(),
            "--lr" => config.learning_rate = val.parse().unwrap(),
            "--scale" => config.mnrl_scale = val.parse().unwrap(),
            "--init-std" => config.init_std = val.parse().unwrap(),
            "--syn" => config.pseudo.synonyms_per_value = val.parse().unwrap(),
            "--vocab" => config.pseudo.base_vocab_size = val.parse().unwrap(),
            "--groups" => config.sizes.nli_groups = val.parse().unwrap(),
            "--test-pairs" => config.sizes.sts_test_pairs = val.parse().unwrap(),
            "--pooling" => {
                config.pooling = match val.as_str() {
                    "mean" => xling_core::encoder::PoolingStrategy::Mean,
                    "cls" => xling_core::encoder::PoolingStrategy::Cls,
                    other => panic!("unknown pooling {other}"),
                }
            }
            "--dim" => config.encoder.dim = val.parse().unwrap(),
            "--layers" => config.encoder.layers = val.parse().unwrap(),
            "--train-langs" => {
                config.train_languages =
                    Some(val.split(',').map(|s| s.to_string()).collect())
            }
            other => panic!("unknown flag {other}"),
        }
        i += 2;
    }
    let start = Instant::now();
    let report = run_desk_experiment(&config).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    for recipe in [Recipe::Vanilla, Recipe::OneStep, Recipe::TwoStep] {
        let mut per_seed: std::collections::BTreeMap<u64, (f64, f64, usize, usize)> =
            Default::default();
        for row in &report.rows {
            if row.recipe != recipe {
                continue;
            }
            let e = per_seed.entry(row.seed).or_default();
            if row.lang1 == row.lang2 {
                e.1 += row.spearman;
                e.3 += 1;
            } else {
                e.0 += row.spearman;
                e.2 += 1;
            }
        }
        let detail: Vec<String> = per_seed
            .iter()
            .map(|(s, (x, m, nx, nm))| {
                format!("s{s}: x={:+.3} m={:+.3}", x / *nx as f64, m / *nm as f64)
            })
            .collect();
        println!(
            "{:>9}: cross-lingual median {:+.4}  monolingual median {:+.4}  [{}]",
            format!("{recipe:?}"),
            report.median_crosslingual(recipe),
            report.median_monolingual(recipe),
            detail.join("  "),
        );
    }
    println!("elapsed: {elapsed:.1}s for {} seed(s)", config.seeds.len());
}
