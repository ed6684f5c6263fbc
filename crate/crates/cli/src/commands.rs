//! Pipeline subcommands. Each one is a plain function over a
//! resolved [`RunConfig`] so tests can drive the pipeline without
//! spawning the binary.

use crate::config::RunConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use xling_core::corpus::{
    self, build_triplets, mix_languages, preprocess, Manifest, NliExample, StsPair, Triplet,
};
use xling_core::encoder::{load_model, SentenceModel, Vocab};
use xling_core::error::Result;
use xling_core::eval::{eval_crosslingual_matrix, eval_sts};
use xling_core::report::{render_machine_rows, render_report, Layout, ReportRow};
use xling_core::synthbench::{run_desk_experiment, DeskConfig};
use xling_core::trainer::{run_recipe, Recipe, RecipeData};
use xling_core::CoreError;

const PIPELINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance block embedded in every artifact directory.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunStamp {
    pub config_hash: String,
    pub seed: u64,
    pub pipeline_version: String,
    pub config: RunConfig,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CoreError::io(parent.display().to_string(), e))?;
    }
    fs::write(path, text).map_err(|e| CoreError::io(path.display().to_string(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CoreError::Config(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

fn stamp_run(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.run_dir();
    fs::create_dir_all(&dir).map_err(|e| CoreError::io(dir.display().to_string(), e))?;
    let stamp = RunStamp {
        config_hash: config.hash(),
        seed: config.seed,
        pipeline_version: PIPELINE_VERSION.to_string(),
        config: config.clone(),
    };
    write_json(&dir.join("run.json"), &stamp)?;
    Ok(dir)
}

fn load_manifest(config: &RunConfig) -> Result<(Manifest, Vec<String>)> {
    let text = fs::read_to_string(&config.manifest)
        .map_err(|e| CoreError::io(config.manifest.display().to_string(), e))?;
    let manifest: Manifest = toml::from_str(&text)
        .map_err(|e| CoreError::Config(format!("{}: {e}", config.manifest.display())))?;
    let languages = if config.languages.is_empty() {
        manifest.language_tags()
    } else {
        for lang in &config.languages {
            if !manifest.languages.contains_key(lang) {
                return Err(CoreError::Config(format!(
                    "language {lang:?} not in manifest {}",
                    config.manifest.display()
                )));
            }
        }
        config.languages.clone()
    };
    if languages.is_empty() {
        return Err(CoreError::Config("manifest lists no languages".to_string()));
    }
    Ok((manifest, languages))
}

fn manifest_path<'a>(
    path: &'a Option<PathBuf>,
    lang: &str,
    kind: &str,
) -> Result<&'a PathBuf> {
    path.as_ref().ok_or_else(|| {
        CoreError::Config(format!("manifest entry for {lang} is missing {kind}"))
    })
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct LanguageStats {
    pub nli_records: usize,
    pub nli_issues: usize,
    pub triplet_groups: usize,
    pub triplets_emitted: usize,
    pub triplet_groups_dropped: usize,
    pub sts_records: usize,
    pub sts_issues: usize,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct PrepareStats {
    pub per_language: BTreeMap<String, LanguageStats>,
    pub mixed_triplets: usize,
    pub mixed_sts_pairs: usize,
}

fn clean_nli(examples: Vec<NliExample>, config: &RunConfig) -> Vec<NliExample> {
    examples
        .into_iter()
        .map(|mut e| {
            e.premise = preprocess(&e.premise, &config.filters);
            e.hypothesis = preprocess(&e.hypothesis, &config.filters);
            e
        })
        .collect()
}

fn clean_sts(pairs: Vec<StsPair>, config: &RunConfig) -> Vec<StsPair> {
    pairs
        .into_iter()
        .map(|mut p| {
            p.sentence1 = preprocess(&p.sentence1, &config.filters);
            p.sentence2 = preprocess(&p.sentence2, &config.filters);
            p
        })
        .collect()
}

fn tsv_escape_check(field: &str) -> Result<()> {
    if field.contains('\t') || field.contains('\n') {
        return Err(CoreError::Config(format!(
            "field contains tab/newline after preprocessing: {field:?}"
        )));
    }
    Ok(())
}

fn write_triplets_tsv(path: &Path, triplets: &[Triplet]) -> Result<()> {
    let mut out = String::new();
    for t in triplets {
        for field in [&t.anchor, &t.positive, &t.hard_negative, &t.language] {
            tsv_escape_check(field)?;
        }
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            t.anchor, t.positive, t.hard_negative, t.language
        ));
    }
    write_text(path, &out)
}

fn read_triplets_tsv(path: &Path) -> Result<Vec<Triplet>> {
    let text =
        fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(CoreError::MalformedRecord {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("expected 4 columns, got {}", cols.len()),
            });
        }
        out.push(Triplet {
            anchor: cols[0].to_string(),
            positive: cols[1].to_string(),
            hard_negative: cols[2].to_string(),
            language: cols[3].to_string(),
        });
    }
    Ok(out)
}

fn write_sts_tsv(path: &Path, pairs: &[StsPair]) -> Result<()> {
    let mut out = String::new();
    for p in pairs {
        for field in [&p.sentence1, &p.sentence2, &p.lang1, &p.lang2] {
            tsv_escape_check(field)?;
        }
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            p.sentence1, p.sentence2, p.gold, p.lang1, p.lang2, p.pair_id
        ));
    }
    write_text(path, &out)
}

fn read_sts_tsv(path: &Path) -> Result<Vec<StsPair>> {
    let text =
        fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(CoreError::MalformedRecord {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("expected 6 columns, got {}", cols.len()),
            });
        }
        let parse_err = |what: &str| CoreError::MalformedRecord {
            path: path.display().to_string(),
            line: idx + 1,
            message: format!("bad {what}: {line:?}"),
        };
        out.push(StsPair {
            sentence1: cols[0].to_string(),
            sentence2: cols[1].to_string(),
            gold: cols[2].parse().map_err(|_| parse_err("gold score"))?,
            lang1: cols[3].to_string(),
            lang2: cols[4].to_string(),
            pair_id: cols[5].parse().map_err(|_| parse_err("pair_id"))?,
        });
    }
    Ok(out)
}

/// Load corpora named by the manifest, preprocess, build triplets per
/// language, mix across languages, and materialize the training files
/// plus a stats summary.
pub fn cmd_prepare(config: &RunConfig) -> Result<PathBuf> {
    let (manifest, languages) = load_manifest(config)?;
    let dir = stamp_run(config)?;
    let prepared = dir.join("prepared");

    let mut stats = PrepareStats::default();
    let mut triplet_corpora: BTreeMap<String, Vec<Triplet>> = BTreeMap::new();
    let mut sts_corpora: BTreeMap<String, Vec<StsPair>> = BTreeMap::new();
    for lang in &languages {
        let files = &manifest.languages[lang];
        let nli_path = manifest_path(&files.nli_train, lang, "nli_train")?;
        let nli = corpus::load_nli(nli_path, lang)?;
        let examples = clean_nli(nli.items, config);
        let build = build_triplets(&examples, config.seed);

        let sts_path = manifest_path(&files.sts_train, lang, "sts_train")?;
        let sts = corpus::load_sts(sts_path, lang)?;
        let pairs = clean_sts(sts.items, config);

        stats.per_language.insert(
            lang.clone(),
            LanguageStats {
                nli_records: nli.records,
                nli_issues: nli.issues.len(),
                triplet_groups: build.stats.groups,
                triplets_emitted: build.stats.emitted,
                triplet_groups_dropped: build.stats.dropped,
                sts_records: sts.records,
                sts_issues: sts.issues.len(),
            },
        );
        triplet_corpora.insert(lang.clone(), build.triplets);
        sts_corpora.insert(lang.clone(), pairs);
    }

    let mixed_triplets = mix_languages(&triplet_corpora, config.seed)?;
    let mixed_sts = mix_languages(&sts_corpora, config.seed)?;
    stats.mixed_triplets = mixed_triplets.len();
    stats.mixed_sts_pairs = mixed_sts.len();

    write_triplets_tsv(&prepared.join("triplets.tsv"), &mixed_triplets)?;
    write_sts_tsv(&prepared.join("sts_train.tsv"), &mixed_sts)?;
    write_json(&prepared.join("stats.json"), &stats)?;
    Ok(dir)
}

fn build_run_model(
    config: &RunConfig,
    triplets: &[Triplet],
    sts_train: &[StsPair],
) -> Result<SentenceModel> {
    let mut texts: Vec<&str> = Vec::new();
    for t in triplets {
        texts.extend([t.anchor.as_str(), t.positive.as_str(), t.hard_negative.as_str()]);
    }
    for p in sts_train {
        texts.extend([p.sentence1.as_str(), p.sentence2.as_str()]);
    }
    let vocab = Vocab::from_texts(texts);
    SentenceModel::new(config.encoder.to_spec(), vocab, config.pooling()?, config.seed)
}

/// Train the configured recipe on the prepared artifacts; write
/// checkpoints and the training report. Requires `cmd_prepare` output
/// in the same run directory.
pub fn cmd_train(config: &RunConfig) -> Result<PathBuf> {
    let dir = stamp_run(config)?;
    let prepared = dir.join("prepared");
    let triplets = read_triplets_tsv(&prepared.join("triplets.tsv"))?;
    let sts_train = read_sts_tsv(&prepared.join("sts_train.tsv"))?;

    let model = build_run_model(config, &triplets, &sts_train)?;
    let models_dir = dir.join("models");
    fs::create_dir_all(&models_dir)
        .map_err(|e| CoreError::io(models_dir.display().to_string(), e))?;
    let data = RecipeData { triplets, sts_train };
    let (model, reports) = run_recipe(
        model,
        &data,
        config.recipe()?,
        &config.nli_train_config()?,
        &config.sts_train_config()?,
        Some(&models_dir),
    )?;
    // Vanilla has no training stage; persist the base model so eval
    // has a uniform artifact to load.
    if config.recipe()? == Recipe::Vanilla {
        xling_core::encoder::save_model(&model, &models_dir.join("vanilla.model"))?;
    }
    write_json(&dir.join("train_report.json"), &reports)?;
    let rendered: Vec<String> = reports.iter().map(|r| r.render()).collect();
    write_text(&dir.join("train_report.txt"), &rendered.join("\n"))?;
    Ok(dir)
}

fn final_checkpoint(config: &RunConfig, dir: &Path) -> Result<PathBuf> {
    let name = match config.recipe()? {
        Recipe::Vanilla => "vanilla.model",
        Recipe::OneStep => "step1-nli.model",
        Recipe::TwoStep => "step2-sts.model",
    };
    Ok(dir.join("models").join(name))
}

/// Evaluate the trained model on each language's STS test split and,
/// when configured, the full cross-lingual grid. Requires `cmd_train`
/// output in the same run directory.
pub fn cmd_eval(config: &RunConfig) -> Result<PathBuf> {
    let (manifest, languages) = load_manifest(config)?;
    let dir = stamp_run(config)?;
    let mut model = load_model(&final_checkpoint(config, &dir)?)?;
    let pooling = config.pooling()?;
    let recipe = config.recipe()?;
    let recipe_name = format!("{recipe:?}");

    let mut sts_by_lang: BTreeMap<String, Vec<StsPair>> = BTreeMap::new();
    for lang in &languages {
        let files = &manifest.languages[lang];
        let path = manifest_path(&files.sts_test, lang, "sts_test")?;
        let loaded = corpus::load_sts(path, lang)?;
        sts_by_lang.insert(lang.clone(), clean_sts(loaded.items, config));
    }

    let mut rows: Vec<ReportRow> = Vec::new();
    for lang in &languages {
        let result = eval_sts(&mut model, &sts_by_lang[lang], pooling)?;
        rows.push(ReportRow {
            model: "tiny".to_string(),
            recipe: recipe_name.clone(),
            lang1: lang.clone(),
            lang2: lang.clone(),
            metric: "spearman".to_string(),
            value: Some(result.spearman),
            n: result.n,
        });
    }
    let mut tables = render_report(&rows, Layout::SimilarityTable)?;

    if config.crosslingual {
        let matrix = eval_crosslingual_matrix(&mut model, &sts_by_lang, &languages, pooling)?;
        let mut grid_rows = Vec::new();
        for (i, a) in matrix.languages.iter().enumerate() {
            for (j, b) in matrix.languages.iter().enumerate() {
                grid_rows.push(ReportRow {
                    model: "tiny".to_string(),
                    recipe: recipe_name.clone(),
                    lang1: a.clone(),
                    lang2: b.clone(),
                    metric: "spearman".to_string(),
                    value: Some(matrix.scores[i][j]),
                    n: sts_by_lang[a].len(),
                });
            }
        }
        tables.push('\n');
        tables.push_str(&render_report(&grid_rows, Layout::CrosslingualMatrix)?);
        rows.extend(grid_rows);
    }

    let eval_dir = dir.join("eval");
    write_text(&eval_dir.join("rows.tsv"), &render_machine_rows(&rows))?;
    write_text(&eval_dir.join("tables.txt"), &tables)?;
    Ok(dir)
}

/// Medians the synthetic-benchmark acceptance gate reads.
#[derive(Debug, Serialize, Deserialize)]
pub struct SynthbenchMetrics {
    pub crosslingual_median: BTreeMap<String, f64>,
    pub monolingual_median: BTreeMap<String, f64>,
}

/// Run the pseudo-language desk experiment and write its row file,
/// per-recipe medians, and provenance stamp under `output_dir`.
pub fn cmd_synthbench(desk: &DeskConfig, output_dir: &Path) -> Result<PathBuf> {
    let report = run_desk_experiment(desk)?;
    let mut metrics = SynthbenchMetrics {
        crosslingual_median: BTreeMap::new(),
        monolingual_median: BTreeMap::new(),
    };
    for recipe in [Recipe::Vanilla, Recipe::OneStep, Recipe::TwoStep] {
        let name = format!("{recipe:?}");
        metrics
            .crosslingual_median
            .insert(name.clone(), report.median_crosslingual(recipe));
        metrics
            .monolingual_median
            .insert(name, report.median_monolingual(recipe));
    }
    fs::create_dir_all(output_dir)
        .map_err(|e| CoreError::io(output_dir.display().to_string(), e))?;
    write_text(&output_dir.join("desk_rows.tsv"), &report.render_rows())?;
    write_json(&output_dir.join("metrics.json"), &metrics)?;
    write_json(&output_dir.join("desk_config.json"), desk)?;
    Ok(output_dir.to_path_buf())
}

fn parse_report_rows(path: &Path) -> Result<Vec<ReportRow>> {
    let text =
        fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() || (idx == 0 && line.starts_with("model\t")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(CoreError::MalformedRecord {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("expected 7 columns, got {}", cols.len()),
            });
        }
        let parse_err = |what: &str| CoreError::MalformedRecord {
            path: path.display().to_string(),
            line: idx + 1,
            message: format!("bad {what}: {line:?}"),
        };
        let value = match cols[5] {
            "-" => None,
            v => Some(v.parse().map_err(|_| parse_err("value"))?),
        };
        rows.push(ReportRow {
            model: cols[0].to_string(),
            recipe: cols[1].to_string(),
            lang1: cols[2].to_string(),
            lang2: cols[3].to_string(),
            metric: cols[4].to_string(),
            value,
            n: cols[6].parse().map_err(|_| parse_err("n"))?,
        });
    }
    Ok(rows)
}

/// Render a machine-readable row file as a fixed-width table.
pub fn cmd_report(rows_path: &Path, layout: Layout) -> Result<String> {
    let rows = parse_report_rows(rows_path)?;
    render_report(&rows, layout)
}
