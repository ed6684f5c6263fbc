//! Desk-scale verification harness.
//!
//! Generates a compositional toy task (slot/value sentences with
//! rule-computable NLI labels and graded STS scores), derives
//! pseudo-languages from it by bijective token relabeling, and runs
//! the vanilla / one-step / two-step comparison on the mixed corpus.
//!
//! Generator grammar: a sentence realizes a semantic tuple
//! `(v_1 .. v_K)`, one value per slot, rendered as one token per slot
//! in slot order. Each (slot, value) has a small set of synonym
//! surface forms, so paraphrases exist. Labels follow the rule:
//! identical tuples entail, tuples differing in exactly one slot
//! contradict, anything else is neutral. STS gold for a pair is
//! `5 * matching_slots / K`.

use crate::corpus::{mix_languages, LabeledDoc, NliExample, NliLabel, Split, StsPair, Triplet};
use crate::corpus::build_triplets;
use crate::encoder::{EncoderSpec, PoolingStrategy, SentenceModel, Vocab};
use crate::error::{CoreError, Result};
use crate::eval::eval_crosslingual_matrix;
use crate::rng::rng_for;
use crate::trainer::{train_step1_nli, train_step2_sts, Recipe, TrainConfig, TrainStep};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoLangSpec {
    pub n_langs: usize,
    /// Content-token budget; the grammar is sized to fill it.
    pub base_vocab_size: usize,
    /// Surface synonyms per slot value. More synonyms means fewer
    /// distinct values per slot under the same token budget.
    pub synonyms_per_value: usize,
    pub permutation_seed: u64,
    /// Prefix every language's token strings so vocabularies never
    /// collide; any cross-lingual alignment must then come from
    /// training, not lexical overlap.
    pub disjoint_surface_forms: bool,
}

impl Default for PseudoLangSpec {
    fn default() -> Self {
        PseudoLangSpec {
            n_langs: 2,
            base_vocab_size: 200,
            synonyms_per_value: 2,
            permutation_seed: 17,
            disjoint_surface_forms: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthSizes {
    pub nli_groups: usize,
    pub sts_train_pairs: usize,
    pub sts_test_pairs: usize,
    pub cls_docs: usize,
}

impl Default for SynthSizes {
    fn default() -> Self {
        SynthSizes {
            nli_groups: 2000,
            sts_train_pairs: 500,
            // Large enough that rank-correlation noise (~1/sqrt(n)) stays
            // well under the effect sizes being measured.
            sts_test_pairs: 2000,
            cls_docs: 300,
        }
    }
}

/// Grammar shape: slots × values × synonyms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Grammar {
    pub slots: usize,
    pub values: usize,
    pub synonyms: usize,
}

impl Grammar {
    /// Size the grammar to a content-token budget.
    pub fn for_vocab(base_vocab_size: usize) -> Grammar {
        Self::for_vocab_with_synonyms(base_vocab_size, 2)
    }

    pub fn for_vocab_with_synonyms(base_vocab_size: usize, synonyms: usize) -> Grammar {
        let slots = 5;
        let values = (base_vocab_size / (slots * synonyms)).max(2);
        Grammar { slots, values, synonyms }
    }

    fn surface(&self, slot: usize, value: usize, synonym: usize) -> String {
        format!("s{slot}v{value}x{synonym}")
    }

    /// All content tokens in a stable order.
    pub fn tokens(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.slots * self.values * self.synonyms);
        for s in 0..self.slots {
            for v in 0..self.values {
                for x in 0..self.synonyms {
                    out.push(self.surface(s, v, x));
                }
            }
        }
        out
    }

    /// Zipf-ish value draw; distinct frequency signatures break
    /// relabeling symmetry between values.
    fn draw_value(&self, rng: &mut impl Rng) -> usize {
        let weights: Vec<f64> = (0..self.values).map(|v| 1.0 / (v as f64 + 1.0)).collect();
        let total: f64 = weights.iter().sum();
        let mut t = rng.gen_range(0.0..total);
        for (v, w) in weights.iter().enumerate() {
            if t < *w {
                return v;
            }
            t -= *w;
        }
        self.values - 1
    }

    fn draw_tuple(&self, rng: &mut impl Rng) -> Vec<usize> {
        (0..self.slots).map(|_| self.draw_value(rng)).collect()
    }

    fn render(&self, tuple: &[usize], rng: &mut impl Rng) -> String {
        tuple
            .iter()
            .enumerate()
            .map(|(s, &v)| {
                // first synonym is the common surface form
                let syn = if rng.gen_bool(0.7) { 0 } else { rng.gen_range(0..self.synonyms) };
                self.surface(s, v, syn)
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn flip_slots(&self, tuple: &[usize], count: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut out = tuple.to_vec();
        let mut slots: Vec<usize> = (0..self.slots).collect();
        slots.shuffle(rng);
        for &s in slots.iter().take(count) {
            let mut v = rng.gen_range(0..self.values);
            while v == tuple[s] {
                v = rng.gen_range(0..self.values);
            }
            out[s] = v;
        }
        out
    }

    /// Rule oracle for NLI labels over semantic tuples.
    pub fn label_of(&self, premise: &[usize], hypothesis: &[usize]) -> NliLabel {
        let diff = premise
            .iter()
            .zip(hypothesis)
            .filter(|(a, b)| a != b)
            .count();
        match diff {
            0 => NliLabel::Entailment,
            1 => NliLabel::Contradiction,
            _ => NliLabel::Neutral,
        }
    }

    /// Rule oracle for STS gold over semantic tuples.
    pub fn gold_of(&self, a: &[usize], b: &[usize]) -> f64 {
        let matching = a.iter().zip(b).filter(|(x, y)| x == y).count();
        5.0 * matching as f64 / self.slots as f64
    }
}

/// One language's datasets plus the semantic tuples they realize
/// (kept for rule-oracle checks).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthTask {
    pub language: String,
    pub grammar: Grammar,
    pub nli_train: Vec<NliExample>,
    pub sts_train: Vec<StsPair>,
    pub sts_test: Vec<StsPair>,
    pub cls: Vec<LabeledDoc>,
    /// (premise tuple, hypothesis tuple) per nli_train entry.
    pub nli_tuples: Vec<(Vec<usize>, Vec<usize>)>,
}

fn make_sts(
    grammar: &Grammar,
    count: usize,
    lang: &str,
    rng: &mut impl Rng,
) -> Vec<StsPair> {
    let mut out = Vec::with_capacity(count);
    for pair_id in 0..count {
        let a = grammar.draw_tuple(rng);
        let matching = rng.gen_range(0..=grammar.slots);
        let b = grammar.flip_slots(&a, grammar.slots - matching, rng);
        out.push(StsPair {
            sentence1: grammar.render(&a, rng),
            sentence2: grammar.render(&b, rng),
            gold: grammar.gold_of(&a, &b),
            lang1: lang.to_string(),
            lang2: lang.to_string(),
            pair_id,
        });
    }
    out
}

/// Generate the base task in the base vocabulary; deterministic by
/// seed.
pub fn make_base_task(seed: u64, spec: &PseudoLangSpec, sizes: &SynthSizes) -> SynthTask {
    let grammar =
        Grammar::for_vocab_with_synonyms(spec.base_vocab_size, spec.synonyms_per_value.max(1));
    let lang = "base";
    let mut rng = rng_for(seed, "synthbench-base");

    let mut nli_train = Vec::new();
    let mut nli_tuples = Vec::new();
    for _ in 0..sizes.nli_groups {
        let premise_tuple = grammar.draw_tuple(&mut rng);
        let premise = grammar.render(&premise_tuple, &mut rng);
        let mut push = |hyp_tuple: Vec<usize>, rng: &mut rand_chacha::ChaCha8Rng| {
            let label = grammar.label_of(&premise_tuple, &hyp_tuple);
            nli_train.push(NliExample {
                premise: premise.clone(),
                hypothesis: grammar.render(&hyp_tuple, rng),
                label,
                language: lang.to_string(),
            });
            nli_tuples.push((premise_tuple.clone(), hyp_tuple));
        };
        // paraphrases entail, one-slot flips contradict, two-slot
        // flips are neutral
        push(premise_tuple.clone(), &mut rng);
        push(premise_tuple.clone(), &mut rng);
        push(grammar.flip_slots(&premise_tuple, 1, &mut rng), &mut rng);
        push(grammar.flip_slots(&premise_tuple, 1, &mut rng), &mut rng);
        push(grammar.flip_slots(&premise_tuple, 2, &mut rng), &mut rng);
    }

    let sts_train = make_sts(&grammar, sizes.sts_train_pairs, lang, &mut rng);
    let sts_test = make_sts(&grammar, sizes.sts_test_pairs, lang, &mut rng);

    let mut cls = Vec::new();
    for i in 0..sizes.cls_docs {
        let tuple = grammar.draw_tuple(&mut rng);
        let split = match i % 10 {
            8 => Split::Val,
            9 => Split::Test,
            _ => Split::Train,
        };
        cls.push(LabeledDoc {
            text: grammar.render(&tuple, &mut rng),
            label: format!("c{}", tuple[0] % 4),
            language: lang.to_string(),
            split,
        });
    }

    SynthTask {
        language: lang.to_string(),
        grammar,
        nli_train,
        sts_train,
        sts_test,
        cls,
        nli_tuples,
    }
}

/// Bijective token map for one pseudo-language: a seeded permutation
/// of the base content tokens, with optional language-prefixed
/// surface forms.
pub fn token_map(
    base_tokens: &[String],
    tag: &str,
    permutation_seed: u64,
    disjoint_surface_forms: bool,
) -> BTreeMap<String, String> {
    let mut targets: Vec<usize> = (0..base_tokens.len()).collect();
    let mut rng = rng_for(permutation_seed, &format!("pseudo-lang-{tag}"));
    targets.shuffle(&mut rng);
    base_tokens
        .iter()
        .zip(targets)
        .map(|(src, dst)| {
            let surface = if disjoint_surface_forms {
                format!("{tag}_{}", base_tokens[dst])
            } else {
                base_tokens[dst].clone()
            };
            (src.clone(), surface)
        })
        .collect()
}

fn map_text(text: &str, map: &BTreeMap<String, String>) -> String {
    text.split_whitespace()
        .map(|tok| map.get(tok).map(String::as_str).unwrap_or(tok))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Apply a token map to every text; labels, gold scores, and pair_ids
/// are untouched.
pub fn apply_token_map(base: &SynthTask, map: &BTreeMap<String, String>, tag: &str) -> SynthTask {
    SynthTask {
        language: tag.to_string(),
        grammar: base.grammar,
        nli_train: base
            .nli_train
            .iter()
            .map(|e| NliExample {
                premise: map_text(&e.premise, map),
                hypothesis: map_text(&e.hypothesis, map),
                label: e.label,
                language: tag.to_string(),
            })
            .collect(),
        sts_train: base
            .sts_train
            .iter()
            .map(|p| StsPair {
                sentence1: map_text(&p.sentence1, map),
                sentence2: map_text(&p.sentence2, map),
                gold: p.gold,
                lang1: tag.to_string(),
                lang2: tag.to_string(),
                pair_id: p.pair_id,
            })
            .collect(),
        sts_test: base
            .sts_test
            .iter()
            .map(|p| StsPair {
                sentence1: map_text(&p.sentence1, map),
                sentence2: map_text(&p.sentence2, map),
                gold: p.gold,
                lang1: tag.to_string(),
                lang2: tag.to_string(),
                pair_id: p.pair_id,
            })
            .collect(),
        cls: base
            .cls
            .iter()
            .map(|d| LabeledDoc {
                text: map_text(&d.text, map),
                label: d.label.clone(),
                language: tag.to_string(),
                split: d.split,
            })
            .collect(),
        nli_tuples: base.nli_tuples.clone(),
    }
}

/// Derive one task per pseudo-language from the base task.
pub fn make_pseudo_languages(
    base: &SynthTask,
    spec: &PseudoLangSpec,
) -> BTreeMap<String, SynthTask> {
    let base_tokens = base.grammar.tokens();
    let mut out = BTreeMap::new();
    for l in 0..spec.n_langs {
        let tag = format!("pl{l}");
        let map = token_map(
            &base_tokens,
            &tag,
            spec.permutation_seed,
            spec.disjoint_surface_forms,
        );
        out.insert(tag.clone(), apply_token_map(base, &map, &tag));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeskConfig {
    pub pseudo: PseudoLangSpec,
    pub sizes: SynthSizes,
    pub data_seed: u64,
    pub seeds: Vec<u64>,
    pub encoder: EncoderSpec,
    pub pooling: PoolingStrategy,
    pub nli_epochs: usize,
    pub sts_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub mnrl_scale: f64,
    /// Initialization scale for fresh encoder parameters. Small values
    /// let the (shared) gradient signal dominate the random start, which
    /// is what lets relabeled-vocabulary languages line up.
    pub init_std: f32,
    /// When set, restrict training corpora to these languages; the
    /// evaluation still covers all languages (leakage control).
    pub train_languages: Option<Vec<String>>,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig {
            pseudo: PseudoLangSpec::default(),
            sizes: SynthSizes::default(),
            data_seed: 1234,
            seeds: vec![1, 2, 3],
            encoder: EncoderSpec {
                dim: 96,
                layers: 2,
                heads: 4,
                ffn_dim: 128,
                max_len: 32,
                ..Default::default()
            },
            pooling: PoolingStrategy::Mean,
            nli_epochs: 8,
            sts_epochs: 4,
            batch_size: 4,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            mnrl_scale: 10.0,
            init_std: 0.01,
            train_languages: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeskRow {
    pub recipe: Recipe,
    pub seed: u64,
    pub lang1: String,
    pub lang2: String,
    pub spearman: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeskReport {
    pub config: DeskConfig,
    pub rows: Vec<DeskRow>,
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

impl DeskReport {
    fn per_seed_scores(&self, recipe: Recipe, diagonal: bool) -> Vec<f64> {
        let mut by_seed: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for row in &self.rows {
            if row.recipe == recipe && (row.lang1 == row.lang2) == diagonal {
                by_seed.entry(row.seed).or_default().push(row.spearman);
            }
        }
        by_seed
            .values()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect()
    }

    /// Median over seeds of the mean off-diagonal Spearman.
    pub fn median_crosslingual(&self, recipe: Recipe) -> f64 {
        median(&mut self.per_seed_scores(recipe, false))
    }

    /// Median over seeds of the mean diagonal (monolingual) Spearman.
    pub fn median_monolingual(&self, recipe: Recipe) -> f64 {
        median(&mut self.per_seed_scores(recipe, true))
    }

    /// Machine-readable rows: `recipe, seed, lang1, lang2, spearman`.
    pub fn render_rows(&self) -> String {
        let mut out = String::from("recipe\tseed\tlang1\tlang2\tspearman\n");
        for row in &self.rows {
            let recipe = match row.recipe {
                Recipe::Vanilla => "vanilla",
                Recipe::OneStep => "one_step",
                Recipe::TwoStep => "two_step",
            };
            out.push_str(&format!(
                "{recipe}\t{}\t{}\t{}\t{:.6}\n",
                row.seed, row.lang1, row.lang2, row.spearman
            ));
        }
        out
    }
}

/// Train vanilla / one-step / two-step on the mixed pseudo-language
/// corpus with a fresh reference encoder per seed and evaluate the
/// full cross-lingual matrix for each recipe.
pub fn run_desk_experiment(config: &DeskConfig) -> Result<DeskReport> {
    if config.pseudo.n_langs < 1 {
        return Err(CoreError::Config("desk experiment needs >= 1 language".to_string()));
    }
    let base = make_base_task(config.data_seed, &config.pseudo, &config.sizes);
    let tasks = make_pseudo_languages(&base, &config.pseudo);
    let languages: Vec<String> = tasks.keys().cloned().collect();
    let train_languages: Vec<String> = config
        .train_languages
        .clone()
        .unwrap_or_else(|| languages.clone());
    for lang in &train_languages {
        if !tasks.contains_key(lang) {
            return Err(CoreError::Config(format!("unknown train language {lang}")));
        }
    }

    let sts_by_lang: BTreeMap<String, Vec<StsPair>> = tasks
        .iter()
        .map(|(tag, task)| (tag.clone(), task.sts_test.clone()))
        .collect();

    // deterministic vocab over every text in the experiment
    let mut all_texts: Vec<&str> = Vec::new();
    for task in tasks.values() {
        for e in &task.nli_train {
            all_texts.push(&e.premise);
            all_texts.push(&e.hypothesis);
        }
        for p in task.sts_train.iter().chain(&task.sts_test) {
            all_texts.push(&p.sentence1);
            all_texts.push(&p.sentence2);
        }
        for d in &task.cls {
            all_texts.push(&d.text);
        }
    }
    let vocab = Vocab::from_texts(all_texts);

    let mut rows = Vec::new();
    for &seed in &config.seeds {
        // per-language triplets, then seeded mixing
        let mut triplet_corpora: BTreeMap<String, Vec<Triplet>> = BTreeMap::new();
        let mut sts_corpora: BTreeMap<String, Vec<StsPair>> = BTreeMap::new();
        for lang in &train_languages {
            let task = &tasks[lang];
            let build = build_triplets(&task.nli_train, seed);
            triplet_corpora.insert(lang.clone(), build.triplets);
            sts_corpora.insert(lang.clone(), task.sts_train.clone());
        }
        let mixed_triplets = mix_languages(&triplet_corpora, seed)?;
        let mixed_sts = mix_languages(&sts_corpora, seed)?;

        let vanilla = SentenceModel::with_init(
            config.encoder.clone(),
            vocab.clone(),
            config.pooling,
            seed,
            Some(config.init_std),
        )?;

        let nli_cfg = TrainConfig {
            step: TrainStep::Nli,
            epochs: config.nli_epochs,
            batch_size: config.batch_size,
            learning_rate: config.learning_rate,
            weight_decay: config.weight_decay,
            seed,
            pooling: config.pooling,
            mnrl: crate::objectives::MnrlConfig { scale: config.mnrl_scale },
        };
        let sts_cfg = TrainConfig {
            step: TrainStep::Sts,
            epochs: config.sts_epochs,
            ..nli_cfg
        };

        let mut one_step = vanilla.clone();
        train_step1_nli(&mut one_step, &mixed_triplets, &nli_cfg)?;
        let mut two_step = one_step.clone();
        train_step2_sts(&mut two_step, &mixed_sts, &sts_cfg)?;

        for (recipe, model) in [
            (Recipe::Vanilla, vanilla),
            (Recipe::OneStep, one_step),
            (Recipe::TwoStep, two_step),
        ] {
            let mut model = model;
            let matrix = eval_crosslingual_matrix(&mut model, &sts_by_lang, &languages, config.pooling)?;
            for (i, a) in matrix.languages.iter().enumerate() {
                for (j, b) in matrix.languages.iter().enumerate() {
                    rows.push(DeskRow {
                        recipe,
                        seed,
                        lang1: a.clone(),
                        lang2: b.clone(),
                        spearman: matrix.scores[i][j],
                    });
                }
            }
        }
    }
    Ok(DeskReport {
        config: config.clone(),
        rows,
    })
}
