//! Dataset ingestion, preprocessing, triplet construction, and
//! deterministic multi-language corpus mixing.

mod manifest;
mod mix;
mod preprocess;
mod triplets;

pub use manifest::{LanguageFiles, Manifest};
pub use mix::mix_languages;
pub use preprocess::{preprocess, FilterConfig};
pub use triplets::{build_triplets, TripletBuild, TripletStats};

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// Gold STS scores live on a 0-5 human annotation scale.
pub const STS_SCALE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl NliLabel {
    pub fn parse(raw: &str) -> Option<NliLabel> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "entailment" => Some(NliLabel::Entailment),
            "neutral" => Some(NliLabel::Neutral),
            "contradiction" => Some(NliLabel::Contradiction),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NliExample {
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    pub language: String,
}

/// (anchor, positive, hard-negative) training unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: String,
    pub positive: String,
    pub hard_negative: String,
    pub language: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StsPair {
    pub sentence1: String,
    pub sentence2: String,
    /// Gold similarity on the 0-5 scale.
    pub gold: f64,
    pub lang1: String,
    pub lang2: String,
    /// Alignment index across translations of the same split.
    pub pair_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledDoc {
    pub text: String,
    pub label: String,
    pub language: String,
    pub split: Split,
}

/// A record that failed to parse; loads keep going and report these.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordIssue {
    pub line: usize,
    pub message: String,
}

/// Result of a lossy-tolerant load: well-formed items plus per-record
/// issues. `items.len() + issues.len() == records`.
#[derive(Debug, Clone)]
pub struct LoadOutcome<T> {
    pub items: Vec<T>,
    pub issues: Vec<RecordIssue>,
    pub records: usize,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut lines = Vec::new();
    for line in reader.lines() {
        lines.push(line.map_err(|e| CoreError::io(path.display().to_string(), e))?);
    }
    Ok(lines)
}

/// Load a tab-separated NLI file: `premise \t hypothesis \t label`.
pub fn load_nli(path: &Path, language: &str) -> Result<LoadOutcome<NliExample>> {
    let lines = read_lines(path)?;
    let mut out = LoadOutcome {
        items: Vec::new(),
        issues: Vec::new(),
        records: 0,
    };
    for (idx, line) in lines.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        out.records += 1;
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            out.issues.push(RecordIssue {
                line: lineno,
                message: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
            continue;
        }
        let Some(label) = NliLabel::parse(fields[2]) else {
            out.issues.push(RecordIssue {
                line: lineno,
                message: format!("unknown NLI label {:?}", fields[2]),
            });
            continue;
        };
        out.items.push(NliExample {
            premise: fields[0].to_string(),
            hypothesis: fields[1].to_string(),
            label,
            language: language.to_string(),
        });
    }
    Ok(out)
}

/// Load a tab-separated STS file: `sentence1 \t sentence2 \t score`.
/// `pair_id` is the record index within the file.
pub fn load_sts(path: &Path, lang: &str) -> Result<LoadOutcome<StsPair>> {
    let lines = read_lines(path)?;
    let mut out = LoadOutcome {
        items: Vec::new(),
        issues: Vec::new(),
        records: 0,
    };
    for (idx, line) in lines.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let record_index = out.records;
        out.records += 1;
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            out.issues.push(RecordIssue {
                line: lineno,
                message: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
            continue;
        }
        let gold: f64 = match fields[2].trim().parse() {
            Ok(v) => v,
            Err(_) => {
                out.issues.push(RecordIssue {
                    line: lineno,
                    message: format!("non-numeric score {:?}", fields[2]),
                });
                continue;
            }
        };
        if !(0.0..=STS_SCALE).contains(&gold) {
            out.issues.push(RecordIssue {
                line: lineno,
                message: format!("score {gold} outside [0, {STS_SCALE}]"),
            });
            continue;
        }
        out.items.push(StsPair {
            sentence1: fields[0].to_string(),
            sentence2: fields[1].to_string(),
            gold,
            lang1: lang.to_string(),
            lang2: lang.to_string(),
            pair_id: record_index,
        });
    }
    Ok(out)
}

/// Load a tab-separated classification file: `text \t label`.
pub fn load_labeled(path: &Path, language: &str, split: Split) -> Result<LoadOutcome<LabeledDoc>> {
    let lines = read_lines(path)?;
    let mut out = LoadOutcome {
        items: Vec::new(),
        issues: Vec::new(),
        records: 0,
    };
    for (idx, line) in lines.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        out.records += 1;
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            out.issues.push(RecordIssue {
                line: lineno,
                message: format!("expected 2 tab-separated fields, got {}", fields.len()),
            });
            continue;
        }
        out.items.push(LabeledDoc {
            text: fields[0].to_string(),
            label: fields[1].to_string(),
            language: language.to_string(),
            split,
        });
    }
    Ok(out)
}
