use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// Per-language dataset file locations.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LanguageFiles {
    pub nli_train: Option<PathBuf>,
    pub sts_train: Option<PathBuf>,
    pub sts_test: Option<PathBuf>,
    pub cls_train: Option<PathBuf>,
    pub cls_val: Option<PathBuf>,
    pub cls_test: Option<PathBuf>,
}

/// Maps language tags to dataset files per split.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub languages: BTreeMap<String, LanguageFiles>,
}

impl Manifest {
    pub fn language_tags(&self) -> Vec<String> {
        self.languages.keys().cloned().collect()
    }
}
