//! Deterministic fixed-width table rendering for evaluation results,
//! plus the machine-readable row format.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// One result cell. `value = None` renders as "-" (e.g. a language a
/// model does not support).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub recipe: String,
    pub lang1: String,
    pub lang2: String,
    pub metric: String,
    pub value: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Languages × recipes for one model.
    SimilarityTable,
    /// Languages × languages for one model/recipe.
    CrosslingualMatrix,
    /// Languages × models.
    ZeroShotTable,
}

/// Two-decimal rendering with trailing zeros trimmed, matching the
/// convention of published similarity tables (0.80 -> "0.8").
pub fn format_score(v: f64) -> String {
    let mut s = format!("{:.2}", v);
    while s.contains('.') && s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

fn cell(value: Option<f64>) -> String {
    value.map(format_score).unwrap_or_else(|| "-".to_string())
}

fn first_occurrence<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = Vec::new();
    for item in items {
        if !seen.iter().any(|s: &String| s == item) {
            seen.push(item.to_string());
        }
    }
    seen
}

fn render_grid(corner: &str, columns: &[String], row_labels: &[String], cells: &[Vec<String>]) -> String {
    let mut widths = vec![corner.len().max(row_labels.iter().map(String::len).max().unwrap_or(0))];
    for (j, col) in columns.iter().enumerate() {
        let w = col
            .len()
            .max(cells.iter().map(|r| r[j].len()).max().unwrap_or(0));
        widths.push(w);
    }
    let mut out = String::new();
    let mut line = vec![format!("{corner:<width$}", width = widths[0])];
    for (j, col) in columns.iter().enumerate() {
        line.push(format!("{col:>width$}", width = widths[j + 1]));
    }
    out.push_str(&line.join("  "));
    out.push('\n');
    for (i, label) in row_labels.iter().enumerate() {
        let mut line = vec![format!("{label:<width$}", width = widths[0])];
        for (j, value) in cells[i].iter().enumerate() {
            line.push(format!("{value:>width$}", width = widths[j + 1]));
        }
        out.push_str(&line.join("  "));
        out.push('\n');
    }
    out
}

fn lookup<'a>(
    rows: &'a [ReportRow],
    pred: impl Fn(&ReportRow) -> bool,
) -> Option<&'a ReportRow> {
    rows.iter().find(|r| pred(r))
}

/// Render result rows as a deterministic fixed-width table.
pub fn render_report(rows: &[ReportRow], layout: Layout) -> Result<String> {
    if rows.is_empty() {
        return Err(CoreError::EmptyInput("render_report: no rows".to_string()));
    }
    match layout {
        Layout::ZeroShotTable => {
            let models = first_occurrence(rows.iter().map(|r| r.model.as_str()));
            let languages = first_occurrence(rows.iter().map(|r| r.lang1.as_str()));
            let cells: Vec<Vec<String>> = languages
                .iter()
                .map(|lang| {
                    models
                        .iter()
                        .map(|model| {
                            cell(
                                lookup(rows, |r| &r.model == model && &r.lang1 == lang)
                                    .and_then(|r| r.value),
                            )
                        })
                        .collect()
                })
                .collect();
            Ok(render_grid("", &models, &languages, &cells))
        }
        Layout::CrosslingualMatrix => {
            let lang1 = first_occurrence(rows.iter().map(|r| r.lang1.as_str()));
            let lang2 = first_occurrence(rows.iter().map(|r| r.lang2.as_str()));
            let mut cells = Vec::with_capacity(lang1.len());
            for a in &lang1 {
                let mut row = Vec::with_capacity(lang2.len());
                for b in &lang2 {
                    let hit = lookup(rows, |r| &r.lang1 == a && &r.lang2 == b);
                    if hit.is_none() {
                        return Err(CoreError::Config(format!(
                            "render_report: missing cell ({a}, {b})"
                        )));
                    }
                    row.push(cell(hit.and_then(|r| r.value)));
                }
                cells.push(row);
            }
            Ok(render_grid("", &lang2, &lang1, &cells))
        }
        Layout::SimilarityTable => {
            let recipes = first_occurrence(rows.iter().map(|r| r.recipe.as_str()));
            let languages = first_occurrence(rows.iter().map(|r| r.lang1.as_str()));
            let cells: Vec<Vec<String>> = languages
                .iter()
                .map(|lang| {
                    recipes
                        .iter()
                        .map(|recipe| {
                            cell(
                                lookup(rows, |r| &r.recipe == recipe && &r.lang1 == lang)
                                    .and_then(|r| r.value),
                            )
                        })
                        .collect()
                })
                .collect();
            Ok(render_grid("", &recipes, &languages, &cells))
        }
    }
}

/// Machine-readable rows:
/// `model \t recipe \t lang1 \t lang2 \t metric \t value \t n`.
pub fn render_machine_rows(rows: &[ReportRow]) -> String {
    let mut out = String::from("model\trecipe\tlang1\tlang2\tmetric\tvalue\tn\n");
    for r in rows {
        let value = r
            .value
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "-".to_string());
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.model, r.recipe, r.lang1, r.lang2, r.metric, value, r.n
        ));
    }
    out
}
