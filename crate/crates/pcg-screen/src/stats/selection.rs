//! Per-feature significance screening of the handcrafted vector.
//!
//! Each feature's CHD and non-CHD value distributions are compared with the
//! Mann-Whitney U test; features whose two-sided p falls below alpha get the
//! `selected` flag. The report is persisted as JSON for inspection — the
//! default pipeline feeds the full 11-dim vector to the classifier either
//! way, so selection is diagnostic rather than a hard filter.

use std::path::Path;

use crate::audio::Label;

use super::mann_whitney::{mann_whitney_u, StatsError};

/// Per-recording handcrafted values with their class labels, ready for
/// feature-wise group comparison.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl FeatureTable {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<Label>,
    ) -> Result<Self, StatsError> {
        if rows.len() != labels.len() {
            return Err(StatsError::SingleClassOnly(format!(
                "row/label length mismatch: {} rows vs {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for row in &rows {
            if row.len() != feature_names.len() {
                return Err(StatsError::SingleClassOnly(format!(
                    "row has {} values but there are {} feature names",
                    row.len(),
                    feature_names.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(StatsError::NonFiniteValue);
            }
        }
        Ok(Self { feature_names, rows, labels })
    }

    /// Values of one feature split by class: (CHD, NonCHD).
    fn class_columns(&self, feature: usize) -> (Vec<f64>, Vec<f64>) {
        let mut chd = Vec::new();
        let mut non_chd = Vec::new();
        for (row, label) in self.rows.iter().zip(&self.labels) {
            match label {
                Label::Chd => chd.push(row[feature]),
                Label::NonChd => non_chd.push(row[feature]),
            }
        }
        (chd, non_chd)
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FeatureTest {
    pub feature: String,
    #[serde(rename = "U")]
    pub u: f64,
    pub p: f64,
    pub selected: bool,
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub alpha: f64,
    pub features: Vec<FeatureTest>,
}

impl SelectionResult {
    pub fn selected_names(&self) -> Vec<&str> {
        self.features.iter().filter(|f| f.selected).map(|f| f.feature.as_str()).collect()
    }

    /// Writes the per-feature report as a JSON array.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(&self.features)?;
        text.push('\n');
        std::fs::write(path, text)
    }
}

/// Runs the U test for every feature, CHD values as sample a. A feature is
/// selected when its two-sided p is strictly below alpha.
pub fn select_features(table: &FeatureTable, alpha: f64) -> Result<SelectionResult, StatsError> {
    let n_chd = table.labels.iter().filter(|l| **l == Label::Chd).count();
    let n_non = table.labels.len() - n_chd;
    if n_chd == 0 || n_non == 0 {
        return Err(StatsError::SingleClassOnly(format!(
            "need recordings from both classes, got {n_chd} CHD and {n_non} NonCHD"
        )));
    }

    let mut features = Vec::with_capacity(table.feature_names.len());
    for (i, name) in table.feature_names.iter().enumerate() {
        let (chd, non_chd) = table.class_columns(i);
        let r = mann_whitney_u(&chd, &non_chd)?;
        features.push(FeatureTest {
            feature: name.clone(),
            u: r.u_a,
            p: r.p_two_sided,
            selected: r.p_two_sided < alpha,
        });
    }
    Ok(SelectionResult { alpha, features })
}
