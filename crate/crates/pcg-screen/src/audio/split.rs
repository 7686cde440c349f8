//! Patient-wise, label-stratified train/validation/test splits.
//!
//! All recordings of a patient travel together — the split is over patients,
//! never over recordings. Within each label group patients are shuffled by a
//! seeded RNG and cut at the cumulative ratio boundaries, with
//! largest-remainder rounding so the realized sizes track the requested
//! ratios to within one patient per label per split.

use super::{Label, Manifest};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum SplitError {
    #[error("split ratios must be non-negative and sum to 1 (got {0:?})")]
    BadRatios([f64; 3]),
    #[error("no patients to split")]
    NoPatients,
    #[error("{path}: {detail}")]
    Io { path: std::path::PathBuf, detail: String },
}

/// Requested train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, SplitError> {
        let r = SplitRatios { train, validation, test };
        let sum = train + validation + test;
        if train < 0.0 || validation < 0.0 || test < 0.0 || (sum - 1.0).abs() > 1e-9 {
            return Err(SplitError::BadRatios([train, validation, test]));
        }
        Ok(r)
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.7, validation: 0.2, test: 0.1 }
    }
}

/// A materialized split: patient ids per subset, plus the inputs that
/// produced it so a run can be reproduced from the file alone.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn subset_of(&self, patient_id: &str) -> Option<Subset> {
        if self.train.iter().any(|p| p == patient_id) {
            Some(Subset::Train)
        } else if self.validation.iter().any(|p| p == patient_id) {
            Some(Subset::Validation)
        } else if self.test.iter().any(|p| p == patient_id) {
            Some(Subset::Test)
        } else {
            None
        }
    }

    pub fn ids(&self, subset: Subset) -> &[String] {
        match subset {
            Subset::Train => &self.train,
            Subset::Validation => &self.validation,
            Subset::Test => &self.test,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SplitError> {
        let json = serde_json::to_string_pretty(self).expect("split serializes");
        std::fs::write(path, json + "\n").map_err(|e| SplitError::Io {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, SplitError> {
        let text = std::fs::read_to_string(path).map_err(|e| SplitError::Io {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| SplitError::Io {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    Train,
    Validation,
    Test,
}

/// Split sizes for `n` items by largest-remainder rounding. Remainder ties
/// go to the earlier split (train before validation before test).
fn largest_remainder_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - sizes[a] as f64;
        let rb = exact[b] - sizes[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for i in 0..(n - assigned) {
        sizes[order[i]] += 1;
    }
    [sizes[0], sizes[1], sizes[2]]
}

/// Assign every patient in the manifest to exactly one subset.
///
/// Identical seed and patient set give an identical assignment regardless of
/// manifest row order.
pub fn split_patients(
    manifest: &Manifest,
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment, SplitError> {
    let pairs = manifest.patient_labels();
    split_patient_labels(&pairs, ratios, seed)
}

/// Core of [`split_patients`], usable without a full manifest.
pub fn split_patient_labels(
    patients: &[(String, Label)],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment, SplitError> {
    if patients.is_empty() {
        return Err(SplitError::NoPatients);
    }
    SplitRatios::new(ratios.train, ratios.validation, ratios.test)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: [Vec<String>; 3] = Default::default();
    // Label groups in fixed order (CHD first) so the RNG stream is stable.
    for label in [Label::Chd, Label::NonChd] {
        let mut ids: Vec<&String> = patients
            .iter()
            .filter(|(_, l)| *l == label)
            .map(|(id, _)| id)
            .collect();
        ids.sort(); // canonical order before shuffling, independent of input order
        ids.shuffle(&mut rng);
        let sizes = largest_remainder_sizes(ids.len(), ratios.as_array());
        let mut cursor = 0;
        for (subset, &size) in out.iter_mut().zip(&sizes) {
            subset.extend(ids[cursor..cursor + size].iter().map(|s| s.to_string()));
            cursor += size;
        }
    }
    let [mut train, mut validation, mut test] = out;
    train.sort();
    validation.sort();
    test.sort();
    Ok(SplitAssignment { seed, ratios, train, validation, test })
}

/// Check that `assignment` is a partition of exactly the given patient set.
pub fn is_partition_of(assignment: &SplitAssignment, patient_ids: &[String]) -> bool {
    let mut seen = BTreeSet::new();
    for id in assignment
        .train
        .iter()
        .chain(&assignment.validation)
        .chain(&assignment.test)
    {
        if !seen.insert(id.clone()) {
            return false; // appears in two subsets
        }
    }
    let want: BTreeSet<String> = patient_ids.iter().cloned().collect();
    seen == want
}
