//! The recording manifest: one CSV row per recording, grouped by patient.
//!
//! Expected columns are `patient_id,age_months,sex,label,site,path`; `#`
//! starts a comment line. Labels and sites are matched case-insensitively.
//! Paths are resolved relative to the manifest's own directory.

use super::Site;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("manifest is missing required column {column:?}")]
    MissingColumn { column: &'static str },
    #[error("row {row}: unknown label {value:?} (expected CHD or NonCHD)")]
    UnknownLabel { row: usize, value: String },
    #[error("row {row}: unknown site {value:?} (expected AV, PV, TV, or MV)")]
    UnknownSite { row: usize, value: String },
    #[error("row {row}: {value:?} is not a valid {field}")]
    BadField {
        row: usize,
        field: &'static str,
        value: String,
    },
    #[error("patient {patient_id} has more than one {site} recording")]
    DuplicateSiteForPatient { patient_id: String, site: Site },
    #[error("path {path} is referenced by more than one row")]
    DuplicatePath { path: PathBuf },
    #[error("patient {patient_id} has conflicting {field} values across rows")]
    InconsistentPatient {
        patient_id: String,
        field: &'static str,
    },
    #[error("manifest has no data rows")]
    Empty,
}

/// Screening ground truth for a patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Label {
    #[serde(rename = "CHD")]
    Chd,
    #[serde(rename = "NonCHD")]
    NonChd,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Chd => "CHD",
            Label::NonChd => "NonCHD",
        }
    }

    /// Class index used by the model: NonCHD = 0, CHD = 1.
    pub fn class_index(&self) -> usize {
        match self {
            Label::NonChd => 0,
            Label::Chd => 1,
        }
    }

    fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chd" => Some(Label::Chd),
            "nonchd" | "non-chd" | "non_chd" => Some(Label::NonChd),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sex {
    M,
    F,
    Unknown,
}

impl Sex {
    fn parse(s: &str) -> Sex {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "male" => Sex::M,
            "f" | "female" => Sex::F,
            _ => Sex::Unknown,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Sex::M => "M",
            Sex::F => "F",
            Sex::Unknown => "Unknown",
        }
    }
}

/// One manifest row.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub patient_id: String,
    pub age_months: u32,
    pub sex: Sex,
    pub label: Label,
    pub site: Site,
    pub path: PathBuf,
}

/// A patient with all their recordings (1 to 4, one per site).
#[derive(Debug, Clone)]
pub struct Patient {
    pub id: String,
    pub age_months: u32,
    pub sex: Sex,
    pub label: Label,
    pub recordings: Vec<(Site, PathBuf)>,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    /// Rows in file order.
    pub entries: Vec<ManifestEntry>,
    /// Patients keyed and iterated in id order.
    patients: BTreeMap<String, Patient>,
}

impl Manifest {
    pub fn patients(&self) -> impl Iterator<Item = &Patient> {
        self.patients.values()
    }

    pub fn patient(&self, id: &str) -> Option<&Patient> {
        self.patients.get(id)
    }

    pub fn n_patients(&self) -> usize {
        self.patients.len()
    }

    /// `(patient_id, label)` pairs in id order — the split input.
    pub fn patient_labels(&self) -> Vec<(String, Label)> {
        self.patients.values().map(|p| (p.id.clone(), p.label)).collect()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.patients.values().filter(|p| p.label == label).count()
    }
}

/// Load and validate a manifest CSV.
pub fn load_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| ManifestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;

    let headers = reader
        .headers()
        .map_err(|source| ManifestError::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .clone();
    let mut col = |name: &'static str| -> Result<usize, ManifestError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(ManifestError::MissingColumn { column: name })
    };
    let c_patient = col("patient_id")?;
    let c_age = col("age_months")?;
    let c_sex = col("sex")?;
    let c_label = col("label")?;
    let c_site = col("site")?;
    let c_path = col("path")?;

    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, after the header line
        let record = record.map_err(|source| ManifestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let field = |idx: usize| record.get(idx).unwrap_or("").to_string();

        let label = Label::parse(&field(c_label)).ok_or_else(|| ManifestError::UnknownLabel {
            row,
            value: field(c_label),
        })?;
        let site: Site = field(c_site).parse().map_err(|_| ManifestError::UnknownSite {
            row,
            value: field(c_site),
        })?;
        let age_months = field(c_age)
            .parse::<u32>()
            .map_err(|_| ManifestError::BadField {
                row,
                field: "age_months",
                value: field(c_age),
            })?;
        let patient_id = field(c_patient);
        if patient_id.is_empty() {
            return Err(ManifestError::BadField {
                row,
                field: "patient_id",
                value: patient_id,
            });
        }
        let rel = PathBuf::from(field(c_path));
        let path = if rel.is_absolute() { rel } else { base.join(rel) };
        entries.push(ManifestEntry {
            patient_id,
            age_months,
            sex: Sex::parse(&field(c_sex)),
            label,
            site,
            path,
        });
    }
    if entries.is_empty() {
        return Err(ManifestError::Empty);
    }

    // Group into patients, checking the invariants row by row.
    let mut patients: BTreeMap<String, Patient> = BTreeMap::new();
    let mut seen_paths: std::collections::BTreeSet<PathBuf> = Default::default();
    for e in &entries {
        if !seen_paths.insert(e.path.clone()) {
            return Err(ManifestError::DuplicatePath { path: e.path.clone() });
        }
        match patients.get_mut(&e.patient_id) {
            None => {
                patients.insert(
                    e.patient_id.clone(),
                    Patient {
                        id: e.patient_id.clone(),
                        age_months: e.age_months,
                        sex: e.sex,
                        label: e.label,
                        recordings: vec![(e.site, e.path.clone())],
                    },
                );
            }
            Some(p) => {
                if p.label != e.label {
                    return Err(ManifestError::InconsistentPatient {
                        patient_id: e.patient_id.clone(),
                        field: "label",
                    });
                }
                if p.age_months != e.age_months {
                    return Err(ManifestError::InconsistentPatient {
                        patient_id: e.patient_id.clone(),
                        field: "age_months",
                    });
                }
                if p.recordings.iter().any(|(s, _)| *s == e.site) {
                    return Err(ManifestError::DuplicateSiteForPatient {
                        patient_id: e.patient_id.clone(),
                        site: e.site,
                    });
                }
                p.recordings.push((e.site, e.path.clone()));
            }
        }
    }

    Ok(Manifest { entries, patients })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_manifest(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempdir().unwrap();
        let p = dir.path().join("manifest.csv");
        std::fs::write(&p, content).unwrap();
        (dir, p)
    }

    const HEADER: &str = "patient_id,age_months,sex,label,site,path\n";

    #[test]
    fn loads_and_groups_by_patient() {
        let (_d, p) = write_manifest(&format!(
            "{HEADER}# a comment line\n\
             P001,18,M,CHD,AV,wavs/P001_AV.wav\n\
             P001,18,M,CHD,PV,wavs/P001_PV.wav\n\
             P002,60,F,NonCHD,MV,wavs/P002_MV.wav\n"
        ));
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.entries.len(), 3);
        assert_eq!(m.n_patients(), 2);
        let p001 = m.patient("P001").unwrap();
        assert_eq!(p001.label, Label::Chd);
        assert_eq!(p001.recordings.len(), 2);
        assert_eq!(m.count_label(Label::NonChd), 1);
        // Paths resolve relative to the manifest directory.
        assert!(m.entries[0].path.ends_with("wavs/P001_AV.wav"));
        assert!(m.entries[0].path.is_absolute() || m.entries[0].path.parent().is_some());
    }

    #[test]
    fn labels_are_case_insensitive() {
        let (_d, p) = write_manifest(&format!(
            "{HEADER}P1,12,m,chd,av,a.wav\nP2,12,f,NON-CHD,pv,b.wav\nP3,12,?,NonChd,tv,c.wav\n"
        ));
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.patient("P1").unwrap().label, Label::Chd);
        assert_eq!(m.patient("P2").unwrap().label, Label::NonChd);
        assert_eq!(m.patient("P3").unwrap().label, Label::NonChd);
        assert_eq!(m.patient("P3").unwrap().sex, Sex::Unknown);
    }

    #[test]
    fn unknown_label_is_an_error() {
        let (_d, p) = write_manifest(&format!("{HEADER}P1,12,M,healthy,AV,a.wav\n"));
        assert!(matches!(
            load_manifest(&p),
            Err(ManifestError::UnknownLabel { row: 2, .. })
        ));
    }

    #[test]
    fn unknown_site_is_an_error() {
        let (_d, p) = write_manifest(&format!("{HEADER}P1,12,M,CHD,XX,a.wav\n"));
        assert!(matches!(load_manifest(&p), Err(ManifestError::UnknownSite { .. })));
    }

    #[test]
    fn missing_column_is_an_error() {
        let (_d, p) = write_manifest("patient_id,age_months,sex,label,path\nP1,12,M,CHD,a.wav\n");
        assert!(matches!(
            load_manifest(&p),
            Err(ManifestError::MissingColumn { column: "site" })
        ));
    }

    #[test]
    fn duplicate_site_for_patient_is_an_error() {
        let (_d, p) = write_manifest(&format!(
            "{HEADER}P1,12,M,CHD,AV,a.wav\nP1,12,M,CHD,AV,b.wav\n"
        ));
        assert!(matches!(
            load_manifest(&p),
            Err(ManifestError::DuplicateSiteForPatient { .. })
        ));
    }

    #[test]
    fn duplicate_path_is_an_error() {
        let (_d, p) = write_manifest(&format!(
            "{HEADER}P1,12,M,CHD,AV,a.wav\nP2,24,F,NonCHD,AV,a.wav\n"
        ));
        assert!(matches!(load_manifest(&p), Err(ManifestError::DuplicatePath { .. })));
    }

    #[test]
    fn conflicting_patient_label_is_an_error() {
        let (_d, p) = write_manifest(&format!(
            "{HEADER}P1,12,M,CHD,AV,a.wav\nP1,12,M,NonCHD,PV,b.wav\n"
        ));
        assert!(matches!(
            load_manifest(&p),
            Err(ManifestError::InconsistentPatient { field: "label", .. })
        ));
    }

    #[test]
    fn empty_manifest_is_an_error() {
        let (_d, p) = write_manifest(HEADER);
        assert!(matches!(load_manifest(&p), Err(ManifestError::Empty)));
    }

    #[test]
    fn bad_age_is_an_error() {
        let (_d, p) = write_manifest(&format!("{HEADER}P1,twelve,M,CHD,AV,a.wav\n"));
        assert!(matches!(
            load_manifest(&p),
            Err(ManifestError::BadField { field: "age_months", .. })
        ));
    }
}
