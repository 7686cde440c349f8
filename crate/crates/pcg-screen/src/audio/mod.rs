//! Audio ingestion: WAV files, the recording manifest, and patient-wise
//! dataset splits.
//!
//! Everything downstream assumes float samples in `[-1, 1]` at a single
//! sample rate (4 kHz in the default configuration), mono, with each
//! recording tied to a patient and an auscultation site.

mod manifest;
mod split;
mod wav;

pub use manifest::{load_manifest, Label, Manifest, ManifestEntry, ManifestError, Patient, Sex};
pub use split::{split_patients, SplitAssignment, SplitError, SplitRatios};
pub use wav::{read_wav, resample_linear, write_wav, WavAudio, WavError};

use std::fmt;
use std::path::Path;

/// Auscultation site of a recording.
///
/// The four classical valve areas: aortic, pulmonic, tricuspid, mitral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Site {
    AV,
    PV,
    TV,
    MV,
}

impl Site {
    pub const ALL: [Site; 4] = [Site::AV, Site::PV, Site::TV, Site::MV];

    pub fn as_str(&self) -> &'static str {
        match self {
            Site::AV => "AV",
            Site::PV => "PV",
            Site::TV => "TV",
            Site::MV => "MV",
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Site {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AV" => Ok(Site::AV),
            "PV" => Ok(Site::PV),
            "TV" => Ok(Site::TV),
            "MV" => Ok(Site::MV),
            other => Err(format!("unknown auscultation site {other:?}")),
        }
    }
}

/// One loaded recording: samples plus the identity needed downstream.
#[derive(Debug, Clone)]
pub struct Recording {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub patient_id: String,
    pub site: Site,
}

impl Recording {
    /// Read a WAV file and attach patient identity.
    ///
    /// When `expected_rate_hz` is given, a file at a different rate is an
    /// error unless `resample` is set, in which case it is brought to the
    /// expected rate by linear interpolation.
    pub fn read(
        path: &Path,
        patient_id: &str,
        site: Site,
        expected_rate_hz: Option<u32>,
        resample: bool,
    ) -> Result<Self, WavError> {
        let audio = read_wav(path)?;
        let (samples, rate) = match expected_rate_hz {
            Some(want) if audio.sample_rate_hz != want => {
                if resample {
                    (resample_linear(&audio.samples, audio.sample_rate_hz, want), want)
                } else {
                    return Err(WavError::SampleRateMismatch {
                        path: path.to_path_buf(),
                        found: audio.sample_rate_hz,
                        expected: want,
                    });
                }
            }
            _ => (audio.samples, audio.sample_rate_hz),
        };
        Ok(Recording {
            samples,
            sample_rate_hz: rate,
            patient_id: patient_id.to_string(),
            site,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}
