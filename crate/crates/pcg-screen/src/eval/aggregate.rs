//! Combining per-recording CHD probabilities into one patient decision.

use crate::audio::Label;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AggregationMethod {
    /// Positive if any recording crosses the threshold; the aggregated
    /// probability is the max.
    AtLeastOne,
    /// Positive if strictly more than half the recordings cross the
    /// threshold; the aggregated probability is the positive fraction.
    Majority,
    /// Positive if the mean probability crosses the threshold.
    AverageProb,
}

impl AggregationMethod {
    pub const ALL: [AggregationMethod; 3] =
        [AggregationMethod::AtLeastOne, AggregationMethod::Majority, AggregationMethod::AverageProb];
}

impl std::fmt::Display for AggregationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AggregationMethod::AtLeastOne => "at-least-one",
            AggregationMethod::Majority => "majority",
            AggregationMethod::AverageProb => "average-prob",
        })
    }
}

impl std::str::FromStr for AggregationMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "at-least-one" | "atleastone" => Ok(AggregationMethod::AtLeastOne),
            "majority" => Ok(AggregationMethod::Majority),
            "average-prob" | "averageprob" | "average" => Ok(AggregationMethod::AverageProb),
            other => Err(format!(
                "unknown aggregation method '{other}' (at-least-one, majority, average-prob)"
            )),
        }
    }
}

/// One patient's aggregated probability and decision.
///
/// A recording is "positive" when its probability is at least the
/// threshold. Majority requires a strict majority, so an exact half-half
/// tie on an even recording count stays NonCHD — the conservative
/// screening tie-break.
pub fn aggregate_patient(
    probs: &[f64],
    method: AggregationMethod,
    threshold: f64,
) -> Result<(f64, Label), EvalError> {
    if probs.is_empty() {
        return Err(EvalError::NoRecordings);
    }
    if probs.iter().any(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
        return Err(EvalError::InvalidProbability);
    }
    let n = probs.len();
    let positives = probs.iter().filter(|&&p| p >= threshold).count();
    let (agg, chd) = match method {
        AggregationMethod::AtLeastOne => {
            let max = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (max, positives > 0)
        }
        AggregationMethod::Majority => (positives as f64 / n as f64, 2 * positives > n),
        AggregationMethod::AverageProb => {
            let mean = probs.iter().sum::<f64>() / n as f64;
            (mean, mean >= threshold)
        }
    };
    Ok((agg, if chd { Label::Chd } else { Label::NonChd }))
}
