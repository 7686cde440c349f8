//! Group-difference statistics for feature screening.

mod mann_whitney;
mod selection;

pub use mann_whitney::{
    mann_whitney_u, MannWhitneyResult, PvalueMethod, StatsError, EXACT_ENUMERATION_LIMIT,
};
pub use selection::{select_features, FeatureTable, FeatureTest, SelectionResult};
