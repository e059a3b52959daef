//! Estimation, exact enumeration and the covariance diagnostics.

pub mod covariance;
pub mod estimate;
pub mod hardness;
pub mod oracle;
pub(crate) mod sim;
pub mod stats;

pub use covariance::{
    covariance_diagnostics, find_low_variance_subset, AvailabilityStats, Construction, CovarianceReport, SubsetChoice,
};
pub use estimate::{estimate_selection, estimate_selection_on, EdgeEstimate, Mode, SelectionReport};
pub use hardness::{hardness_bound_check, HardnessConfig, HardnessReport};
pub use oracle::{exact_oracle, exact_oracle_extended};
pub use stats::{wilson, Interval};
