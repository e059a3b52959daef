//! Online contention resolution for matchings: schemes, arrival orders,
//! instance families, Monte Carlo and exact analysis, and the branching
//! process limits behind the random-order results.

pub mod analysis;
pub mod constants;
pub mod error;
pub mod generators;
pub mod gw;
pub mod instance;
pub mod orders;
pub mod realization;
pub mod rng;
pub mod schemes;

pub use analysis::{estimate_selection, exact_oracle, Mode, SelectionReport};
pub use error::{Error, Result};
pub use instance::{validate, Edge, Instance, ValidationReport, Violation};
pub use orders::{draw_order, ArrivalModel, DrawnOrder};
pub use realization::Realization;
pub use rng::{CoinStream, Purpose};
pub use schemes::{make_exactly_c, run_scheme, MatchResult, SchemeSpec};
