//! Normalization to an exactly-c scheme by online dropping.

use std::collections::BTreeMap;

use crate::analysis::estimate::{estimate_selection, Mode, SelectionReport};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::orders::ArrivalModel;

use super::SchemeSpec;

/// Wrap `inner` so that every edge is kept with probability about `c` given
/// it is active. A pilot run estimates p_e = Pr[e in M | X_e = 1]; selected
/// edges are then dropped with probability (p_e - c) / p_e.
pub fn make_exactly_c(
    inner: SchemeSpec,
    inst: &Instance,
    model: &ArrivalModel,
    c: f64,
    pilot_trials: u64,
    seed: u64,
) -> Result<SchemeSpec> {
    let pilot = estimate_selection(&inner, inst, model, pilot_trials, Mode::Forced, seed)?;
    exactly_c_from_report(inner, &pilot, c)
}

/// Build the wrapped scheme from existing forced-mode estimates.
pub fn exactly_c_from_report(inner: SchemeSpec, pilot: &SelectionReport, c: f64) -> Result<SchemeSpec> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::invalid(format!("target c must lie in (0, 1]; got {c}")));
    }
    let short: Vec<usize> = pilot.per_edge.iter().filter(|e| e.ci_high < c).map(|e| e.edge_id).collect();
    if !short.is_empty() {
        let shown: Vec<String> = short.iter().take(20).map(|e| e.to_string()).collect();
        let more = if short.len() > 20 { format!(" (and {} more)", short.len() - 20) } else { String::new() };
        return Err(Error::invalid(format!(
            "target c = {c} exceeds the pilot selection estimate of edges [{}]{more}",
            shown.join(", ")
        )));
    }
    let drops: BTreeMap<usize, f64> = pilot
        .per_edge
        .iter()
        .filter(|e| e.estimate > c)
        .map(|e| (e.edge_id, (e.estimate - c) / e.estimate))
        .collect();
    Ok(SchemeSpec::ExactlyC { inner: Box::new(inner), c, drops })
}
