//! Upper-bound harness on the hard constructions: normalize a scheme to
//! exactly c, then test the covariance inequalities with measured values.

use serde::Serialize;

use crate::constants::{beta, gamma};
use crate::error::Result;
use crate::instance::{to_json_17g, Instance};
use crate::orders::{phase_based_general, phase_based_tree, ArrivalModel};
use crate::schemes::exactly_c::exactly_c_from_report;
use crate::schemes::SchemeSpec;

use super::covariance::{covariance_diagnostics, find_low_variance_subset, Construction, DEFAULT_CANDIDATES};
use super::estimate::{estimate_selection, Mode};

/// Slack on every finite-n inequality.
pub const HARDNESS_SLACK: f64 = 0.02;

#[derive(Clone, Debug)]
pub struct HardnessConfig {
    pub pilot_trials: u64,
    pub trials: u64,
    pub covariance_trials: u64,
    pub candidates: usize,
    pub seed: u64,
}

impl Default for HardnessConfig {
    fn default() -> Self {
        HardnessConfig {
            pilot_trials: 100_000,
            trials: 100_000,
            covariance_trials: 100_000,
            candidates: DEFAULT_CANDIDATES,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HardnessReport {
    pub instance: String,
    pub construction: Construction,
    pub n: usize,
    pub inner: String,
    pub order: ArrivalModel,
    /// Spokes whose hub edges close the order (1-based).
    pub last_subset: Vec<usize>,
    /// Min pilot estimate, used as the normalization target.
    pub c_target: f64,
    /// Min re-estimated selection of the normalized scheme.
    pub c_hat: f64,
    pub c_hat_edge: Option<usize>,
    pub c_mean: f64,
    pub dropped_edges: usize,
    pub theta_hat: f64,
    pub theta_n: f64,
    pub var_sum: f64,
    /// theta >= c - (1 - c d)^2 with d the phase-1 spoke degree.
    pub covariance_floor: Inequality,
    /// 2c + c exp(c + theta/c - 1) <= 1.
    pub hub_budget: Inequality,
    pub bound_name: String,
    pub bound: f64,
    pub slack: f64,
    pub within_bound: bool,
    /// 1 - 2c - c exp(c - 1) at c = c_hat.
    pub gamma_residual: f64,
    /// Var|M| / E[|M|]^2 for the normalized scheme.
    pub concentration_ratio: f64,
}

impl HardnessReport {
    pub fn to_json(&self) -> String {
        to_json_17g(self)
    }
}

/// Normalize `inner` on a general_hard or tree_hard instance and evaluate the bounds.
///
/// For tree_hard the ordered subset S closing the hub phase comes from the
/// inner scheme's phase-1 availability. For general_hard the hub edge of v_n
/// comes last.
pub fn hardness_bound_check(inner: &SchemeSpec, inst: &Instance, cfg: &HardnessConfig) -> Result<HardnessReport> {
    let (construction, n) = super::covariance::construction_of(inst)?;
    let (model, last) = match construction {
        Construction::GeneralHard => (phase_based_general(inst, n)?, vec![n]),
        Construction::TreeHard => {
            let plain = phase_based_tree(inst, &[])?;
            let cov = covariance_diagnostics(inner, inst, &plain, cfg.covariance_trials, cfg.seed, 1)?;
            let m = super::covariance::default_subset_size(&cov.stats);
            let pick = find_low_variance_subset(&cov.stats, m, cfg.candidates, cfg.seed)?;
            (phase_based_tree(inst, &pick.members)?, pick.members)
        }
    };
    let pilot = estimate_selection(inner, inst, &model, cfg.pilot_trials, Mode::Forced, cfg.seed)?;
    let c_target = pilot.min_estimate;
    let normalized = exactly_c_from_report(inner.clone(), &pilot, c_target)?;
    let dropped_edges = match &normalized {
        SchemeSpec::ExactlyC { drops, .. } => drops.len(),
        _ => 0,
    };
    let check_seed = cfg.seed.wrapping_add(1);
    let after = estimate_selection(&normalized, inst, &model, cfg.trials, Mode::Forced, check_seed)?;
    let c_hat = after.min_estimate;
    let cov = covariance_diagnostics(&normalized, inst, &model, cfg.covariance_trials, check_seed, 1)?;
    let theta = cov.theta_min;
    let d = cov.phase1_degree;
    let floor_rhs = c_hat - (1.0 - c_hat * d).powi(2);
    let budget_lhs = 2.0 * c_hat + c_hat * (c_hat + theta / c_hat - 1.0).exp();
    let (bound_name, bound) = match construction {
        Construction::GeneralHard => ("beta", beta().value),
        Construction::TreeHard => ("gamma", gamma().value),
    };
    let size = after.matching_size;
    Ok(HardnessReport {
        instance: inst.name.clone(),
        construction,
        n,
        inner: inner.label(),
        order: model,
        last_subset: last,
        c_target,
        c_hat,
        c_hat_edge: after.min_edge,
        c_mean: after.pooled.mean,
        dropped_edges,
        theta_hat: theta,
        theta_n: super::covariance::theta_n(&cov.stats).1,
        var_sum: cov.var_sum,
        covariance_floor: Inequality { lhs: theta, rhs: floor_rhs, holds: theta >= floor_rhs - HARDNESS_SLACK },
        hub_budget: Inequality { lhs: budget_lhs, rhs: 1.0, holds: budget_lhs <= 1.0 + HARDNESS_SLACK },
        bound_name: bound_name.into(),
        bound,
        slack: HARDNESS_SLACK,
        within_bound: c_hat <= bound + HARDNESS_SLACK,
        gamma_residual: 1.0 - 2.0 * c_hat - c_hat * (c_hat - 1.0).exp(),
        concentration_ratio: if size.mean > 0.0 { size.variance / (size.mean * size.mean) } else { f64::NAN },
    })
}
