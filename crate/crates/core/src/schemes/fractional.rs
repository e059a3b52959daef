use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::orders::DrawnOrder;

/// Guard slack on the z'-degree test.
pub(crate) const GUARD_TOL: f64 = 1e-12;

/// Online fractional matching on the Y-edges: each Y-edge gets z' = 1/ln(1/eps)
/// if both endpoints still have room for it. Returns z' indexed by edge id.
pub fn run_fractional_matching(inst: &Instance, order: &DrawnOrder, y_draws: &[bool], epsilon: f64) -> Result<Vec<f64>> {
    fractional_matching_with_step(inst, order, y_draws, upgrade_step(epsilon)?)
}

/// Same as [`run_fractional_matching`] with the z'-value given directly.
pub fn fractional_matching_with_step(inst: &Instance, order: &DrawnOrder, y_draws: &[bool], step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::invalid(format!("z' step must lie in (0,1); got {step}")));
    }
    if y_draws.len() != inst.edges.len() || order.permutation.len() != inst.edges.len() {
        return Err(Error::invalid("Y draws and order must cover every edge"));
    }
    let mut counts = vec![0u32; inst.vertex_count];
    let mut out = vec![0.0; inst.edges.len()];
    for &id in &order.permutation {
        let e = &inst.edges[id];
        if y_draws[id] && admits(counts[e.u], step) && admits(counts[e.v], step) {
            out[id] = step;
            counts[e.u] += 1;
            counts[e.v] += 1;
        }
    }
    Ok(out)
}

/// z'-value 1/ln(1/eps) for eps in (0, 1/e).
pub fn upgrade_step(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < (-1.0f64).exp()) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1/e); got {epsilon}")));
    }
    Ok(1.0 / (1.0 / epsilon).ln())
}

/// Whether a vertex holding `count` upgraded edges can take one more:
/// count*step <= 1 - step.
#[inline]
pub(crate) fn admits(count: u32, step: f64) -> bool {
    (count + 1) as f64 * step <= 1.0 + GUARD_TOL
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReductionParams {
    pub epsilon: f64,
    /// ln(1/eps)
    pub log_inv_eps: f64,
    /// ln(1/eps)^(-1/4)
    pub delta: f64,
    /// Second-round probability z = 1/ln(1/eps), also the z'-value of upgraded edges.
    pub z: f64,
    /// y_e = scale * x_e
    pub scale: f64,
    /// round(ln ln(1/eps)); diagnostics only.
    pub ell: u32,
}

impl ReductionParams {
    /// Parameters for an instance; eps defaults to the largest edge value.
    pub fn new(inst: &Instance, epsilon: Option<f64>) -> Result<Self> {
        let eps = epsilon.unwrap_or_else(|| inst.max_x());
        let limit = (-1.0f64).exp();
        if !(eps > 0.0 && eps < limit) {
            return Err(Error::limit(format!(
                "vanishing reduction needs epsilon in (0, 1/e = {limit:.6}); got {eps}"
            )));
        }
        Self::from_log_inv_eps(inst, (1.0 / eps).ln())
    }

    /// Parameters given ln(1/eps) directly, for eps below the double range.
    pub fn from_log_inv_eps(inst: &Instance, l: f64) -> Result<Self> {
        if !(l > 1.0 && l.is_finite()) {
            return Err(Error::limit(format!("ln(1/epsilon) must exceed 1; got {l}")));
        }
        let max_x = inst.max_x();
        let delta = l.powf(-0.25);
        let scale = (1.0 - delta) * l;
        if max_x * scale > 1.0 {
            return Err(Error::limit(format!(
                "first-round probability {} exceeds 1; requires max x_e * (1 - ln(1/eps)^(-1/4)) * ln(1/eps) <= 1",
                max_x * scale
            )));
        }
        Ok(ReductionParams {
            epsilon: (-l).exp(),
            log_inv_eps: l,
            delta,
            z: 1.0 / l,
            scale,
            ell: l.ln().round().max(0.0) as u32,
        })
    }

    #[inline]
    pub fn y(&self, x: f64) -> f64 {
        (self.scale * x).min(1.0)
    }
}
