//! Contention resolution schemes and their single-run entry points.

mod coupling;
pub(crate) mod engine;
pub(crate) mod exactly_c;
mod fractional;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use coupling::{couple_two_round, couple_with};
pub use exactly_c::{exactly_c_from_report, make_exactly_c};
pub use fractional::{fractional_matching_with_step, run_fractional_matching, upgrade_step, ReductionParams};

use crate::constants::ALPHA;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::orders::DrawnOrder;
use crate::realization::Realization;
use engine::{Coins, Compiled, Scratch};

fn default_c() -> f64 {
    ALPHA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeSpec {
    Greedy,
    TreeOcrs {
        #[serde(default = "default_c")]
        c: f64,
    },
    VanishingReduction {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
        /// ln(1/epsilon), for targets below the double range. Wins over `epsilon`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        log_inv_epsilon: Option<f64>,
    },
    ExactlyC {
        inner: Box<SchemeSpec>,
        c: f64,
        #[serde(default, deserialize_with = "drops_from_json")]
        drops: BTreeMap<usize, f64>,
    },
}

// Internally tagged enums buffer their content, which loses the
// string-to-integer key conversion; parse the keys by hand.
fn drops_from_json<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<usize, f64>, D::Error> {
    let raw = BTreeMap::<String, f64>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(|_| serde::de::Error::custom(format!("bad edge id '{k}'"))))
        .collect()
}

impl SchemeSpec {
    pub fn tree_ocrs() -> Self {
        SchemeSpec::TreeOcrs { c: ALPHA }
    }

    pub fn vanishing() -> Self {
        SchemeSpec::VanishingReduction { epsilon: None, log_inv_epsilon: None }
    }

    pub fn label(&self) -> String {
        match self {
            SchemeSpec::Greedy => "greedy".into(),
            SchemeSpec::TreeOcrs { c } => format!("tree_ocrs(c={c})"),
            SchemeSpec::VanishingReduction { epsilon, log_inv_epsilon } => match (epsilon, log_inv_epsilon) {
                (_, Some(l)) => format!("vanishing_reduction(ln(1/eps)={l})"),
                (Some(e), None) => format!("vanishing_reduction(eps={e})"),
                (None, None) => "vanishing_reduction".into(),
            },
            SchemeSpec::ExactlyC { inner, c, .. } => format!("exactly_c({}, c={c})", inner.label()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EdgeOutcome {
    pub selected: bool,
    pub was_active: bool,
    pub arrival_rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchResult {
    /// Selected edge ids in increasing order.
    pub selected: Vec<usize>,
    /// Indexed by edge id.
    pub per_edge: Vec<EdgeOutcome>,
}

impl MatchResult {
    pub fn is_matching(&self, inst: &Instance) -> bool {
        let mut used = vec![false; inst.vertex_count];
        for &e in &self.selected {
            let ed = &inst.edges[e];
            if used[ed.u] || used[ed.v] {
                return false;
            }
            used[ed.u] = true;
            used[ed.v] = true;
        }
        true
    }
}

/// Greedy: take every active edge whose endpoints are both free.
pub fn run_greedy(inst: &Instance, order: &DrawnOrder, real: &Realization) -> Result<MatchResult> {
    run_scheme(&SchemeSpec::Greedy, inst, order, real)
}

/// Tree-OCRS with acceptance constant alpha.
pub fn run_tree_ocrs(inst: &Instance, order: &DrawnOrder, real: &Realization) -> Result<MatchResult> {
    run_scheme(&SchemeSpec::tree_ocrs(), inst, order, real)
}

/// Vanishing-regime OCRS; `epsilon` defaults to the largest edge value.
pub fn run_vanishing_reduction(
    inst: &Instance,
    order: &DrawnOrder,
    real: &Realization,
    epsilon: Option<f64>,
) -> Result<MatchResult> {
    run_scheme(&SchemeSpec::VanishingReduction { epsilon, log_inv_epsilon: None }, inst, order, real)
}

pub fn run_scheme(spec: &SchemeSpec, inst: &Instance, order: &DrawnOrder, real: &Realization) -> Result<MatchResult> {
    let m = inst.edges.len();
    if real.states.len() != m || order.permutation.len() != m {
        return Err(Error::invalid("order and realization must cover every edge"));
    }
    let comp = Compiled::new(spec, inst)?;
    let coins = Coins::new(real.coins);
    let mut s = Scratch::new(inst.vertex_count);
    let mut per_edge = vec![EdgeOutcome { selected: false, was_active: false, arrival_rank: 0 }; m];
    let mut selected = Vec::new();
    for (rank, &id) in order.permutation.iter().enumerate() {
        let edge = &inst.edges[id];
        let prefix = (s.deg.get(edge.u), s.deg.get(edge.v));
        let nat = comp.couple_natural(edge, real.states[id], &coins)?;
        let out = comp.step(edge, prefix, nat, false, &coins, &mut s)?;
        s.deg.set(edge.u, prefix.0 + edge.x);
        s.deg.set(edge.v, prefix.1 + edge.x);
        per_edge[id] = EdgeOutcome { selected: out.kept, was_active: real.states[id], arrival_rank: rank };
        if out.kept {
            selected.push(id);
        }
    }
    selected.sort_unstable();
    Ok(MatchResult { selected, per_edge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CoinStream;

    fn order(m: usize, perm: Vec<usize>) -> DrawnOrder {
        DrawnOrder::from_permutation(m, perm).unwrap()
    }

    #[test]
    fn greedy_path() {
        let inst = Instance::new("p", 3, &[(0, 1, 0.5), (1, 2, 0.5)]);
        let real = Realization { states: vec![true, true], coins: CoinStream::new(0, 0) };
        let r = run_greedy(&inst, &order(2, vec![0, 1]), &real).unwrap();
        assert_eq!(r.selected, vec![0]);
        assert!(r.per_edge[0].selected && !r.per_edge[1].selected);
        assert_eq!(r.per_edge[1].arrival_rank, 1);
    }

    #[test]
    fn tree_acceptance_rate_on_single_edge() {
        let inst = Instance::new("e", 2, &[(0, 1, 0.7)]);
        let n = 200_000;
        let hits = (0..n)
            .filter(|&t| {
                let real = Realization { states: vec![true], coins: CoinStream::new(5, t) };
                run_tree_ocrs(&inst, &order(1, vec![0]), &real).unwrap().per_edge[0].selected
            })
            .count();
        let p = hits as f64 / n as f64;
        assert!((p - ALPHA).abs() < 4.0 * (ALPHA * (1.0 - ALPHA) / n as f64).sqrt());
    }

    #[test]
    fn tree_rejects_overfull_prefix() {
        let inst = Instance::new(
            "bad",
            6,
            &[(0, 2, 0.6), (0, 3, 0.6), (1, 4, 0.6), (1, 5, 0.6), (0, 1, 0.5)],
        );
        let real = Realization { states: vec![false; 5], coins: CoinStream::new(0, 0) };
        let err = run_tree_ocrs(&inst, &order(5, (0..5).collect()), &real);
        assert!(matches!(err, Err(Error::NumericLimit(_))));
    }

    #[test]
    fn spec_json() {
        let s: SchemeSpec = serde_json::from_str(r#"{"kind":"tree_ocrs"}"#).unwrap();
        assert_eq!(s, SchemeSpec::tree_ocrs());
        let s: SchemeSpec = serde_json::from_str(
            r#"{"kind":"exactly_c","c":0.3,"inner":{"kind":"greedy"},"drops":{"2":0.25}}"#,
        )
        .unwrap();
        match &s {
            SchemeSpec::ExactlyC { drops, .. } => assert_eq!(drops[&2], 0.25),
            _ => panic!(),
        }
        let text = serde_json::to_string(&SchemeSpec::vanishing()).unwrap();
        assert_eq!(text, r#"{"kind":"vanishing_reduction"}"#);
    }
}
