//! Exact conditional selection probabilities by full enumeration.
//!
//! For a given arrival order the decisions before the target depend on the
//! past only through the set of matched vertices, so the enumeration over
//! states (and Tree-OCRS coins, as Bernoulli atoms) collapses to a dynamic
//! program over matched-vertex masks. Random orders are averaged over every
//! permutation (uniform times) or every vertex ranking (lexicographic seeds).

use std::collections::BTreeMap;

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::instance::{fractional_degree_prefix, Instance};
use crate::orders::ArrivalModel;
use crate::schemes::SchemeSpec;

pub const GREEDY_MAX_EDGES: usize = 14;
pub const TREE_MAX_EDGES: usize = 10;
pub const UNIFORM_MAX_EDGES: usize = 7;
pub const LEX_MAX_VERTICES: usize = 8;

#[derive(Clone, Copy)]
enum Inner {
    Greedy,
    Tree(f64),
}

/// Exact Pr[target in M | X_target = 1].
pub fn exact_oracle(scheme: &SchemeSpec, inst: &Instance, model: &ArrivalModel, target: usize) -> Result<f64> {
    Ok(exact_oracle_extended(scheme, inst, model, target)?.into())
}

/// [`exact_oracle`] in double-double precision.
pub fn exact_oracle_extended(
    scheme: &SchemeSpec,
    inst: &Instance,
    model: &ArrivalModel,
    target: usize,
) -> Result<TwoFloat> {
    let m = inst.edges.len();
    if target >= m {
        return Err(Error::invalid(format!("no edge {target}")));
    }
    let (inner, keep) = unwrap(scheme, target)?;
    let limit = match inner {
        Inner::Greedy => GREEDY_MAX_EDGES,
        Inner::Tree(_) => TREE_MAX_EDGES,
    };
    if m > limit {
        return Err(Error::limit(format!("oracle supports at most {limit} edges for this scheme; got {m}")));
    }
    let value = match model {
        ArrivalModel::Fixed(_) | ArrivalModel::PhaseBased(_) => {
            let order = model.fixed_list().expect("deterministic model");
            along(inst, inner, &order, target)?
        }
        ArrivalModel::UniformTimes => {
            if m > UNIFORM_MAX_EDGES {
                return Err(Error::limit(format!(
                    "oracle averages over m! orders; supports at most {UNIFORM_MAX_EDGES} edges, got {m}"
                )));
            }
            let mut perm: Vec<usize> = (0..m).collect();
            let mut total = TwoFloat::from(0.0);
            let mut count = 0u64;
            loop {
                total += along(inst, inner, &perm, target)?;
                count += 1;
                if !next_permutation(&mut perm) {
                    break;
                }
            }
            total / count as f64
        }
        ArrivalModel::LexSeeds => {
            let n = inst.vertex_count;
            if n > LEX_MAX_VERTICES {
                return Err(Error::limit(format!(
                    "oracle averages over n! seed rankings; supports at most {LEX_MAX_VERTICES} vertices, got {n}"
                )));
            }
            let mut rank: Vec<usize> = (0..n).collect();
            let mut total = TwoFloat::from(0.0);
            let mut count = 0u64;
            loop {
                let mut order: Vec<usize> = (0..m).collect();
                let key = |e: usize| {
                    let ed = &inst.edges[e];
                    let (a, b) = (rank[ed.u], rank[ed.v]);
                    (a.min(b), a.max(b), e)
                };
                order.sort_by_key(|&e| key(e));
                total += along(inst, inner, &order, target)?;
                count += 1;
                if !next_permutation(&mut rank) {
                    break;
                }
            }
            total / count as f64
        }
    };
    Ok(value * keep)
}

/// Strip exactly-c layers: the inner scheme and the target's keep probability.
fn unwrap(scheme: &SchemeSpec, target: usize) -> Result<(Inner, f64)> {
    match scheme {
        SchemeSpec::Greedy => Ok((Inner::Greedy, 1.0)),
        SchemeSpec::TreeOcrs { c } => Ok((Inner::Tree(*c), 1.0)),
        SchemeSpec::ExactlyC { inner, drops, .. } => {
            let (i, keep) = unwrap(inner, target)?;
            Ok((i, keep * (1.0 - drops.get(&target).copied().unwrap_or(0.0))))
        }
        SchemeSpec::VanishingReduction { .. } => {
            Err(Error::invalid("exact oracle supports greedy and Tree-OCRS only"))
        }
    }
}

fn along(inst: &Instance, inner: Inner, order: &[usize], target: usize) -> Result<TwoFloat> {
    let prefix = match inner {
        Inner::Tree(_) => Some(fractional_degree_prefix(inst, order)?),
        Inner::Greedy => {
            crate::instance::check_permutation(inst.edges.len(), order)?;
            None
        }
    };
    // vertex bits, compacted to touched vertices
    let mut bit = vec![u32::MAX; inst.vertex_count];
    let mut next = 0u32;
    for e in &inst.edges {
        for w in [e.u, e.v] {
            if bit[w] == u32::MAX {
                bit[w] = next;
                next += 1;
            }
        }
    }
    let mask_of = |e: usize| {
        let ed = &inst.edges[e];
        (1u32 << bit[ed.u]) | (1u32 << bit[ed.v])
    };
    let accept = |e: usize| -> Result<f64> {
        match inner {
            Inner::Greedy => Ok(1.0),
            Inner::Tree(c) => {
                let (a, b) = prefix.as_ref().expect("tree prefix")[e];
                let p = c / ((1.0 - c * a) * (1.0 - c * b));
                if !(p.is_finite() && p <= 1.0 + crate::schemes::engine::ACCEPT_TOL) {
                    return Err(Error::limit(format!("acceptance probability {p} exceeds 1 at edge {e}")));
                }
                Ok(p.min(1.0))
            }
        }
    };
    let mut states: BTreeMap<u32, TwoFloat> = BTreeMap::new();
    states.insert(0, TwoFloat::from(1.0));
    for &e in order {
        let mask = mask_of(e);
        let p = accept(e)?;
        if e == target {
            let free: TwoFloat = states
                .iter()
                .filter(|(&s, _)| s & mask == 0)
                .fold(TwoFloat::from(0.0), |acc, (_, &w)| acc + w);
            return Ok(free * p);
        }
        let take = inst.edges[e].x * p;
        let mut nxt: BTreeMap<u32, TwoFloat> = BTreeMap::new();
        for (&s, &w) in &states {
            if s & mask == 0 && take > 0.0 {
                *nxt.entry(s | mask).or_insert(TwoFloat::from(0.0)) += w * take;
                *nxt.entry(s).or_insert(TwoFloat::from(0.0)) += w * (TwoFloat::from(1.0) - TwoFloat::from(take));
            } else {
                *nxt.entry(s).or_insert(TwoFloat::from(0.0)) += w;
            }
        }
        states = nxt;
    }
    unreachable!("target appears in the order")
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ALPHA;
    use crate::generators::{path, star};

    #[test]
    fn path_of_two_uniform_is_three_quarters() {
        let inst = path(2, 0.5).unwrap();
        let v = exact_oracle(&SchemeSpec::Greedy, &inst, &ArrivalModel::UniformTimes, 0).unwrap();
        assert_eq!(v, 0.75);
    }

    #[test]
    fn tree_single_edge_and_star() {
        let e = Instance::new("e", 2, &[(0, 1, 0.4)]);
        let v = exact_oracle(&SchemeSpec::tree_ocrs(), &e, &ArrivalModel::canonical(1), 0).unwrap();
        assert!((v - ALPHA).abs() < 1e-15);
        let s = star(2, 0.5).unwrap();
        let v = exact_oracle(&SchemeSpec::tree_ocrs(), &s, &ArrivalModel::Fixed(vec![0, 1]), 1).unwrap();
        assert!((v - ALPHA).abs() < 1e-15);
    }

    #[test]
    fn limits() {
        let big = star(15, 0.05).unwrap();
        assert!(matches!(
            exact_oracle(&SchemeSpec::Greedy, &big, &ArrivalModel::canonical(15), 0),
            Err(Error::NumericLimit(_))
        ));
        let eight = star(8, 0.1).unwrap();
        assert!(exact_oracle(&SchemeSpec::Greedy, &eight, &ArrivalModel::UniformTimes, 0).is_err());
        assert!(exact_oracle(&SchemeSpec::vanishing(), &eight, &ArrivalModel::canonical(8), 0).is_err());
    }

    #[test]
    fn star_min_is_monotone() {
        let mut prev = 1.0;
        for k in 1..=10 {
            let s = star(k, 0.1).unwrap();
            let min = (0..k)
                .map(|t| exact_oracle(&SchemeSpec::Greedy, &s, &ArrivalModel::canonical(k), t).unwrap())
                .fold(1.0, f64::min);
            assert!(min <= prev + 1e-15);
            prev = min;
        }
    }

    #[test]
    fn permutations_enumerated() {
        let mut v = vec![0, 1, 2, 3];
        let mut n = 1;
        while next_permutation(&mut v) {
            n += 1;
        }
        assert_eq!(n, 24);
    }
}
