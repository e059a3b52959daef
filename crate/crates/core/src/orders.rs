//! Arrival-order models and their per-trial draws.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{check_permutation, Instance};
use crate::rng::{CoinStream, Purpose};

#[derive(Clone, Debug, PartialEq)]
pub enum ArrivalModel {
    /// Edges arrive in the listed order.
    Fixed(Vec<usize>),
    /// Each edge gets an independent uniform arrival time.
    UniformTimes,
    /// Each vertex gets a uniform seed; edges sort by (min seed, max seed).
    LexSeeds,
    PhaseBased(PhaseSpec),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PhaseSpec {
    pub phases: Vec<Vec<usize>>,
    /// Vertices whose hub edges were placed at the very end (informational).
    pub last_subset: Vec<usize>,
}

/// Sort key of one edge. Ties break by edge id.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderKey {
    pub primary: f64,
    pub secondary: f64,
}

impl OrderKey {
    #[inline]
    pub fn cmp_with(&self, a: usize, other: &OrderKey, b: usize) -> Ordering {
        self.primary
            .total_cmp(&other.primary)
            .then(self.secondary.total_cmp(&other.secondary))
            .then(a.cmp(&b))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DrawnOrder {
    pub permutation: Vec<usize>,
    /// Indexed by edge id.
    pub keys: Vec<OrderKey>,
    pub vertex_seeds: Option<Vec<f64>>,
}

impl DrawnOrder {
    /// Arrival position of every edge id.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.permutation.len()];
        for (pos, &e) in self.permutation.iter().enumerate() {
            r[e] = pos;
        }
        r
    }

    pub fn from_permutation(m: usize, permutation: Vec<usize>) -> Result<Self> {
        check_permutation(m, &permutation)?;
        let mut keys = vec![OrderKey { primary: 0.0, secondary: 0.0 }; m];
        for (pos, &e) in permutation.iter().enumerate() {
            keys[e] = OrderKey { primary: pos as f64, secondary: 0.0 };
        }
        Ok(DrawnOrder { permutation, keys, vertex_seeds: None })
    }
}

impl ArrivalModel {
    pub fn canonical(m: usize) -> Self {
        ArrivalModel::Fixed((0..m).collect())
    }

    /// Concatenated list for deterministic models.
    pub fn fixed_list(&self) -> Option<Vec<usize>> {
        match self {
            ArrivalModel::Fixed(list) => Some(list.clone()),
            ArrivalModel::PhaseBased(spec) => Some(spec.phases.concat()),
            _ => None,
        }
    }

    /// Arrival rank of each edge id for deterministic models, after checking coverage.
    pub fn ranks(&self, m: usize) -> Result<Option<Vec<usize>>> {
        match self.fixed_list() {
            None => Ok(None),
            Some(list) => {
                check_permutation(m, &list)?;
                let mut r = vec![0; m];
                for (pos, &e) in list.iter().enumerate() {
                    r[e] = pos;
                }
                Ok(Some(r))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            ArrivalModel::Fixed(_) => "fixed".into(),
            ArrivalModel::UniformTimes => "uniform_times".into(),
            ArrivalModel::LexSeeds => "lex_seeds".into(),
            ArrivalModel::PhaseBased(_) => "phase_based".into(),
        }
    }
}

/// Uniform arrival time of an edge in one trial.
#[inline]
pub fn uniform_time(coins: &CoinStream, edge: usize) -> f64 {
    coins.uniform(Purpose::Order, edge as u64)
}

/// Uniform seed of a vertex in one trial.
#[inline]
pub fn vertex_seed(coins: &CoinStream, vertex: usize) -> f64 {
    coins.uniform(Purpose::VertexSeed, vertex as u64)
}

#[inline]
pub fn lex_key(su: f64, sv: f64) -> OrderKey {
    OrderKey { primary: su.min(sv), secondary: su.max(sv) }
}

pub fn draw_order(model: &ArrivalModel, inst: &Instance, coins: &CoinStream) -> Result<DrawnOrder> {
    let m = inst.edges.len();
    match model {
        ArrivalModel::Fixed(_) | ArrivalModel::PhaseBased(_) => {
            DrawnOrder::from_permutation(m, model.fixed_list().expect("deterministic model"))
        }
        ArrivalModel::UniformTimes => {
            let keys: Vec<_> = (0..m)
                .map(|e| OrderKey { primary: uniform_time(coins, e), secondary: 0.0 })
                .collect();
            Ok(sorted(keys, None))
        }
        ArrivalModel::LexSeeds => {
            let seeds: Vec<f64> = (0..inst.vertex_count).map(|v| vertex_seed(coins, v)).collect();
            let keys: Vec<_> = inst.edges.iter().map(|e| lex_key(seeds[e.u], seeds[e.v])).collect();
            Ok(sorted(keys, Some(seeds)))
        }
    }
}

fn sorted(keys: Vec<OrderKey>, vertex_seeds: Option<Vec<f64>>) -> DrawnOrder {
    let mut permutation: Vec<usize> = (0..keys.len()).collect();
    permutation.sort_unstable_by(|&a, &b| keys[a].cmp_with(a, &keys[b], b));
    DrawnOrder { permutation, keys, vertex_seeds }
}

fn tagged(inst: &Instance, family: &str) -> Result<usize> {
    if inst.metadata.get("family").map(String::as_str) != Some(family) {
        return Err(Error::invalid(format!("instance is not tagged as {family}")));
    }
    inst.meta_usize("n").ok_or_else(|| Error::invalid("instance metadata lacks n"))
}

/// Hub at vertex 0, spokes v_1..v_n at vertices 1..=n.
fn classify(inst: &Instance, n: usize) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let (mut leaves, mut clique, mut hub) = (Vec::new(), Vec::new(), Vec::new());
    let spoke = |w: usize| (1..=n).contains(&w);
    for e in &inst.edges {
        if e.u == 0 || e.v == 0 {
            hub.push(e.id);
        } else if spoke(e.u) && spoke(e.v) {
            clique.push(e.id);
        } else {
            leaves.push(e.id);
        }
    }
    (leaves, clique, hub)
}

fn hub_edge_of(inst: &Instance, hub: &[usize], vi: usize) -> usize {
    *hub.iter()
        .find(|&&e| inst.edges[e].u == vi || inst.edges[e].v == vi)
        .expect("hub edge for every spoke")
}

/// Leaf edges, then clique edges, then hub edges with (u, v_last) last.
/// Spokes are numbered from 1.
pub fn phase_based_general(inst: &Instance, last_vertex: usize) -> Result<ArrivalModel> {
    let n = tagged(inst, "general_hard")?;
    if !(1..=n).contains(&last_vertex) {
        return Err(Error::invalid(format!("last vertex {last_vertex} outside 1..={n}")));
    }
    let (leaves, clique, mut hub) = classify(inst, n);
    let last = hub_edge_of(inst, &hub, last_vertex);
    hub.retain(|&e| e != last);
    hub.push(last);
    Ok(ArrivalModel::PhaseBased(PhaseSpec {
        phases: vec![leaves, clique, hub],
        last_subset: vec![last_vertex],
    }))
}

/// Leaf edges, then hub edges with {u} x S last in the given order.
pub fn phase_based_tree(inst: &Instance, last_subset: &[usize]) -> Result<ArrivalModel> {
    let n = tagged(inst, "tree_hard")?;
    let mut seen = vec![false; n + 1];
    for &s in last_subset {
        if !(1..=n).contains(&s) || seen[s] {
            return Err(Error::invalid(format!("bad last-subset entry {s}")));
        }
        seen[s] = true;
    }
    let (leaves, _, hub) = classify(inst, n);
    let tail: Vec<usize> = last_subset.iter().map(|&s| hub_edge_of(inst, &hub, s)).collect();
    let mut phase2: Vec<usize> = hub.into_iter().filter(|e| !tail.contains(e)).collect();
    phase2.extend(&tail);
    Ok(ArrivalModel::PhaseBased(PhaseSpec {
        phases: vec![leaves, phase2],
        last_subset: last_subset.to_vec(),
    }))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phases: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fixed: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    last_subset: Option<Vec<usize>>,
}

impl Serialize for ArrivalModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let file = match self {
            ArrivalModel::Fixed(list) => ModelFile {
                kind: "fixed".into(),
                phases: None,
                fixed: Some(list.clone()),
                last_subset: None,
            },
            ArrivalModel::UniformTimes | ArrivalModel::LexSeeds => ModelFile {
                kind: self.label(),
                phases: None,
                fixed: None,
                last_subset: None,
            },
            ArrivalModel::PhaseBased(p) => ModelFile {
                kind: "phase_based".into(),
                phases: Some(p.phases.clone()),
                fixed: None,
                last_subset: Some(p.last_subset.clone()),
            },
        };
        file.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ArrivalModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = ModelFile::deserialize(d)?;
        match f.kind.as_str() {
            "fixed" => Ok(ArrivalModel::Fixed(f.fixed.ok_or_else(|| D::Error::missing_field("fixed"))?)),
            "uniform_times" => Ok(ArrivalModel::UniformTimes),
            "lex_seeds" => Ok(ArrivalModel::LexSeeds),
            "phase_based" => Ok(ArrivalModel::PhaseBased(PhaseSpec {
                phases: f.phases.ok_or_else(|| D::Error::missing_field("phases"))?,
                last_subset: f.last_subset.unwrap_or_default(),
            })),
            other => Err(D::Error::unknown_variant(other, &["fixed", "uniform_times", "lex_seeds", "phase_based"])),
        }
    }
}
