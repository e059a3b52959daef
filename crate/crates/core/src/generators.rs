//! Instance families: hard constructions, the greedy tightness gadget and fixtures.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::Instance;

fn need(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(msg))
    }
}

/// Hub u (vertex 0) joined to v_1..v_n (vertices 1..=n), a clique on the v_i,
/// and n-2 private leaves per v_i. Edge ids: hub edges, clique edges, leaf
/// edges grouped by spoke.
pub fn general_hard(n: usize) -> Result<Instance> {
    need(n >= 3, "general_hard needs n >= 3")?;
    let nf = n as f64;
    let mut edges = Vec::with_capacity(n + n * (n - 1) / 2 + n * (n - 2));
    for i in 1..=n {
        edges.push((0, i, 1.0 / nf));
    }
    let clique_x = 1.0 / (nf * (nf - 1.0));
    for i in 1..=n {
        for j in i + 1..=n {
            edges.push((i, j, clique_x));
        }
    }
    for i in 1..=n {
        let base = 1 + n + (i - 1) * (n - 2);
        for k in 0..n - 2 {
            edges.push((i, base + k, 1.0 / nf));
        }
    }
    Ok(Instance::new(format!("general_hard_{n}"), 1 + n + n * (n - 2), &edges)
        .with_meta("family", "general_hard")
        .with_meta("n", n)
        .with_meta("hub", 0)
        .with_meta("spokes", format!("1..={n}"))
        .with_meta("leaf_block", n - 2))
}

/// Hub u joined to v_1..v_n, each v_i with n-1 private leaves. A tree.
pub fn tree_hard(n: usize) -> Result<Instance> {
    need(n >= 2, "tree_hard needs n >= 2")?;
    let nf = n as f64;
    let mut edges = Vec::with_capacity(n * n);
    for i in 1..=n {
        edges.push((0, i, 1.0 / nf));
    }
    for i in 1..=n {
        let base = 1 + n + (i - 1) * (n - 1);
        for k in 0..n - 1 {
            edges.push((i, base + k, 1.0 / nf));
        }
    }
    Ok(Instance::new(format!("tree_hard_{n}"), 1 + n + n * (n - 1), &edges)
        .with_meta("family", "tree_hard")
        .with_meta("n", n)
        .with_meta("hub", 0)
        .with_meta("spokes", format!("1..={n}"))
        .with_meta("leaf_block", n - 1))
}

/// Center edge (u_0, v_0) with n pendant edges at each end, all x = 1/(n+1).
/// Vertices: u_0, v_0, u_1..u_n, v_1..v_n. The center edge has id 0.
pub fn star_gadget(n: usize) -> Result<Instance> {
    need(n >= 1, "star_gadget needs n >= 1")?;
    let x = 1.0 / (n as f64 + 1.0);
    let mut edges = vec![(0, 1, x)];
    edges.extend((0..n).map(|i| (0, 2 + i, x)));
    edges.extend((0..n).map(|i| (1, 2 + n + i, x)));
    Ok(Instance::new(format!("star_gadget_{n}"), 2 * n + 2, &edges)
        .with_meta("family", "star_gadget")
        .with_meta("n", n)
        .with_meta("center_edge", 0))
}

pub fn cycle(g: usize, x: f64) -> Result<Instance> {
    need(g >= 3, "cycle needs g >= 3")?;
    need(x > 0.0 && 2.0 * x <= 1.0 + 1e-12, "cycle needs 0 < 2x <= 1")?;
    let edges: Vec<_> = (0..g).map(|i| (i, (i + 1) % g, x)).collect();
    Ok(Instance::new(format!("cycle_{g}"), g, &edges).with_meta("family", "cycle").with_meta("g", g))
}

/// K_{n,n} with x = 1/n; left vertices 0..n, right n..2n, edge i*n + j joins i and n + j.
pub fn complete_bipartite(n: usize) -> Result<Instance> {
    need(n >= 1, "complete_bipartite needs n >= 1")?;
    let x = 1.0 / n as f64;
    let mut edges = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            edges.push((i, n + j, x));
        }
    }
    Ok(Instance::new(format!("complete_bipartite_{n}"), 2 * n, &edges)
        .with_meta("family", "complete_bipartite")
        .with_meta("n", n))
}

/// Every pair of n vertices, x = 1/n, in a seeded random order. The active
/// graph is then Erdos-Renyi with edge probability 1/n; each vertex has n-1
/// incident edges so its fractional degree is (n-1)/n.
pub fn er_one_regular(n: usize, seed: u64) -> Result<Instance> {
    need(n >= 2, "er_one_regular needs n >= 2")?;
    let x = 1.0 / n as f64;
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j, x));
        }
    }
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Instance::new(format!("er_one_regular_{n}"), n, &pairs)
        .with_meta("family", "er_one_regular")
        .with_meta("n", n)
        .with_meta("seed", seed))
}

/// Path with `k` edges, all with value x.
pub fn path(k: usize, x: f64) -> Result<Instance> {
    need(k >= 1, "path needs at least one edge")?;
    need(x > 0.0 && (k == 1 && x <= 1.0 || 2.0 * x <= 1.0 + 1e-12), "path value violates the vertex constraint")?;
    let edges: Vec<_> = (0..k).map(|i| (i, i + 1, x)).collect();
    Ok(Instance::new(format!("path_{k}"), k + 1, &edges).with_meta("family", "path"))
}

pub fn star(k: usize, x: f64) -> Result<Instance> {
    need(k >= 1, "star needs at least one edge")?;
    need(x > 0.0 && k as f64 * x <= 1.0 + 1e-12, "star value violates the vertex constraint")?;
    let edges: Vec<_> = (0..k).map(|i| (0, i + 1, x)).collect();
    Ok(Instance::new(format!("star_{k}"), k + 1, &edges).with_meta("family", "star"))
}

/// Random recursive tree on `vertices` vertices with random feasible values.
pub fn random_tree(vertices: usize, seed: u64) -> Result<Instance> {
    need(vertices >= 2, "random_tree needs at least 2 vertices")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(vertices - 1);
    let mut deg = vec![0usize; vertices];
    for child in 1..vertices {
        let parent = rng.gen_range(0..child);
        pairs.push((parent, child));
        deg[parent] += 1;
        deg[child] += 1;
    }
    let edges: Vec<_> = pairs
        .iter()
        .map(|&(a, b)| (a, b, rng.gen_range(0.05..1.0) / deg[a].max(deg[b]) as f64))
        .collect();
    Ok(Instance::new(format!("random_tree_{vertices}_{seed}"), vertices, &edges).with_meta("family", "random_tree"))
}

/// Textual generator spec, e.g. `cycle:31:0.5` or `er_one_regular:2000:7`.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorSpec {
    GeneralHard(usize),
    TreeHard(usize),
    StarGadget(usize),
    Cycle(usize, f64),
    CompleteBipartite(usize),
    ErdosRenyiOneRegular(usize, Option<u64>),
    Path(usize, f64),
    Star(usize, f64),
    RandomTree(usize, Option<u64>),
}

impl GeneratorSpec {
    /// Build the instance; `default_seed` fills in a missing seed.
    pub fn generate(&self, default_seed: u64) -> Result<Instance> {
        match *self {
            GeneratorSpec::GeneralHard(n) => general_hard(n),
            GeneratorSpec::TreeHard(n) => tree_hard(n),
            GeneratorSpec::StarGadget(n) => star_gadget(n),
            GeneratorSpec::Cycle(g, x) => cycle(g, x),
            GeneratorSpec::CompleteBipartite(n) => complete_bipartite(n),
            GeneratorSpec::ErdosRenyiOneRegular(n, s) => er_one_regular(n, s.unwrap_or(default_seed)),
            GeneratorSpec::Path(k, x) => path(k, x),
            GeneratorSpec::Star(k, x) => star(k, x),
            GeneratorSpec::RandomTree(n, s) => random_tree(n, s.unwrap_or(default_seed)),
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::invalid(format!("cannot parse generator spec '{s}'"));
        let int = |i: usize| parts.get(i).ok_or_else(bad)?.parse::<usize>().map_err(|_| bad());
        let float = |i: usize| parts.get(i).ok_or_else(bad)?.parse::<f64>().map_err(|_| bad());
        let seed = |i: usize| match parts.get(i) {
            None => Ok(None),
            Some(p) => p.parse::<u64>().map(Some).map_err(|_| bad()),
        };
        let arity = |k: usize| if parts.len() == k { Ok(()) } else { Err(bad()) };
        Ok(match parts[0] {
            "general_hard" => {
                arity(2)?;
                GeneratorSpec::GeneralHard(int(1)?)
            }
            "tree_hard" => {
                arity(2)?;
                GeneratorSpec::TreeHard(int(1)?)
            }
            "star_gadget" => {
                arity(2)?;
                GeneratorSpec::StarGadget(int(1)?)
            }
            "cycle" => {
                arity(3)?;
                GeneratorSpec::Cycle(int(1)?, float(2)?)
            }
            "complete_bipartite" => {
                arity(2)?;
                GeneratorSpec::CompleteBipartite(int(1)?)
            }
            "er_one_regular" => {
                if parts.len() > 3 {
                    return Err(bad());
                }
                GeneratorSpec::ErdosRenyiOneRegular(int(1)?, seed(2)?)
            }
            "path" => {
                arity(3)?;
                GeneratorSpec::Path(int(1)?, float(2)?)
            }
            "star" => {
                arity(3)?;
                GeneratorSpec::Star(int(1)?, float(2)?)
            }
            "random_tree" => {
                if parts.len() > 3 {
                    return Err(bad());
                }
                GeneratorSpec::RandomTree(int(1)?, seed(2)?)
            }
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::GeneralHard(n) => write!(f, "general_hard:{n}"),
            GeneratorSpec::TreeHard(n) => write!(f, "tree_hard:{n}"),
            GeneratorSpec::StarGadget(n) => write!(f, "star_gadget:{n}"),
            GeneratorSpec::Cycle(g, x) => write!(f, "cycle:{g}:{x}"),
            GeneratorSpec::CompleteBipartite(n) => write!(f, "complete_bipartite:{n}"),
            GeneratorSpec::ErdosRenyiOneRegular(n, None) => write!(f, "er_one_regular:{n}"),
            GeneratorSpec::ErdosRenyiOneRegular(n, Some(s)) => write!(f, "er_one_regular:{n}:{s}"),
            GeneratorSpec::Path(k, x) => write!(f, "path:{k}:{x}"),
            GeneratorSpec::Star(k, x) => write!(f, "star:{k}:{x}"),
            GeneratorSpec::RandomTree(n, None) => write!(f, "random_tree:{n}"),
            GeneratorSpec::RandomTree(n, Some(s)) => write!(f, "random_tree:{n}:{s}"),
        }
    }
}
