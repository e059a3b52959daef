//! Two-sided Poisson(1) Galton-Watson trees, greedy matching on them, and the
//! closed-form q functions.

use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::stats::{wilson, Interval};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::orders::{lex_key, OrderKey};
use crate::rng::{mix64, CoinStream, Purpose};

pub const DEFAULT_NODE_CAP: usize = 1_000_000;
const CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GwOrder {
    Uniform,
    Lex,
}

impl FromStr for GwOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "uniform_times" => Ok(GwOrder::Uniform),
            "lex" | "lex_seeds" => Ok(GwOrder::Lex),
            _ => Err(Error::invalid(format!("unknown GW order '{s}'"))),
        }
    }
}

/// Poisson draw by inversion; intended for small means.
pub fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let u: f64 = rng.gen();
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0u32;
    while u > cdf && k < 10_000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 {
            break;
        }
    }
    k
}

/// Node 0 is u and node 1 is v; they are joined by the special edge. Nodes
/// are numbered in breadth-first creation order, so children of a node are
/// contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct GwTree {
    pub parent: Vec<u32>,
    pub child_start: Vec<u32>,
    pub child_count: Vec<u32>,
    pub truncated: bool,
}

impl GwTree {
    pub fn size(&self) -> usize {
        self.parent.len()
    }

    pub fn children(&self, w: usize) -> std::ops::Range<usize> {
        let s = self.child_start[w] as usize;
        s..s + self.child_count[w] as usize
    }
}

/// Breadth-first sample; stops with `truncated` once the size would pass `node_cap`.
pub fn sample_gw<R: Rng>(rng: &mut R, node_cap: usize) -> GwTree {
    let cap = node_cap.max(2);
    let mut t = GwTree {
        parent: vec![1, 0],
        child_start: Vec::new(),
        child_count: Vec::new(),
        truncated: false,
    };
    let mut i = 0;
    while i < t.parent.len() {
        let k = poisson(rng, 1.0) as usize;
        if t.parent.len() + k > cap {
            t.truncated = true;
            break;
        }
        t.child_start.push(t.parent.len() as u32);
        t.child_count.push(k as u32);
        t.parent.extend(std::iter::repeat_n(i as u32, k));
        i += 1;
    }
    let n = t.parent.len();
    t.child_start.resize(n, n as u32);
    t.child_count.resize(n, 0);
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GwOutcome {
    pub matched: bool,
    pub u_free: bool,
    pub v_free: bool,
}

/// Run greedy on a sampled tree by bottom-up badness evaluation.
pub fn greedy_on_gw<R: Rng>(tree: &GwTree, order: GwOrder, rng: &mut R) -> Result<GwOutcome> {
    if tree.truncated {
        return Err(Error::invalid("truncated tree"));
    }
    let n = tree.size();
    // key[c] is the key of the edge from c to its parent; special edge at 0 and 1
    let key: Vec<OrderKey> = match order {
        GwOrder::Uniform => {
            let special = OrderKey { primary: rng.gen(), secondary: 0.0 };
            let mut k = vec![special, special];
            k.extend((2..n).map(|_| OrderKey { primary: rng.gen(), secondary: 0.0 }));
            k
        }
        GwOrder::Lex => {
            let seeds: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            (0..n).map(|c| lex_key(seeds[c], seeds[tree.parent[c] as usize])).collect()
        }
    };
    let mut has_bad = vec![false; n];
    for c in (2..n).rev() {
        if !has_bad[c] {
            let p = tree.parent[c] as usize;
            if key[c].cmp_with(c, &key[p], p).is_lt() {
                has_bad[p] = true;
            }
        }
    }
    let (u_free, v_free) = (!has_bad[0], !has_bad[1]);
    Ok(GwOutcome { matched: u_free && v_free, u_free, v_free })
}

#[derive(Clone, Copy)]
struct Frame {
    own: f64,
    thr: f64,
    remaining: u32,
}

/// Whether the root of a one-sided tree is still unmatched when its edge to
/// the outside arrives, sampling only subtrees that can matter. Uniform: `own`
/// and `threshold` are both the arrival time. Lex: `own` is the root's seed and
/// `threshold` the outside endpoint's seed. `None` if more than `cap` nodes
/// were generated.
pub fn side_free<R: Rng>(rng: &mut R, order: GwOrder, own: f64, threshold: f64, cap: usize) -> Option<bool> {
    let mut nodes = 1usize;
    let mut stack = vec![Frame { own, thr: threshold, remaining: poisson(rng, threshold) }];
    loop {
        let top = stack.last_mut().expect("nonempty stack");
        if top.remaining == 0 {
            stack.pop();
            // popped node is free; its parent therefore has a bad child
            let mut result = true;
            loop {
                if stack.is_empty() {
                    return Some(result);
                }
                if result {
                    stack.pop();
                    result = false;
                } else {
                    break;
                }
            }
            continue;
        }
        top.remaining -= 1;
        let s = rng.gen::<f64>() * top.thr;
        let child_thr = match order {
            GwOrder::Uniform => s,
            GwOrder::Lex => top.own,
        };
        nodes += 1;
        if nodes > cap {
            return None;
        }
        stack.push(Frame { own: s, thr: child_thr, remaining: poisson(rng, child_thr) });
    }
}

/// Special-edge outcome from the pruned sampler.
pub fn lazy_gw_outcome<R: Rng>(rng: &mut R, order: GwOrder, cap: usize) -> Option<GwOutcome> {
    let (u_free, v_free) = match order {
        GwOrder::Uniform => {
            let t: f64 = rng.gen();
            (side_free(rng, order, t, t, cap)?, side_free(rng, order, t, t, cap)?)
        }
        GwOrder::Lex => {
            let (su, sv): (f64, f64) = (rng.gen(), rng.gen());
            (side_free(rng, order, su, sv, cap)?, side_free(rng, order, sv, su, cap)?)
        }
    };
    Some(GwOutcome { matched: u_free && v_free, u_free, v_free })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GwSampler {
    /// Sample whole trees breadth-first, then evaluate.
    Full,
    /// Sample only edges that arrive before their parent edge.
    Pruned,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GwEstimate {
    pub order: GwOrder,
    pub sampler: GwSampler,
    pub trials: u64,
    pub truncated: u64,
    pub truncated_fraction: f64,
    pub match_prob: f64,
    pub ci: Interval,
    pub u_free_rate: f64,
    pub v_free_rate: f64,
    /// Sum over non-truncated trees of sizes (full sampler) or generated nodes.
    pub mean_size: f64,
}

#[derive(Default, Clone, Copy)]
struct GwAcc {
    truncated: u64,
    matched: u64,
    u_free: u64,
    v_free: u64,
    size: u64,
}

pub fn simulate_gw(order: GwOrder, sampler: GwSampler, trials: u64, cap: usize, seed: u64) -> GwEstimate {
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<GwAcc> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = GwAcc::default();
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = CoinStream::new(seed, t).rng(Purpose::Gw);
                let out = match sampler {
                    GwSampler::Full => {
                        let tree = sample_gw(&mut rng, cap);
                        if tree.truncated {
                            None
                        } else {
                            acc.size += tree.size() as u64;
                            greedy_on_gw(&tree, order, &mut rng).ok()
                        }
                    }
                    GwSampler::Pruned => lazy_gw_outcome(&mut rng, order, cap),
                };
                match out {
                    None => acc.truncated += 1,
                    Some(o) => {
                        acc.matched += o.matched as u64;
                        acc.u_free += o.u_free as u64;
                        acc.v_free += o.v_free as u64;
                    }
                }
            }
            acc
        })
        .collect();
    let mut a = GwAcc::default();
    for p in parts {
        a.truncated += p.truncated;
        a.matched += p.matched;
        a.u_free += p.u_free;
        a.v_free += p.v_free;
        a.size += p.size;
    }
    let kept = trials - a.truncated;
    let rate = |k: u64| if kept == 0 { 0.0 } else { k as f64 / kept as f64 };
    GwEstimate {
        order,
        sampler,
        trials,
        truncated: a.truncated,
        truncated_fraction: a.truncated as f64 / trials.max(1) as f64,
        match_prob: rate(a.matched),
        ci: wilson(a.matched, kept),
        u_free_rate: rate(a.u_free),
        v_free_rate: rate(a.v_free),
        mean_size: rate(a.size),
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name}={v} outside [0,1]")))
    }
}

/// 1/(1+t): probability an endpoint is unmatched when the special edge arrives at time t.
pub fn q_uniform(t: f64) -> Result<f64> {
    unit("t", t)?;
    Ok(1.0 / (1.0 + t))
}

/// e^x/(e^x + e^y - 1) for own seed x and other-endpoint seed y.
pub fn q_lex(x: f64, y: f64) -> Result<f64> {
    unit("x", x)?;
    unit("y", y)?;
    Ok(x.exp() / (x.exp() + y.exp_m1()))
}

pub fn match_prob_closed(order: GwOrder) -> f64 {
    match order {
        GwOrder::Uniform => 0.5,
        GwOrder::Lex => 1.0 - (2.0 - (-1.0f64).exp()).ln(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QPoint {
    pub x: f64,
    /// Other-endpoint seed (lex only).
    pub y: Option<f64>,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std_err: f64,
    pub closed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QTable {
    pub order: GwOrder,
    pub points: Vec<QPoint>,
}

impl QTable {
    pub fn max_deviation(&self) -> f64 {
        self.points.iter().map(|p| (p.estimate - p.closed).abs()).fold(0.0, f64::max)
    }
}

pub fn uniform_grid(k: usize) -> Vec<(f64, f64)> {
    (0..k).map(|i| (i as f64 / (k - 1).max(1) as f64, 0.0)).collect()
}

/// Points (x_i, 1 - x_i).
pub fn lex_diagonal(k: usize) -> Vec<(f64, f64)> {
    uniform_grid(k).into_iter().map(|(x, _)| (x, 1.0 - x)).collect()
}

/// Full square grid, row-major in x.
pub fn lex_square(k: usize) -> Vec<(f64, f64)> {
    let g = uniform_grid(k);
    g.iter().flat_map(|&(x, _)| g.iter().map(move |&(y, _)| (x, y))).collect()
}

/// Empirical q at each grid point. Uniform uses the first coordinate only.
pub fn estimate_q(order: GwOrder, grid: &[(f64, f64)], trials: u64, seed: u64) -> Result<QTable> {
    let mut points = Vec::with_capacity(grid.len());
    for (i, &(x, y)) in grid.iter().enumerate() {
        let closed = match order {
            GwOrder::Uniform => q_uniform(x)?,
            GwOrder::Lex => q_lex(x, y)?,
        };
        let point_seed = mix64(seed ^ mix64(i as u64 + 1));
        let chunks = trials.div_ceil(CHUNK);
        let free: u64 = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut k = 0u64;
                for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                    let mut rng = CoinStream::new(point_seed, t).rng(Purpose::Gw);
                    let (own, thr) = match order {
                        GwOrder::Uniform => (x, x),
                        GwOrder::Lex => (x, y),
                    };
                    if side_free(&mut rng, order, own, thr, usize::MAX).unwrap_or(false) {
                        k += 1;
                    }
                }
                k
            })
            .sum();
        let est = free as f64 / trials as f64;
        let ci = wilson(free, trials);
        points.push(QPoint {
            x,
            y: (order == GwOrder::Lex).then_some(y),
            trials,
            estimate: est,
            ci_low: ci.low,
            ci_high: ci.high,
            std_err: (est * (1.0 - est) / trials as f64).sqrt(),
            closed,
        });
    }
    Ok(QTable { order, points })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Residual {
    pub x: f64,
    pub y: Option<f64>,
    pub residual: f64,
    pub tolerance: f64,
}

impl Residual {
    pub fn ok(&self) -> bool {
        self.residual.abs() <= self.tolerance
    }
}

/// Central-difference residual of dq/dt + q^2 = 0 at interior points of an
/// evenly spaced uniform-order table. The tolerance is four standard errors of
/// the residual plus the truncation error of the same stencil on the closed form.
pub fn uniform_ode_residuals(table: &QTable) -> Vec<Residual> {
    let p = &table.points;
    let mut out = Vec::new();
    for i in 1..p.len().saturating_sub(1) {
        let h = 0.5 * (p[i + 1].x - p[i - 1].x);
        let r = (p[i + 1].estimate - p[i - 1].estimate) / (2.0 * h) + p[i].estimate.powi(2);
        let exact = (p[i + 1].closed - p[i - 1].closed) / (2.0 * h) + p[i].closed.powi(2);
        let sd = (p[i + 1].std_err.powi(2) + p[i - 1].std_err.powi(2)).sqrt() / (2.0 * h);
        let sq = 2.0 * p[i].estimate * p[i].std_err;
        out.push(Residual {
            x: p[i].x,
            y: None,
            residual: r,
            tolerance: 4.0 * (sd * sd + sq * sq).sqrt() + exact.abs(),
        });
    }
    out
}

/// Residual of dq/dy(x,y) + q(x,y) q(y,x) = 0 on a k x k lex table from [`lex_square`].
pub fn lex_pde_residuals(table: &QTable, k: usize) -> Result<Vec<Residual>> {
    let p = &table.points;
    if p.len() != k * k {
        return Err(Error::invalid("table is not a square grid"));
    }
    let at = |a: usize, b: usize| &p[a * k + b];
    let h = 1.0 / (k - 1) as f64;
    let mut out = Vec::new();
    for a in 0..k {
        for b in 1..k - 1 {
            let (up, down, here, mirror) = (at(a, b + 1), at(a, b - 1), at(a, b), at(b, a));
            let r = (up.estimate - down.estimate) / (2.0 * h) + here.estimate * mirror.estimate;
            let exact = (up.closed - down.closed) / (2.0 * h) + here.closed * mirror.closed;
            let sd = (up.std_err.powi(2) + down.std_err.powi(2)).sqrt() / (2.0 * h);
            let sp = ((mirror.estimate * here.std_err).powi(2) + (here.estimate * mirror.std_err).powi(2)).sqrt();
            out.push(Residual {
                x: here.x,
                y: here.y,
                residual: r,
                tolerance: 4.0 * (sd * sd + sp * sp).sqrt() + exact.abs(),
            });
        }
    }
    Ok(out)
}

/// Composite Simpson integral of q-hat squared over an evenly spaced uniform table.
pub fn integrate_q_squared(table: &QTable) -> (f64, f64) {
    let p = &table.points;
    let n = p.len() - 1;
    let h = (p[n].x - p[0].x) / n as f64;
    let (mut s, mut var) = (0.0, 0.0);
    for (i, pt) in p.iter().enumerate() {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0;
        s += w * pt.estimate * pt.estimate;
        var += (w * 2.0 * pt.estimate * pt.std_err).powi(2);
    }
    (s, var.sqrt())
}

/// Double integral of q_lex(x,y) q_lex(y,x) by tensor Gauss-Legendre.
pub fn lex_match_quadrature(points_per_axis: usize) -> f64 {
    crate::constants::integrate_unit_square(
        |x, y| {
            let (ex, ey) = (x.exp(), y.exp());
            let d = ex + ey - 1.0;
            ex * ey / (d * d)
        },
        points_per_axis,
    )
}

/// Rooted shape of the active component around a special edge: canonical
/// codes of the two sides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TreeShape {
    pub name: String,
    pub u_code: String,
    pub v_code: String,
}

impl TreeShape {
    pub fn new(name: &str, u_code: &str, v_code: &str) -> Self {
        TreeShape { name: name.into(), u_code: u_code.into(), v_code: v_code.into() }
    }

    /// Number of vertices.
    pub fn size(&self) -> usize {
        (self.u_code.len() + self.v_code.len()) / 2
    }

    /// Probability that the two-sided Poisson(1) tree has this shape:
    /// product over nodes of e^-1 / (product of child-class multiplicities!).
    pub fn gw_probability(&self) -> f64 {
        code_probability(&self.u_code) * code_probability(&self.v_code)
    }
}

pub fn shape_library() -> Vec<TreeShape> {
    vec![
        TreeShape::new("single_edge", "()", "()"),
        TreeShape::new("u_child", "(())", "()"),
        TreeShape::new("v_cherry", "()", "(()())"),
    ]
}

fn split_children(code: &str) -> Vec<&str> {
    let inner = &code[1..code.len() - 1];
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, ch) in inner.char_indices() {
        depth += if ch == '(' { 1 } else { -1 };
        if depth == 0 {
            out.push(&inner[start..=i]);
            start = i + 1;
        }
    }
    out
}

fn code_probability(code: &str) -> f64 {
    let children = split_children(code);
    let mut p = (-1.0f64).exp();
    let mut i = 0;
    while i < children.len() {
        let mut j = i;
        while j < children.len() && children[j] == children[i] {
            j += 1;
        }
        p /= (1..=(j - i)).map(|k| k as f64).product::<f64>();
        i = j;
    }
    p * children.iter().map(|c| code_probability(c)).product::<f64>()
}

/// Canonical code of a rooted tree given as children lists.
pub fn canonical_code(children: &[Vec<usize>], root: usize) -> String {
    let mut codes: Vec<String> = children[root].iter().map(|&c| canonical_code(children, c)).collect();
    codes.sort();
    format!("({})", codes.concat())
}

/// Codes of the two sides of a GW tree, or `None` if it has more than `limit` nodes.
pub fn gw_shape_codes(tree: &GwTree, limit: usize) -> Option<(String, String)> {
    if tree.truncated || tree.size() > limit {
        return None;
    }
    let kids: Vec<Vec<usize>> = (0..tree.size()).map(|w| tree.children(w).collect()).collect();
    Some((canonical_code(&kids, 0), canonical_code(&kids, 1)))
}

/// Codes of the active component around `target` (forced active) where each
/// other edge f is active iff `active(f)`. `None` on a cycle or more than `limit` vertices.
pub fn instance_shape_codes(
    inst: &Instance,
    inc: &crate::instance::Incidence,
    target: usize,
    active: impl Fn(usize) -> bool,
    limit: usize,
) -> Option<(String, String)> {
    let e = &inst.edges[target];
    let mut verts = vec![e.u, e.v];
    let mut parent_edge = vec![target, target];
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
    let mut i = 0;
    while i < verts.len() {
        let w = verts[i];
        for &f in inc.of(w) {
            if f == parent_edge[i] || !active(f) {
                continue;
            }
            let ed = &inst.edges[f];
            let z = if ed.u == w { ed.v } else { ed.u };
            if verts.contains(&z) {
                return None;
            }
            if verts.len() == limit {
                return None;
            }
            kids[i].push(verts.len());
            verts.push(z);
            parent_edge.push(f);
            kids.push(Vec::new());
        }
        i += 1;
    }
    Some((canonical_code(&kids, 0), canonical_code(&kids, 1)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeRow {
    pub name: String,
    pub size: usize,
    pub p_instance: f64,
    pub p_gw: f64,
    pub p_closed: f64,
    pub gap: f64,
    pub sigma: f64,
    pub bound: f64,
    pub passes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeComparison {
    pub instance: String,
    pub target: usize,
    pub epsilon: f64,
    pub trials: u64,
    pub rows: Vec<ShapeRow>,
}

/// Compare the law of the active component around `target` with the GW law
/// on each library shape, against the bound 3 eps |T0|^2 + 4 sigma.
pub fn compare_to_instance(
    inst: &Instance,
    target: usize,
    shapes: &[TreeShape],
    trials: u64,
    seed: u64,
) -> Result<ShapeComparison> {
    if target >= inst.edges.len() {
        return Err(Error::invalid(format!("no edge {target}")));
    }
    let inc = inst.incidence();
    let limit = shapes.iter().map(|s| s.size()).max().unwrap_or(2);
    let xs = inst.xs();
    let count = |from_gw: bool| -> Vec<u64> {
        let chunks = trials.div_ceil(CHUNK);
        let parts: Vec<Vec<u64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut hits = vec![0u64; shapes.len()];
                for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                    let codes = if from_gw {
                        let mut rng = CoinStream::new(seed, t).rng(Purpose::Gw);
                        gw_shape_codes(&sample_gw(&mut rng, limit + 1), limit)
                    } else {
                        let lane = CoinStream::new(seed, t).lane(Purpose::Shape);
                        instance_shape_codes(inst, &inc, target, |f| lane.uniform(f as u64) < xs[f], limit)
                    };
                    if let Some((cu, cv)) = codes {
                        for (k, s) in shapes.iter().enumerate() {
                            if s.u_code == cu && s.v_code == cv {
                                hits[k] += 1;
                            }
                        }
                    }
                }
                hits
            })
            .collect();
        let mut total = vec![0u64; shapes.len()];
        for p in parts {
            for (a, b) in total.iter_mut().zip(p) {
                *a += b;
            }
        }
        total
    };
    let (hi, hg) = (count(false), count(true));
    let eps = inst.max_x();
    let tf = trials as f64;
    let rows = shapes
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let (pi, pg) = (hi[k] as f64 / tf, hg[k] as f64 / tf);
            let sigma = (pi * (1.0 - pi) / tf + pg * (1.0 - pg) / tf).sqrt();
            let bound = 3.0 * eps * (s.size() * s.size()) as f64;
            let gap = (pi - pg).abs();
            ShapeRow {
                name: s.name.clone(),
                size: s.size(),
                p_instance: pi,
                p_gw: pg,
                p_closed: s.gw_probability(),
                gap,
                sigma,
                bound,
                passes: gap <= bound + 4.0 * sigma,
            }
        })
        .collect();
    Ok(ShapeComparison { instance: inst.name.clone(), target, epsilon: eps, trials, rows })
}
