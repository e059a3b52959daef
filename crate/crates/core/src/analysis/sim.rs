//! Monte Carlo driver. A trial visits only the edges that can matter: the
//! active ones (first-round edges for the reduction) plus the targets, sorted
//! by arrival. Tree-OCRS under random orders needs every edge's value for its
//! prefix degrees and falls back to visiting all edges.

use rayon::prelude::*;

use crate::error::Result;
use crate::instance::{fractional_degree_prefix, Instance};
use crate::orders::{lex_key, uniform_time, vertex_seed, ArrivalModel, OrderKey};
use crate::realization::{max_of, sample_active_into};
use crate::rng::{CoinStream, Purpose};
use crate::schemes::engine::{Coins, Compiled, Natural, Scratch};
use crate::schemes::SchemeSpec;

pub(crate) const CHUNK: u64 = 2048;
const NONE: u32 = u32::MAX;

enum OrderPlan {
    Ranked { rank: Vec<u32>, identity: bool },
    Uniform,
    Lex,
}

#[derive(Clone, Copy)]
struct Ev {
    edge: u32,
    active: bool,
    slot: u32,
    key: OrderKey,
}

/// Observer of one trial.
pub(crate) trait Sink {
    /// Whether a target would be kept had it been active.
    fn forced(&mut self, _slot: usize, _kept: bool) {}
    /// A kept edge of the realized matching.
    fn kept(&mut self, _edge: usize) {}
    /// A first-round edge of the reduction and whether it was upgraded.
    fn first_round(&mut self, _upgraded: bool) {}
    fn end(&mut self, _s: &Scratch) {}
}

pub(crate) struct Workspace {
    pub s: Scratch,
    base: Vec<usize>,
    ranked: Vec<(u32, u32)>,
    ev: Vec<Ev>,
    state: Vec<bool>,
    perm: Vec<usize>,
}

pub(crate) struct Sim<'a> {
    pub inst: &'a Instance,
    pub comp: Compiled,
    order: OrderPlan,
    dense: bool,
    base: Vec<f64>,
    base_max: f64,
    prefix: Option<Vec<(f64, f64)>>,
    /// Targets as (rank, edge) sorted by rank, or (0, edge) sorted by edge.
    targets: Vec<(u32, u32)>,
    slot: Vec<u32>,
    cut: u32,
}

impl<'a> Sim<'a> {
    pub fn new(spec: &SchemeSpec, inst: &'a Instance, model: &ArrivalModel, targets: &[usize]) -> Result<Self> {
        let m = inst.edges.len();
        let comp = Compiled::new(spec, inst)?;
        let order = match model.ranks(m)? {
            Some(r) => {
                let identity = r.iter().enumerate().all(|(i, &x)| i == x);
                OrderPlan::Ranked { rank: r.into_iter().map(|x| x as u32).collect(), identity }
            }
            None => match model {
                ArrivalModel::UniformTimes => OrderPlan::Uniform,
                _ => OrderPlan::Lex,
            },
        };
        let ranked = matches!(order, OrderPlan::Ranked { .. });
        let dense = comp.is_tree() && !ranked;
        let prefix = if comp.is_tree() && ranked {
            Some(fractional_degree_prefix(inst, &model.fixed_list().expect("deterministic model"))?)
        } else {
            None
        };
        let base = comp.first_round(inst).unwrap_or_else(|| inst.xs());
        let base_max = max_of(&base);
        let mut slot = vec![NONE; m];
        let mut tlist = Vec::with_capacity(targets.len());
        for (i, &t) in targets.iter().enumerate() {
            if t >= m {
                return Err(crate::error::Error::invalid(format!("no edge {t}")));
            }
            if slot[t] != NONE {
                return Err(crate::error::Error::invalid(format!("duplicate target {t}")));
            }
            slot[t] = i as u32;
            let r = match &order {
                OrderPlan::Ranked { rank, .. } => rank[t],
                _ => 0,
            };
            tlist.push((r, t as u32));
        }
        tlist.sort_unstable();
        Ok(Sim { inst, comp, order, dense, base, base_max, prefix, targets: tlist, slot, cut: u32::MAX })
    }

    /// Stop each trial after the first `cut` arrivals (deterministic orders only).
    pub fn with_cut(mut self, cut: usize) -> Self {
        self.cut = cut.min(u32::MAX as usize) as u32;
        self
    }

    pub fn workspace(&self) -> Workspace {
        let m = self.inst.edges.len();
        Workspace {
            s: Scratch::new(self.inst.vertex_count),
            base: Vec::new(),
            ranked: Vec::new(),
            ev: Vec::new(),
            state: if self.dense { vec![false; m] } else { Vec::new() },
            perm: Vec::new(),
        }
    }

    pub fn trial<S: Sink>(&self, seed: u64, t: u64, ws: &mut Workspace, sink: &mut S) -> Result<()> {
        let coins = Coins::new(CoinStream::new(seed, t));
        let mut rng = coins
            .stream
            .rng(if self.comp.is_reduction() { Purpose::FirstRound } else { Purpose::State });
        sample_active_into(&self.base, self.base_max, &mut rng, &mut ws.base);
        ws.s.reset();
        if self.dense {
            self.dense_trial(&coins, ws, sink)?;
        } else {
            self.build_events(&coins.stream, ws);
            self.walk(&coins, ws, sink)?;
        }
        sink.end(&ws.s);
        Ok(())
    }

    fn build_events(&self, coins: &CoinStream, ws: &mut Workspace) {
        ws.ev.clear();
        let zero = OrderKey { primary: 0.0, secondary: 0.0 };
        match &self.order {
            OrderPlan::Ranked { rank, identity, .. } => {
                ws.ranked.clear();
                ws.ranked.extend(ws.base.iter().map(|&e| (rank[e], e as u32)));
                if !identity {
                    ws.ranked.sort_unstable();
                }
                let (a, b) = (&ws.ranked, &self.targets);
                let (mut i, mut j) = (0, 0);
                while i < a.len() || j < b.len() {
                    let take_a = j >= b.len() || (i < a.len() && a[i].0 <= b[j].0);
                    let take_b = i >= a.len() || (j < b.len() && b[j].0 <= a[i].0);
                    let (r, e) = if take_a { a[i] } else { b[j] };
                    if r >= self.cut {
                        break;
                    }
                    ws.ev.push(Ev {
                        edge: e,
                        active: take_a,
                        slot: if take_b { self.slot[e as usize] } else { NONE },
                        key: zero,
                    });
                    i += take_a as usize;
                    j += take_b as usize;
                }
            }
            OrderPlan::Uniform | OrderPlan::Lex => {
                let (a, b) = (&ws.base, &self.targets);
                let (mut i, mut j) = (0, 0);
                while i < a.len() || j < b.len() {
                    let take_a = j >= b.len() || (i < a.len() && a[i] as u32 <= b[j].1);
                    let take_b = i >= a.len() || (j < b.len() && b[j].1 <= a[i] as u32);
                    let e = if take_a { a[i] } else { b[j].1 as usize };
                    ws.ev.push(Ev {
                        edge: e as u32,
                        active: take_a,
                        slot: if take_b { self.slot[e] } else { NONE },
                        key: self.key(coins, e),
                    });
                    i += take_a as usize;
                    j += take_b as usize;
                }
                ws.ev.sort_unstable_by(|x, y| x.key.cmp_with(x.edge as usize, &y.key, y.edge as usize));
            }
        }
    }

    #[inline]
    fn key(&self, coins: &CoinStream, e: usize) -> OrderKey {
        match self.order {
            OrderPlan::Uniform => OrderKey { primary: uniform_time(coins, e), secondary: 0.0 },
            _ => {
                let ed = &self.inst.edges[e];
                lex_key(vertex_seed(coins, ed.u), vertex_seed(coins, ed.v))
            }
        }
    }

    fn walk<S: Sink>(&self, coins: &Coins, ws: &mut Workspace, sink: &mut S) -> Result<()> {
        let second = coins.stream.lane(Purpose::SecondRound);
        let z = match &self.comp.kind {
            crate::schemes::engine::Kind::Reduction(p) => p.z,
            _ => 0.0,
        };
        for k in 0..ws.ev.len() {
            let ev = ws.ev[k];
            let e = ev.edge as usize;
            let edge = &self.inst.edges[e];
            let prefix = match &self.prefix {
                Some(p) => p[e],
                None => (0.0, 0.0),
            };
            let nat = if self.comp.is_reduction() {
                Natural::YZ(ev.active, ev.active && second.uniform(e as u64) < z)
            } else {
                Natural::X(ev.active)
            };
            let out = self.comp.step(edge, prefix, nat, ev.slot != NONE, coins, &mut ws.s)?;
            if let Some(f) = out.forced {
                sink.forced(ev.slot as usize, f);
            }
            if ev.active && self.comp.is_reduction() {
                sink.first_round(ws.s.upgraded);
            }
            if out.kept {
                sink.kept(e);
            }
        }
        Ok(())
    }

    fn dense_trial<S: Sink>(&self, coins: &Coins, ws: &mut Workspace, sink: &mut S) -> Result<()> {
        for &e in &ws.base {
            ws.state[e] = true;
        }
        let m = self.inst.edges.len();
        ws.perm.clear();
        ws.perm.extend(0..m);
        let keys: Vec<OrderKey> = (0..m).map(|e| self.key(&coins.stream, e)).collect();
        ws.perm.sort_unstable_by(|&a, &b| keys[a].cmp_with(a, &keys[b], b));
        let mut result = Ok(());
        for k in 0..m {
            let e = ws.perm[k];
            let edge = &self.inst.edges[e];
            let prefix = (ws.s.deg.get(edge.u), ws.s.deg.get(edge.v));
            let slot = self.slot[e];
            match self.comp.step(edge, prefix, Natural::X(ws.state[e]), slot != NONE, coins, &mut ws.s) {
                Ok(out) => {
                    if let Some(f) = out.forced {
                        sink.forced(slot as usize, f);
                    }
                    if out.kept {
                        sink.kept(e);
                    }
                }
                Err(err) => {
                    result = Err(err);
                    break;
                }
            }
            ws.s.deg.set(edge.u, prefix.0 + edge.x);
            ws.s.deg.set(edge.v, prefix.1 + edge.x);
        }
        for &e in &ws.base {
            ws.state[e] = false;
        }
        result
    }
}

/// Run `trials` trials in fixed-size chunks; chunk results come back in order.
pub(crate) fn run_chunks<A, M, B>(sim: &Sim, trials: u64, make: M, body: B) -> Result<Vec<A>>
where
    A: Send,
    M: Fn() -> A + Sync,
    B: Fn(&Sim, &mut A, &mut Workspace, u64) -> Result<()> + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = make();
            let mut ws = sim.workspace();
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                body(sim, &mut acc, &mut ws, t)?;
            }
            Ok(acc)
        })
        .collect()
}
