//! Per-edge decision logic shared by the single-run entry points and the
//! Monte Carlo drivers.

use crate::constants::ALPHA;
use crate::error::{Error, Result};
use crate::instance::{Edge, Instance};
use crate::rng::{CoinStream, Lane, Purpose};

use super::coupling::couple_with;
use super::fractional::{admits, ReductionParams};
use super::SchemeSpec;

/// Slack allowed on Tree-OCRS acceptance probabilities.
pub(crate) const ACCEPT_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub(crate) enum Kind {
    Greedy,
    Tree { c: f64 },
    Reduction(ReductionParams),
}

/// A scheme specification resolved against one instance.
#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    pub kind: Kind,
    /// Drop probabilities per wrapping layer, innermost first, indexed by edge id.
    pub drops: Vec<Vec<f64>>,
}

impl Compiled {
    pub fn new(spec: &SchemeSpec, inst: &Instance) -> Result<Self> {
        match spec {
            SchemeSpec::Greedy => Ok(Compiled { kind: Kind::Greedy, drops: Vec::new() }),
            SchemeSpec::TreeOcrs { c } => {
                if !(*c > 0.0 && *c <= ALPHA + 1e-15) {
                    return Err(Error::invalid(format!("Tree-OCRS constant must lie in (0, alpha]; got {c}")));
                }
                Ok(Compiled { kind: Kind::Tree { c: *c }, drops: Vec::new() })
            }
            SchemeSpec::VanishingReduction { epsilon, log_inv_epsilon } => {
                let params = match log_inv_epsilon {
                    Some(l) => ReductionParams::from_log_inv_eps(inst, *l)?,
                    None => ReductionParams::new(inst, *epsilon)?,
                };
                Ok(Compiled { kind: Kind::Reduction(params), drops: Vec::new() })
            }
            SchemeSpec::ExactlyC { inner, drops, .. } => {
                let mut comp = Compiled::new(inner, inst)?;
                let mut layer = vec![0.0; inst.edges.len()];
                for (&e, &d) in drops {
                    if e >= layer.len() || !(0.0..=1.0).contains(&d) {
                        return Err(Error::invalid(format!("bad drop entry {e}: {d}")));
                    }
                    layer[e] = d;
                }
                comp.drops.push(layer);
                Ok(comp)
            }
        }
    }

    pub fn is_reduction(&self) -> bool {
        matches!(self.kind, Kind::Reduction(_))
    }

    pub fn is_tree(&self) -> bool {
        matches!(self.kind, Kind::Tree { .. })
    }

    /// First-round probabilities, for the reduction only.
    pub fn first_round(&self, inst: &Instance) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::Reduction(p) => Some(inst.edges.iter().map(|e| p.y(e.x)).collect()),
            _ => None,
        }
    }

    #[inline]
    fn kept(&self, coins: &CoinStream, e: usize) -> bool {
        for (k, layer) in self.drops.iter().enumerate() {
            let d = layer[e];
            if d > 0.0 && coins.lane_tagged(Purpose::Drop, k as u64).uniform(e as u64) < d {
                return false;
            }
        }
        true
    }

    /// Process one arriving edge. `prefix` carries the endpoint fractional
    /// degrees over earlier edges (used by Tree-OCRS only). When `forced` is
    /// set, also reports whether the edge would be kept had it been active,
    /// without changing the state for that hypothetical.
    #[inline]
    pub fn step(
        &self,
        edge: &Edge,
        prefix: (f64, f64),
        nat: Natural,
        forced: bool,
        coins: &Coins,
        s: &mut Scratch,
    ) -> Result<Step> {
        let (u, v, e) = (edge.u, edge.v, edge.id);
        let free = !s.matched.get(u) && !s.matched.get(v);
        let mut out = Step { selected: false, kept: false, forced: None };
        match &self.kind {
            Kind::Greedy => {
                if forced {
                    out.forced = Some(free && self.kept(&coins.stream, e));
                }
                out.selected = nat.x() && free;
            }
            Kind::Tree { c } => {
                let p = c / ((1.0 - c * prefix.0) * (1.0 - c * prefix.1));
                if !(p.is_finite() && (0.0..=1.0 + ACCEPT_TOL).contains(&p)) {
                    return Err(Error::limit(format!(
                        "Tree-OCRS acceptance probability {p} exceeds 1 at edge {e} (prefix degrees {}, {})",
                        prefix.0, prefix.1
                    )));
                }
                let accept = free && coins.accept.uniform(e as u64) < p;
                if forced {
                    out.forced = Some(accept && self.kept(&coins.stream, e));
                }
                out.selected = nat.x() && accept;
            }
            Kind::Reduction(p) => {
                let (cu, cv) = (s.counts.get(u), s.counts.get(v));
                let admit = admits(cu, p.z) && admits(cv, p.z);
                let accept = admit && free && {
                    let a = ALPHA / ((1.0 - ALPHA * cu as f64 * p.z) * (1.0 - ALPHA * cv as f64 * p.z));
                    coins.accept.uniform(e as u64) < a
                };
                if forced {
                    let (y, z) = couple_with(
                        edge.x,
                        p.y(edge.x),
                        p.z,
                        true,
                        coins.thin.uniform(e as u64),
                        coins.split.uniform(e as u64),
                    )?;
                    out.forced = Some(y && z && accept && self.kept(&coins.stream, e));
                }
                if let Natural::YZ(y, z) = nat {
                    if y && admit {
                        s.counts.set(u, cu + 1);
                        s.counts.set(v, cv + 1);
                        s.upgraded = true;
                        out.selected = z && accept;
                    } else {
                        s.upgraded = false;
                    }
                }
            }
        }
        if out.selected {
            s.matched.set(u, true);
            s.matched.set(v, true);
            out.kept = self.kept(&coins.stream, e);
            if out.kept {
                s.covered.set(u, true);
                s.covered.set(v, true);
            }
        }
        Ok(out)
    }

    /// Natural (Y, Z) of an edge from its state, by the two-round coupling.
    #[inline]
    pub fn couple_natural(&self, edge: &Edge, state: bool, coins: &Coins) -> Result<Natural> {
        match &self.kind {
            Kind::Reduction(p) => {
                let (y, z) = couple_with(
                    edge.x,
                    p.y(edge.x),
                    p.z,
                    state,
                    coins.thin.uniform(edge.id as u64),
                    coins.split.uniform(edge.id as u64),
                )?;
                Ok(Natural::YZ(y, z))
            }
            _ => Ok(Natural::X(state)),
        }
    }
}

/// What the world says about an arriving edge.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Natural {
    X(bool),
    YZ(bool, bool),
}

impl Natural {
    #[inline]
    fn x(self) -> bool {
        match self {
            Natural::X(b) => b,
            Natural::YZ(y, z) => y && z,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Step {
    /// Selected by the underlying scheme (its state now treats the edge as matched).
    pub selected: bool,
    /// Selected and not dropped by any wrapping layer.
    pub kept: bool,
    pub forced: Option<bool>,
}

/// Pre-keyed coin lanes of one trial.
pub(crate) struct Coins {
    pub stream: CoinStream,
    pub accept: Lane,
    pub thin: Lane,
    pub split: Lane,
}

impl Coins {
    pub fn new(stream: CoinStream) -> Self {
        Coins {
            stream,
            accept: stream.lane(Purpose::Accept),
            thin: stream.lane(Purpose::CoupleThin),
            split: stream.lane(Purpose::CoupleSplit),
        }
    }
}

/// Per-vertex values that reset in O(1) between trials.
#[derive(Clone, Debug)]
pub(crate) struct Stamped<T: Copy + Default> {
    vals: Vec<T>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl<T: Copy + Default> Stamped<T> {
    pub fn new(n: usize) -> Self {
        Stamped { vals: vec![T::default(); n], stamp: vec![0; n], epoch: 1 }
    }

    #[inline]
    pub fn get(&self, i: usize) -> T {
        if self.stamp[i] == self.epoch {
            self.vals[i]
        } else {
            T::default()
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: T) {
        self.stamp[i] = self.epoch;
        self.vals[i] = v;
    }

    pub fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Scratch {
    pub matched: Stamped<bool>,
    pub covered: Stamped<bool>,
    pub deg: Stamped<f64>,
    pub counts: Stamped<u32>,
    /// Whether the last reduction step upgraded its edge.
    pub upgraded: bool,
}

impl Scratch {
    pub fn new(n: usize) -> Self {
        Scratch {
            matched: Stamped::new(n),
            covered: Stamped::new(n),
            deg: Stamped::new(n),
            counts: Stamped::new(n),
            upgraded: false,
        }
    }

    pub fn reset(&mut self) {
        self.matched.reset();
        self.covered.reset();
        self.deg.reset();
        self.counts.reset();
        self.upgraded = false;
    }
}
