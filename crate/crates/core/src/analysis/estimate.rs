use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{format_g17, to_json_17g, Instance};
use crate::orders::ArrivalModel;
use crate::schemes::SchemeSpec;

use super::sim::{run_chunks, Sim, Sink};
use super::stats::wilson;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Condition on the target being active ("forced" to 1).
    Forced,
    /// Pr[e in M] / x_e from unconditioned runs.
    Aggregate,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forced" => Ok(Mode::Forced),
            "aggregate" => Ok(Mode::Aggregate),
            _ => Err(Error::invalid(format!("unknown mode '{s}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Forced => "forced",
            Mode::Aggregate => "aggregate",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeEstimate {
    pub edge_id: usize,
    pub u: usize,
    pub v: usize,
    pub x: f64,
    pub mode: Mode,
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pooled {
    /// Mean of the per-edge estimates.
    pub mean: f64,
    /// Standard error from the spread of per-trial averages.
    pub std_err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SizeStats {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionReport {
    pub instance: String,
    pub scheme: String,
    pub order: String,
    pub seed: u64,
    pub mode: Mode,
    pub trials: u64,
    pub per_edge: Vec<EdgeEstimate>,
    pub min_estimate: f64,
    pub min_edge: Option<usize>,
    pub pooled: Pooled,
    pub matching_size: SizeStats,
    /// Fraction of first-round edges that were upgraded (reduction only).
    pub upgrade_rate: Option<f64>,
}

impl SelectionReport {
    pub fn get(&self, edge: usize) -> Option<&EdgeEstimate> {
        self.per_edge.iter().find(|e| e.edge_id == edge)
    }

    pub fn to_json(&self) -> String {
        to_json_17g(self)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["edge_id", "u", "v", "x", "mode", "trials", "estimate", "ci_low", "ci_high"])?;
        for e in &self.per_edge {
            out.write_record([
                e.edge_id.to_string(),
                e.u.to_string(),
                e.v.to_string(),
                format_g17(e.x),
                e.mode.to_string(),
                e.trials.to_string(),
                format_g17(e.estimate),
                format_g17(e.ci_low),
                format_g17(e.ci_high),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Default)]
struct Acc {
    forced: Vec<u64>,
    natural: Vec<u64>,
    w_sum: f64,
    w_sq: f64,
    size_sum: u64,
    size_sq: u64,
    first_round: u64,
    upgraded: u64,
}

struct TrialSink<'a> {
    acc: &'a mut Acc,
    slot_of: &'a [u32],
    inv_x: &'a [f64],
    mode: Mode,
    hits: u64,
    weighted: f64,
    size: u64,
}

impl Sink for TrialSink<'_> {
    fn forced(&mut self, slot: usize, kept: bool) {
        if kept {
            self.acc.forced[slot] += 1;
            self.hits += 1;
        }
    }

    fn kept(&mut self, edge: usize) {
        self.size += 1;
        let s = self.slot_of[edge];
        if s != u32::MAX {
            self.acc.natural[s as usize] += 1;
            self.weighted += self.inv_x[s as usize];
        }
    }

    fn first_round(&mut self, upgraded: bool) {
        self.acc.first_round += 1;
        self.acc.upgraded += upgraded as u64;
    }
}

/// Estimate Pr[e in M | X_e = 1] for every edge.
pub fn estimate_selection(
    scheme: &SchemeSpec,
    inst: &Instance,
    model: &ArrivalModel,
    trials: u64,
    mode: Mode,
    seed: u64,
) -> Result<SelectionReport> {
    let all: Vec<usize> = (0..inst.edges.len()).collect();
    estimate_selection_on(scheme, inst, model, trials, mode, seed, &all)
}

/// Estimate Pr[e in M | X_e = 1] for the listed target edges.
///
/// Forced mode exploits strong onlineness: a target's decision depends only
/// on earlier arrivals and its own coins, so every target's forced-active
/// outcome is read off one natural run at the moment the target arrives.
pub fn estimate_selection_on(
    scheme: &SchemeSpec,
    inst: &Instance,
    model: &ArrivalModel,
    trials: u64,
    mode: Mode,
    seed: u64,
    targets: &[usize],
) -> Result<SelectionReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let k = targets.len();
    let sim = Sim::new(scheme, inst, model, targets)?;
    let mut slot_of = vec![u32::MAX; inst.edges.len()];
    let mut inv_x = vec![0.0; k];
    for (i, &t) in targets.iter().enumerate() {
        slot_of[t] = i as u32;
        inv_x[i] = 1.0 / inst.edges[t].x;
    }
    let kf = k.max(1) as f64;
    let parts = run_chunks(
        &sim,
        trials,
        || Acc { forced: vec![0; k], natural: vec![0; k], ..Acc::default() },
        |sim, acc, ws, t| {
            let mut sink = TrialSink {
                acc,
                slot_of: &slot_of,
                inv_x: &inv_x,
                mode,
                hits: 0,
                weighted: 0.0,
                size: 0,
            };
            sim.trial(seed, t, ws, &mut sink)?;
            let w = match sink.mode {
                Mode::Forced => sink.hits as f64 / kf,
                Mode::Aggregate => sink.weighted / kf,
            };
            let size = sink.size;
            acc.w_sum += w;
            acc.w_sq += w * w;
            acc.size_sum += size;
            acc.size_sq += size * size;
            Ok(())
        },
    )?;
    let mut a = Acc { forced: vec![0; k], natural: vec![0; k], ..Acc::default() };
    for p in parts {
        for i in 0..k {
            a.forced[i] += p.forced[i];
            a.natural[i] += p.natural[i];
        }
        a.w_sum += p.w_sum;
        a.w_sq += p.w_sq;
        a.size_sum += p.size_sum;
        a.size_sq += p.size_sq;
        a.first_round += p.first_round;
        a.upgraded += p.upgraded;
    }
    let tf = trials as f64;
    let per_edge: Vec<EdgeEstimate> = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let e = &inst.edges[t];
            let (hits, est, lo, hi) = match mode {
                Mode::Forced => {
                    let ci = wilson(a.forced[i], trials);
                    (a.forced[i], a.forced[i] as f64 / tf, ci.low, ci.high)
                }
                Mode::Aggregate => {
                    let ci = wilson(a.natural[i], trials);
                    let s = |p: f64| (p / e.x).clamp(0.0, 1.0);
                    (a.natural[i], s(a.natural[i] as f64 / tf), s(ci.low), s(ci.high))
                }
            };
            EdgeEstimate { edge_id: t, u: e.u, v: e.v, x: e.x, mode, trials, hits, estimate: est, ci_low: lo, ci_high: hi }
        })
        .collect();
    let (min_edge, min_estimate) = per_edge
        .iter()
        .fold((None, f64::INFINITY), |(be, bv), e| if e.estimate < bv { (Some(e.edge_id), e.estimate) } else { (be, bv) });
    let mean_w = a.w_sum / tf;
    let var_w = if trials > 1 { ((a.w_sq - tf * mean_w * mean_w) / (tf - 1.0)).max(0.0) } else { 0.0 };
    let size_mean = a.size_sum as f64 / tf;
    let size_var = (a.size_sq as f64 / tf - size_mean * size_mean).max(0.0);
    Ok(SelectionReport {
        instance: inst.name.clone(),
        scheme: scheme.label(),
        order: model.label(),
        seed,
        mode,
        trials,
        min_estimate: if per_edge.is_empty() { f64::NAN } else { min_estimate },
        min_edge,
        pooled: Pooled {
            mean: per_edge.iter().map(|e| e.estimate).sum::<f64>() / kf,
            std_err: (var_w / tf).sqrt(),
        },
        per_edge,
        matching_size: SizeStats { mean: size_mean, variance: size_var },
        upgrade_rate: (a.first_round > 0).then(|| a.upgraded as f64 / a.first_round as f64),
    })
}
