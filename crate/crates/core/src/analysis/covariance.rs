//! Availability of the spokes v_1..v_n after phase 1 of the hard
//! constructions, and the search for a low-variance subset of them.

use rand::seq::index::sample;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{to_json_17g, Instance};
use crate::orders::ArrivalModel;
use crate::rng::{CoinStream, Purpose};
use crate::schemes::engine::Scratch;
use crate::schemes::SchemeSpec;

use super::sim::{run_chunks, Sim, Sink, CHUNK};

/// Candidate subsets tried by default.
pub const DEFAULT_CANDIDATES: usize = 10_000;
/// Spokes whose leaves serve as forced targets for the phase-1 rate.
const CHECK_SPOKES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    GeneralHard,
    TreeHard,
}

/// Family and n of a tagged hard instance.
pub fn construction_of(inst: &Instance) -> Result<(Construction, usize)> {
    let fam = match inst.metadata.get("family").map(String::as_str) {
        Some("general_hard") => Construction::GeneralHard,
        Some("tree_hard") => Construction::TreeHard,
        _ => return Err(Error::invalid("instance is not tagged as general_hard or tree_hard")),
    };
    let n = inst.meta_usize("n").ok_or_else(|| Error::invalid("instance metadata lacks n"))?;
    if inst.vertex_count <= n {
        return Err(Error::invalid("instance too small for its n tag"));
    }
    Ok((fam, n))
}

/// First and second moments of n availability indicators.
#[derive(Clone, Debug, PartialEq)]
pub struct AvailabilityStats {
    pub n: usize,
    pub trials: u64,
    ones: Vec<u64>,
    /// Row-major n x n counts of joint availability.
    pairs: Vec<u64>,
}

impl AvailabilityStats {
    pub fn new(n: usize) -> Self {
        AvailabilityStats { n, trials: 0, ones: vec![0; n], pairs: vec![0; n * n] }
    }

    pub fn from_samples(rows: &[Vec<bool>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut s = AvailabilityStats::new(n);
        for r in rows {
            if r.len() != n {
                return Err(Error::invalid("availability rows differ in length"));
            }
            s.trials += 1;
            for i in 0..n {
                if r[i] {
                    s.ones[i] += 1;
                    for j in 0..n {
                        s.pairs[i * n + j] += r[j] as u64;
                    }
                }
            }
        }
        Ok(s)
    }

    /// Add up to 64 * words trials stored column-wise: bit t of `cols[i]` is A_i in trial t.
    fn add_columns(&mut self, cols: &[Vec<u64>], count: u64) {
        let n = self.n;
        self.trials += count;
        for i in 0..n {
            let a = &cols[i];
            let ci: u64 = a.iter().map(|w| w.count_ones() as u64).sum();
            self.ones[i] += ci;
            self.pairs[i * n + i] += ci;
            for j in i + 1..n {
                let c: u64 = a.iter().zip(&cols[j]).map(|(x, y)| (x & y).count_ones() as u64).sum();
                self.pairs[i * n + j] += c;
                self.pairs[j * n + i] += c;
            }
        }
    }

    fn merge(&mut self, o: &AvailabilityStats) {
        self.trials += o.trials;
        self.ones.iter_mut().zip(&o.ones).for_each(|(a, b)| *a += b);
        self.pairs.iter_mut().zip(&o.pairs).for_each(|(a, b)| *a += b);
    }

    pub fn means(&self) -> Vec<f64> {
        let t = self.trials.max(1) as f64;
        self.ones.iter().map(|&k| k as f64 / t).collect()
    }

    /// Covariances with 1/T normalization, so Var(sum A) is the sum of all entries.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let t = self.trials.max(1) as f64;
        let mu = self.means();
        (0..n)
            .map(|i| (0..n).map(|j| self.pairs[i * n + j] as f64 / t - mu[i] * mu[j]).collect())
            .collect()
    }

    pub fn var_sum(&self) -> f64 {
        self.covariance().iter().flatten().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetChoice {
    /// Spoke indices in 1..=n.
    pub members: Vec<usize>,
    pub variance: f64,
    /// Var(sum A) / n^2.
    pub theta_n_raw: f64,
    /// max(theta_n_raw, 1/sqrt(n)).
    pub theta_n: f64,
    pub bound_raw: f64,
    pub bound: f64,
    pub within_bound_raw: bool,
    pub within_bound: bool,
    pub candidates: usize,
}

/// theta_n with its 1/sqrt(n) floor.
pub fn theta_n(stats: &AvailabilityStats) -> (f64, f64) {
    let n = stats.n as f64;
    let raw = stats.var_sum() / (n * n);
    (raw, raw.max(1.0 / n.sqrt()))
}

/// Subset size m = ceil(theta_n^{1/4} n).
pub fn default_subset_size(stats: &AvailabilityStats) -> usize {
    let (_, t) = theta_n(stats);
    ((t.powf(0.25) * stats.n as f64).ceil() as usize).clamp(1, stats.n.max(1))
}

/// Best of `candidates` uniformly random size-m subsets by sample variance of A_S.
pub fn find_low_variance_subset(stats: &AvailabilityStats, m: usize, candidates: usize, seed: u64) -> Result<SubsetChoice> {
    let n = stats.n;
    if m > n {
        return Err(Error::invalid(format!("subset size {m} exceeds n = {n}")));
    }
    if candidates == 0 {
        return Err(Error::invalid("candidate count must be at least 1"));
    }
    let cov = stats.covariance();
    let mut rng = CoinStream::new(seed, 0).rng(Purpose::Subset);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..candidates {
        let mut s = sample(&mut rng, n, m).into_vec();
        s.sort_unstable();
        let var: f64 = s.iter().map(|&i| s.iter().map(|&j| cov[i][j]).sum::<f64>()).sum();
        if best.as_ref().is_none_or(|(b, _)| var < *b) {
            best = Some((var, s));
        }
    }
    let (variance, s) = best.expect("at least one candidate");
    let (raw, floored) = theta_n(stats);
    let m2 = (m * m) as f64;
    let slack = 1e-12;
    Ok(SubsetChoice {
        members: s.into_iter().map(|i| i + 1).collect(),
        variance,
        theta_n_raw: raw,
        theta_n: floored,
        bound_raw: 3.0 * raw * m2,
        bound: 3.0 * floored * m2,
        within_bound_raw: variance <= 3.0 * raw * m2 + slack,
        within_bound: variance <= 3.0 * floored * m2 + slack,
        candidates,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub instance: String,
    pub construction: Construction,
    pub scheme: String,
    pub order: String,
    pub seed: u64,
    pub trials: u64,
    pub n: usize,
    /// Number of arrivals making up phase 1.
    pub phase1_edges: usize,
    /// Fractional degree of a spoke within phase 1.
    pub phase1_degree: f64,
    pub means: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    pub theta_min: f64,
    /// Spoke pair (1-based) attaining theta_min.
    pub theta_pair: Option<(usize, usize)>,
    pub var_sum: f64,
    /// Forced-mode selection rate over the phase-1 leaves of the check spokes.
    pub phase1_selection_rate: f64,
    pub phase1_selection_se: f64,
    pub check_spokes: Vec<usize>,
    /// 1 - rate * phase1_degree.
    pub expected_availability: f64,
    /// Mean availability of the check spokes.
    pub observed_availability: f64,
    pub availability_se: f64,
    pub subset: SubsetChoice,
    #[serde(skip)]
    pub stats: AvailabilityStats,
}

impl CovarianceReport {
    pub fn to_json(&self, full_matrix: bool) -> String {
        if full_matrix {
            to_json_17g(self)
        } else {
            let mut r = self.clone();
            r.covariance = None;
            to_json_17g(&r)
        }
    }
}

struct Acc {
    stats: AvailabilityStats,
    cols: Vec<Vec<u64>>,
    filled: u64,
    forced_hits: u64,
    check_sum: u64,
    check_sq: u64,
}

struct AvailSink<'a> {
    spokes: usize,
    cols: &'a mut [Vec<u64>],
    bit: u64,
    check: &'a [usize],
    hits: u64,
    check_avail: u64,
}

impl Sink for AvailSink<'_> {
    fn forced(&mut self, _slot: usize, kept: bool) {
        self.hits += kept as u64;
    }

    fn end(&mut self, s: &Scratch) {
        let (w, b) = ((self.bit / 64) as usize, self.bit % 64);
        for i in 0..self.spokes {
            if !s.covered.get(i + 1) {
                self.cols[i][w] |= 1 << b;
            }
        }
        self.check_avail = self.check.iter().filter(|&&v| !s.covered.get(v)).count() as u64;
    }
}

/// Run phase 1 only and record A_{v_i} = 1 when v_i is not covered by the
/// output matching. Also chooses a low-variance subset with
/// m = ceil(theta_n^{1/4} n) from `candidates` random candidates.
pub fn covariance_diagnostics(
    scheme: &SchemeSpec,
    inst: &Instance,
    model: &ArrivalModel,
    trials: u64,
    seed: u64,
    candidates: usize,
) -> Result<CovarianceReport> {
    let (construction, n) = construction_of(inst)?;
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let phase1 = match model {
        ArrivalModel::PhaseBased(p) => p.phases.first().cloned().unwrap_or_default(),
        _ => return Err(Error::invalid("covariance diagnostics need a phase-based order")),
    };
    let is_spoke = |w: usize| (1..=n).contains(&w);
    let spoke_of = |e: usize| {
        let ed = &inst.edges[e];
        if is_spoke(ed.u) { ed.u } else { ed.v }
    };
    let phase1_degree: f64 = phase1.iter().filter(|&&e| spoke_of(e) == 1).map(|&e| inst.edges[e].x).sum();
    let k = CHECK_SPOKES.min(n);
    let check: Vec<usize> = (0..k).map(|j| 1 + j * n / k).collect();
    let targets: Vec<usize> = phase1.iter().copied().filter(|&e| check.contains(&spoke_of(e))).collect();
    let sim = Sim::new(scheme, inst, model, &targets)?.with_cut(phase1.len());
    let words = (CHUNK / 64) as usize;
    let parts = run_chunks(
        &sim,
        trials,
        || Acc {
            stats: AvailabilityStats::new(n),
            cols: vec![vec![0; words]; n],
            filled: 0,
            forced_hits: 0,
            check_sum: 0,
            check_sq: 0,
        },
        |sim, acc, ws, t| {
            let mut sink = AvailSink {
                spokes: n,
                cols: &mut acc.cols,
                bit: acc.filled,
                check: &check,
                hits: 0,
                check_avail: 0,
            };
            sim.trial(seed, t, ws, &mut sink)?;
            acc.forced_hits += sink.hits;
            acc.check_sum += sink.check_avail;
            acc.check_sq += sink.check_avail * sink.check_avail;
            acc.filled += 1;
            if acc.filled == CHUNK || t + 1 == trials {
                acc.stats.add_columns(&acc.cols, acc.filled);
                acc.cols.iter_mut().for_each(|c| c.iter_mut().for_each(|w| *w = 0));
                acc.filled = 0;
            }
            Ok(())
        },
    )?;
    let mut stats = AvailabilityStats::new(n);
    let (mut hits, mut csum, mut csq) = (0u64, 0u64, 0u64);
    for p in &parts {
        stats.merge(&p.stats);
        hits += p.forced_hits;
        csum += p.check_sum;
        csq += p.check_sq;
    }
    let tf = trials as f64;
    let cov = stats.covariance();
    let mut theta_min = f64::INFINITY;
    let mut theta_pair = None;
    for i in 0..n {
        for j in i + 1..n {
            if cov[i][j] < theta_min {
                theta_min = cov[i][j];
                theta_pair = Some((i + 1, j + 1));
            }
        }
    }
    if theta_pair.is_none() {
        theta_min = 0.0;
    }
    let var_sum: f64 = cov.iter().flatten().sum();
    let nt = (targets.len().max(1) as f64) * tf;
    let rate = hits as f64 / nt;
    let kf = k as f64;
    let mean_c = csum as f64 / tf;
    let var_c = (csq as f64 / tf - mean_c * mean_c).max(0.0);
    let m = default_subset_size(&stats);
    let subset = find_low_variance_subset(&stats, m, candidates, seed)?;
    Ok(CovarianceReport {
        instance: inst.name.clone(),
        construction,
        scheme: scheme.label(),
        order: model.label(),
        seed,
        trials,
        n,
        phase1_edges: phase1.len(),
        phase1_degree,
        means: stats.means(),
        covariance: Some(cov),
        theta_min,
        theta_pair,
        var_sum,
        phase1_selection_rate: rate,
        // per-trial hits over the check leaves are correlated; this treats them as independent
        phase1_selection_se: (rate * (1.0 - rate) / nt).sqrt(),
        check_spokes: check,
        expected_availability: 1.0 - rate * phase1_degree,
        observed_availability: mean_c / kf,
        availability_se: (var_c / tf).sqrt() / kf,
        subset,
        stats,
    })
}
