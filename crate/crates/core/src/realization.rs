//! One sampled world: edge states plus the coin stream used by schemes.

use rand::Rng;

use crate::error::Result;
use crate::instance::Instance;
use crate::orders::{draw_order, ArrivalModel, DrawnOrder};
use crate::rng::{CoinStream, Purpose};

/// Above this rate, per-edge Bernoulli draws beat geometric skipping.
const SKIP_THRESHOLD: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub states: Vec<bool>,
    pub coins: CoinStream,
}

impl Realization {
    pub fn sample(inst: &Instance, coins: CoinStream) -> Self {
        let xs = inst.xs();
        let mut states = vec![false; xs.len()];
        for e in sample_active(&xs, max_of(&xs), &mut coins.rng(Purpose::State)) {
            states[e] = true;
        }
        Realization { states, coins }
    }

    /// States, order and coins for trial `trial` of an experiment.
    pub fn draw(inst: &Instance, model: &ArrivalModel, seed: u64, trial: u64) -> Result<(DrawnOrder, Self)> {
        let coins = CoinStream::new(seed, trial);
        let order = draw_order(model, inst, &coins)?;
        Ok((order, Realization::sample(inst, coins)))
    }
}

pub fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(0.0, f64::max)
}

/// Indices drawn independently with Pr[i] = xs[i], in increasing order.
/// `max` must bound every entry.
pub fn sample_active<R: Rng>(xs: &[f64], max: f64, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::new();
    sample_active_into(xs, max, rng, &mut out);
    out
}

pub fn sample_active_into<R: Rng>(xs: &[f64], max: f64, rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    let m = xs.len();
    if max <= 0.0 || m == 0 {
        return;
    }
    if max >= SKIP_THRESHOLD {
        for (i, &x) in xs.iter().enumerate() {
            if rng.gen::<f64>() < x {
                out.push(i);
            }
        }
        return;
    }
    let log_q = (-max).ln_1p();
    let mut pos: usize = 0;
    loop {
        let u: f64 = rng.gen();
        let skip = ((1.0 - u).ln() / log_q).floor();
        if skip >= (m - pos) as f64 {
            return;
        }
        pos += skip as usize;
        let x = xs[pos];
        if x == max || rng.gen::<f64>() * max < x {
            out.push(pos);
        }
        pos += 1;
        if pos >= m {
            return;
        }
    }
}
