use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

/// Wilson score interval at 95% for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64) -> Interval {
    if n == 0 {
        return Interval { low: 0.0, high: 1.0 };
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    Interval { low: (center - half).max(0.0).min(p), high: (center + half).min(1.0).max(p) }
}

/// Standard error of a binomial proportion.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n.max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_estimate() {
        for (k, n) in [(0, 10), (10, 10), (3, 10), (500, 1000)] {
            let i = wilson(k, n);
            let p = k as f64 / n as f64;
            assert!(i.low <= p && p <= i.high);
        }
        let i = wilson(500, 1000);
        assert!((i.low - 0.469_1).abs() < 1e-3 && (i.high - 0.530_9).abs() < 1e-3);
    }
}
