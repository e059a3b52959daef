//! Selectability constants, root solvers and the product-extremes check.

use serde::Serialize;

use crate::error::{Error, Result};

/// (3 - sqrt 5) / 2, the unique root of a = (1 - a)^2 in (0, 1).
pub const ALPHA: f64 = 0.381_966_011_250_105_15;

pub const BISECTION_ITERS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Bisection,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantResult {
    pub name: String,
    pub value: f64,
    pub residual: f64,
    pub method: Method,
}

pub fn alpha() -> ConstantResult {
    // the literal is the correctly rounded value; evaluating the formula in
    // doubles lands one ulp low
    let a = ALPHA;
    debug_assert!((a - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-16);
    ConstantResult {
        name: "alpha".into(),
        value: a,
        residual: a - (1.0 - a) * (1.0 - a),
        method: Method::ClosedForm,
    }
}

/// (1 - (a/(1-a))^(2 ceil(l/2)))^2 a
pub fn alpha_ell(ell: u32) -> Result<ConstantResult> {
    if ell < 1 {
        return Err(Error::invalid("alpha_ell needs ell >= 1"));
    }
    let a = alpha().value;
    let k = 2 * ell.div_ceil(2) as i32;
    let r = (a / (1.0 - a)).powi(k);
    Ok(ConstantResult {
        name: format!("alpha_{ell}"),
        value: (1.0 - r) * (1.0 - r) * a,
        residual: 0.0,
        method: Method::ClosedForm,
    })
}

pub fn beta_fn(z: f64) -> f64 {
    1.0 - 2.0 * z - z * (2.0 - 1.0 / z).exp()
}

pub fn gamma_fn(z: f64) -> f64 {
    1.0 - 2.0 * z - z * (z - 1.0).exp()
}

/// Fixed-iteration bisection on a bracket with a sign change.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::invalid(format!("no sign change on [{lo}, {hi}]")));
    }
    let lo_positive = flo > 0.0;
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn root_constant(name: &str, f: fn(f64) -> f64) -> ConstantResult {
    let value = bisect(f, 0.01, 0.5, BISECTION_ITERS).expect("bracket has a sign change");
    ConstantResult { name: name.into(), value, residual: f(value), method: Method::Bisection }
}

/// Root of 1 - 2b - b exp(2 - 1/b).
pub fn beta() -> ConstantResult {
    root_constant("beta", beta_fn)
}

/// Root of 1 - 2g - g exp(g - 1).
pub fn gamma() -> ConstantResult {
    root_constant("gamma", gamma_fn)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RcrsConstants {
    /// Greedy under uniform order on general graphs: (1 - e^-2)/2.
    pub greedy_general: f64,
    pub rcrs: f64,
    /// 1 - ln(2 - 1/e)
    pub focrs: f64,
}

pub fn rcrs_constants() -> RcrsConstants {
    RcrsConstants {
        greedy_general: -(-2.0f64).exp_m1() / 2.0,
        rcrs: 0.5,
        focrs: 1.0 - (2.0 - (-1.0f64).exp()).ln(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductExtremes {
    pub max_product: f64,
    pub min_product: f64,
    pub closed_max: f64,
    pub closed_min: f64,
    pub max_holds: bool,
    pub min_holds: bool,
}

/// Products prod(1 +- eps*a*x_i / (1 - a * sum_{j<=i} x_j)) against their
/// extremes 1 +- eps*a*xbar/(1 - a*xbar).
pub fn product_extremes_check(eps: f64, alpha_val: f64, xs: &[f64]) -> Result<ProductExtremes> {
    if !(0.0..=1.0).contains(&eps) || !(alpha_val > 0.0 && alpha_val < 1.0) {
        return Err(Error::invalid("need eps in [0,1] and alpha in (0,1)"));
    }
    if xs.iter().any(|&x| x.is_nan() || x < 0.0) {
        return Err(Error::invalid("partition entries must be nonnegative"));
    }
    let xbar: f64 = xs.iter().sum();
    if xbar > 1.0 + 1e-12 {
        return Err(Error::invalid(format!("partition sums to {xbar} > 1")));
    }
    let (mut hi, mut lo, mut prefix) = (1.0f64, 1.0f64, 0.0f64);
    for &x in xs {
        prefix += x;
        let t = eps * alpha_val * x / (1.0 - alpha_val * prefix);
        hi *= 1.0 + t;
        lo *= 1.0 - t;
    }
    let t = eps * alpha_val * xbar / (1.0 - alpha_val * xbar);
    let (closed_max, closed_min) = (1.0 + t, 1.0 - t);
    Ok(ProductExtremes {
        max_product: hi,
        min_product: lo,
        closed_max,
        closed_min,
        max_holds: hi <= closed_max + 1e-12,
        min_holds: lo >= closed_min - 1e-12,
    })
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Tensor Gauss-Legendre integral of f over [0,1]^2 with n points per axis.
pub fn integrate_unit_square(f: impl Fn(f64, f64) -> f64, n: usize) -> f64 {
    let (z, w) = gauss_legendre(n);
    let mut total = 0.0;
    for i in 0..n {
        let x = 0.5 * (z[i] + 1.0);
        let mut row = 0.0;
        for j in 0..n {
            row += w[j] * f(x, 0.5 * (z[j] + 1.0));
        }
        total += w[i] * row;
    }
    total * 0.25
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AllConstants {
    pub alpha: ConstantResult,
    pub alpha_7: ConstantResult,
    pub alpha_15: ConstantResult,
    pub beta: ConstantResult,
    pub gamma: ConstantResult,
    pub rcrs: RcrsConstants,
}

pub fn all_constants() -> AllConstants {
    AllConstants {
        alpha: alpha(),
        alpha_7: alpha_ell(7).expect("ell >= 1"),
        alpha_15: alpha_ell(15).expect("ell >= 1"),
        beta: beta(),
        gamma: gamma(),
        rcrs: rcrs_constants(),
    }
}
