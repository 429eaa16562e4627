//! Numerical quadrature helpers for Gaussian expectations.

use std::f64::consts::{LN_2, PI, SQRT_2};

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Standard normal upper tail `1 - Phi(z)`, accurate for large `z`.
pub fn norm_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `log2(1 + e^{-x})`, stable for all finite `x`; `+inf` maps to 0.
pub fn log2_1p_exp_neg(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    ((-x).max(0.0) + (-x.abs()).exp().ln_1p()) / LN_2
}

/// Binary entropy of a symmetric pair of atoms at `+x` and `-x`, i.e. `h2(1/(1+e^x))`.
pub fn pair_entropy(x: f64) -> f64 {
    let x = x.abs();
    if x == f64::INFINITY {
        return 0.0;
    }
    let p = 1.0 / (1.0 + x.exp());
    let q = 1.0 - p;
    // p log(1/p) + q log(1/q) with log(1/p) = log(1+e^x)
    (p * (x + (-x).exp().ln_1p()) + q * (-x).exp().ln_1p()) / LN_2
}

/// Nodes and weights of a uniform trapezoid rule for expectations under
/// `N(mean, var)`.
///
/// The integrands used in this crate (logistic-type functions of an LLR) are
/// analytic in a strip around the real axis, so the trapezoid rule converges
/// geometrically in the step size.
#[derive(Debug, Clone)]
pub struct GaussNodes {
    pub w: Vec<f64>,
    pub weight: Vec<f64>,
}

impl GaussNodes {
    /// Rule for `N(mean, var)` covering the bulk plus the region near zero
    /// that dominates logistic tails when the mean is large.
    pub fn new(mean: f64, var: f64) -> GaussNodes {
        let sd = var.sqrt();
        let mut lo = mean - 14.0 * sd;
        let hi = mean + 14.0 * sd;
        if mean > 50.0 {
            lo = lo.min(-80.0);
        }
        let step = (sd / 8.0).min(0.1);
        let n = ((hi - lo) / step).ceil() as usize + 1;
        let mut w = Vec::with_capacity(n);
        let mut weight = Vec::with_capacity(n);
        let mut total = 0.0;
        for i in 0..n {
            let x = lo + i as f64 * step;
            let z = (x - mean) / sd;
            let p = norm_pdf(z);
            w.push(x);
            weight.push(p);
            total += p;
        }
        for p in weight.iter_mut() {
            *p /= total;
        }
        GaussNodes { w, weight }
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.w
            .iter()
            .zip(&self.weight)
            .map(|(&x, &p)| if p > 0.0 { p * f(x) } else { 0.0 })
            .sum()
    }
}

/// Simple bisection for a monotone function on `[lo, hi]`; `increasing`
/// states the direction. Returns the midpoint of the final bracket.
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    increasing: bool,
    iters: usize,
) -> f64 {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if (v < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_entropy_matches_h2() {
        for &x in &[0.0, 0.3, 1.0, 2.5, 10.0] {
            let p: f64 = 1.0 / (1.0 + f64::exp(x));
            let h2 = -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
            assert!((pair_entropy(x) - h2).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_nodes_moments() {
        let g = GaussNodes::new(1.3, 2.6);
        assert!((g.expect(|x| x) - 1.3).abs() < 1e-12);
        assert!((g.expect(|x| (x - 1.3) * (x - 1.3)) - 2.6).abs() < 1e-11);
    }

    #[test]
    fn log2_1p_exp_neg_limits() {
        assert_eq!(log2_1p_exp_neg(0.0), 1.0);
        assert_eq!(log2_1p_exp_neg(f64::INFINITY), 0.0);
        assert!((log2_1p_exp_neg(-30.0) - (30.0 / LN_2 + (-30f64).exp() / LN_2)).abs() < 1e-9);
    }
}
