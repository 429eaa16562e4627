//! Extremes-of-information-combining bounds on fixed points, rectangle
//! regions for EBP EXIT curves and Bhattacharyya regularity diagnostics.

use serde::{Deserialize, Serialize};

use crate::channels::{h2, h2_inv, ChannelFamily};
use crate::de::DegreeDistribution;
use crate::density::LDensity;
use crate::error::{Error, Result};

fn softplus(y: f64) -> f64 {
    y.max(0.0) + (-y.abs()).exp().ln_1p()
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("{name} = {v} not in [0, 1]")))
    }
}

/// `r̲(x) = Σ ρ_i h2((1 - (1 - 2ε(x))^{i-1}) / 2)`, `ε(x) = h2^{-1}(x)`.
pub fn r_lower(ddp: &DegreeDistribution, x: f64) -> f64 {
    let t = 1.0 - 2.0 * h2_inv(x);
    ddp.rho().iter().enumerate().skip(1).map(|(i, &r)| r * h2((1.0 - t.powi(i as i32 - 1)) / 2.0)).sum()
}

/// `r̄(x) = 1 - ρ(1 - x)`.
pub fn r_upper(ddp: &DegreeDistribution, x: f64) -> f64 {
    1.0 - ddp.rho_at(1.0 - x)
}

/// Lower combining bound `l̲(r̲(x)) = λ(r̲(x))`.
pub fn combining_lower(ddp: &DegreeDistribution, x: f64) -> Result<f64> {
    check_unit("x", x)?;
    Ok(ddp.lambda_at(r_lower(ddp, x)))
}

/// `f_i(h, x)`: entropy of the sum of `i` BSC(ε(x)) LLRs and one BSC(ε(h))
/// LLR.
pub fn f_i(i: usize, h: f64, x: f64) -> f64 {
    let e = h2_inv(x);
    let eh = h2_inv(h);
    let ln_r = (e / (1.0 - e)).ln();
    let a = |k: i32| if k > 0 { 1.0 - eh } else { eh };
    let mut acc = 0.0;
    for k in [1, -1] {
        if a(k) == 0.0 {
            continue;
        }
        for j in 0..=i {
            let w = binom(i, j) * (1.0 - e).powi(j as i32) * e.powi((i - j) as i32) * a(k);
            if w == 0.0 {
                continue;
            }
            let m = 2 * j as i32 - i as i32;
            let shift = if m == 0 { 0.0 } else { m as f64 * ln_r };
            let t = shift + a(-k).ln() - a(k).ln();
            acc += w * softplus(t) / std::f64::consts::LN_2;
        }
    }
    acc
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `l̄(h, x) = Σ λ_i f_{i-1}(h, x)`.
pub fn l_upper(ddp: &DegreeDistribution, h: f64, x: f64) -> f64 {
    ddp.lambda().iter().enumerate().skip(1).filter(|(_, &l)| l > 0.0).map(|(i, &l)| l * f_i(i - 1, h, x)).sum()
}

/// Upper combining bound `l̄(h, r̄(x))`.
pub fn combining_upper(ddp: &DegreeDistribution, h: f64, x: f64) -> Result<f64> {
    check_unit("h", h)?;
    check_unit("x", x)?;
    Ok(l_upper(ddp, h, r_upper(ddp, x)))
}

/// `L̲(x) = Λ(x)`.
pub fn exit_lower(ddp: &DegreeDistribution, x: f64) -> f64 {
    ddp.node_lambda_at(x)
}

/// `L̄(x) = Σ Λ_i f_i(1, x)`.
pub fn exit_upper(ddp: &DegreeDistribution, x: f64) -> f64 {
    ddp.node_lambda().iter().enumerate().filter(|(_, &l)| l > 0.0).map(|(i, &l)| l * f_i(i, 1.0, x)).sum()
}

/// `f(x, x') = min { h : l̄(h, x') ≥ x }`, zero when no such `h` exists.
pub fn invert_l_upper(ddp: &DegreeDistribution, x: f64, xp: f64) -> Result<f64> {
    // monotonicity in h, checked on a coarse grid
    let probe: Vec<f64> = (0..=20).map(|i| l_upper(ddp, i as f64 / 20.0, xp)).collect();
    if probe.windows(2).any(|w| w[1] < w[0] - 1e-12) {
        return Err(Error::InvalidArgument(format!("l̄(h, {xp}) is not monotone in h")));
    }
    if x < probe[0] - 1e-15 || x > probe[20] + 1e-15 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if l_upper(ddp, mid, xp) >= x {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(if l_upper(ddp, 0.0, xp) >= x { 0.0 } else { hi })
}

/// Rectangle containing `(h, EXIT)` of every fixed point with `H(f) = x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub x: f64,
    pub h_lo: f64,
    /// `x / λ(r̲(x))`; may exceed one or be infinite.
    pub h_hi: f64,
    pub g_lo: f64,
    pub g_hi: f64,
}

impl Rectangle {
    pub fn contains(&self, h: f64, g: f64, tol: f64) -> bool {
        h >= self.h_lo - tol && h <= self.h_hi + tol && g >= self.g_lo - tol && g <= self.g_hi + tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleRegion {
    pub rects: Vec<Rectangle>,
}

impl RectangleRegion {
    /// Rectangle at the grid point nearest to `x`.
    pub fn nearest(&self, x: f64) -> Option<&Rectangle> {
        self.rects.iter().min_by(|a, b| (a.x - x).abs().total_cmp(&(b.x - x).abs()))
    }
}

/// Rectangle bound at one `x`.
pub fn fixed_point_rectangle(ddp: &DegreeDistribution, x: f64) -> Result<Rectangle> {
    check_unit("x", x)?;
    let rl = r_lower(ddp, x);
    let ru = r_upper(ddp, x);
    let den = ddp.lambda_at(rl);
    let h_hi = if den > 0.0 { x / den } else if x == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(Rectangle { x, h_lo: invert_l_upper(ddp, x, ru)?, h_hi, g_lo: exit_lower(ddp, rl), g_hi: exit_upper(ddp, ru) })
}

pub fn fixed_point_rectangles(ddp: &DegreeDistribution, xs: &[f64]) -> Result<RectangleRegion> {
    Ok(RectangleRegion { rects: xs.iter().map(|&x| fixed_point_rectangle(ddp, x)).collect::<Result<_>>()? })
}

/// Channel Bhattacharyya parameter of the BSC with crossover `eps`.
pub fn bsc_bhattacharyya(eps: f64) -> f64 {
    (4.0 * eps * (1.0 - eps)).sqrt()
}

/// Largest solution of `b = B_h λ(Σ ρ_d sqrt(1 - (1 - b^2)^{d-1}))`, by
/// fixed-point iteration from `b = 1`.
pub fn bhattacharyya_fp_lower(ddp: &DegreeDistribution, b_h: f64) -> Result<f64> {
    check_unit("B_h", b_h)?;
    let phi = |b: f64| -> f64 {
        let bt: f64 = ddp
            .rho()
            .iter()
            .enumerate()
            .skip(1)
            .map(|(d, &r)| r * (1.0 - (1.0 - b * b).powi(d as i32 - 1)).max(0.0).sqrt())
            .sum();
        b_h * ddp.lambda_at(bt)
    };
    let mut b = 1.0;
    let mut damping = 1.0;
    let mut last_step = f64::INFINITY;
    for _ in 0..1_000_000 {
        let next = (1.0 - damping) * b + damping * phi(b);
        let step = (next - b).abs();
        if step < 1e-15 {
            return Ok(next);
        }
        if step > last_step {
            damping = 0.5;
        }
        last_step = step;
        b = next;
    }
    Err(Error::NonConvergent("Bhattacharyya fixed-point iteration".into()))
}

/// `B_h λ'(1) ρ'(1 - b^2)`; the fixed point is unique when it is below one.
pub fn uniqueness_alpha(ddp: &DegreeDistribution, b_h: f64, b: f64) -> f64 {
    b_h * ddp.lambda_prime(1.0) * ddp.rho_prime(1.0 - b * b)
}

pub fn uniqueness_condition(ddp: &DegreeDistribution, b_h: f64, b: f64) -> bool {
    uniqueness_alpha(ddp, b_h, b) < 1.0
}

/// Smallest `b` with `uniqueness_alpha(ddp, b_h, b) <= 1`, by bisection;
/// one when no such `b < 1` exists.
pub fn uniqueness_bound(ddp: &DegreeDistribution, b_h: f64) -> f64 {
    if uniqueness_alpha(ddp, b_h, 0.0) <= 1.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if uniqueness_alpha(ddp, b_h, mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Crossover above which the Bhattacharyya lower bound of the (2,3)
/// ensemble over the BSC lies in the uniqueness region.
pub fn eps_star_23() -> f64 {
    0.5 - ((17f64.sqrt() - 1.0) / 32.0).sqrt()
}

/// Local stability threshold of the (2,3) ensemble over the BSC,
/// `B(ε) λ'(0) ρ'(1) = 1`.
pub fn eps_ls_23() -> f64 {
    (2.0 - 3f64.sqrt()) / 4.0
}

/// `sqrt(1 - 1/(2B))` for the (2,3) ensemble, zero where undefined.
pub fn uniqueness_bound_23(eps: f64) -> f64 {
    let b = bsc_bhattacharyya(eps);
    if b <= 0.0 {
        return 0.0;
    }
    (1.0 - 1.0 / (2.0 * b)).max(0.0).sqrt()
}

/// `sqrt(2 - B^{-2})` for the (2,3) ensemble, zero where undefined.
pub fn fp_lower_bound_23(eps: f64) -> f64 {
    let b = bsc_bhattacharyya(eps);
    if b <= 0.0 {
        return 0.0;
    }
    (2.0 - 1.0 / (b * b)).max(0.0).sqrt()
}

/// Measured and bounded sides of the Bhattacharyya contraction step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `|B(T_{h1}(a1)) - B(T_{h2}(a2))|`.
    pub lhs: f64,
    /// `λ'(1) B_{h1} |B(ρ(a1)) - B(ρ(a2))| + |B_{h1} - B_{h2}|`.
    pub step_bound: f64,
    /// `α |B(a1) - B(a2)| + |B_{h1} - B_{h2}|` with `α = B_{h1} λ'(1) ρ'(1 - B(a1)^2)`.
    pub final_bound: f64,
    pub alpha: f64,
    pub holds: bool,
}

/// Evaluates the contraction inequality for `a2` degraded with respect to
/// `a1` and `h1 <= h2`.
pub fn contraction_check(
    ddp: &DegreeDistribution,
    family: &ChannelFamily,
    h1: f64,
    h2: f64,
    a1: &LDensity,
    a2: &LDensity,
) -> Result<ContractionReport> {
    let c1 = family.density(h1)?;
    let c2 = family.density(h2)?;
    let (b1, b2) = (c1.battacharyya(), c2.battacharyya());
    let t1 = c1.var_convolve(&ddp.lambda_rho(a1));
    let t2 = c2.var_convolve(&ddp.lambda_rho(a2));
    let lhs = (t1.battacharyya() - t2.battacharyya()).abs();
    let r1 = crate::density::rho_of(a1, ddp.rho());
    let r2 = crate::density::rho_of(a2, ddp.rho());
    let lp1 = ddp.lambda_prime(1.0);
    let step_bound = lp1 * b1 * (r1.battacharyya() - r2.battacharyya()).abs() + (b1 - b2).abs();
    let alpha = uniqueness_alpha(ddp, b1, a1.battacharyya());
    let final_bound = alpha * (a1.battacharyya() - a2.battacharyya()).abs() + (b1 - b2).abs();
    let slack = 1e-12;
    Ok(ContractionReport {
        lhs,
        step_bound,
        final_bound,
        alpha,
        holds: lhs <= step_bound + slack && lhs <= final_bound + slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((eps_star_23() - 0.18759473).abs() < 1e-7);
        assert!((eps_ls_23() - 0.066987298).abs() < 1e-8);
        let d = DegreeDistribution::regular(2, 3).unwrap();
        assert!((bsc_bhattacharyya(eps_ls_23()) * d.lambda_prime(0.0) * d.rho_prime(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f_i_channel_only() {
        for h in [0.0, 0.2, 0.7, 1.0] {
            assert!((f_i(0, h, 0.4) - h).abs() < 1e-12);
            assert!(f_i(3, h, 0.0).abs() < 1e-12);
            assert!((f_i(3, h, 1.0) - h).abs() < 1e-12);
        }
    }

    #[test]
    fn bhattacharyya_23_matches_closed_form() {
        let d = DegreeDistribution::regular(2, 3).unwrap();
        for eps in [0.2, 0.3, 0.45] {
            let bh = bsc_bhattacharyya(eps);
            assert!((bhattacharyya_fp_lower(&d, bh).unwrap() - fp_lower_bound_23(eps)).abs() < 1e-7);
            assert!((uniqueness_bound(&d, bh) - uniqueness_bound_23(eps)).abs() < 1e-12);
        }
    }
}
