//! Degree distributions, density evolution, BP curves and thresholds, and
//! the interpolating families behind the matching chart.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{ChannelFamily, ChannelKind};
use crate::curve::{Curve, CurveRole};
use crate::density::{lambda_of, rho_of, var_poly, DensityFunctionalReport, LDensity};
use crate::error::{Error, Result};
use crate::kernels::GexitKernel;

/// Edge-perspective degree distribution pair. `lambda[i]` (`rho[i]`) is the
/// fraction of edges attached to variable (check) nodes of degree `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    lambda: Vec<f64>,
    rho: Vec<f64>,
}

fn check_poly_coefs(name: &str, c: &[f64]) -> Result<()> {
    if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument(format!("{name}: coefficients must be nonnegative")));
    }
    if c.first().copied().unwrap_or(0.0) != 0.0 {
        return Err(Error::InvalidArgument(format!("{name}: degree 0 is not allowed")));
    }
    let s: f64 = c.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{name}: coefficients sum to {s}, not 1")));
    }
    Ok(())
}

fn poly_eval(c: &[f64], x: f64, offset: usize) -> f64 {
    c.iter()
        .enumerate()
        .filter(|(i, v)| *i >= offset && **v != 0.0)
        .map(|(i, v)| v * x.powi((i - offset) as i32))
        .sum()
}

fn poly_deriv(c: &[f64], x: f64, offset: usize, order: u32) -> f64 {
    c.iter()
        .enumerate()
        .filter(|(i, v)| *i >= offset + order as usize && **v != 0.0)
        .map(|(i, v)| {
            let e = i - offset;
            let falling: f64 = (0..order).map(|j| (e - j as usize) as f64).product();
            v * falling * x.powi((e - order as usize) as i32)
        })
        .sum()
}

impl DegreeDistribution {
    pub fn new(lambda: Vec<f64>, rho: Vec<f64>) -> Result<DegreeDistribution> {
        check_poly_coefs("lambda", &lambda)?;
        check_poly_coefs("rho", &rho)?;
        let d = DegreeDistribution { lambda, rho };
        let r = d.design_rate();
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidArgument(format!("design rate {r} not in (0, 1)")));
        }
        Ok(d)
    }

    /// `(l, r)`-regular ensemble.
    pub fn regular(l: usize, r: usize) -> Result<DegreeDistribution> {
        if l == 0 || r == 0 {
            return Err(Error::InvalidArgument("degrees must be positive".into()));
        }
        let mut lambda = vec![0.0; l + 1];
        lambda[l] = 1.0;
        let mut rho = vec![0.0; r + 1];
        rho[r] = 1.0;
        DegreeDistribution::new(lambda, rho)
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn int_lambda(&self) -> f64 {
        self.lambda.iter().enumerate().skip(1).map(|(i, v)| v / i as f64).sum()
    }

    pub fn int_rho(&self) -> f64 {
        self.rho.iter().enumerate().skip(1).map(|(i, v)| v / i as f64).sum()
    }

    pub fn design_rate(&self) -> f64 {
        1.0 - self.int_rho() / self.int_lambda()
    }

    /// Node-perspective variable degree distribution `Λ_i`.
    pub fn node_lambda(&self) -> Vec<f64> {
        let s = self.int_lambda();
        self.lambda.iter().enumerate().map(|(i, v)| if i == 0 { 0.0 } else { v / i as f64 / s }).collect()
    }

    pub fn lambda_at(&self, x: f64) -> f64 {
        poly_eval(&self.lambda, x, 1)
    }

    pub fn rho_at(&self, x: f64) -> f64 {
        poly_eval(&self.rho, x, 1)
    }

    /// `Λ(x) = Σ Λ_i x^i`.
    pub fn node_lambda_at(&self, x: f64) -> f64 {
        poly_eval(&self.node_lambda(), x, 0)
    }

    pub fn lambda_prime(&self, x: f64) -> f64 {
        poly_deriv(&self.lambda, x, 1, 1)
    }

    pub fn rho_prime(&self, x: f64) -> f64 {
        poly_deriv(&self.rho, x, 1, 1)
    }

    pub fn rho_second(&self, x: f64) -> f64 {
        poly_deriv(&self.rho, x, 1, 2)
    }

    /// Density `λ(ρ(a))` leaving the variable nodes without the channel.
    pub fn lambda_rho(&self, a: &LDensity) -> LDensity {
        lambda_of(&rho_of(a, &self.rho), &self.lambda)
    }

    /// Extrinsic density `Λ(ρ(a))` of a full variable node.
    pub fn extrinsic(&self, a: &LDensity) -> LDensity {
        var_poly(&rho_of(a, &self.rho), &self.node_lambda(), 0)
    }
}

impl fmt::Display for DegreeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l={},r={}", format_poly(&self.lambda), format_poly(&self.rho))
    }
}

fn format_poly(c: &[f64]) -> String {
    let terms: Vec<String> = c
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| {
            let mono = match i - 1 {
                0 => String::new(),
                1 => "x".to_string(),
                e => format!("x^{e}"),
            };
            if *v == 1.0 && !mono.is_empty() {
                mono
            } else {
                format!("{v}{mono}")
            }
        })
        .collect();
    terms.join("+")
}

fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim_end_matches('*');
    if s.is_empty() {
        return Ok(1.0);
    }
    let v = if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.parse().map_err(|_| Error::Parse(format!("bad number '{s}'")))?;
        let b: f64 = b.parse().map_err(|_| Error::Parse(format!("bad number '{s}'")))?;
        a / b
    } else {
        s.parse().map_err(|_| Error::Parse(format!("bad number '{s}'")))?
    };
    if !v.is_finite() {
        return Err(Error::Parse(format!("bad number '{s}'")));
    }
    Ok(v)
}

/// Parses an edge polynomial such as `x^2`, `0.4x+0.6x^5`, `2/5x+3/5x^5` or
/// `(3x+6x^2+11x^17)/20` into coefficients indexed by degree (exponent + 1).
pub fn parse_edge_poly(s: &str) -> Result<Vec<f64>> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(Error::Parse("empty polynomial".into()));
    }
    let (body, scale) = if let Some(rest) = s.strip_prefix('(') {
        let (inner, tail) = rest
            .rsplit_once(')')
            .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in '{s}'")))?;
        let scale = match tail.strip_prefix('/') {
            Some(d) => 1.0 / parse_number(d)?,
            None if tail.is_empty() => 1.0,
            None => return Err(Error::Parse(format!("unexpected '{tail}' in '{s}'"))),
        };
        (inner.to_string(), scale)
    } else {
        (s.clone(), 1.0)
    };
    let mut coef: Vec<f64> = Vec::new();
    for term in body.split('+') {
        if term.is_empty() {
            return Err(Error::Parse(format!("empty term in '{s}'")));
        }
        let (c, e) = match term.find('x') {
            Some(p) => {
                let c = parse_number(&term[..p])?;
                let rest = &term[p + 1..];
                let e = if rest.is_empty() {
                    1
                } else {
                    rest.strip_prefix('^')
                        .and_then(|r| r.parse::<usize>().ok())
                        .ok_or_else(|| Error::Parse(format!("bad exponent in '{term}'")))?
                };
                (c, e)
            }
            None => (parse_number(term)?, 0),
        };
        let deg = e + 1;
        if coef.len() <= deg {
            coef.resize(deg + 1, 0.0);
        }
        coef[deg] += c * scale;
    }
    Ok(coef)
}

impl FromStr for DegreeDistribution {
    type Err = Error;

    /// Accepts `ldpc:l=x^2,r=x^5`, `l=x^2,r=x^5` or `(3,6)`.
    fn from_str(s: &str) -> Result<DegreeDistribution> {
        let s = s.trim();
        let s = s.strip_prefix("ldpc:").unwrap_or(s);
        if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            if let Some((l, r)) = inner.split_once(',') {
                if let (Ok(l), Ok(r)) = (l.trim().parse::<usize>(), r.trim().parse::<usize>()) {
                    return DegreeDistribution::regular(l, r);
                }
            }
        }
        let mut lambda = None;
        let mut rho = None;
        // split on the comma that precedes "r="
        let idx = s
            .find(",r=")
            .ok_or_else(|| Error::Parse(format!("expected 'l=...,r=...', got '{s}'")))?;
        for part in [&s[..idx], &s[idx + 1..]] {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{part}'")))?;
            match k.trim() {
                "l" => lambda = Some(parse_edge_poly(v)?),
                "r" => rho = Some(parse_edge_poly(v)?),
                other => return Err(Error::Parse(format!("unknown key '{other}'"))),
            }
        }
        let lambda = lambda.ok_or_else(|| Error::Parse("missing l=".into()))?;
        let rho = rho.ok_or_else(|| Error::Parse("missing r=".into()))?;
        DegreeDistribution::new(lambda, rho).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// One density evolution step `T(a) = c ⋆ λ(ρ(a))`.
pub fn de_step(ddp: &DegreeDistribution, c: &LDensity, a: &LDensity) -> LDensity {
    c.var_convolve(&ddp.lambda_rho(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeOptions {
    /// Convergence threshold on [`LDensity::distance`] between iterates.
    pub tol: f64,
    pub max_iters: usize,
    /// Stop as soon as the entropy drops below this value.
    pub stop_entropy: f64,
    pub symmetrize_every: usize,
    pub record_trace: bool,
}

impl Default for DeOptions {
    fn default() -> Self {
        DeOptions { tol: 1e-7, max_iters: 5000, stop_entropy: 1e-12, symmetrize_every: 16, record_trace: false }
    }
}

/// Result of running density evolution to a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct DeState {
    pub iters: usize,
    pub density: LDensity,
    pub converged: bool,
    /// A period-two cycle was detected; `density` is then the average.
    pub oscillating: bool,
    pub trace: Vec<DensityFunctionalReport>,
}

/// Iterates `a <- c ⋆ λ(ρ(a))` from `init`.
pub fn de_run(ddp: &DegreeDistribution, c: &LDensity, init: &LDensity, opts: &DeOptions) -> DeState {
    let mut a = init.clone();
    let mut prev: Option<LDensity> = None;
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(a.report());
    }
    for it in 1..=opts.max_iters {
        let mut next = de_step(ddp, c, &a);
        if opts.symmetrize_every > 0 && it % opts.symmetrize_every == 0 {
            next = next.symmetrize();
        }
        if opts.record_trace {
            trace.push(next.report());
        }
        let d = next.distance(&a);
        if d <= opts.tol || next.entropy() < opts.stop_entropy {
            return DeState { iters: it, density: next, converged: true, oscillating: false, trace };
        }
        if let Some(p) = &prev {
            if next.distance(p) <= opts.tol {
                let avg = next.mix(&a, 0.5);
                return DeState { iters: it, density: avg, converged: false, oscillating: true, trace };
            }
        }
        prev = Some(std::mem::replace(&mut a, next));
    }
    DeState { iters: opts.max_iters, density: a, converged: false, oscillating: false, trace }
}

/// BP fixed point for channel entropy `h`, started from `Δ0`.
pub fn de_fixed_point(ddp: &DegreeDistribution, family: &ChannelFamily, h: f64, opts: &DeOptions) -> Result<DeState> {
    let c = family.density(h)?;
    Ok(de_run(ddp, &c, &LDensity::delta_zero(family.grid()), opts))
}

/// Scalar erasure recursion `x <- h λ(1 - ρ(1 - x))` from `x = 1`.
pub fn bec_recursion(ddp: &DegreeDistribution, h: f64, iters: usize) -> Vec<f64> {
    let mut xs = Vec::with_capacity(iters + 1);
    let mut x = 1.0;
    xs.push(x);
    for _ in 0..iters {
        x = h * ddp.lambda_at(1.0 - ddp.rho_at(1.0 - x));
        xs.push(x);
    }
    xs
}

/// Entropy below which a fixed point counts as successful decoding.
pub const SUCCESS_ENTROPY: f64 = 1e-6;

/// Whether BP decoding succeeds on the channel of entropy `h`.
pub fn bp_succeeds(ddp: &DegreeDistribution, family: &ChannelFamily, h: f64, opts: &DeOptions) -> Result<bool> {
    let o = DeOptions { stop_entropy: SUCCESS_ENTROPY, ..*opts };
    let st = de_fixed_point(ddp, family, h, &o)?;
    Ok(st.density.entropy() < SUCCESS_ENTROPY)
}

/// BP threshold in channel entropy, by bisection until the bracket is at
/// most `bracket` wide. Returns the bracket midpoint.
pub fn bp_threshold(ddp: &DegreeDistribution, family: &ChannelFamily, bracket: f64, opts: &DeOptions) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > bracket {
        let mid = 0.5 * (lo + hi);
        if bp_succeeds(ddp, family, mid, opts)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Scalar BEC BP threshold by bisection on the erasure recursion.
pub fn bec_bp_threshold(ddp: &DegreeDistribution, bracket: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > bracket {
        let mid = 0.5 * (lo + hi);
        let mut x: f64 = 1.0;
        let mut ok = false;
        for _ in 0..200_000 {
            let nx = mid * ddp.lambda_at(1.0 - ddp.rho_at(1.0 - x));
            if nx < 1e-12 {
                ok = true;
                break;
            }
            if (x - nx).abs() < 1e-15 {
                break;
            }
            x = nx;
        }
        if ok {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One point of a BP curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpPoint {
    pub h: f64,
    pub gexit: f64,
    pub exit: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// BP fixed point at `h` started from `init`; returns the point and the
/// fixed-point density.
pub fn bp_point(ddp: &DegreeDistribution, family: &ChannelFamily, h: f64, init: &LDensity, opts: &DeOptions) -> Result<(BpPoint, LDensity)> {
    let c = family.density(h)?;
    let st = de_run(ddp, &c, init, opts);
    let ext = ddp.extrinsic(&st.density);
    let kernel = GexitKernel::new(family.kind(), h)?;
    let p = BpPoint {
        h,
        gexit: kernel.functional(&ext),
        exit: ext.entropy(),
        iterations: st.iters,
        converged: st.converged,
    };
    Ok((p, st.density))
}

/// BP GEXIT and EXIT values on an `h`-grid, each point started from `Δ0`.
pub fn bp_points(ddp: &DegreeDistribution, family: &ChannelFamily, hs: &[f64], opts: &DeOptions) -> Result<Vec<BpPoint>> {
    let d0 = LDensity::delta_zero(family.grid());
    hs.par_iter().map(|&h| bp_point(ddp, family, h, &d0, opts).map(|r| r.0)).collect()
}

/// BP GEXIT values on a descending `h`-grid, warm-starting each point from
/// the fixed point of the previous (worse) channel.
pub fn bp_points_descending(ddp: &DegreeDistribution, family: &ChannelFamily, hs: &[f64], opts: &DeOptions) -> Result<Vec<BpPoint>> {
    let mut init = LDensity::delta_zero(family.grid());
    let mut out = Vec::with_capacity(hs.len());
    let mut last = f64::INFINITY;
    for &h in hs {
        if h > last {
            return Err(Error::InvalidArgument("h-grid must be descending".into()));
        }
        last = h;
        let (p, fp) = bp_point(ddp, family, h, &init, opts)?;
        out.push(p);
        init = fp;
    }
    Ok(out)
}

pub fn bp_gexit_curve(ddp: &DegreeDistribution, family: &ChannelFamily, hs: &[f64], opts: &DeOptions) -> Result<Curve> {
    let pts = bp_points(ddp, family, hs, opts)?;
    Ok(Curve::new(CurveRole::Bp, pts.iter().map(|p| (p.h, p.gexit)).collect()))
}

pub fn bp_exit_curve(ddp: &DegreeDistribution, family: &ChannelFamily, hs: &[f64], opts: &DeOptions) -> Result<Curve> {
    let pts = bp_points(ddp, family, hs, opts)?;
    Ok(Curve::new(CurveRole::Exit, pts.iter().map(|p| (p.h, p.exit)).collect()))
}

/// Chain of the interpolating families started from the base point
/// `a_{-1+t} = (1-t) Δ0 + t c`: element `k` holds `(a_{-1+t+k}, b_{t+k})`
/// where `b_{t} = ρ(a_{-1+t})` and `b` is `None` for `k = 0`.
fn interpolation_chain(
    ddp: &DegreeDistribution,
    c: &LDensity,
    t: f64,
    stop_entropy: f64,
    max_len: usize,
) -> Vec<(LDensity, LDensity)> {
    let mut a = LDensity::delta_zero(c.grid()).mix(c, t);
    let mut out = Vec::new();
    for _ in 0..max_len {
        let b = rho_of(&a, ddp.rho());
        let next = c.var_convolve(&lambda_of(&b, ddp.lambda()));
        let done = a.entropy() < stop_entropy;
        out.push((a, b));
        if done {
            break;
        }
        a = next;
    }
    out
}

/// The interpolating pair `(a_alpha, b_alpha)`; `b_alpha` is `None` for
/// `alpha < 0`.
pub fn interpolate_family(ddp: &DegreeDistribution, c: &LDensity, alpha: f64) -> Result<(LDensity, Option<LDensity>)> {
    if !(alpha >= -1.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be >= -1")));
    }
    let u = alpha + 1.0;
    let (k, t) = if u == 0.0 { (0usize, 0.0) } else { let k = u.ceil() as usize - 1; (k, u - k as f64) };
    let mut a = LDensity::delta_zero(c.grid()).mix(c, t);
    for _ in 0..k {
        a = de_step(ddp, c, &a);
    }
    let b = if alpha >= 0.0 { Some(rho_of(&interpolate_family(ddp, c, alpha - 1.0)?.0, ddp.rho())) } else { None };
    Ok((a, b))
}

/// Output of [`matching_chart`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingChart {
    /// `{H(a_α), G(a_α, b_{α+1})}`, `α ≥ -1`.
    pub check: Curve,
    /// `{H(a_α), G(a_α, b_α)}`, `α ≥ 0`.
    pub variable: Curve,
    /// Smallest `G(a_α, b_α) - G(a_α, b_{α+1})` over the common `α`-grid.
    pub min_gap: f64,
    /// Whether the interpolating families reached entropy `stop_entropy`.
    pub complete: bool,
}

impl MatchingChart {
    /// Area under the check-node curve.
    pub fn check_area(&self) -> f64 {
        self.check.area().abs()
    }

    /// Area to the left of the variable-node curve.
    pub fn variable_left_area(&self) -> f64 {
        self.variable.left_area().abs()
    }
}

/// Component GEXIT matching chart for channel density `c`.
///
/// `G(a_α, b) = [d/dα H(a_α ⋆ b)] / [d/dα H(a_α)]` is evaluated by central
/// differences in `α` with half-width `eta`, on the grid
/// `α = -1 + (j + 1/2) step`.
pub fn matching_chart(
    ddp: &DegreeDistribution,
    c: &LDensity,
    steps_per_unit: usize,
    eta: f64,
    stop_entropy: f64,
    max_len: usize,
) -> Result<MatchingChart> {
    if steps_per_unit == 0 || !(eta > 0.0) || eta * steps_per_unit as f64 >= 0.5 {
        return Err(Error::InvalidArgument("need steps_per_unit >= 1 and eta < step/2".into()));
    }
    let step = 1.0 / steps_per_unit as f64;
    let chains: Vec<[Vec<(LDensity, LDensity)>; 3]> = (0..steps_per_unit)
        .into_par_iter()
        .map(|j| {
            let t = (j as f64 + 0.5) * step;
            [
                interpolation_chain(ddp, c, t - eta, stop_entropy, max_len),
                interpolation_chain(ddp, c, t, stop_entropy, max_len),
                interpolation_chain(ddp, c, t + eta, stop_entropy, max_len),
            ]
        })
        .collect();
    let g = |lo: &LDensity, hi: &LDensity, b: &LDensity| -> f64 {
        let num = hi.var_convolve(b).entropy() - lo.var_convolve(b).entropy();
        let den = hi.entropy() - lo.entropy();
        num / den
    };
    // (alpha, H(a), G check, Option<G variable>)
    let mut rows: Vec<(f64, f64, f64, Option<f64>)> = Vec::new();
    let mut complete = true;
    for (j, [lo, mid, hi]) in chains.iter().enumerate() {
        let t = (j as f64 + 0.5) * step;
        let len = lo.len().min(mid.len()).min(hi.len());
        if mid.last().map(|p| p.0.entropy() >= stop_entropy).unwrap_or(true) {
            complete = false;
        }
        for k in 0..len {
            let alpha = -1.0 + t + k as f64;
            let h = mid[k].0.entropy();
            // b_{alpha+1} = ρ(a_alpha), stored alongside a_alpha
            let gc = g(&lo[k].0, &hi[k].0, &mid[k].1);
            let gv = if k >= 1 { Some(g(&lo[k].0, &hi[k].0, &mid[k - 1].1)) } else { None };
            rows.push((alpha, h, gc, gv));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut check = vec![(1.0, 1.0)];
    check.extend(rows.iter().map(|r| (r.1, r.2)));
    check.push((0.0, 0.0));
    let mut variable = vec![(c.entropy(), 1.0)];
    variable.extend(rows.iter().filter_map(|r| r.3.map(|v| (r.1, v))));
    variable.push((0.0, 0.0));
    let min_gap = rows
        .iter()
        .filter_map(|r| r.3.map(|v| v - r.2))
        .fold(f64::INFINITY, f64::min);
    Ok(MatchingChart {
        check: Curve::new(CurveRole::CheckChart, check),
        variable: Curve::new(CurveRole::VariableChart, variable),
        min_gap,
        complete,
    })
}

/// Convenience wrapper using a channel family and its entropy.
pub fn matching_chart_for(
    ddp: &DegreeDistribution,
    family: &ChannelFamily,
    h: f64,
    steps_per_unit: usize,
) -> Result<MatchingChart> {
    let c = family.density(h)?;
    matching_chart(ddp, &c, steps_per_unit, 0.1 / steps_per_unit as f64, 1e-5, 400)
}

/// Whether the family kind has an exact scalar DE.
pub fn is_erasure(kind: ChannelKind) -> bool {
    kind == ChannelKind::Bec
}
