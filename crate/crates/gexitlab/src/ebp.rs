//! Fixed-entropy density evolution, EBP GEXIT curves, the Maxwell
//! construction and the upper bound on the MAP threshold.

use serde::{Deserialize, Serialize};

use crate::channels::{ChannelFamily, ChannelKind};
use crate::curve::{Curve, CurveRole};
use crate::de::{bp_point, DeOptions, DegreeDistribution};
use crate::density::{Grid, LDensity};
use crate::error::{Error, Result};
use crate::kernels::GexitKernel;
use crate::quad::log2_1p_exp_neg;

/// `F[k] = H(δ_{x_k} ⋆ b)`, so that `H(c ⋆ b) = Σ_k c_k F[k]` for any `c`
/// with no atom (the atom contributes zero entropy).
fn entropy_response(b: &LDensity) -> Vec<f64> {
    let g: Grid = b.grid();
    let m = g.half();
    let n = g.n_bins();
    // E[i] = L(x_{clamp(i - M)}), i = 0..=4M
    let ext: Vec<f64> = (0..=4 * m)
        .map(|i| {
            let k = (i as i64 - m as i64).clamp(0, (n - 1) as i64) as usize;
            log2_1p_exp_neg(g.x(k))
        })
        .collect();
    let rev: Vec<f64> = b.bins().iter().rev().copied().collect();
    let full = crate::density::linear_convolution(&rev, &ext);
    (0..n).map(|k| full[2 * m + k]).collect()
}

/// One step of density evolution at fixed entropy `x`: finds the channel
/// `c_h` with `H(c_h ⋆ λ(ρ(a))) = x` and returns `(c_h ⋆ λ(ρ(a)), h)`.
pub fn rx_step(ddp: &DegreeDistribution, family: &ChannelFamily, x: f64, a: &LDensity) -> Result<(LDensity, f64)> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("x = {x} not in [0, 1]")));
    }
    let b = ddp.lambda_rho(a);
    let reachable = b.entropy();
    if reachable < x - 1e-12 {
        return Err(Error::Unsolvable { target: x, reachable });
    }
    if x == 0.0 {
        let c = LDensity::delta_inf(family.grid());
        return Ok((c.var_convolve(&b), 0.0));
    }
    let resp = entropy_response(&b);
    let eval = |u: f64| -> (LDensity, f64) {
        let c = family.density_param(u);
        let hv: f64 = c.bins().iter().zip(&resp).map(|(p, r)| p * r).sum();
        (c, hv)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = eval(1.0).0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (c, hv) = eval(mid);
        best = c;
        if (hv - x).abs() <= 1e-12 || hi - lo < 1e-15 {
            break;
        }
        if hv < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h = best.entropy();
    Ok((best.var_convolve(&b), h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbpOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Number of points of the uniform `x`-grid on `[0, 1]`.
    pub grid_points: usize,
    /// Neighbouring points whose `h` differ by more than this are refined.
    pub refine_dh: f64,
    pub refine_depth: usize,
    /// Number of cold-start cross-checks.
    pub sentinels: usize,
}

impl Default for EbpOptions {
    fn default() -> Self {
        EbpOptions { tol: 1e-7, max_iters: 2000, grid_points: 101, refine_dh: 0.02, refine_depth: 3, sentinels: 5 }
    }
}

/// A fixed point of the fixed-entropy recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointPair {
    pub x: f64,
    pub h: f64,
    #[serde(skip)]
    pub f: Option<LDensity>,
    pub gexit: f64,
    /// `H(Λ(ρ(f)))`.
    pub exit: f64,
    /// `|H(T_h(f)) - H(f)|`.
    pub entropy_residual: f64,
    pub converged: bool,
    pub iters: usize,
}

/// Iterates [`rx_step`] from `init` until consecutive iterates are within
/// `opts.tol`.
pub fn ebp_fixed_point(
    ddp: &DegreeDistribution,
    family: &ChannelFamily,
    x: f64,
    init: Option<&LDensity>,
    opts: &EbpOptions,
) -> Result<FixedPointPair> {
    let mut a = match init {
        Some(a) => a.clone(),
        None => family.density(x)?,
    };
    let mut h = f64::NAN;
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=opts.max_iters {
        let (next, nh) = rx_step(ddp, family, x, &a)?;
        let next = if it % 16 == 0 { next.symmetrize() } else { next };
        let d = next.distance(&a);
        a = next;
        h = nh;
        iters = it;
        if d <= opts.tol {
            converged = true;
            break;
        }
    }
    let c = family.density(h.clamp(0.0, 1.0))?;
    let t = c.var_convolve(&ddp.lambda_rho(&a));
    let residual = (t.entropy() - a.entropy()).abs();
    let ext = ddp.extrinsic(&a);
    let gexit = GexitKernel::new(family.kind(), h.clamp(0.0, 1.0))?.functional(&ext);
    Ok(FixedPointPair { x, h, f: Some(a), gexit, exit: ext.entropy(), entropy_residual: residual, converged, iters })
}

/// A maximal run of the curve along which `h` decreases with `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SRegion {
    /// Index of the local maximum of `h` (start of the decreasing run).
    pub start: usize,
    /// Index of the local minimum of `h` (end of the decreasing run).
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbpCurve {
    pub points: Vec<FixedPointPair>,
    pub s_regions: Vec<SRegion>,
    /// Smallest `x` with a solution of the fixed-entropy step.
    pub x_min: f64,
    pub diagnostics: Vec<String>,
}

impl EbpCurve {
    pub fn from_points(points: Vec<FixedPointPair>, x_min: f64) -> EbpCurve {
        let s_regions = detect_s_regions(&points);
        EbpCurve { points, s_regions, x_min, diagnostics: Vec::new() }
    }

    /// `{h(x), g(x)}` in increasing `x`.
    pub fn gexit_curve(&self) -> Curve {
        Curve::new(CurveRole::Ebp, self.points.iter().map(|p| (p.h, p.gexit)).collect())
    }
}

fn detect_s_regions(points: &[FixedPointPair]) -> Vec<SRegion> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < points.len() {
        if points[i + 1].h < points[i].h {
            let start = i;
            while i + 1 < points.len() && points[i + 1].h < points[i].h {
                i += 1;
            }
            out.push(SRegion { start, end: i });
        } else {
            i += 1;
        }
    }
    out
}

/// EBP curve on a uniform `x`-grid (warm-started downward from `x = 1`) with
/// bisection refinement where consecutive `h` values differ by more than
/// `opts.refine_dh`.
pub fn ebp_curve(ddp: &DegreeDistribution, family: &ChannelFamily, opts: &EbpOptions) -> Result<EbpCurve> {
    let n = opts.grid_points.max(2);
    let xs: Vec<f64> = (0..n).rev().map(|j| j as f64 / (n - 1) as f64).collect();
    let mut pts: Vec<FixedPointPair> = Vec::new();
    let mut diagnostics = Vec::new();
    let mut last_ok: Option<f64> = None;
    let mut first_bad: Option<f64> = None;
    for &x in &xs {
        let init = pts.last().and_then(|p: &FixedPointPair| p.f.clone());
        match ebp_fixed_point(ddp, family, x, init.as_ref(), opts) {
            Ok(p) => {
                if !p.converged {
                    diagnostics.push(format!("x = {x}: not converged after {} iterations", p.iters));
                }
                last_ok = Some(x);
                pts.push(p);
            }
            Err(Error::Unsolvable { .. }) => {
                first_bad = Some(x);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    // refine the lower end
    if let (Some(mut ok), Some(mut bad)) = (last_ok, first_bad) {
        for _ in 0..6 {
            let mid = 0.5 * (ok + bad);
            let init = pts.last().and_then(|p| p.f.clone());
            match ebp_fixed_point(ddp, family, mid, init.as_ref(), opts) {
                Ok(p) => {
                    ok = mid;
                    pts.push(p);
                }
                Err(Error::Unsolvable { .. }) => bad = mid,
                Err(e) => return Err(e),
            }
        }
        last_ok = Some(ok);
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    for _ in 0..opts.refine_depth {
        let mut inserted = Vec::new();
        for w in pts.windows(2) {
            if (w[1].h - w[0].h).abs() > opts.refine_dh {
                let x = 0.5 * (w[0].x + w[1].x);
                match ebp_fixed_point(ddp, family, x, w[1].f.as_ref(), opts) {
                    Ok(p) => inserted.push(p),
                    Err(Error::Unsolvable { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        if inserted.is_empty() {
            break;
        }
        pts.extend(inserted);
        pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    }
    if opts.sentinels > 0 && pts.len() > 2 {
        let k = opts.sentinels.min(pts.len());
        for s in 0..k {
            let idx = (s + 1) * (pts.len() - 1) / (k + 1);
            let p = &pts[idx];
            match ebp_fixed_point(ddp, family, p.x, None, opts) {
                Ok(q) if (q.h - p.h).abs() > 1e-4 => diagnostics.push(format!(
                    "cold start at x = {} gives h = {} (warm start {})",
                    p.x, q.h, p.h
                )),
                Ok(_) => {}
                Err(e) => diagnostics.push(format!("cold start at x = {}: {e}", p.x)),
            }
        }
    }
    let mut c = EbpCurve::from_points(pts, last_ok.unwrap_or(1.0));
    c.diagnostics = diagnostics;
    Ok(c)
}

/// Area `∫ g dh` along the curve in increasing `x`.
pub fn ebp_area(curve: &EbpCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].h - w[0].h) * (w[0].gexit + w[1].gexit) / 2.0)
        .sum()
}

/// Closed-form BEC EBP curve: `h(x) = x / λ(1 - ρ(1 - x))`,
/// `g(x) = Λ(1 - ρ(1 - x))`. `h` may exceed one for small `x`.
pub fn bec_ebp_point(ddp: &DegreeDistribution, x: f64) -> (f64, f64) {
    let y = 1.0 - ddp.rho_at(1.0 - x);
    (x / ddp.lambda_at(y), ddp.node_lambda_at(y))
}

/// `∫_0^1 g(x) h'(x) dx` of the closed-form BEC EBP curve by composite
/// Simpson quadrature.
pub fn bec_ebp_area(ddp: &DegreeDistribution, intervals: usize) -> f64 {
    let n = intervals.max(2) / 2 * 2;
    let f = |x: f64| {
        let y = 1.0 - ddp.rho_at(1.0 - x);
        let dy = ddp.rho_prime(1.0 - x);
        let l = ddp.lambda_at(y);
        let dh = (l - x * ddp.lambda_prime(y) * dy) / (l * l);
        let g = ddp.node_lambda_at(y);
        if g == 0.0 || !dh.is_finite() {
            0.0
        } else {
            g * dh
        }
    };
    let (a, b) = (1e-9, 1.0);
    let step = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * step);
    }
    s * step / 3.0
}

/// A vertical cut of the Maxwell construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxwellCut {
    pub h: f64,
    /// Curve indices bracketing the cut on the lower (`x1`) and upper (`x3`)
    /// branch; `x1` is `None` when the region touches the start of the curve.
    pub lower_x: Option<f64>,
    pub upper_x: f64,
    pub g_lower: f64,
    pub g_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxwellResult {
    pub cuts: Vec<MaxwellCut>,
    pub map_curve: Curve,
    pub diagnostics: Vec<String>,
}

/// Position on a polyline segment `i -> i+1` with `h = level`.
fn crossing(p: &[FixedPointPair], i: usize, level: f64) -> (f64, f64, f64) {
    let (a, b) = (&p[i], &p[i + 1]);
    let t = if b.h == a.h { 0.0 } else { ((level - a.h) / (b.h - a.h)).clamp(0.0, 1.0) };
    (a.x + t * (b.x - a.x), a.gexit + t * (b.gexit - a.gexit), t)
}

/// `∫ g dh` along the polyline from parameter `(i, t)` to `(j, s)`.
fn partial_area(p: &[FixedPointPair], i: usize, t: f64, j: usize, s: f64) -> f64 {
    let at = |k: usize, u: f64| -> (f64, f64) {
        if k + 1 >= p.len() {
            return (p[k].h, p[k].gexit);
        }
        (p[k].h + u * (p[k + 1].h - p[k].h), p[k].gexit + u * (p[k + 1].gexit - p[k].gexit))
    };
    let mut nodes = vec![at(i, t)];
    for k in (i + 1)..=j {
        nodes.push((p[k].h, p[k].gexit));
    }
    nodes.push(at(j, s));
    nodes.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

/// First segment at or after `from` (before `from` when `backward`) that
/// crosses the level `h`.
fn find_segment(p: &[FixedPointPair], from: usize, to: usize, level: f64, backward: bool) -> Option<usize> {
    let within = |k: usize| {
        let (a, b) = (p[k].h, p[k + 1].h);
        (a.min(b)..=a.max(b)).contains(&level)
    };
    if backward {
        (to..from).rev().find(|&k| within(k))
    } else {
        (from..to).find(|&k| within(k))
    }
}

/// Maxwell construction: each S-region is replaced by the vertical cut that
/// balances the signed area `∫ g dh` between the lower and upper branches.
/// When the curve does not start at `g = 0` (truncated at `x_min`), the
/// missing initial area is taken as `rate - ebp_area(curve)`.
pub fn maxwell_construction(curve: &EbpCurve, ddp: &DegreeDistribution) -> MaxwellResult {
    let p = &curve.points;
    let mut diagnostics = Vec::new();
    let mut cuts: Vec<MaxwellCut> = Vec::new();
    if p.len() < 2 {
        return MaxwellResult { cuts, map_curve: curve.gexit_curve(), diagnostics };
    }
    let c0 = ddp.design_rate() - ebp_area(curve);
    // regions as (start, end) with merging of out-of-order cuts
    let mut regions: Vec<(usize, usize)> = curve.s_regions.iter().map(|r| (r.start, r.end)).collect();
    let mut solved: Vec<(usize, usize, MaxwellCut)> = Vec::new();
    let mut idx = 0;
    while idx < regions.len() {
        let (s, e) = regions[idx];
        match solve_region(p, s, e, c0) {
            Some(cut) => {
                if let Some(prev) = solved.last() {
                    if cut.h < prev.2.h {
                        // cuts out of order: merge with the previous region
                        let (ps, _, _) = solved.pop().unwrap();
                        regions[idx] = (ps, e);
                        diagnostics.push(format!("merged S-regions ending at x = {} and x = {}", p[prev_end(&regions, idx)].x, p[e].x));
                        continue;
                    }
                }
                solved.push((s, e, cut));
            }
            None => diagnostics.push(format!(
                "S-region x in [{}, {}]: balance has no sign change; cut skipped",
                p[s].x, p[e].x
            )),
        }
        idx += 1;
    }
    cuts.extend(solved.iter().map(|t| t.2));
    // assemble the single-valued curve
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut k = 0usize;
    for cut in &cuts {
        match cut.lower_x {
            None => {
                out.clear();
                out.push((0.0, 0.0));
                out.push((cut.h, 0.0));
            }
            Some(x1) => {
                while k < p.len() && p[k].x < x1 {
                    out.push((p[k].h, p[k].gexit));
                    k += 1;
                }
                out.push((cut.h, cut.g_lower));
            }
        }
        out.push((cut.h, cut.g_upper));
        while k < p.len() && p[k].x <= cut.upper_x {
            k += 1;
        }
    }
    while k < p.len() {
        out.push((p[k].h, p[k].gexit));
        k += 1;
    }
    MaxwellResult { cuts, map_curve: Curve::new(CurveRole::MapEstimate, out), diagnostics }
}

fn prev_end(regions: &[(usize, usize)], idx: usize) -> usize {
    regions[idx].0
}

/// Balanced cut of the region whose decreasing run is `p[s..=e]`.
fn solve_region(p: &[FixedPointPair], s: usize, e: usize, c0: f64) -> Option<MaxwellCut> {
    let n = p.len();
    let touches_start = s == 0;
    let h_lo = p[e].h;
    let h_hi = if touches_start { p[s].h.min(1.0) } else { p[s].h };
    // balance A(h*) = ∫_{x1}^{x3} g dh (plus c0 when the region touches the start)
    let balance = |level: f64| -> Option<(f64, MaxwellCut)> {
        let j = find_segment(p, e, n - 1, level, false)?;
        let (x3, g3, t3) = crossing(p, j, level);
        if touches_start {
            let a = c0 + partial_area(p, 0, 0.0, j, t3);
            Some((a, MaxwellCut { h: level, lower_x: None, upper_x: x3, g_lower: 0.0, g_upper: g3 }))
        } else {
            let i = find_segment(p, s, 0, level, true)?;
            let (x1, g1, t1) = crossing(p, i, level);
            let a = partial_area(p, i, t1, j, t3);
            Some((a, MaxwellCut { h: level, lower_x: Some(x1), upper_x: x3, g_lower: g1, g_upper: g3 }))
        }
    };
    let (mut lo, mut hi) = (h_lo, h_hi);
    let (alo, _) = balance(lo)?;
    let (ahi, _) = balance(hi)?;
    if alo.signum() == ahi.signum() && alo != 0.0 {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let (am, _) = balance(mid)?;
        if (am < 0.0) == (alo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    balance(0.5 * (lo + hi)).map(|r| r.1)
}

/// Upper bound on the MAP threshold and the entropy lower-bound curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapBound {
    pub h_bar: f64,
    /// BP GEXIT values used, descending in `h`.
    pub bp_curve: Curve,
    /// `r - ∫_h^1 g^BP(h') dh'` at the grid points.
    pub entropy_lower_bound: Curve,
}

/// Computes `h̄` with `∫_{h̄}^1 g^BP(h) dh = r` by sweeping `h` downward from
/// one with step `step` (warm-started BP fixed points), cumulative
/// trapezoid integration and refinement of the bracketing interval.
pub fn map_threshold_upper_bound(
    ddp: &DegreeDistribution,
    family: &ChannelFamily,
    step: f64,
    de: &DeOptions,
) -> Result<MapBound> {
    if !(step > 0.0 && step <= 0.02) {
        return Err(Error::Resolution(format!(
            "h-step {step} too coarse for the BP GEXIT integral; use at most 0.02"
        )));
    }
    let r = ddp.design_rate();
    let n = (1.0 / step).round() as usize;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut bound: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    let (mut last, mut init) = bp_point(ddp, family, 1.0, &LDensity::delta_zero(family.grid()), de)?;
    pts.push((1.0, last.gexit));
    bound.push((1.0, r));
    for j in 1..=n {
        let h = (1.0 - j as f64 * step).max(0.0);
        let (p, fp) = bp_point(ddp, family, h, &init, de)?;
        let inc = (last.h - h) * (last.gexit + p.gexit) / 2.0;
        if cum + inc >= r {
            // refine the bracket [h, last.h] with sub-steps
            let sub = 16;
            let mut c = cum;
            let mut prev = last;
            let mut warm = init.clone();
            for i in 1..=sub {
                let hi = last.h - (last.h - h) * i as f64 / sub as f64;
                let (q, fq) = bp_point(ddp, family, hi, &warm, de)?;
                let d = (prev.h - q.h) * (prev.gexit + q.gexit) / 2.0;
                if c + d >= r || i == sub {
                    // g is linear on the cell: ∫_{h0-u}^{h0} g = g0 u - slope u^2 / 2
                    let (h0, g0, h1, g1) = (prev.h, prev.gexit, q.h, q.gexit);
                    let need = (r - c).max(0.0);
                    let slope = (g0 - g1) / (h0 - h1);
                    let u = if slope.abs() < 1e-14 {
                        need / g0
                    } else {
                        let disc = (g0 * g0 - 2.0 * slope * need).max(0.0);
                        (g0 - disc.sqrt()) / slope
                    };
                    let h_bar = (h0 - u).clamp(h1, h0);
                    pts.push((h_bar, g0 - slope * (h0 - h_bar)));
                    bound.push((h_bar, 0.0));
                    return Ok(MapBound {
                        h_bar,
                        bp_curve: Curve::new(CurveRole::Bp, pts),
                        entropy_lower_bound: Curve::new(CurveRole::Gexit, bound),
                    });
                }
                c += d;
                pts.push((q.h, q.gexit));
                bound.push((q.h, r - c));
                prev = q;
                warm = fq;
            }
        }
        cum += inc;
        pts.push((h, p.gexit));
        bound.push((h, r - cum));
        last = p;
        init = fp;
    }
    Err(Error::Resolution(format!("∫ g^BP dh = {cum} never reached the rate {r}")))
}

/// Whether closed-form BEC expressions apply.
pub fn has_closed_form(kind: ChannelKind) -> bool {
    kind == ChannelKind::Bec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bec_closed_form_area_is_rate() {
        let d = DegreeDistribution::regular(3, 6).unwrap();
        assert!((bec_ebp_area(&d, 200_000) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn rx_step_residual() {
        let g = Grid::new(30.0, 513).unwrap();
        let d = DegreeDistribution::regular(3, 6).unwrap();
        let fam = ChannelFamily::new(ChannelKind::Bsc, g);
        let a = fam.density(0.6).unwrap();
        let (t, h) = rx_step(&d, &fam, 0.6, &a).unwrap();
        assert!((t.entropy() - 0.6).abs() < 1e-8);
        let re = fam.density(h).unwrap().var_convolve(&d.lambda_rho(&a));
        assert!((re.entropy() - 0.6).abs() < 1e-8);
    }
}
