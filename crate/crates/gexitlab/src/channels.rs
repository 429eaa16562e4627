//! Entropy-parameterized BMS channel families: BEC, BSC and BAWGN.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::density::{bins_from_magnitudes, Grid, LDensity};
use crate::error::{Error, Result};
use crate::quad::{bisect, log2_1p_exp_neg, norm_cdf, norm_pdf, norm_sf, pair_entropy, GaussNodes};

/// Binary entropy in bits.
pub fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Inverse of [`h2`] on `[0, 1/2]`.
pub fn h2_inv(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 0.5;
    }
    let mut x = bisect(h2, y, 0.0, 0.5, true, 200);
    // Newton polish: h2'(x) = log2((1-x)/x)
    for _ in 0..3 {
        let d = ((1.0 - x) / x).log2();
        if d <= 0.0 || !d.is_finite() {
            break;
        }
        let next = x - (h2(x) - y) / d;
        if !(next > 0.0 && next <= 0.5) {
            break;
        }
        x = next;
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Bec,
    Bsc,
    Bawgn,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Bec => "bec",
            ChannelKind::Bsc => "bsc",
            ChannelKind::Bawgn => "bawgn",
        })
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ChannelKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bec" => Ok(ChannelKind::Bec),
            "bsc" => Ok(ChannelKind::Bsc),
            "bawgn" | "bawgnc" | "biawgn" => Ok(ChannelKind::Bawgn),
            other => Err(Error::Parse(format!("unknown channel '{other}'"))),
        }
    }
}

/// A channel family with an optional operating point, parsed from strings
/// such as `bsc`, `bsc:eps=0.07`, `bec:h=0.5` or `bawgn:sigma=0.9`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    /// Channel entropy of the operating point.
    pub h: Option<f64>,
}

impl std::str::FromStr for ChannelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<ChannelSpec> {
        let (kind, param) = match s.split_once(':') {
            Some((k, p)) => (k.parse::<ChannelKind>()?, Some(p)),
            None => (s.parse::<ChannelKind>()?, None),
        };
        let h = match param {
            None => None,
            Some(p) => {
                let (key, val) =
                    p.split_once('=').ok_or_else(|| Error::Parse(format!("expected key=value, got '{p}'")))?;
                let v: f64 = val.trim().parse().map_err(|_| Error::Parse(format!("bad number '{val}'")))?;
                let h = match (kind, key.trim()) {
                    (_, "h") => v,
                    (ChannelKind::Bec, "eps") => v,
                    (ChannelKind::Bsc, "eps" | "p") if (0.0..=0.5).contains(&v) => h2(v),
                    (ChannelKind::Bawgn, "sigma") if v >= 0.0 => {
                        if v == 0.0 {
                            0.0
                        } else {
                            bawgn_entropy(v)
                        }
                    }
                    (_, k) => return Err(Error::Parse(format!("unsupported parameter '{k}={val}' for {kind}"))),
                };
                if !(0.0..=1.0).contains(&h) {
                    return Err(Error::ParameterOutOfRange(format!("h = {h} not in [0, 1]")));
                }
                Some(h)
            }
        };
        Ok(ChannelSpec { kind, h })
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.h {
            Some(h) => write!(f, "{}:h={h}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// Continuous BAWGN entropy for noise standard deviation `sigma`.
pub fn bawgn_entropy(sigma: f64) -> f64 {
    bawgn_entropy_eps(2.0 / (sigma * sigma))
}

/// Continuous BAWGN entropy in the `eps = 2/sigma^2` parameterization, where
/// the L-density is `N(eps, 2 eps)`.
pub fn bawgn_entropy_eps(eps: f64) -> f64 {
    if eps <= 0.0 {
        return 1.0;
    }
    if eps > 2000.0 {
        return 0.0;
    }
    GaussNodes::new(eps, 2.0 * eps).expect(log2_1p_exp_neg).clamp(0.0, 1.0)
}

/// Noise level of the BAWGN channel with (continuous) entropy `h`.
pub fn sigma_from_entropy(h: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::ParameterOutOfRange(format!("h = {h}")));
    }
    let (lo, hi) = (1e-3f64, 1e3f64);
    let ls = bisect(|ls| bawgn_entropy(ls.exp()), h, lo.ln(), hi.ln(), true, 200);
    Ok(ls.exp())
}

/// Signed measure on a density grid; used for parameter derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure {
    pub grid: Grid,
    pub bins: Vec<f64>,
    pub atom_inf: f64,
}

impl SignedMeasure {
    pub fn total(&self) -> f64 {
        self.bins.iter().sum::<f64>() + self.atom_inf
    }

    /// `∫ f d(mu)` with `at_inf` the value of `f` at `+inf`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, at_inf: f64) -> f64 {
        self.bins
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0.0)
            .map(|(k, &m)| m * f(self.grid.x(k)))
            .sum::<f64>()
            + self.atom_inf * at_inf
    }

    pub fn entropy(&self) -> f64 {
        self.integrate(log2_1p_exp_neg, 0.0)
    }

    pub fn total_variation(&self, other: &SignedMeasure) -> f64 {
        self.bins.iter().zip(&other.bins).map(|(a, b)| (a - b).abs()).sum::<f64>()
            + (self.atom_inf - other.atom_inf).abs()
    }

    /// Central difference `(b - a) / step` of two densities.
    pub fn difference(a: &LDensity, b: &LDensity, step: f64) -> SignedMeasure {
        SignedMeasure {
            grid: a.grid(),
            bins: a.bins().iter().zip(b.bins()).map(|(x, y)| (y - x) / step).collect(),
            atom_inf: (b.atom_inf() - a.atom_inf()) / step,
        }
    }
}

/// A degraded family of BMS channels indexed by entropy `h ∈ [0, 1]`,
/// quantized on a fixed grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelFamily {
    kind: ChannelKind,
    grid: Grid,
}

/// Largest `eps = 2/sigma^2` treated as finite; beyond it the BAWGN density
/// is indistinguishable from `Δ∞` on any supported grid.
const BAWGN_EPS_CAP: f64 = 2000.0;

impl ChannelFamily {
    pub fn new(kind: ChannelKind, grid: Grid) -> ChannelFamily {
        ChannelFamily { kind, grid }
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn check_h(h: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::ParameterOutOfRange(format!("h = {h} not in [0, 1]")));
        }
        Ok(())
    }

    /// Quantized density with entropy `h`. The quantization is chosen so that
    /// `entropy(density(h)) = h` up to rounding.
    pub fn density(&self, h: f64) -> Result<LDensity> {
        Self::check_h(h)?;
        Ok(match self.kind {
            ChannelKind::Bec => bec_density(self.grid, h),
            ChannelKind::Bsc => bsc_density(self.grid, h),
            ChannelKind::Bawgn => {
                if h == 0.0 {
                    LDensity::delta_inf(self.grid)
                } else if h == 1.0 {
                    LDensity::delta_zero(self.grid)
                } else {
                    bawgn_density(self.grid, self.bawgn_eps_quantized(h))
                }
            }
        })
    }

    /// Density at the monotone parameter `u ∈ [0, 1]` (`u = 0` perfect,
    /// `u = 1` useless). `u` is `h` for the BEC, `2 eps` for the BSC and
    /// `1/(1 + 2/sigma^2)` for the BAWGN channel.
    pub fn density_param(&self, u: f64) -> LDensity {
        let u = u.clamp(0.0, 1.0);
        match self.kind {
            ChannelKind::Bec => bec_density(self.grid, u),
            ChannelKind::Bsc => bsc_density(self.grid, h2(0.5 * u)),
            ChannelKind::Bawgn => {
                if u == 0.0 {
                    LDensity::delta_inf(self.grid)
                } else {
                    bawgn_density(self.grid, (1.0 - u) / u)
                }
            }
        }
    }

    /// Parameter `u` of [`ChannelFamily::density_param`] with entropy `h`.
    pub fn param_of_h(&self, h: f64) -> Result<f64> {
        Self::check_h(h)?;
        Ok(match self.kind {
            ChannelKind::Bec => h,
            ChannelKind::Bsc => 2.0 * h2_inv(h),
            ChannelKind::Bawgn => {
                if h == 0.0 {
                    0.0
                } else if h == 1.0 {
                    1.0
                } else {
                    1.0 / (1.0 + self.bawgn_eps_quantized(h))
                }
            }
        })
    }

    /// `eps = 2/sigma^2` such that the quantized BAWGN density has entropy `h`.
    fn bawgn_eps_quantized(&self, h: f64) -> f64 {
        let grid = self.grid;
        let ln_eps = bisect(
            |le| bawgn_density(grid, le.exp()).entropy(),
            h,
            (1e-12f64).ln(),
            BAWGN_EPS_CAP.ln(),
            false,
            120,
        );
        ln_eps.exp()
    }

    /// Natural channel parameter: erasure probability, crossover probability
    /// or noise standard deviation (continuous entropy), respectively.
    pub fn native_parameter(&self, h: f64) -> Result<f64> {
        Self::check_h(h)?;
        match self.kind {
            ChannelKind::Bec => Ok(h),
            ChannelKind::Bsc => Ok(h2_inv(h)),
            ChannelKind::Bawgn => sigma_from_entropy(h),
        }
    }

    /// Exact derivative of the quantized density with respect to `h`. `h` is
    /// clamped to `[1e-9, 1 - 1e-9]`.
    pub fn d_density_dh(&self, h: f64) -> Result<SignedMeasure> {
        Self::check_h(h)?;
        let h = h.clamp(1e-9, 1.0 - 1e-9);
        let g = self.grid;
        let m = g.half();
        Ok(match self.kind {
            ChannelKind::Bec => {
                let mut bins = vec![0.0; g.n_bins()];
                bins[m] = 1.0;
                SignedMeasure { grid: g, bins, atom_inf: -1.0 }
            }
            ChannelKind::Bsc => {
                let mut mags = vec![0.0; m + 1];
                let mut atom = 0.0;
                match bsc_cell(g, h) {
                    BscCell::Pair(k) => {
                        let d = 1.0 / (pair_entropy(g.mag(k)) - pair_entropy(g.mag(k + 1)));
                        mags[k] = d;
                        mags[k + 1] = -d;
                    }
                    BscCell::Top => {
                        let d = 1.0 / pair_entropy(g.mag(m));
                        mags[m] = d;
                        atom = -d;
                    }
                }
                SignedMeasure { grid: g, bins: bins_from_magnitudes(g, &mags), atom_inf: atom }
            }
            ChannelKind::Bawgn => {
                let eps = self.bawgn_eps_quantized(h);
                let d_eps = bawgn_mass_derivative(g, eps);
                let dh_deps = d_eps.entropy();
                SignedMeasure {
                    grid: g,
                    bins: d_eps.bins.iter().map(|v| v / dh_deps).collect(),
                    atom_inf: 0.0,
                }
            }
        })
    }

    /// Analytic derivative `d/dh E_{c_h}[f]` for the continuous channel, with
    /// `f` evaluated on LLRs and `df` its derivative (used by the BSC).
    pub fn d_expect_dh<F, D>(&self, h: f64, f: F, df: D) -> Result<f64>
    where
        F: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        Self::check_h(h)?;
        let h = h.clamp(1e-9, 1.0 - 1e-9);
        Ok(match self.kind {
            ChannelKind::Bec => f(0.0) - f(f64::INFINITY),
            ChannelKind::Bsc => {
                let e = h2_inv(h);
                let a = ((1.0 - e) / e).ln();
                // d/de of (1-e) f(a) + e f(-a), a = ln((1-e)/e), da/de = -1/(e(1-e))
                let da = -1.0 / (e * (1.0 - e));
                let d_de = -f(a) + f(-a) + ((1.0 - e) * df(a) - e * df(-a)) * da;
                // dh/de = log2((1-e)/e)
                d_de / (a / std::f64::consts::LN_2)
            }
            ChannelKind::Bawgn => {
                let sigma = sigma_from_entropy(h)?;
                let m = 2.0 / (sigma * sigma);
                let nodes = GaussNodes::new(m, 2.0 * m);
                let score = |w: f64| {
                    let d = w - m;
                    d / (2.0 * m) + d * d / (4.0 * m * m) - 1.0 / (2.0 * m)
                };
                let num = nodes.expect(|w| f(w) * score(w));
                let den = nodes.expect(|w| log2_1p_exp_neg(w) * score(w));
                // den = dh/d(eps)
                num / den
            }
        })
    }
}

fn bec_density(grid: Grid, h: f64) -> LDensity {
    let mut bins = vec![0.0; grid.n_bins()];
    bins[grid.half()] = h;
    LDensity::from_raw(grid, bins, 1.0 - h)
}

enum BscCell {
    /// Mixture of magnitude bins `k` and `k + 1`.
    Pair(usize),
    /// Mixture of the top bin and the atom.
    Top,
}

fn bsc_cell(grid: Grid, h: f64) -> BscCell {
    let m = grid.half();
    // pair_entropy is decreasing in the magnitude; find k with
    // H(x_{k+1}) < h <= H(x_k).
    if h <= pair_entropy(grid.mag(m)) {
        return BscCell::Top;
    }
    let (mut lo, mut hi) = (0usize, m);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if pair_entropy(grid.mag(mid)) >= h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    BscCell::Pair(lo)
}

/// Symmetric density with entropy exactly `h`, supported on the two magnitude
/// bins that bracket the BSC LLR `ln((1-eps)/eps)`.
fn bsc_density(grid: Grid, h: f64) -> LDensity {
    if h <= 0.0 {
        return LDensity::delta_inf(grid);
    }
    if h >= 1.0 {
        return LDensity::delta_zero(grid);
    }
    let m = grid.half();
    let mut mags = vec![0.0; m + 1];
    match bsc_cell(grid, h) {
        BscCell::Pair(k) => {
            let (hk, hk1) = (pair_entropy(grid.mag(k)), pair_entropy(grid.mag(k + 1)));
            let t = ((h - hk1) / (hk - hk1)).clamp(0.0, 1.0);
            mags[k] = t;
            mags[k + 1] = 1.0 - t;
            LDensity::from_magnitudes(grid, &mags, 0.0)
        }
        BscCell::Top => {
            let t = (h / pair_entropy(grid.mag(m))).clamp(0.0, 1.0);
            mags[m] = t;
            LDensity::from_magnitudes(grid, &mags, 1.0 - t)
        }
    }
}

/// `E[(x - L)^+]` for `L ~ N(mu, s^2)`, or `E[(L - x)^+]` when `upper`.
fn psi(x: f64, mu: f64, s: f64, upper: bool) -> f64 {
    let z = (x - mu) / s;
    if upper {
        s * norm_pdf(z) - (x - mu) * norm_sf(z)
    } else {
        (x - mu) * norm_cdf(z) + s * norm_pdf(z)
    }
}

/// `d/d(eps)` of [`psi`] with `mu = eps`, `s = sqrt(2 eps)`.
fn dpsi(x: f64, mu: f64, s: f64, upper: bool) -> f64 {
    let z = (x - mu) / s;
    if upper {
        norm_sf(z) + norm_pdf(z) / s
    } else {
        -norm_cdf(z) + norm_pdf(z) / s
    }
}

/// Hat-function cell masses of a Gaussian on the grid, with tails folded
/// onto the boundary bins. `p` is [`psi`] (with `unit = 1`) or its parameter
/// derivative [`dpsi`] (with `unit = 0`); `unit` is the derivative-free
/// offset between the lower and upper forms at the boundaries.
fn gaussian_cells<F>(grid: Grid, mu: f64, s: f64, p: F, unit: f64) -> Vec<f64>
where
    F: Fn(f64, f64, f64, bool) -> f64,
{
    let n = grid.n_bins();
    let d = grid.step();
    let mut out = vec![0.0; n];
    for (k, o) in out.iter_mut().enumerate() {
        let x = grid.x(k);
        let up = x > mu;
        *o = if k == 0 {
            let u = grid.x(1) > mu;
            (p(grid.x(1), mu, s, u) - p(x, mu, s, u)) / d + if u { unit } else { 0.0 }
        } else if k == n - 1 {
            let u = grid.x(n - 2) > mu;
            (p(grid.x(n - 2), mu, s, u) - p(x, mu, s, u)) / d + if u { 0.0 } else { unit }
        } else {
            (p(grid.x(k + 1), mu, s, up) - 2.0 * p(x, mu, s, up) + p(grid.x(k - 1), mu, s, up)) / d
        };
    }
    out
}

fn bawgn_density(grid: Grid, eps: f64) -> LDensity {
    if eps >= BAWGN_EPS_CAP {
        return LDensity::delta_inf(grid);
    }
    if eps <= 0.0 {
        return LDensity::delta_zero(grid);
    }
    let s = (2.0 * eps).sqrt();
    let bins = gaussian_cells(grid, eps, s, psi, 1.0);
    LDensity::from_raw(grid, bins, 0.0).symmetrize()
}

/// Derivative of the symmetrized BAWGN cell masses with respect to `eps`.
fn bawgn_mass_derivative(grid: Grid, eps: f64) -> SignedMeasure {
    let s = (2.0 * eps).sqrt();
    let raw = gaussian_cells(grid, eps, s, dpsi, 0.0);
    let m = grid.half();
    let mut mags = vec![0.0; m + 1];
    mags[0] = raw[m];
    for i in 1..=m {
        mags[i] = raw[m + i] + raw[m - i];
    }
    SignedMeasure { grid, bins: bins_from_magnitudes(grid, &mags), atom_inf: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(30.0, 1025).unwrap()
    }

    #[test]
    fn h2_basics() {
        assert_eq!(h2(0.5), 1.0);
        assert_eq!(h2(0.0), 0.0);
        assert!((h2_inv(0.5) - 0.110_027_864).abs() < 1e-8);
        for &y in &[1e-6, 0.01, 0.3, 0.77, 0.999_999] {
            assert!((h2(h2_inv(y)) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_round_trip() {
        for kind in [ChannelKind::Bec, ChannelKind::Bsc, ChannelKind::Bawgn] {
            let fam = ChannelFamily::new(kind, grid());
            for i in 1..10 {
                let h = i as f64 / 10.0;
                let d = fam.density(h).unwrap();
                assert!((d.entropy() - h).abs() < 1e-8, "{kind} {h} {}", d.entropy());
                assert!(d.is_symmetric(1e-12));
            }
            assert_eq!(fam.density(0.0).unwrap(), LDensity::delta_inf(grid()));
            assert!(fam.density(1.0).unwrap().distance(&LDensity::delta_zero(grid())) < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for kind in [ChannelKind::Bec, ChannelKind::Bsc, ChannelKind::Bawgn] {
            let fam = ChannelFamily::new(kind, grid());
            for &h in &[0.3, 0.5, 0.7] {
                let d = fam.d_density_dh(h).unwrap();
                assert!(d.total().abs() < 1e-9);
                assert!((d.entropy() - 1.0).abs() < 1e-6, "{kind} {}", d.entropy());
                let step = 1e-4;
                let fd = SignedMeasure::difference(
                    &fam.density(h - step).unwrap(),
                    &fam.density(h + step).unwrap(),
                    2.0 * step,
                );
                let tol = if kind == ChannelKind::Bawgn { 1e-3 } else { 1e-5 };
                assert!(d.total_variation(&fd) < tol, "{kind} {h} {}", d.total_variation(&fd));
            }
        }
    }

    #[test]
    fn sigma_round_trip() {
        for i in 1..10 {
            let h = i as f64 / 10.0;
            let s = sigma_from_entropy(h).unwrap();
            assert!((bawgn_entropy(s) - h).abs() < 1e-10);
        }
    }
}
