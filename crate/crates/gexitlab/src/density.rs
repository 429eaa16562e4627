//! Quantized symmetric L-densities and their convolution algebra.
//!
//! A density lives on a uniform LLR grid `x_k = (k - M) * step`, `k = 0..2M`,
//! covering `[-l_max, l_max]`, plus a point mass at `+inf`. The grid has an odd
//! number of bins so that `0` and every pair `+-x` are representable.

use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{log2_1p_exp_neg, pair_entropy};

pub const DEFAULT_L_MAX: f64 = 30.0;
pub const DEFAULT_N_BINS: usize = 4097;

/// Below this many nonzero bins a direct convolution is used instead of the FFT.
const SPARSE_CUTOFF: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    l_max: f64,
    n_bins: usize,
}

impl Grid {
    pub fn new(l_max: f64, n_bins: usize) -> Result<Grid> {
        if !(l_max.is_finite() && l_max > 0.0) {
            return Err(Error::InvalidGrid(format!("l_max must be positive, got {l_max}")));
        }
        if n_bins < 3 || n_bins % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "n_bins must be odd and at least 3, got {n_bins}"
            )));
        }
        if n_bins > u32::MAX as usize {
            return Err(Error::InvalidGrid("n_bins too large".into()));
        }
        Ok(Grid { l_max, n_bins })
    }

    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Index of the zero bin; also the number of strictly positive bins.
    pub fn half(&self) -> usize {
        (self.n_bins - 1) / 2
    }

    pub fn step(&self) -> f64 {
        self.l_max / self.half() as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        (k as f64 - self.half() as f64) * self.step()
    }

    /// Magnitude of the `i`-th nonnegative grid point.
    pub fn mag(&self, i: usize) -> f64 {
        i as f64 * self.step()
    }

    /// Split a nonnegative magnitude between its two neighbouring magnitude
    /// bins. Values beyond `l_max` land on the top bin.
    pub fn split_magnitude(&self, z: f64) -> (usize, f64) {
        let m = self.half();
        let u = z / self.step();
        if !(u < m as f64) {
            return (m, 0.0);
        }
        let u = u.max(0.0);
        let i = u.floor() as usize;
        (i, u - i as f64)
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid { l_max: DEFAULT_L_MAX, n_bins: DEFAULT_N_BINS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityFunctionalReport {
    pub entropy: f64,
    pub battacharyya: f64,
    pub error_prob: f64,
}

/// Quantized L-density with an atom at `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LDensityRepr", into = "LDensityRepr")]
pub struct LDensity {
    grid: Grid,
    bins: Vec<f64>,
    atom_inf: f64,
}

#[derive(Serialize, Deserialize)]
struct LDensityRepr {
    l_max: f64,
    n_bins: usize,
    bins: Vec<f64>,
    atom_inf: f64,
}

impl From<LDensity> for LDensityRepr {
    fn from(d: LDensity) -> Self {
        LDensityRepr {
            l_max: d.grid.l_max,
            n_bins: d.grid.n_bins,
            bins: d.bins,
            atom_inf: d.atom_inf,
        }
    }
}

impl TryFrom<LDensityRepr> for LDensity {
    type Error = Error;
    fn try_from(r: LDensityRepr) -> Result<LDensity> {
        LDensity::new(Grid::new(r.l_max, r.n_bins)?, r.bins, r.atom_inf)
    }
}

impl LDensity {
    /// Validating constructor: masses must be finite, nonnegative and sum to one
    /// within `1e-12`. Symmetry is not required here; see [`LDensity::symmetry_defect`].
    pub fn new(grid: Grid, bins: Vec<f64>, atom_inf: f64) -> Result<LDensity> {
        if bins.len() != grid.n_bins {
            return Err(Error::InvalidDensity(format!(
                "expected {} bins, got {}",
                grid.n_bins,
                bins.len()
            )));
        }
        if bins.iter().chain(std::iter::once(&atom_inf)).any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidDensity("masses must be finite and nonnegative".into()));
        }
        let total: f64 = bins.iter().sum::<f64>() + atom_inf;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensity(format!("total mass {total} != 1")));
        }
        Ok(LDensity { grid, bins, atom_inf })
    }

    /// Internal constructor: clamps rounding negatives and renormalizes.
    pub(crate) fn from_raw(grid: Grid, mut bins: Vec<f64>, atom_inf: f64) -> LDensity {
        let atom_inf = atom_inf.clamp(0.0, 1.0);
        let mut total = 0.0;
        for m in bins.iter_mut() {
            if !(*m > 0.0) {
                *m = 0.0;
            }
            total += *m;
        }
        let want = 1.0 - atom_inf;
        if total > 0.0 {
            let scale = want / total;
            for m in bins.iter_mut() {
                *m *= scale;
            }
        } else if want > 0.0 {
            bins[grid.half()] = want;
        }
        LDensity { grid, bins, atom_inf }
    }

    /// Unit mass at LLR 0 (useless channel).
    pub fn delta_zero(grid: Grid) -> LDensity {
        let mut bins = vec![0.0; grid.n_bins];
        bins[grid.half()] = 1.0;
        LDensity { grid, bins, atom_inf: 0.0 }
    }

    /// Unit mass at `+inf` (perfect channel).
    pub fn delta_inf(grid: Grid) -> LDensity {
        LDensity { grid, bins: vec![0.0; grid.n_bins], atom_inf: 1.0 }
    }

    /// Builds a symmetric density from magnitude masses (`mags[i]` is the total
    /// mass at `+-x_i`) and an atom at infinity.
    pub fn from_magnitudes(grid: Grid, mags: &[f64], atom_inf: f64) -> LDensity {
        LDensity::from_raw(grid, bins_from_magnitudes(grid, mags), atom_inf)
    }

    /// Places point masses at arbitrary LLRs by linear splitting between the
    /// neighbouring grid points. `+inf` goes to the atom, values outside the
    /// grid are clamped to the boundary bins.
    pub fn from_llr_masses(grid: Grid, masses: &[(f64, f64)]) -> Result<LDensity> {
        let mut bins = vec![0.0; grid.n_bins];
        let mut atom = 0.0;
        let m = grid.half();
        for &(l, p) in masses {
            if l.is_nan() || l == f64::NEG_INFINITY || !(p >= 0.0) {
                return Err(Error::InvalidDensity(format!("bad mass ({l}, {p})")));
            }
            if l == f64::INFINITY {
                atom += p;
                continue;
            }
            let (i, f) = grid.split_magnitude(l.abs());
            if l >= 0.0 {
                bins[m + i] += p * (1.0 - f);
                if f > 0.0 {
                    bins[m + i + 1] += p * f;
                }
            } else {
                bins[m - i] += p * (1.0 - f);
                if f > 0.0 {
                    bins[m - i - 1] += p * f;
                }
            }
        }
        LDensity::new(grid, bins, atom)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn atom_inf(&self) -> f64 {
        self.atom_inf
    }

    pub fn total_mass(&self) -> f64 {
        self.bins.iter().sum::<f64>() + self.atom_inf
    }

    /// Pair totals `m(x_i) + m(-x_i)` for `i = 0..=M` (index 0 is the zero bin).
    pub fn magnitudes(&self) -> Vec<f64> {
        let m = self.grid.half();
        let mut out = Vec::with_capacity(m + 1);
        out.push(self.bins[m]);
        for i in 1..=m {
            out.push(self.bins[m + i] + self.bins[m - i]);
        }
        out
    }

    pub fn entropy(&self) -> f64 {
        let g = self.grid;
        let h: f64 = self
            .bins
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| p * log2_1p_exp_neg(g.x(k)))
            .sum();
        h.clamp(0.0, 1.0)
    }

    pub fn battacharyya(&self) -> f64 {
        let g = self.grid;
        self.bins
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| p * (-0.5 * g.x(k)).exp())
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    pub fn error_prob(&self) -> f64 {
        let g = self.grid;
        let pe: f64 = self
            .bins
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| {
                let z = g.x(k);
                p * (-(0.5 * z.abs() + 0.5 * z)).exp()
            })
            .sum();
        (0.5 * pe).clamp(0.0, 0.5)
    }

    pub fn report(&self) -> DensityFunctionalReport {
        DensityFunctionalReport {
            entropy: self.entropy(),
            battacharyya: self.battacharyya(),
            error_prob: self.error_prob(),
        }
    }

    /// Entropy computed through the magnitude representation; agrees with
    /// [`LDensity::entropy`] for symmetric densities.
    pub fn entropy_symmetric(&self) -> f64 {
        let g = self.grid;
        self.magnitudes()
            .iter()
            .enumerate()
            .map(|(i, &t)| t * pair_entropy(g.mag(i)))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// Largest violation of `m(-x) = e^{-x} m(x)` over the grid.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.grid.half();
        (1..=m)
            .map(|i| {
                let x = self.grid.mag(i);
                (self.bins[m - i] - (-x).exp() * self.bins[m + i]).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.symmetry_defect() <= tol
    }

    /// Projects onto the symmetric cone, keeping every pair total.
    pub fn symmetrize(&self) -> LDensity {
        LDensity::from_magnitudes(self.grid, &self.magnitudes(), self.atom_inf)
    }

    /// Max of the absolute differences in entropy, Battacharyya parameter and
    /// error probability.
    pub fn distance(&self, other: &LDensity) -> f64 {
        let a = self.report();
        let b = other.report();
        (a.entropy - b.entropy)
            .abs()
            .max((a.battacharyya - b.battacharyya).abs())
            .max((a.error_prob - b.error_prob).abs())
    }

    /// Convex combination `(1 - t) self + t other`.
    pub fn mix(&self, other: &LDensity, t: f64) -> LDensity {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let bins = self
            .bins
            .iter()
            .zip(&other.bins)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        LDensity::from_raw(self.grid, bins, (1.0 - t) * self.atom_inf + t * other.atom_inf)
    }

    /// Weighted mixture of densities on a common grid; weights must sum to one.
    pub fn mixture(parts: &[(f64, &LDensity)]) -> LDensity {
        let grid = parts[0].1.grid;
        let mut bins = vec![0.0; grid.n_bins];
        let mut atom = 0.0;
        for (w, d) in parts {
            assert_eq!(d.grid, grid, "grid mismatch");
            for (o, b) in bins.iter_mut().zip(&d.bins) {
                *o += w * b;
            }
            atom += w * d.atom_inf;
        }
        LDensity::from_raw(grid, bins, atom)
    }

    /// Variable-node convolution (LLR addition).
    pub fn var_convolve(&self, other: &LDensity) -> LDensity {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let atom = 1.0 - (1.0 - self.atom_inf) * (1.0 - other.atom_inf);
        if atom >= 1.0 {
            return LDensity::delta_inf(self.grid);
        }
        let full = linear_convolution(&self.bins, &other.bins);
        let bins = fold_linear(&full, self.grid);
        LDensity::from_raw(self.grid, bins, atom)
    }

    /// Check-node convolution: `z = 2 atanh(tanh(x/2) tanh(y/2))`.
    ///
    /// Computed on magnitudes with linear mass splitting; the sign is
    /// reconstructed from symmetry, so the inputs are assumed symmetric and the
    /// output is exactly symmetric.
    pub fn check_convolve(&self, other: &LDensity) -> LDensity {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let (mags, atom) = check_mags(
            self.grid,
            &self.magnitudes(),
            self.atom_inf,
            &other.magnitudes(),
            other.atom_inf,
        );
        LDensity::from_magnitudes(self.grid, &mags, atom)
    }

    /// `self^{⋆k}`; the zeroth power is `Δ0`.
    pub fn var_power(&self, k: usize) -> LDensity {
        match k {
            0 => LDensity::delta_zero(self.grid),
            1 => self.clone(),
            _ => {
                let half = self.var_power(k / 2);
                let sq = half.var_convolve(&half);
                if k % 2 == 1 {
                    sq.var_convolve(self)
                } else {
                    sq
                }
            }
        }
    }

    /// `self^{⊠k}`; the zeroth power is `Δ∞`.
    pub fn check_power(&self, k: usize) -> LDensity {
        match k {
            0 => LDensity::delta_inf(self.grid),
            1 => self.clone(),
            _ => {
                let half = self.check_power(k / 2);
                let sq = half.check_convolve(&half);
                if k % 2 == 1 {
                    sq.check_convolve(self)
                } else {
                    sq
                }
            }
        }
    }

    /// Physically degrades the density by passing the underlying bit through a
    /// further BSC(delta), i.e. `a ⊠ BSC(delta)` evaluated exactly in the
    /// magnitude domain.
    pub fn degrade_by_bsc(&self, delta: f64) -> Result<LDensity> {
        if !(0.0..=0.5).contains(&delta) {
            return Err(Error::ParameterOutOfRange(format!("delta = {delta}")));
        }
        if delta == 0.0 {
            return Ok(self.clone());
        }
        let g = self.grid;
        let m = g.half();
        let mags = self.magnitudes();
        let f = 1.0 - 2.0 * delta;
        let mut out = vec![0.0; m + 1];
        let place = |z: f64, p: f64, out: &mut Vec<f64>| {
            let (i, fr) = g.split_magnitude(z);
            out[i] += p * (1.0 - fr);
            if fr > 0.0 {
                out[i + 1] += p * fr;
            }
        };
        for (i, &t) in mags.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let x = g.mag(i);
            // 1 - f*tanh(x/2), written without cancellation
            let one_minus = 2.0 * delta + f * 2.0 / (1.0 + x.exp());
            let z = ((2.0 - one_minus) / one_minus).ln();
            place(z.min(x), t, &mut out);
        }
        if self.atom_inf > 0.0 {
            let z = ((1.0 - delta) / delta).ln();
            place(z, self.atom_inf, &mut out);
        }
        Ok(LDensity::from_magnitudes(g, &out, 0.0))
    }

    /// Change of variables to `s = |tanh(L/2)|`.
    pub fn to_abs_d(&self) -> AbsDensity {
        let g = self.grid;
        let mags = self.magnitudes();
        let s = (0..mags.len()).map(|i| (0.5 * g.mag(i)).tanh()).collect();
        AbsDensity { s, mass: mags, atom_one: self.atom_inf }
    }
}

/// Signed version of [`LDensity::from_magnitudes`] without clamping.
pub(crate) fn bins_from_magnitudes(grid: Grid, mags: &[f64]) -> Vec<f64> {
    let m = grid.half();
    assert_eq!(mags.len(), m + 1, "magnitude vector length");
    let mut bins = vec![0.0; grid.n_bins];
    bins[m] = mags[0];
    for i in 1..=m {
        let (p, n) = symmetric_split(mags[i], grid.mag(i));
        bins[m + i] = p;
        bins[m - i] = n;
    }
    bins
}

/// Splits a pair total `t` at magnitude `x > 0` into the masses at `+x`, `-x`.
fn symmetric_split(t: f64, x: f64) -> (f64, f64) {
    let e = (-x).exp();
    let p = t / (1.0 + e);
    (p, t * e / (1.0 + e))
}

/// Density of `|tanh(L/2)|` on `[0, 1]`: point masses at `s` plus an atom at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsDensity {
    pub s: Vec<f64>,
    pub mass: Vec<f64>,
    pub atom_one: f64,
}

impl AbsDensity {
    /// `∫ kernel(s) |a|(s) ds`.
    pub fn functional<F: Fn(f64) -> f64>(&self, kernel: F) -> f64 {
        let mut acc: f64 = self
            .s
            .iter()
            .zip(&self.mass)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&s, &p)| p * kernel(s))
            .sum();
        if self.atom_one > 0.0 {
            acc += self.atom_one * kernel(1.0);
        }
        acc
    }

    /// Same as [`AbsDensity::functional`] with kernel values precomputed on `s`
    /// and the value at `s = 1` given separately.
    pub fn functional_table(&self, table: &[f64], at_one: f64) -> f64 {
        assert_eq!(table.len(), self.s.len());
        self.mass.iter().zip(table).map(|(p, k)| p * k).sum::<f64>() + self.atom_one * at_one
    }
}

/// `λ(a) = Σ λ_i a^{⋆(i-1)}` with `lambda[i]` the edge fraction of degree `i`.
pub fn lambda_of(a: &LDensity, lambda: &[f64]) -> LDensity {
    var_poly(a, lambda, 1)
}

/// `ρ(a) = Σ ρ_i a^{⊠(i-1)}` with `rho[i]` the edge fraction of degree `i`.
pub fn rho_of(a: &LDensity, rho: &[f64]) -> LDensity {
    check_poly(a, rho, 1)
}

/// `Σ coef[i] a^{⋆(i - offset)}` for `i >= offset`.
pub fn var_poly(a: &LDensity, coef: &[f64], offset: usize) -> LDensity {
    let grid = a.grid;
    let mut parts: Vec<(f64, LDensity)> = Vec::new();
    let mut power = LDensity::delta_zero(grid);
    let mut current = 0usize;
    for (i, &c) in coef.iter().enumerate() {
        if i < offset || c == 0.0 {
            continue;
        }
        let e = i - offset;
        while current < e {
            power = if current == 0 { a.clone() } else { power.var_convolve(a) };
            current += 1;
        }
        parts.push((c, power.clone()));
    }
    if parts.is_empty() {
        return LDensity::delta_zero(grid);
    }
    let refs: Vec<(f64, &LDensity)> = parts.iter().map(|(w, d)| (*w, d)).collect();
    LDensity::mixture(&refs)
}

/// `Σ coef[i] a^{⊠(i - offset)}` for `i >= offset`, computed on magnitudes with
/// memoized square-and-multiply powers.
pub fn check_poly(a: &LDensity, coef: &[f64], offset: usize) -> LDensity {
    let grid = a.grid;
    let needed: Vec<(usize, f64)> = coef
        .iter()
        .enumerate()
        .filter(|(i, &c)| *i >= offset && c != 0.0)
        .map(|(i, &c)| (i - offset, c))
        .collect();
    if needed.is_empty() {
        return LDensity::delta_inf(grid);
    }
    let base = (a.magnitudes(), a.atom_inf);
    let mut memo: std::collections::BTreeMap<usize, (Vec<f64>, f64)> = Default::default();
    memo.insert(1, base);
    let mut mags = vec![0.0; grid.half() + 1];
    let mut atom = 0.0;
    for (e, c) in needed {
        let (pm, pa) = mag_power(grid, e, &mut memo);
        for (o, v) in mags.iter_mut().zip(&pm) {
            *o += c * v;
        }
        atom += c * pa;
    }
    LDensity::from_magnitudes(grid, &mags, atom)
}

fn mag_power(
    grid: Grid,
    e: usize,
    memo: &mut std::collections::BTreeMap<usize, (Vec<f64>, f64)>,
) -> (Vec<f64>, f64) {
    if e == 0 {
        return (vec![0.0; grid.half() + 1], 1.0);
    }
    if let Some(v) = memo.get(&e) {
        return v.clone();
    }
    let half = mag_power(grid, e / 2, memo);
    let mut r = check_mags(grid, &half.0, half.1, &half.0, half.1);
    if e % 2 == 1 {
        let one = memo[&1].clone();
        r = check_mags(grid, &r.0, r.1, &one.0, one.1);
    }
    memo.insert(e, r.clone());
    r
}

struct CheckTable {
    row_start: Vec<usize>,
    idx: Vec<u32>,
    frac: Vec<f64>,
}

impl CheckTable {
    fn build(grid: Grid) -> CheckTable {
        let m = grid.half();
        let step = grid.step();
        let u: Vec<f64> = (0..=m).map(|i| 2.0 / (1.0 + grid.mag(i).exp())).collect();
        let total = (m + 1) * (m + 2) / 2;
        let mut row_start = Vec::with_capacity(m + 2);
        let mut idx = Vec::with_capacity(total);
        let mut frac = Vec::with_capacity(total);
        for i in 0..=m {
            row_start.push(idx.len());
            for j in i..=m {
                // 1 - tanh(x/2) tanh(y/2) = u + v - uv
                let q = u[i] + u[j] - u[i] * u[j];
                let z = ((2.0 - q) / q).ln().clamp(0.0, grid.mag(i));
                let t = z / step;
                let mut k = t.floor() as usize;
                let mut f = t - k as f64;
                if k >= i {
                    k = i;
                    f = 0.0;
                }
                idx.push(k as u32);
                frac.push(f);
            }
        }
        row_start.push(idx.len());
        CheckTable { row_start, idx, frac }
    }
}

fn check_table(grid: Grid) -> Arc<CheckTable> {
    static TABLES: OnceLock<Mutex<Vec<(Grid, Arc<CheckTable>)>>> = OnceLock::new();
    let cache = TABLES.get_or_init(|| Mutex::new(Vec::new()));
    {
        let guard = cache.lock().expect("check table cache poisoned");
        if let Some((_, t)) = guard.iter().find(|(g, _)| *g == grid) {
            return Arc::clone(t);
        }
    }
    let table = Arc::new(CheckTable::build(grid));
    let mut guard = cache.lock().expect("check table cache poisoned");
    if let Some((_, t)) = guard.iter().find(|(g, _)| *g == grid) {
        return Arc::clone(t);
    }
    guard.push((grid, Arc::clone(&table)));
    table
}

/// Check-node combination of two magnitude distributions.
fn check_mags(grid: Grid, ta: &[f64], aa: f64, tb: &[f64], ab: f64) -> (Vec<f64>, f64) {
    let m = grid.half();
    let table = check_table(grid);
    let mut out = vec![0.0; m + 1];
    for i in 0..=m {
        out[i] += aa * tb[i] + ab * ta[i];
    }
    for i in 0..=m {
        let (ai, bi) = (ta[i], tb[i]);
        if ai == 0.0 && bi == 0.0 {
            continue;
        }
        let start = table.row_start[i];
        let idx = &table.idx[start..table.row_start[i + 1]];
        let frac = &table.frac[start..table.row_start[i + 1]];
        let w0 = ai * bi;
        if w0 != 0.0 {
            let k = idx[0] as usize;
            let f = frac[0];
            out[k] += w0 * (1.0 - f);
            if f > 0.0 {
                out[k + 1] += w0 * f;
            }
        }
        for (off, j) in (i + 1..=m).enumerate() {
            let w = ai * tb[j] + bi * ta[j];
            if w == 0.0 {
                continue;
            }
            let k = idx[off + 1] as usize;
            let f = frac[off + 1];
            out[k] += w * (1.0 - f);
            out[k + 1] += w * f;
        }
    }
    (out, aa * ab)
}

fn nonzero_count(v: &[f64]) -> usize {
    v.iter().filter(|&&x| x != 0.0).count()
}

/// Full linear convolution (length `a.len() + b.len() - 1`).
pub(crate) fn linear_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    if nonzero_count(a).min(nonzero_count(b)) <= SPARSE_CUTOFF {
        let mut out = vec![0.0; out_len];
        let nz_a: Vec<(usize, f64)> =
            a.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect();
        let nz_b: Vec<(usize, f64)> =
            b.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect();
        for &(i, x) in &nz_a {
            for &(j, y) in &nz_b {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let size = out_len.next_power_of_two();
    let (fwd, inv) = fft_plans(size);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(size, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fb.resize(size, Complex::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.iter().take(out_len).map(|c| c.re * scale).collect()
}

type FftPair = (Arc<dyn rustfft::Fft<f64>>, Arc<dyn rustfft::Fft<f64>>);

fn fft_plans(size: usize) -> FftPair {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let planner = PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()));
    let mut p = planner.lock().expect("fft planner poisoned");
    (p.plan_fft_forward(size), p.plan_fft_inverse(size))
}

/// Maps a full linear convolution back onto the grid, folding the tails onto
/// the boundary bins.
fn fold_linear(full: &[f64], grid: Grid) -> Vec<f64> {
    let m = grid.half();
    let n = grid.n_bins;
    let mut out = vec![0.0; n];
    out[0] = full[..=m].iter().sum();
    out[1..(n - 1)].copy_from_slice(&full[(m + 1)..(m + n - 1)]);
    out[n - 1] = full[(3 * m)..].iter().sum();
    out
}
