//! Small binary linear codes: exact extrinsic MAP densities, EXIT/GEXIT and
//! dual GEXIT curves, and a Tanner-graph BP decoder for MAP-vs-BP
//! comparisons.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{h2, h2_inv, sigma_from_entropy, ChannelKind};
use crate::curve::{Curve, CurveRole};
use crate::density::{Grid, LDensity};
use crate::error::{Error, Result};
use crate::kernels::{exit_kernel, GexitKernel};
use crate::quad::{norm_cdf, norm_sf};

/// Largest block length accepted by [`LinearCode`].
pub const MAX_N: usize = 32;
/// Largest block length for exhaustive enumeration.
pub const MAX_ENUM_N: usize = 22;
/// Largest dimension for exhaustive enumeration.
pub const MAX_ENUM_K: usize = 20;
/// Budget on `n 2^(n-1+k)` elementary steps of the exact BSC enumeration.
pub const ENUM_BUDGET: u128 = 1 << 32;

/// Binary linear code given by a full-rank generator matrix. Rows are stored
/// as bit masks, bit `j` being column `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearCode {
    name: String,
    n: usize,
    gen: Vec<u32>,
}

fn mask_of(row: &[u8]) -> u32 {
    row.iter().enumerate().fold(0, |m, (j, &b)| m | ((b as u32 & 1) << j))
}

/// Reduced row echelon form; returns the nonzero rows and pivot columns.
fn rref(rows: &[u32], n: usize) -> (Vec<u32>, Vec<usize>) {
    let mut m: Vec<u32> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let bit = 1u32 << col;
        let Some(p) = (r..m.len()).find(|&i| m[i] & bit != 0) else { continue };
        m.swap(r, p);
        for i in 0..m.len() {
            if i != r && m[i] & bit != 0 {
                m[i] ^= m[r];
            }
        }
        pivots.push(col);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

/// Basis of the orthogonal complement of the row space of `rows`.
fn orthogonal_complement(rows: &[u32], n: usize) -> Vec<u32> {
    let (r, pivots) = rref(rows, n);
    let mut out = Vec::new();
    for j in (0..n).filter(|j| !pivots.contains(j)) {
        let mut h = 1u32 << j;
        for (row, &p) in r.iter().zip(&pivots) {
            if row >> j & 1 == 1 {
                h |= 1 << p;
            }
        }
        out.push(h);
    }
    out
}

fn parse_rows(text: &str) -> Result<Vec<Vec<u8>>> {
    let rows: Vec<Vec<u8>> = text
        .split(|c| c == ';' || c == '\n' || c == ',')
        .map(|r| r.trim())
        .filter(|r| !r.is_empty() && !r.starts_with('#'))
        .map(|r| {
            r.chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(Error::Parse(format!("invalid matrix entry {c:?}"))),
                })
                .collect::<Result<Vec<u8>>>()
        })
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix".into()));
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::Parse("matrix rows have different lengths".into()));
    }
    Ok(rows)
}

impl LinearCode {
    /// Builds a code from generator rows; rejects dependent rows and zero
    /// columns.
    pub fn from_generator(name: &str, rows: &[Vec<u8>]) -> Result<LinearCode> {
        let n = rows.first().map_or(0, |r| r.len());
        if n == 0 || n > MAX_N {
            return Err(Error::InvalidCode(format!("block length {n} not in 1..={MAX_N}")));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidCode("generator rows have different lengths".into()));
        }
        let gen: Vec<u32> = rows.iter().map(|r| mask_of(r)).collect();
        let (r, _) = rref(&gen, n);
        if r.len() != gen.len() {
            return Err(Error::InvalidCode("generator rows are linearly dependent".into()));
        }
        let support = gen.iter().fold(0u32, |a, &g| a | g);
        if let Some(j) = (0..n).find(|&j| support >> j & 1 == 0) {
            return Err(Error::InvalidCode(format!("not proper: column {j} of the generator is zero")));
        }
        Ok(LinearCode { name: name.to_string(), n, gen })
    }

    /// Builds the code with the given parity-check rows.
    pub fn from_parity_check(name: &str, rows: &[Vec<u8>]) -> Result<LinearCode> {
        let n = rows.first().map_or(0, |r| r.len());
        if n == 0 || n > MAX_N {
            return Err(Error::InvalidCode(format!("block length {n} not in 1..={MAX_N}")));
        }
        let h: Vec<u32> = rows.iter().map(|r| mask_of(r)).collect();
        let g = orthogonal_complement(&h, n);
        if g.is_empty() {
            return Err(Error::InvalidCode("parity-check matrix has full rank; code is {0}".into()));
        }
        let rows: Vec<Vec<u8>> = g.iter().map(|&m| (0..n).map(|j| (m >> j & 1) as u8).collect()).collect();
        LinearCode::from_generator(name, &rows)
    }

    pub fn repetition(n: usize) -> Result<LinearCode> {
        LinearCode::from_generator(&format!("rep:{n}"), &[vec![1; n]])
    }

    pub fn single_parity_check(n: usize) -> Result<LinearCode> {
        if n < 2 {
            return Err(Error::InvalidCode("single parity-check code needs n >= 2".into()));
        }
        let rows: Vec<Vec<u8>> =
            (0..n - 1).map(|i| (0..n).map(|j| u8::from(j == i || j == n - 1)).collect()).collect();
        LinearCode::from_generator(&format!("spc:{n}"), &rows)
    }

    pub fn hamming74() -> LinearCode {
        let rows = parse_rows("1000011;0100101;0010110;0001111").expect("static matrix");
        LinearCode::from_generator("hamming74", &rows).expect("static code")
    }

    pub fn simplex73() -> LinearCode {
        let rows = parse_rows("0001111;0110011;1010101").expect("static matrix");
        LinearCode::from_generator("simplex73", &rows).expect("static code")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.gen.len()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    pub fn generator_rows(&self) -> Vec<Vec<u8>> {
        self.gen.iter().map(|&m| (0..self.n).map(|j| (m >> j & 1) as u8).collect()).collect()
    }

    /// Parity-check rows as bit masks (`n - k` rows).
    pub fn parity_check_masks(&self) -> Vec<u32> {
        orthogonal_complement(&self.gen, self.n)
    }

    pub fn parity_check_rows(&self) -> Vec<Vec<u8>> {
        self.parity_check_masks().iter().map(|&m| (0..self.n).map(|j| (m >> j & 1) as u8).collect()).collect()
    }

    /// All `2^k` codewords as bit masks.
    pub fn codewords(&self) -> Result<Vec<u32>> {
        if self.k() > MAX_ENUM_K {
            return Err(Error::BudgetExceeded(format!("k = {} > {MAX_ENUM_K}", self.k())));
        }
        let mut words = vec![0u32; 1 << self.k()];
        for (r, &g) in self.gen.iter().enumerate() {
            let half = 1usize << r;
            for i in 0..half {
                words[half + i] = words[i] ^ g;
            }
        }
        Ok(words)
    }

    pub fn tanner_graph(&self) -> TannerGraph {
        TannerGraph::from_parity_masks(self.n, &self.parity_check_masks())
    }
}

impl fmt::Display for LinearCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for LinearCode {
    type Err = Error;

    /// Built-ins `rep:n`, `spc:n`, `hamming74`, `simplex73`, `code:5_4_2`,
    /// or matrices `gen:<rows>` / `parity:<rows>` with rows of 0/1 separated
    /// by `;`, `,` or newlines. A bare matrix is read as a generator.
    fn from_str(s: &str) -> Result<LinearCode> {
        let t = s.trim();
        let num = |v: &str| -> Result<usize> {
            v.trim().parse().map_err(|_| Error::Parse(format!("bad block length in {t:?}")))
        };
        if let Some(v) = t.strip_prefix("rep:") {
            return LinearCode::repetition(num(v)?);
        }
        if let Some(v) = t.strip_prefix("spc:") {
            return LinearCode::single_parity_check(num(v)?);
        }
        if let Some(v) = t.strip_prefix("gen:") {
            return LinearCode::from_generator("gen", &parse_rows(v)?);
        }
        if let Some(v) = t.strip_prefix("parity:") {
            return LinearCode::from_parity_check("parity", &parse_rows(v)?);
        }
        match t {
            "hamming74" => Ok(LinearCode::hamming74()),
            "simplex73" => Ok(LinearCode::simplex73()),
            "code:5_4_2" => {
                let mut c = LinearCode::single_parity_check(5)?;
                c.name = "code:5_4_2".into();
                Ok(c)
            }
            _ if t.starts_with(['0', '1']) => LinearCode::from_generator("gen", &parse_rows(t)?),
            _ => Err(Error::Parse(format!("unknown code {t:?}"))),
        }
    }
}

/// Discrete extrinsic density: `(llr, probability)` atoms, `llr` possibly
/// `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDensity {
    pub atoms: Vec<(f64, f64)>,
}

impl ExactDensity {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn entropy(&self) -> f64 {
        self.atoms.iter().map(|&(l, p)| p * exit_kernel(l)).sum()
    }

    /// `Σ p κ(|l|)` for a |D|-domain kernel given at LLR magnitudes.
    pub fn functional<F: Fn(f64) -> f64>(&self, kernel_at_llr: F) -> f64 {
        self.atoms.iter().map(|&(l, p)| p * kernel_at_llr(l.abs())).sum()
    }

    pub fn gexit(&self, kind: ChannelKind, h: f64) -> Result<f64> {
        let k = GexitKernel::new(kind, h)?;
        Ok(self.functional(|x| k.abs_d_at_llr(x)))
    }

    /// `H(c ⋆ a)` for another discrete density `c`.
    pub fn entropy_convolved(&self, c: &ExactDensity) -> f64 {
        let mut acc = 0.0;
        for &(l, p) in &self.atoms {
            for &(m, q) in &c.atoms {
                acc += p * q * exit_kernel(l + m);
            }
        }
        acc
    }

    pub fn to_ldensity(&self, grid: Grid) -> Result<LDensity> {
        LDensity::from_llr_masses(grid, &self.atoms)
    }
}

/// Channel L-density atoms of a discrete channel.
pub fn channel_atoms(kind: ChannelKind, h: f64) -> Result<ExactDensity> {
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::ParameterOutOfRange(format!("h = {h} not in [0, 1]")));
    }
    match kind {
        ChannelKind::Bec => Ok(ExactDensity { atoms: vec![(0.0, h), (f64::INFINITY, 1.0 - h)] }),
        ChannelKind::Bsc => {
            let e = h2_inv(h);
            if e <= 0.0 {
                return Ok(ExactDensity { atoms: vec![(f64::INFINITY, 1.0)] });
            }
            let l = ((1.0 - e) / e).ln();
            Ok(ExactDensity { atoms: vec![(l, 1.0 - e), (-l, e)] })
        }
        ChannelKind::Bawgn => Err(Error::InvalidArgument("BAWGN has no discrete representation".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ProfileKey {
    weight: u32,
    d0: Vec<u32>,
    d1: Vec<u32>,
}

/// Exhaustive-enumeration tables of one bit, independent of the channel
/// parameter.
#[derive(Debug, Clone, PartialEq)]
struct BitTables {
    /// Number of erasure patterns of each weight on the other bits that
    /// leave the bit undetermined.
    bec_undetermined: Vec<u64>,
    /// Classes of BSC error patterns on the other bits with identical
    /// distance profiles: `(weight, multiplicity, d0, d1)` where `d0[d]`
    /// (`d1[d]`) counts codewords with the bit equal to 0 (1) at distance `d`.
    bsc_classes: Vec<(u32, u64, Vec<u32>, Vec<u32>)>,
}

/// Channel-independent enumeration tables of a code.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeEnumeration {
    n: usize,
    bits: Vec<BitTables>,
}

/// Drops bit `i` from a mask, compacting the higher bits.
fn squeeze(mask: u32, i: usize) -> u32 {
    let low = mask & ((1u32 << i) - 1);
    let high = (mask >> (i + 1)) << i;
    low | high
}

impl CodeEnumeration {
    pub fn new(code: &LinearCode) -> Result<CodeEnumeration> {
        let n = code.n();
        let k = code.k();
        if n > MAX_ENUM_N || k > MAX_ENUM_K {
            return Err(Error::BudgetExceeded(format!(
                "exact enumeration needs n <= {MAX_ENUM_N}, k <= {MAX_ENUM_K} (got n = {n}, k = {k})"
            )));
        }
        let cost = (n as u128) << (n - 1 + k);
        if cost > ENUM_BUDGET {
            return Err(Error::BudgetExceeded(format!("{cost} enumeration steps exceed {ENUM_BUDGET}")));
        }
        let words = code.codewords()?;
        let bits = (0..n).into_par_iter().map(|i| bit_tables(n, i, &words)).collect();
        Ok(CodeEnumeration { n, bits })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Exact extrinsic density of bit `i` for a discrete channel.
    pub fn extrinsic(&self, i: usize, kind: ChannelKind, h: f64) -> Result<ExactDensity> {
        if i >= self.n {
            return Err(Error::InvalidArgument(format!("bit {i} out of range")));
        }
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::ParameterOutOfRange(format!("h = {h} not in [0, 1]")));
        }
        let t = &self.bits[i];
        let m = (self.n - 1) as i32;
        match kind {
            ChannelKind::Bec => {
                let p: f64 = t
                    .bec_undetermined
                    .iter()
                    .enumerate()
                    .map(|(w, &c)| c as f64 * h.powi(w as i32) * (1.0 - h).powi(m - w as i32))
                    .sum();
                let p = p.clamp(0.0, 1.0);
                Ok(ExactDensity { atoms: vec![(0.0, p), (f64::INFINITY, 1.0 - p)] })
            }
            ChannelKind::Bsc => {
                let e = h2_inv(h).clamp(1e-300, 0.5);
                let ln_r = (e / (1.0 - e)).ln();
                let lse = |d: &[u32]| -> f64 {
                    let terms: Vec<f64> = d
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c > 0)
                        .map(|(j, &c)| (c as f64).ln() + j as f64 * ln_r)
                        .collect();
                    let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if mx == f64::NEG_INFINITY {
                        return mx;
                    }
                    mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
                };
                let atoms = t
                    .bsc_classes
                    .iter()
                    .map(|(w, mult, d0, d1)| {
                        let p = *mult as f64 * e.powi(*w as i32) * (1.0 - e).powi(m - *w as i32);
                        (lse(d0) - lse(d1), p)
                    })
                    .filter(|a| a.1 > 0.0)
                    .collect();
                Ok(ExactDensity { atoms })
            }
            ChannelKind::Bawgn => {
                Err(Error::InvalidArgument("exact mode needs a discrete channel (BEC or BSC)".into()))
            }
        }
    }
}

fn bit_tables(n: usize, i: usize, words: &[u32]) -> BitTables {
    let m = n - 1;
    let size = 1usize << m;
    let bit = 1u32 << i;
    // BEC: erasure sets E (on the other bits) leaving bit i undetermined are
    // the supersets of supp(c) \ {i} for codewords with c_i = 1.
    let mut und = vec![false; size];
    for &c in words.iter().filter(|&&c| c & bit != 0) {
        und[squeeze(c, i) as usize] = true;
    }
    for b in 0..m {
        for s in 0..size {
            if s >> b & 1 == 1 && und[s ^ (1 << b)] {
                und[s] = true;
            }
        }
    }
    let mut bec = vec![0u64; n];
    for (s, &u) in und.iter().enumerate() {
        if u {
            bec[s.count_ones() as usize] += 1;
        }
    }
    // BSC: distance profiles per error pattern.
    let mut classes: HashMap<ProfileKey, u64> = HashMap::new();
    let squeezed: Vec<(bool, u32)> = words.iter().map(|&c| (c & bit != 0, squeeze(c, i))).collect();
    for e in 0..size as u32 {
        let mut d0 = vec![0u32; n];
        let mut d1 = vec![0u32; n];
        for &(one, c) in &squeezed {
            let d = (e ^ c).count_ones() as usize;
            if one {
                d1[d] += 1;
            } else {
                d0[d] += 1;
            }
        }
        *classes.entry(ProfileKey { weight: e.count_ones(), d0, d1 }).or_insert(0) += 1;
    }
    let mut bsc: Vec<(u32, u64, Vec<u32>, Vec<u32>)> =
        classes.into_iter().map(|(k, c)| (k.weight, c, k.d0, k.d1)).collect();
    bsc.sort_by(|a, b| (a.0, &a.2, &a.3).cmp(&(b.0, &b.2, &b.3)));
    BitTables { bec_undetermined: bec, bsc_classes: bsc }
}

/// How extrinsic MAP densities are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl MapMode {
    pub fn default_monte_carlo() -> MapMode {
        MapMode::MonteCarlo { samples: 1_000_000, seed: 1 }
    }
}

/// Mean and standard error of a Monte Carlo estimate (`std_err = 0` for
/// exact values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

const MC_CHUNK: usize = 4096;

/// Channel LLR sampler for the codeword `x` (bit masks; bit 1 maps to `-1`).
fn sample_llrs(kind: ChannelKind, param: f64, x: u32, n: usize, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate().take(n) {
        let s = if x >> j & 1 == 1 { -1.0 } else { 1.0 };
        *o = match kind {
            ChannelKind::Bsc => {
                let flip = rng.random::<f64>() < param;
                let l = ((1.0 - param) / param).ln();
                if flip {
                    -s * l
                } else {
                    s * l
                }
            }
            ChannelKind::Bawgn => {
                let z: f64 = rng.sample(StandardNormal);
                2.0 / (param * param) * (s + param * z)
            }
            ChannelKind::Bec => {
                if rng.random::<f64>() < param {
                    0.0
                } else {
                    s * f64::INFINITY
                }
            }
        };
    }
}

fn log_sum_exp(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + v.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
}

/// Extrinsic MAP LLRs of every bit: `Φ_i = posterior LLR - l_i`, computed by
/// enumerating the codewords. Requires finite LLRs.
pub fn map_extrinsic(words: &[u32], n: usize, llr: &[f64]) -> Vec<f64> {
    let scores: Vec<f64> = words
        .iter()
        .map(|&c| (0..n).map(|j| if c >> j & 1 == 1 { -llr[j] } else { llr[j] }).sum::<f64>() / 2.0)
        .collect();
    (0..n)
        .map(|i| {
            let l0 = log_sum_exp(words.iter().zip(&scores).filter(|(c, _)| *c >> i & 1 == 0).map(|(_, s)| *s));
            let l1 = log_sum_exp(words.iter().zip(&scores).filter(|(c, _)| *c >> i & 1 == 1).map(|(_, s)| *s));
            l0 - l1 - llr[i]
        })
        .collect()
}

/// Channel parameter used by the samplers: crossover probability, noise
/// standard deviation or erasure probability.
fn sampler_param(kind: ChannelKind, h: f64) -> Result<f64> {
    match kind {
        ChannelKind::Bsc => Ok(h2_inv(h)),
        ChannelKind::Bawgn => sigma_from_entropy(h),
        ChannelKind::Bec => Ok(h),
    }
}

/// Monte Carlo samples of `Φ_i` for every bit, mapped to the all-one frame.
/// With `random_codeword` the transmitted codeword is drawn uniformly.
pub fn extrinsic_samples(
    code: &LinearCode,
    kind: ChannelKind,
    h: f64,
    samples: usize,
    seed: u64,
    random_codeword: bool,
) -> Result<Vec<Vec<f64>>> {
    if kind == ChannelKind::Bec {
        return Err(Error::InvalidArgument("Monte Carlo mode needs a channel with finite LLRs".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("sample budget must be positive".into()));
    }
    if !(0.0..1.0).contains(&h) || h == 0.0 {
        return Err(Error::ParameterOutOfRange(format!("h = {h} must lie in (0, 1)")));
    }
    let n = code.n();
    let words = code.codewords()?;
    let param = sampler_param(kind, h)?;
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<Vec<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci as u64);
            let count = MC_CHUNK.min(samples - ci * MC_CHUNK);
            let mut llr = vec![0.0; n];
            let mut out = vec![Vec::with_capacity(count); n];
            for _ in 0..count {
                let x = if random_codeword { words[rng.random_range(0..words.len())] } else { 0 };
                sample_llrs(kind, param, x, n, &mut rng, &mut llr);
                let phi = map_extrinsic(&words, n, &llr);
                for (i, p) in phi.into_iter().enumerate() {
                    let s = if x >> i & 1 == 1 { -1.0 } else { 1.0 };
                    out[i].push(s * p);
                }
            }
            out
        })
        .collect();
    let mut merged = vec![Vec::with_capacity(samples); n];
    for part in parts {
        for (m, p) in merged.iter_mut().zip(part) {
            m.extend(p);
        }
    }
    Ok(merged)
}

fn mean_and_err(v: &[f64]) -> Estimate {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Estimate { value: mean, std_err: (var / n).sqrt() }
}

/// Number of uniform |D| cells used to histogram Monte Carlo samples.
pub const ABS_D_CELLS: usize = 4096;

/// Symmetric L-density from LLR samples: histogram of `|tanh(Φ/2)|` on
/// uniform cells, lifted to grid magnitudes.
pub fn density_from_samples(grid: Grid, samples: &[f64]) -> Result<LDensity> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut cells = vec![0u64; ABS_D_CELLS];
    let mut ones = 0u64;
    for &phi in samples {
        let s = (phi.abs() / 2.0).tanh();
        if s >= 1.0 {
            ones += 1;
        } else {
            cells[((s * ABS_D_CELLS as f64) as usize).min(ABS_D_CELLS - 1)] += 1;
        }
    }
    let total = samples.len() as f64;
    let mut mags = vec![0.0; grid.half() + 1];
    for (c, &cnt) in cells.iter().enumerate() {
        if cnt == 0 {
            continue;
        }
        let s = (c as f64 + 0.5) / ABS_D_CELLS as f64;
        let x = 2.0 * s.atanh();
        let (i, f) = grid.split_magnitude(x);
        let p = cnt as f64 / total;
        mags[i] += p * (1.0 - f);
        if f > 0.0 {
            mags[i + 1] += p * f;
        }
    }
    Ok(LDensity::from_magnitudes(grid, &mags, ones as f64 / total))
}

/// Density of the extrinsic MAP LLR `Φ_i` of bit `i` under the all-one
/// codeword.
pub fn extrinsic_map_density(
    code: &LinearCode,
    i: usize,
    kind: ChannelKind,
    h: f64,
    mode: MapMode,
    grid: Grid,
) -> Result<LDensity> {
    match mode {
        MapMode::Exact => CodeEnumeration::new(code)?.extrinsic(i, kind, h)?.to_ldensity(grid),
        MapMode::MonteCarlo { samples, seed } => {
            if i >= code.n() {
                return Err(Error::InvalidArgument(format!("bit {i} out of range")));
            }
            let s = extrinsic_samples(code, kind, h, samples, seed, false)?;
            density_from_samples(grid, &s[i])
        }
    }
}

/// Per-bit averaged EXIT and GEXIT values at one channel entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodePoint {
    pub h: f64,
    pub exit: Estimate,
    pub gexit: Estimate,
}

/// EXIT and GEXIT values of `code` on an `h`-grid.
pub fn code_points(code: &LinearCode, kind: ChannelKind, hs: &[f64], mode: MapMode) -> Result<Vec<CodePoint>> {
    match mode {
        MapMode::Exact => {
            let en = CodeEnumeration::new(code)?;
            hs.iter()
                .map(|&h| {
                    let kern = GexitKernel::new(kind, h)?;
                    let (mut ex, mut gx) = (0.0, 0.0);
                    for i in 0..code.n() {
                        let a = en.extrinsic(i, kind, h)?;
                        ex += a.entropy();
                        gx += a.functional(|x| kern.abs_d_at_llr(x));
                    }
                    let n = code.n() as f64;
                    Ok(CodePoint {
                        h,
                        exit: Estimate { value: ex / n, std_err: 0.0 },
                        gexit: Estimate { value: gx / n, std_err: 0.0 },
                    })
                })
                .collect()
        }
        MapMode::MonteCarlo { samples, seed } => hs
            .iter()
            .map(|&h| {
                if h == 0.0 || h == 1.0 {
                    let v = h;
                    return Ok(CodePoint {
                        h,
                        exit: Estimate { value: v, std_err: 0.0 },
                        gexit: Estimate { value: v, std_err: 0.0 },
                    });
                }
                let kern = GexitKernel::new(kind, h)?;
                let s = extrinsic_samples(code, kind, h, samples, seed, false)?;
                let n = code.n() as f64;
                let per_sample = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
                    (0..samples).map(|t| s.iter().map(|b| f(b[t])).sum::<f64>() / n).collect()
                };
                let ex = per_sample(&|p| exit_kernel(p));
                let gx = per_sample(&|p| kern.abs_d_at_llr(p));
                Ok(CodePoint { h, exit: mean_and_err(&ex), gexit: mean_and_err(&gx) })
            })
            .collect(),
    }
}

/// EXIT curve `{h, (1/n) Σ H(X_i | Y_~i)}`.
pub fn exit_curve(code: &LinearCode, kind: ChannelKind, hs: &[f64], mode: MapMode) -> Result<Curve> {
    let pts = code_points(code, kind, hs, mode)?;
    Ok(Curve::new(CurveRole::Exit, pts.iter().map(|p| (p.h, p.exit.value)).collect()))
}

/// GEXIT curve `{h, (1/n) Σ G(c_h, a_i)}`.
pub fn gexit_curve(code: &LinearCode, kind: ChannelKind, hs: &[f64], mode: MapMode) -> Result<Curve> {
    let pts = code_points(code, kind, hs, mode)?;
    Ok(Curve::new(CurveRole::Gexit, pts.iter().map(|p| (p.h, p.gexit.value)).collect()))
}

/// Analytic BSC GEXIT of the repetition or single parity-check code of
/// length `n` at crossover `eps`, returned as `(h2(eps), value)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnalyticCode {
    Repetition,
    SingleParityCheck,
}

pub fn analytic_gexit_bsc(kind: AnalyticCode, n: usize, eps: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::ParameterOutOfRange(format!("eps = {eps} not in [0, 1/2]")));
    }
    let h = h2(eps);
    if eps == 0.0 {
        return Ok((0.0, 0.0));
    }
    if eps == 0.5 {
        return Ok((1.0, 1.0));
    }
    let eb = 1.0 - eps;
    let a = (eb / eps).ln();
    let v = match kind {
        AnalyticCode::Repetition => {
            // G(c, c^{⋆(n-1)}): binomial sum over the n - 1 other observations
            let m = n - 1;
            let ln_r = (eps / eb).ln();
            let mut s = 0.0;
            for j in [1.0f64, -1.0] {
                for i in 0..=m {
                    let w = binom(m, i) * eps.powi(i as i32) * eb.powi((m - i) as i32);
                    let expo = m as f64 - 2.0 * i as f64 - j;
                    s += j * w * softplus(expo * ln_r);
                }
            }
            s / a
        }
        AnalyticCode::SingleParityCheck => {
            let t = 1.0 - 2.0 * eps;
            let tn = t.powi(n as i32);
            1.0 - t.powi(n as i32 - 1) * ((1.0 + tn) / (1.0 - tn)).ln() / a
        }
    };
    Ok((h, v))
}

fn softplus(y: f64) -> f64 {
    y.max(0.0) + (-y.abs()).exp().ln_1p()
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Dual GEXIT curve `{G(a_h, c_h), H(a_h)}` (per-bit averaged), from exact
/// enumeration with central differences of width `dh` in `h`. The endpoints
/// `(0, 0)` and `(1, 1)` are added.
pub fn dual_gexit_curve(code: &LinearCode, kind: ChannelKind, hs: &[f64], dh: f64) -> Result<Curve> {
    if kind == ChannelKind::Bawgn {
        return Err(Error::InvalidArgument("dual GEXIT needs exact enumeration (BEC or BSC)".into()));
    }
    let en = CodeEnumeration::new(code)?;
    let n = code.n();
    let mut pts = vec![(0.0, 0.0)];
    for &h in hs {
        if h - dh <= 0.0 || h + dh >= 1.0 {
            continue;
        }
        let c = channel_atoms(kind, h)?;
        let (mut num, mut den, mut ent) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let lo = en.extrinsic(i, kind, h - dh)?;
            let hi = en.extrinsic(i, kind, h + dh)?;
            num += hi.entropy_convolved(&c) - lo.entropy_convolved(&c);
            den += hi.entropy() - lo.entropy();
            ent += en.extrinsic(i, kind, h)?.entropy();
        }
        if den.abs() < 1e-300 {
            continue;
        }
        pts.push((num / den, ent / n as f64));
    }
    pts.push((1.0, 1.0));
    Ok(Curve::new(CurveRole::Dual, pts))
}

/// Tanner graph of a parity-check matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TannerGraph {
    n: usize,
    checks: Vec<Vec<usize>>,
    var_checks: Vec<Vec<usize>>,
}

impl TannerGraph {
    pub fn from_parity_masks(n: usize, rows: &[u32]) -> TannerGraph {
        let checks: Vec<Vec<usize>> = rows.iter().map(|&r| (0..n).filter(|&j| r >> j & 1 == 1).collect()).collect();
        let mut var_checks = vec![Vec::new(); n];
        for (c, vs) in checks.iter().enumerate() {
            for &v in vs {
                var_checks[v].push(c);
            }
        }
        TannerGraph { n, checks, var_checks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    pub fn var_checks(&self) -> &[Vec<usize>] {
        &self.var_checks
    }

    /// Whether every row of `code`'s generator satisfies every check.
    pub fn annihilates(&self, code: &LinearCode) -> bool {
        code.gen.iter().all(|&g| self.checks.iter().all(|c| c.iter().filter(|&&v| g >> v & 1 == 1).count() % 2 == 0))
    }

    /// Length of the shortest cycle through variable `v`, searching up to
    /// `max_len` edges; `None` if no such cycle exists.
    pub fn shortest_cycle_through(&self, v: usize, max_len: usize) -> Option<usize> {
        // nodes: variables 0..n, checks n..n+m
        let n = self.n;
        let adj = |u: usize| -> Vec<usize> {
            if u < n {
                self.var_checks[u].iter().map(|c| n + c).collect()
            } else {
                self.checks[u - n].clone()
            }
        };
        let mut best: Option<usize> = None;
        for &c in &self.var_checks[v] {
            // BFS from check c to v without the edge (v, c)
            let total = n + self.checks.len();
            let mut dist = vec![usize::MAX; total];
            let start = n + c;
            dist[start] = 0;
            let mut q = VecDeque::from([start]);
            while let Some(u) = q.pop_front() {
                if dist[u] + 1 >= max_len {
                    break;
                }
                for w in adj(u) {
                    if (u == start && w == v) || dist[w] != usize::MAX {
                        continue;
                    }
                    dist[w] = dist[u] + 1;
                    q.push_back(w);
                }
            }
            if dist[v] != usize::MAX {
                let len = dist[v] + 1;
                best = Some(best.map_or(len, |b: usize| b.min(len)));
            }
        }
        best
    }

    /// Fraction of variables whose shortest cycle has length at most `len`.
    pub fn short_cycle_fraction(&self, len: usize) -> f64 {
        let cnt = (0..self.n).filter(|&v| self.shortest_cycle_through(v, len).is_some_and(|l| l <= len)).count();
        cnt as f64 / self.n as f64
    }
}

/// Bound on LLR messages inside the BP decoder.
const BP_LLR_CAP: f64 = 60.0;

/// Extrinsic BP LLRs after `iters` flooding iterations, starting from
/// variable-to-check messages equal to the channel LLRs.
pub fn bp_extrinsic(graph: &TannerGraph, llr: &[f64], iters: usize) -> Vec<f64> {
    let n = graph.n;
    if iters == 0 {
        return vec![0.0; n];
    }
    // messages indexed per (check, position in check)
    let mut v2c: Vec<Vec<f64>> =
        graph.checks.iter().map(|vs| vs.iter().map(|&v| llr[v].clamp(-BP_LLR_CAP, BP_LLR_CAP)).collect()).collect();
    let mut c2v: Vec<Vec<f64>> = graph.checks.iter().map(|vs| vec![0.0; vs.len()]).collect();
    for it in 0..iters {
        for (c, vs) in graph.checks.iter().enumerate() {
            let t: Vec<f64> = v2c[c].iter().map(|m| (m / 2.0).tanh()).collect();
            for p in 0..vs.len() {
                let prod: f64 = t.iter().enumerate().filter(|(q, _)| *q != p).map(|(_, x)| x).product();
                let prod = prod.clamp(-1.0 + 1e-16, 1.0 - 1e-16);
                c2v[c][p] = (2.0 * prod.atanh()).clamp(-BP_LLR_CAP, BP_LLR_CAP);
            }
        }
        if it + 1 == iters {
            break;
        }
        let mut total: Vec<f64> = llr.iter().map(|l| l.clamp(-BP_LLR_CAP, BP_LLR_CAP)).collect();
        for (c, vs) in graph.checks.iter().enumerate() {
            for (p, &v) in vs.iter().enumerate() {
                total[v] += c2v[c][p];
            }
        }
        for (c, vs) in graph.checks.iter().enumerate() {
            for (p, &v) in vs.iter().enumerate() {
                v2c[c][p] = (total[v] - c2v[c][p]).clamp(-BP_LLR_CAP, BP_LLR_CAP);
            }
        }
    }
    let mut ext = vec![0.0; n];
    for (c, vs) in graph.checks.iter().enumerate() {
        for (p, &v) in vs.iter().enumerate() {
            ext[v] += c2v[c][p];
        }
    }
    ext
}

/// Sample averages comparing BP after `iters` iterations with exact MAP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub iters: usize,
    /// `E Δ^(ℓ)`: mean of `(1/n) Σ (tanh(Φ_i^BP/2) - tanh(Φ_i/2))^2`.
    pub delta: Estimate,
    /// Same with full posteriors `tanh((l_i + Φ_i)/2)`.
    pub delta_full: Estimate,
    /// Sample BP GEXIT `(1/n) Σ κ(|μ_i^BP|)`.
    pub bp_gexit: Estimate,
    /// Sample MAP GEXIT `(1/n) Σ κ(|μ_i|)`.
    pub map_gexit: Estimate,
}

/// Estimates `Δ^(ℓ)` and related averages over `samples` seeded channel
/// realizations of the all-one codeword.
pub fn delta_ell(
    code: &LinearCode,
    kind: ChannelKind,
    h: f64,
    iters: usize,
    samples: usize,
    seed: u64,
) -> Result<DeltaReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("sample budget must be positive".into()));
    }
    if kind == ChannelKind::Bec {
        return Err(Error::InvalidArgument("BP-vs-MAP sampling needs a channel with finite LLRs".into()));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("h = {h} must lie in (0, 1)")));
    }
    let n = code.n();
    let words = code.codewords()?;
    let graph = code.tanner_graph();
    let kern = GexitKernel::new(kind, h)?;
    let param = sampler_param(kind, h)?;
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<Vec<[f64; 4]>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci as u64);
            let count = MC_CHUNK.min(samples - ci * MC_CHUNK);
            let mut llr = vec![0.0; n];
            (0..count)
                .map(|_| {
                    sample_llrs(kind, param, 0, n, &mut rng, &mut llr);
                    let map = map_extrinsic(&words, n, &llr);
                    let bp = bp_extrinsic(&graph, &llr, iters);
                    let mut acc = [0.0; 4];
                    for i in 0..n {
                        let (mu, mb) = ((map[i] / 2.0).tanh(), (bp[i] / 2.0).tanh());
                        let (tu, tb) = (((llr[i] + map[i]) / 2.0).tanh(), ((llr[i] + bp[i]) / 2.0).tanh());
                        acc[0] += (mb - mu).powi(2);
                        acc[1] += (tb - tu).powi(2);
                        acc[2] += kern.abs_d(mb.abs());
                        acc[3] += kern.abs_d(mu.abs());
                    }
                    acc.map(|a| a / n as f64)
                })
                .collect()
        })
        .collect();
    let rows: Vec<[f64; 4]> = parts.into_iter().flatten().collect();
    let col = |j: usize| mean_and_err(&rows.iter().map(|r| r[j]).collect::<Vec<_>>());
    Ok(DeltaReport { iters, delta: col(0), delta_full: col(1), bp_gexit: col(2), map_gexit: col(3) })
}

/// `K = -sup κ''(s)` of the |D|-domain kernel, by second differences on
/// `points` uniform nodes of `[0, 1]`.
pub fn kernel_curvature(kind: ChannelKind, h: f64, points: usize) -> Result<f64> {
    let kern = GexitKernel::new(kind, h)?;
    let m = points.max(3) - 1;
    let step = 1.0 / m as f64;
    let vals: Vec<f64> = (0..=m).map(|i| kern.abs_d(i as f64 * step)).collect();
    let sup = vals
        .windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]) / (step * step))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(-sup)
}

/// Extrinsic-distortion constant `C = E_c[e^{2|l|}]` of the channel.
pub fn extrinsic_distortion_constant(kind: ChannelKind, h: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::ParameterOutOfRange(format!("h = {h} not in [0, 1]")));
    }
    match kind {
        ChannelKind::Bec => Ok(if h == 1.0 { 1.0 } else { f64::INFINITY }),
        ChannelKind::Bsc => {
            let e = h2_inv(h);
            if e <= 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok(((1.0 - e) / e).powi(2))
        }
        ChannelKind::Bawgn => {
            if h >= 1.0 {
                return Ok(1.0);
            }
            let s = sigma_from_entropy(h)?;
            let m = 2.0 / (s * s);
            let v = 2.0 * m;
            let sd = v.sqrt();
            let up = (2.0 * m + 2.0 * v + norm_cdf((m + 2.0 * v) / sd).ln()).exp();
            let dn = (-2.0 * m + 2.0 * v + norm_sf((m - 2.0 * v) / sd).ln()).exp();
            Ok(up + dn)
        }
    }
}

/// Quantities of the BP-correctness inequality
/// `E Δ^(ℓ) <= (2/K)(g^{BP,ℓ} - g) + 4δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpBoundReport {
    pub iters: usize,
    pub curvature: f64,
    /// Fraction of variables on a cycle of at most `4ℓ` edges, i.e. `2ℓ`
    /// variable-to-variable hops.
    pub short_cycle_fraction: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub report: DeltaReport,
    pub distortion_constant: f64,
    /// `E Δ̃ <= C E Δ`.
    pub distortion_holds: bool,
}

pub fn bp_correctness_bound_check(
    code: &LinearCode,
    kind: ChannelKind,
    h: f64,
    iters: usize,
    samples: usize,
    seed: u64,
) -> Result<BpBoundReport> {
    let k = kernel_curvature(kind, h, 4001)?;
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("kernel is not strictly concave (K = {k})")));
    }
    // a depth-`iters` computation tree spans 2 * iters edges from the root, so
    // it is cycle-free exactly when no cycle of at most 4 * iters edges passes
    // through the root
    let delta = code.tanner_graph().short_cycle_fraction(4 * iters);
    let report = delta_ell(code, kind, h, iters, samples, seed)?;
    let lhs = report.delta.value;
    let rhs = 2.0 / k * (report.bp_gexit.value - report.map_gexit.value) + 4.0 * delta;
    let c = extrinsic_distortion_constant(kind, h)?;
    Ok(BpBoundReport {
        iters,
        curvature: k,
        short_cycle_fraction: delta,
        lhs,
        rhs,
        holds: lhs <= rhs,
        report,
        distortion_constant: c,
        distortion_holds: report.delta_full.value <= c * report.delta.value + 1e-15,
    })
}

/// Both sides of `|tanh(x1+z) - tanh(x2+z)| <= e^{2|z|} |tanh(x1) - tanh(x2)|`.
pub fn tanh_shift_sides(x1: f64, x2: f64, z: f64) -> (f64, f64) {
    (((x1 + z).tanh() - (x2 + z).tanh()).abs(), (2.0 * z.abs()).exp() * (x1.tanh() - x2.tanh()).abs())
}
