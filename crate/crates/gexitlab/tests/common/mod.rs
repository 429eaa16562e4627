#![allow(dead_code)]

use gexitlab::{Grid, LDensity};
use rand::Rng;

/// Random symmetric density: sparse random magnitudes plus an atom at
/// infinity.
pub fn random_symmetric<R: Rng>(grid: Grid, rng: &mut R) -> LDensity {
    let fill: f64 = rng.random_range(0.02..0.5);
    let mags: Vec<f64> =
        (0..grid.half() + 1).map(|_| if rng.random::<f64>() < fill { rng.random::<f64>() } else { 0.0 }).collect();
    let inf = 0.3 * rng.random::<f64>();
    let total: f64 = mags.iter().sum::<f64>() + inf;
    if total == 0.0 {
        return LDensity::delta_zero(grid);
    }
    let mags: Vec<f64> = mags.iter().map(|m| m / total).collect();
    LDensity::from_magnitudes(grid, &mags, inf / total)
}

/// Mixes `a` with `Δ0` or `Δ∞` so that the result has entropy `x`.
pub fn with_entropy(a: &LDensity, x: f64) -> LDensity {
    let h = a.entropy();
    let grid = a.grid();
    if h <= x {
        // t a + (1 - t) Δ0 has entropy t h + 1 - t
        let t = if h < 1.0 { (1.0 - x) / (1.0 - h) } else { 1.0 };
        LDensity::delta_zero(grid).mix(a, t)
    } else {
        let t = x / h;
        LDensity::delta_inf(grid).mix(a, t)
    }
}

pub fn small_grid() -> Grid {
    Grid::new(30.0, 513).unwrap()
}
