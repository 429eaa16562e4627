mod common;

use common::{random_symmetric, small_grid};
use gexitlab::de::{bec_recursion, bp_points, de_run, matching_chart_for, DeOptions};
use gexitlab::ebp::{ebp_curve, ebp_fixed_point, map_threshold_upper_bound, maxwell_construction, EbpOptions};
use gexitlab::kernels::gexit_functional;
use gexitlab::{ChannelFamily, ChannelKind, DegreeDistribution, Grid, LDensity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid2049() -> Grid {
    Grid::new(30.0, 2049).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bp_trajectory_is_monotone(h in 0.05f64..0.95, k in 0usize..3) {
        let kind = [ChannelKind::Bec, ChannelKind::Bsc, ChannelKind::Bawgn][k];
        let d = DegreeDistribution::regular(3, 6).unwrap();
        // coarser grids show quantization ripples of about 1e-8 near the fixed point
        let fam = ChannelFamily::new(kind, Grid::default());
        let opts = DeOptions { record_trace: true, max_iters: 200, ..DeOptions::default() };
        let st = de_run(&d, &fam.density(h).unwrap(), &LDensity::delta_zero(Grid::default()), &opts);
        for w in st.trace.windows(2) {
            prop_assert!(w[1].entropy <= w[0].entropy + 1e-9);
        }
    }
}

#[test]
fn bec_density_evolution_matches_scalar_recursion() {
    for (l, r) in [(3, 6), (2, 4), (4, 8)] {
        let d = DegreeDistribution::regular(l, r).unwrap();
        let fam = ChannelFamily::new(ChannelKind::Bec, small_grid());
        for h in [0.3, 0.42, 0.45, 0.6] {
            let opts = DeOptions { record_trace: true, max_iters: 60, tol: 0.0, symmetrize_every: 0, ..DeOptions::default() };
            let st = de_run(&d, &fam.density(h).unwrap(), &LDensity::delta_zero(small_grid()), &opts);
            let xs = bec_recursion(&d, h, st.trace.len() - 1);
            for (t, x) in st.trace.iter().zip(&xs) {
                assert!((t.entropy - x).abs() <= 1e-9, "({l},{r}) h={h}: {} vs {x}", t.entropy);
            }
        }
    }
}

#[test]
fn gexit_dominance_on_degraded_pairs() {
    let grid = small_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..30 {
        let a_map = random_symmetric(grid, &mut rng);
        let a_bp = a_map.degrade_by_bsc(rng.random_range(0.0..0.3)).unwrap();
        let h = rng.random_range(0.1..0.9);
        for kind in [ChannelKind::Bsc, ChannelKind::Bawgn] {
            let lo = gexit_functional(kind, h, &a_map).unwrap();
            let hi = gexit_functional(kind, h, &a_bp).unwrap();
            assert!(lo <= hi + 1e-9);
        }
    }
}

#[test]
fn matching_chart_curves_do_not_cross() {
    let d = DegreeDistribution::regular(3, 6).unwrap();
    let fam = ChannelFamily::new(ChannelKind::Bec, Grid::new(30.0, 1025).unwrap());
    let m = matching_chart_for(&d, &fam, 0.4, 4).unwrap();
    assert!(m.complete);
    assert!(m.min_gap >= -1e-9, "{}", m.min_gap);
}

#[test]
fn ebp_fixed_points_satisfy_residual_invariants() {
    let d = DegreeDistribution::regular(3, 6).unwrap();
    for kind in [ChannelKind::Bsc, ChannelKind::Bawgn] {
        let fam = ChannelFamily::new(kind, grid2049());
        for x in [0.05, 0.2, 0.35, 0.5] {
            let p = ebp_fixed_point(&d, &fam, x, None, &EbpOptions::default()).unwrap();
            assert!(p.converged, "{kind} x={x}");
            let f = p.f.as_ref().unwrap();
            assert!((f.entropy() - x).abs() <= 1e-6, "{kind} x={x}");
            assert!(p.entropy_residual <= 1e-6, "{kind} x={x}: {}", p.entropy_residual);
        }
    }
}

/// `g` on the branch after the last decreasing run, interpolated at `h`.
fn upper_branch_at(curve: &gexitlab::ebp::EbpCurve, h: f64) -> Option<f64> {
    let start = curve.s_regions.last().map(|s| s.end).unwrap_or(0);
    let pts = &curve.points[start..];
    pts.windows(2).find(|w| w[0].h <= h && h <= w[1].h).map(|w| {
        let t = (h - w[0].h) / (w[1].h - w[0].h);
        w[0].gexit + t * (w[1].gexit - w[0].gexit)
    })
}

#[test]
fn bp_curve_is_envelope_and_maxwell_matches_h_bar() {
    let d = DegreeDistribution::regular(3, 6).unwrap();
    let fam = ChannelFamily::new(ChannelKind::Bsc, grid2049());
    let curve = ebp_curve(&d, &fam, &EbpOptions::default()).unwrap();
    let hs: Vec<f64> = (0..10).map(|i| 0.45 + 0.05 * i as f64).collect();
    let bp = bp_points(&d, &fam, &hs, &DeOptions::default()).unwrap();
    for p in &bp {
        let g = upper_branch_at(&curve, p.h).expect("h inside the upper branch");
        assert!((g - p.gexit).abs() <= 2e-3, "h={}: EBP {g} vs BP {}", p.h, p.gexit);
    }
    let step = 0.005;
    let bound = map_threshold_upper_bound(&d, &fam, step, &DeOptions::default()).unwrap();
    let cut = maxwell_construction(&curve, &d).cuts[0].h;
    assert!((cut - bound.h_bar).abs() <= 2.0 * step, "Maxwell {cut} vs h_bar {}", bound.h_bar);
}

#[test]
fn cycle_ensemble_map_curve_equals_bp_curve() {
    let d: DegreeDistribution = "l=x,r=x^5".parse().unwrap();
    let fam = ChannelFamily::new(ChannelKind::Bsc, grid2049());
    let curve = ebp_curve(&d, &fam, &EbpOptions::default()).unwrap();
    assert!(curve.s_regions.is_empty());
    let m = maxwell_construction(&curve, &d);
    assert!(m.cuts.is_empty());
    let hs: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
    let bp = bp_points(&d, &fam, &hs, &DeOptions::default()).unwrap();
    for p in &bp {
        let g = m.map_curve.interpolate(p.h).unwrap();
        assert!((g - p.gexit).abs() <= 2e-3, "h={}: MAP {g} vs BP {}", p.h, p.gexit);
    }
}
