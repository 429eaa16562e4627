mod common;

use common::{random_symmetric, small_grid};
use gexitlab::codes::tanh_shift_sides;
use gexitlab::{h2, ChannelFamily, ChannelKind, LDensity};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bec(x: f64) -> LDensity {
    ChannelFamily::new(ChannelKind::Bec, small_grid()).density(x).unwrap()
}

/// Erasure fraction of a density supported on `{0, +inf}`.
fn erasure(a: &LDensity) -> f64 {
    let m = a.grid().half();
    assert!(a.bins().iter().enumerate().all(|(i, &b)| i == m || b == 0.0));
    a.bins()[m]
}

#[test]
fn bec_convolution_duality_exact() {
    for i in 0..10 {
        for j in 0..10 {
            let (x, y) = (i as f64 / 9.0, j as f64 / 9.0);
            let v = bec(x).var_convolve(&bec(y));
            assert!((erasure(&v) - x * y).abs() < 1e-15, "var {x} {y}");
            let c = bec(x).check_convolve(&bec(y));
            assert!((erasure(&c) - (1.0 - (1.0 - x) * (1.0 - y))).abs() < 1e-15, "check {x} {y}");
        }
    }
}

#[test]
fn convolution_units() {
    let grid = small_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_symmetric(grid, &mut rng);
    let (d0, dinf) = (LDensity::delta_zero(grid), LDensity::delta_inf(grid));
    assert!(a.var_convolve(&d0).distance(&a) < 1e-12);
    assert!(a.var_convolve(&dinf).distance(&dinf) < 1e-12);
    assert!(a.check_convolve(&dinf).distance(&a) < 1e-12);
    assert!(a.check_convolve(&d0).distance(&d0) < 1e-12);
}

#[test]
fn functionals_of_bsc() {
    let fam = ChannelFamily::new(ChannelKind::Bsc, gexitlab::Grid::default());
    let a = fam.density(h2(0.11)).unwrap();
    assert!((a.entropy() - 0.499916).abs() < 1e-6);
    // the quantized crossover matches the entropy exactly, so the other
    // functionals carry the quantization error
    assert!((a.battacharyya() - (4.0 * 0.11 * 0.89f64).sqrt()).abs() < 1e-2);
    assert!((a.error_prob() - 0.11).abs() < 1e-2);
}

#[test]
fn entropy_of_convolution_matches_double_sum() {
    let grid = small_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let a = random_symmetric(grid, &mut rng);
        let b = random_symmetric(grid, &mut rng);
        let mut direct = 0.0;
        for (i, &p) in a.bins().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &q) in b.bins().iter().enumerate() {
                let w = grid.x(i) + grid.x(j);
                direct += p * q * (1.0 + (-w).exp()).log2();
            }
        }
        let conv = a.var_convolve(&b).entropy();
        assert!((conv - direct).abs() < 1e-8, "{conv} vs {direct}");
    }
}

#[test]
fn error_prob_below_half_bhattacharyya() {
    let grid = small_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let r = random_symmetric(grid, &mut rng).report();
        assert!(2.0 * r.error_prob <= r.battacharyya + 1e-12);
        assert!(r.battacharyya <= 1.0 + 1e-12 && (0.0..=1.0 + 1e-12).contains(&r.entropy));
    }
}

#[test]
fn tanh_shift_inequality_grid() {
    let pts: Vec<f64> = (0..=40).map(|i| -10.0 + i as f64 * 0.5).collect();
    for &x1 in &pts {
        for &x2 in &pts {
            for &z in &pts {
                let (l, r) = tanh_shift_sides(x1, x2, z);
                assert!(l <= r * (1.0 + 1e-12) + 1e-300, "{x1} {x2} {z}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn degradation_increases_functionals(seed in any::<u64>(), delta in 0.0f64..=0.5) {
        let a = random_symmetric(small_grid(), &mut ChaCha8Rng::seed_from_u64(seed));
        let b = a.degrade_by_bsc(delta).unwrap();
        prop_assert!(b.entropy() >= a.entropy() - 1e-12);
        prop_assert!(b.battacharyya() >= a.battacharyya() - 1e-12);
        prop_assert!(b.error_prob() >= a.error_prob() - 1e-12);
    }

    #[test]
    fn random_densities_are_symmetric(seed in any::<u64>()) {
        let a = random_symmetric(small_grid(), &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(a.is_symmetric(1e-8));
        prop_assert!((a.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convolutions_preserve_mass_and_symmetry(s1 in any::<u64>(), s2 in any::<u64>()) {
        let grid = small_grid();
        let a = random_symmetric(grid, &mut ChaCha8Rng::seed_from_u64(s1));
        let b = random_symmetric(grid, &mut ChaCha8Rng::seed_from_u64(s2));
        for c in [a.var_convolve(&b), a.check_convolve(&b)] {
            prop_assert!((c.total_mass() - 1.0).abs() < 1e-10);
            prop_assert!(c.bins().iter().all(|&m| m >= 0.0));
        }
        prop_assert!(a.var_convolve(&b).is_symmetric(1e-8));
    }

    #[test]
    fn symmetrize_is_idempotent(seed in any::<u64>()) {
        let grid = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_symmetric(grid, &mut rng);
        let b = random_symmetric(grid, &mut rng);
        let skew = a.check_convolve(&b);
        let s = skew.symmetrize();
        prop_assert!(s.distance(&s.symmetrize()) < 1e-12);
        prop_assert!((s.total_mass() - skew.total_mass()).abs() < 1e-12);
    }
}
