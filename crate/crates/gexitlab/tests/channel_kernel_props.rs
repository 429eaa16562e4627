mod common;

use common::{random_symmetric, small_grid};
use gexitlab::kernels::gexit_functional;
use gexitlab::{h2, ChannelFamily, ChannelKind, ChannelSpec, GexitKernel, Grid, LDensity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KINDS: [ChannelKind; 3] = [ChannelKind::Bec, ChannelKind::Bsc, ChannelKind::Bawgn];

#[test]
fn degradation_ordering_along_families() {
    let grid = Grid::new(30.0, 1025).unwrap();
    for kind in KINDS {
        let fam = ChannelFamily::new(kind, grid);
        let reps: Vec<_> = (1..=9).map(|i| fam.density(i as f64 / 10.0).unwrap().report()).collect();
        for w in reps.windows(2) {
            assert!(w[1].entropy > w[0].entropy, "{kind}");
            assert!(w[1].battacharyya > w[0].battacharyya, "{kind}");
            assert!(w[1].error_prob > w[0].error_prob, "{kind}");
        }
    }
}

#[test]
fn families_are_complete() {
    let grid = Grid::new(30.0, 1025).unwrap();
    for kind in KINDS {
        let fam = ChannelFamily::new(kind, grid);
        assert!(fam.density(0.0).unwrap().distance(&LDensity::delta_inf(grid)) < 1e-9, "{kind}");
        assert!(fam.density(1.0).unwrap().distance(&LDensity::delta_zero(grid)) < 1e-9, "{kind}");
    }
}

#[test]
fn entropy_parametrization_is_identity() {
    let grid = Grid::default();
    for kind in KINDS {
        let fam = ChannelFamily::new(kind, grid);
        for i in 0..=20 {
            let h = i as f64 / 20.0;
            let got = fam.density(h).unwrap().entropy();
            assert!((got - h).abs() <= 1e-8, "{kind} h={h} got {got}");
        }
    }
}

#[test]
fn channel_specs_parse() {
    let s: ChannelSpec = "bsc:eps=0.11".parse().unwrap();
    assert_eq!(s.kind, ChannelKind::Bsc);
    assert!((s.h.unwrap() - h2(0.11)).abs() < 1e-15);
    let s: ChannelSpec = "bec".parse().unwrap();
    assert_eq!(s.h, None);
    let s: ChannelSpec = "bawgn:sigma=0.9".parse().unwrap();
    assert!((s.h.unwrap() - gexitlab::channels::bawgn_entropy(0.9)).abs() < 1e-15);
    assert!("bsc:sigma=1".parse::<ChannelSpec>().is_err());
    assert!("awgn".parse::<ChannelSpec>().is_err());
    assert!("bec:h=1.5".parse::<ChannelSpec>().is_err());
}

#[test]
fn kernels_monotone_concave_bounded() {
    let ss: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
    for kind in KINDS {
        for i in 1..=9 {
            let k = GexitKernel::new(kind, i as f64 / 10.0).unwrap();
            let v: Vec<f64> = ss.iter().map(|&s| k.abs_d(s)).collect();
            assert!(v.windows(2).all(|w| w[1] - w[0] <= 1e-9), "{kind} monotone");
            assert!(v.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] <= 1e-9), "{kind} concave");
            for (&s, &y) in ss.iter().zip(&v) {
                assert!(1.0 - s - 1e-9 <= y && y <= 1.0 + 1e-9, "{kind} bounds at {s}");
            }
        }
    }
}

#[test]
fn gexit_order_preservation_on_degraded_pairs() {
    let grid = small_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 0..50 {
        let kind = KINDS[n % 3];
        let h = rng.random_range(0.05..0.95);
        let a = random_symmetric(grid, &mut rng);
        let b = a.degrade_by_bsc(rng.random_range(0.0..0.5)).unwrap();
        let (ga, gb) = (gexit_functional(kind, h, &a).unwrap(), gexit_functional(kind, h, &b).unwrap());
        assert!(gb >= ga - 1e-9, "{kind} h={h}: {gb} < {ga}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gexit_between_error_prob_and_one(seed in any::<u64>(), h in 0.02f64..0.98, k in 0usize..3) {
        let a = random_symmetric(small_grid(), &mut ChaCha8Rng::seed_from_u64(seed));
        let g = gexit_functional(KINDS[k], h, &a).unwrap();
        prop_assert!(g <= 1.0 + 1e-9);
        prop_assert!(g >= 2.0 * a.error_prob() - 1e-9);
    }
}
