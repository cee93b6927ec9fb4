use proptest::prelude::*;

use kpzlab::analysis::{overlap, variation};
use kpzlab::field::FieldParams;
use kpzlab::stats::Moments;
use kpzlab::{LandscapeQuery, LppField, Rng, SampledPath, TieBreak};

fn field(seed: u64) -> LppField {
    LppField::build(&Rng::new(seed, 0), &FieldParams::symmetric(16, 1.0, 1.0 / 16.0)).unwrap()
}

/// Node positions in the middle half of the window.
fn middle(f: &LppField, k: usize) -> f64 {
    let m = f.cells();
    f.position((m / 4 + k % (m / 2 + 1)) as isize)
}

fn profile(seed: u64, m: usize) -> Vec<f64> {
    let mut g = Rng::new(seed, 7);
    (0..=m).map(|_| 2.0 * g.standard_normal()).collect()
}

fn near(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x == y || (x - y).abs() <= 1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn geodesics_are_ordered(seed in 0u64..1000, kx in 0usize..64, k1 in 0usize..64, k2 in 0usize..64) {
        let f = field(seed);
        let x = middle(&f, kx);
        let (y1, y2) = {
            let (a, b) = (middle(&f, k1), middle(&f, k2));
            (a.min(b), a.max(b))
        };
        let q1 = LandscapeQuery::new(x, 0.0, y1, 1.0).unwrap();
        let q2 = LandscapeQuery::new(x, 0.0, y2, 1.0).unwrap();
        prop_assume!(f.landscape_approx(q1).unwrap() > f64::NEG_INFINITY);
        let l1 = f.landscape_geodesic(q1, TieBreak::Leftmost).unwrap();
        let r1 = f.landscape_geodesic(q1, TieBreak::Rightmost).unwrap();
        let l2 = f.landscape_geodesic(q2, TieBreak::Leftmost).unwrap();
        for k in 0..l1.path.len() {
            prop_assert!(l1.path.values()[k] <= r1.path.values()[k]);
            prop_assert!(l1.path.values()[k] <= l2.path.values()[k]);
        }
        prop_assert_eq!(l1.value, r1.value);
    }

    #[test]
    fn overlap_is_an_initial_interval(seed in 0u64..1000, k1 in 0usize..64, k2 in 0usize..64) {
        let f = field(seed);
        let q1 = LandscapeQuery::new(0.0, 0.0, middle(&f, k1), 1.0).unwrap();
        let q2 = LandscapeQuery::new(0.0, 0.0, middle(&f, k2), 1.0).unwrap();
        prop_assume!(f.landscape_approx(q1).unwrap() > f64::NEG_INFINITY);
        prop_assume!(f.landscape_approx(q2).unwrap() > f64::NEG_INFINITY);
        let g1 = f.landscape_geodesic(q1, TieBreak::Leftmost).unwrap();
        let g2 = f.landscape_geodesic(q2, TieBreak::Leftmost).unwrap();
        let o = overlap(&g1, &g2).unwrap();
        prop_assert!(o.contiguous);
        prop_assert_eq!(o.boundaries.first(), Some(&0));
    }

    #[test]
    fn evolution_is_max_plus_linear(seed in 0u64..1000, c in -5.0f64..5.0) {
        let f = field(seed);
        let (h1, h2) = (profile(seed, f.cells()), profile(seed + 1, f.cells()));
        let e1 = f.kpz_evolve(&h1, 0.25, 0.75).unwrap();
        let e2 = f.kpz_evolve(&h2, 0.25, 0.75).unwrap();
        let shifted: Vec<f64> = h1.iter().map(|v| v + c).collect();
        let want: Vec<f64> = e1.iter().map(|v| v + c).collect();
        prop_assert!(near(&f.kpz_evolve(&shifted, 0.25, 0.75).unwrap(), &want));
        let hmax: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| a.max(*b)).collect();
        let emax: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a.max(*b)).collect();
        prop_assert!(near(&f.kpz_evolve(&hmax, 0.25, 0.75).unwrap(), &emax));
    }

    #[test]
    fn two_step_evolution(seed in 0u64..1000, j in 1usize..16) {
        let f = field(seed);
        let h = profile(seed, f.cells());
        let s = j as f64 / 16.0;
        let mid = f.kpz_evolve(&h, 0.0, s).unwrap();
        let two = f.kpz_evolve(&mid, s, 1.0).unwrap();
        prop_assert!(near(&two, &f.kpz_evolve(&h, 0.0, 1.0).unwrap()));
    }

    #[test]
    fn resample_keeps_other_lines(seed in 0u64..1000, lo in 0usize..8, len in 1usize..8) {
        let f = field(seed);
        let (a, b) = (lo as f64 / 16.0, (lo + len) as f64 / 16.0);
        let g = f.resample(&Rng::new(seed, 99), a, b).unwrap();
        for l in 0..16 {
            let same = f.row(l) == g.row(l);
            prop_assert_eq!(same, !(lo..lo + len).contains(&l), "line {}", l);
        }
        // values over untouched lines agree
        let q = LandscapeQuery::new(0.0, b, 0.0, 1.0).unwrap();
        prop_assert_eq!(f.landscape_approx(q).unwrap(), g.landscape_approx(q).unwrap());
    }

    #[test]
    fn variation_scales_homogeneously(seed in 0u64..1000, c in -3.0f64..3.0, alpha in 0.5f64..4.0, k in 1usize..5) {
        let mut g = Rng::new(seed, 3);
        let v: Vec<f64> = (0..65).map(|_| g.standard_normal()).collect();
        let f = SampledPath::new(0.0, 1.0 / 64.0, v).unwrap();
        let eps = k as f64 / 64.0;
        let base = variation(&f, alpha, eps).unwrap();
        let scaled = variation(&f.scaled(c), alpha, eps).unwrap();
        prop_assert!((scaled - c.abs().powf(alpha) * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
    }

    #[test]
    fn moments_merge_is_associative(xs in prop::collection::vec(-1e3f64..1e3, 0..60), cut1 in 0usize..60, cut2 in 0usize..60) {
        let (i, j) = (cut1.min(cut2).min(xs.len()), cut1.max(cut2).min(xs.len()));
        let (a, b, c) = (Moments::from_slice(&xs[..i]), Moments::from_slice(&xs[i..j]), Moments::from_slice(&xs[j..]));
        let left = a.merge(b).merge(c);
        let right = a.merge(b.merge(c));
        let whole = Moments::from_slice(&xs);
        prop_assert_eq!(left.count, whole.count);
        prop_assert_eq!(right.count, whole.count);
        for m in [left, right] {
            prop_assert!((m.sum - whole.sum).abs() <= 1e-9 * (1.0 + whole.sum_sq.sqrt()));
            prop_assert!((m.sum_sq - whole.sum_sq).abs() <= 1e-9 * (1.0 + whole.sum_sq));
        }
    }
}
