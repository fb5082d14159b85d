use proptest::prelude::*;
use toruscover::analytic::{poisson_lower_tail, poisson_tail_at_least, poisson_tail_at_most, poisson_upper_tail};
use toruscover::bodies::{ball_overlap_volume, cube_overlap_volume};
use toruscover::experiments::stats::{first_crossing, isotonic_nondecreasing, Crossing};
use toruscover::sampling::sample_ppp;
use toruscover::{Body, SeedSpec, Torus};

fn offset(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cube_overlap_is_symmetric_and_bounded(x in (1usize..8).prop_flat_map(offset), side in 0.5f64..2.0) {
        let v = cube_overlap_volume(side, &x);
        let neg: Vec<f64> = x.iter().map(|c| -c).collect();
        prop_assert_eq!(v, cube_overlap_volume(side, &neg));
        prop_assert!(v >= 0.0 && v <= side.powi(x.len() as i32) * (1.0 + 1e-12));
    }

    #[test]
    fn ball_overlap_decreases_with_distance(n in 1usize..9, a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        let vn = ball_overlap_volume(n, 1.0, near).unwrap();
        let vf = ball_overlap_volume(n, 1.0, far).unwrap();
        prop_assert!(vf <= vn * (1.0 + 1e-9) + 1e-12);
        let full = Body::ball(n, 1.0).unwrap().volume();
        prop_assert!(vn <= full * (1.0 + 1e-9));
    }

    #[test]
    fn reduction_and_metric(sides in prop::collection::vec(1.0f64..5.0, 1..5), seed in any::<u64>()) {
        let torus = Torus::new(sides.clone()).unwrap();
        let n = sides.len();
        let mut rng = SeedSpec::new(seed, 0).stream(0);
        let p: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -20.0..20.0)).collect();
        let q: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -20.0..20.0)).collect();
        let r: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -20.0..20.0)).collect();
        let rp = torus.reduce(&p);
        prop_assert_eq!(torus.reduce(&rp), rp.clone());
        for (x, c) in rp.iter().zip(&sides) {
            prop_assert!(*x >= 0.0 && x < c);
        }
        for (d, c) in torus.min_image(&p, &q).iter().zip(&sides) {
            prop_assert!(d.abs() <= 0.5 * c + 1e-9);
        }
        let (dpq, dqr, dpr) = (torus.distance(&p, &q), torus.distance(&q, &r), torus.distance(&p, &r));
        prop_assert!((dpq - torus.distance(&q, &p)).abs() < 1e-9);
        prop_assert!(dpr <= dpq + dqr + 1e-9);
    }

    #[test]
    fn poisson_bounds_dominate_exact_tails(lambda in 0.5f64..40.0, sigma in 0.0f64..1.0) {
        let up = poisson_upper_tail(lambda, sigma).unwrap();
        prop_assert!(poisson_tail_at_least(lambda, (1.0 + sigma) * lambda) <= up * (1.0 + 1e-10));
        let low = poisson_lower_tail(lambda, sigma).unwrap();
        prop_assert!(poisson_tail_at_most(lambda, (1.0 - sigma) * lambda) <= low * (1.0 + 1e-10));
    }

    #[test]
    fn isotonic_fit_is_monotone_and_mean_preserving(
        pairs in prop::collection::vec((0.0f64..1.0, 1.0f64..10.0), 1..30)
    ) {
        let (values, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let fit = isotonic_nondecreasing(&values, &weights);
        for w in fit.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-12);
        }
        let total = |v: &[f64]| v.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((total(&fit) - total(&values)).abs() <= 1e-9 * total(&weights));
    }

    #[test]
    fn crossings_lie_between_grid_points(ys in prop::collection::vec(0.0f64..1.0, 2..12)) {
        let mut ys = ys;
        ys.sort_by(f64::total_cmp);
        let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
        match first_crossing(&xs, &ys, 0.5) {
            Crossing::At(x) => {
                prop_assert!(x >= 0.0 && x <= (ys.len() - 1) as f64);
                let j = (x.ceil() as usize).min(ys.len() - 1);
                prop_assert!(ys[j] >= 0.5);
            }
            Crossing::BelowGrid => prop_assert!(ys[0] >= 0.5),
            Crossing::AboveGrid => prop_assert!(ys.iter().all(|y| *y < 0.5)),
        }
    }

    #[test]
    fn ppp_is_a_function_of_its_seed(seed in any::<u64>(), trial in 0u64..1000, rho in 0.0f64..5.0) {
        let torus = Torus::new(vec![2.0, 3.0]).unwrap();
        let s = SeedSpec::new(seed, trial);
        let a = sample_ppp(&torus, rho, &s).unwrap();
        let b = sample_ppp(&torus, rho, &s).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(b.iter()) {
            prop_assert_eq!(p, q);
            prop_assert!(p[0] >= 0.0 && p[0] < 2.0 && p[1] >= 0.0 && p[1] < 3.0);
        }
    }
}
