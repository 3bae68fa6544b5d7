mod common;

use common::{pool, weights};
use proptest::prelude::*;
use tfmm_core::reserves::apply_trajectory;
use tfmm_core::schemes::{
    approx_optimal_trajectory, d_r_d_wtilde, geometric_curve, geometric_trajectory, linear_trajectory,
    one_step_trajectory,
};
use tfmm_core::reserves::two_step_ratio_raw;
use tfmm_core::{
    closed_form_trajectory, lambert_w0, optimal_intermediate, InterpolationRequest, PriceVector,
    Scheme, WeightVector,
};

/// Root of `w e^w = x` on `[0, max(1, x)]` by plain bisection.
fn lambert_bisection(x: f64) -> f64 {
    let (mut a, mut b) = (0.0f64, x.max(1.0));
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m * m.exp() < x {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn single(x: f64) -> WeightVector {
    WeightVector::new(&[x, 1.0 - x]).unwrap()
}

#[test]
fn lambert_reference_points() {
    assert!((lambert_w0(std::f64::consts::E).unwrap() - 1.0).abs() <= 1e-14);
    assert!((lambert_w0(1.0).unwrap() - lambert_bisection(1.0)).abs() <= 1e-12);
    for x in [1e-8, 0.3, 2.0, 10.0, 1e4] {
        let w = lambert_w0(x).unwrap();
        assert!(((w - lambert_bisection(x)) / w).abs() < 1e-12, "{x}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn intermediate_between_geometric_and_arithmetic_mean(a in 1e-4f64..0.9999, b in 1e-4f64..0.9999) {
        let m = optimal_intermediate(&single(a), &single(b)).unwrap()[0];
        let (gm, am) = ((a * b).sqrt(), 0.5 * (a + b));
        prop_assert!(gm - 1e-12 <= m && m <= am + 1e-12);
        if (a - b).abs() > 1e-6 {
            prop_assert!(gm < m && m < am);
        }
    }

    #[test]
    fn intermediate_is_stationary(
        (a, b) in (2usize..6).prop_flat_map(|n| (weights(n, 0.001), weights(n, 0.001)))
    ) {
        let m = optimal_intermediate(&a, &b).unwrap();
        let g = d_r_d_wtilde(a.as_slice(), &m, b.as_slice()).unwrap();
        prop_assert!(g.iter().all(|x| x.abs() < 1e-10), "{:?}", g);
    }

    #[test]
    fn ratio_gradient_matches_finite_differences(
        (a, b, s) in (2usize..6).prop_flat_map(|n| (weights(n, 0.01), weights(n, 0.01), 0.1f64..0.9))
    ) {
        let m: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (1.0 - s) * x + s * y).collect();
        let g = d_r_d_wtilde(a.as_slice(), &m, b.as_slice()).unwrap();
        for i in 0..m.len() {
            let h = 1e-6 * m[i];
            let (mut up, mut dn) = (m.clone(), m.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (two_step_ratio_raw(a.as_slice(), &up, b.as_slice())
                - two_step_ratio_raw(a.as_slice(), &dn, b.as_slice())) / (2.0 * h);
            prop_assert!((g[i] - fd).abs() <= 1e-7f64.max(1e-5 * fd.abs()), "{i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn neighbours_average_to_each_interior_point(
        (a, b) in (2usize..6).prop_flat_map(|n| (weights(n, 0.01), weights(n, 0.01))),
        f in 2usize..30,
    ) {
        let req = InterpolationRequest::new(a, b, f).unwrap();
        let lin = linear_trajectory(&req).unwrap();
        for k in 1..f {
            let s = lin.steps();
            for i in 0..req.num_tokens() {
                let am = 0.5 * (s[k - 1].get(i) + s[k + 1].get(i));
                prop_assert!((s[k].get(i) - am).abs() < 1e-12);
            }
        }
        let raw = geometric_curve(&req);
        for k in 1..f {
            for i in 0..req.num_tokens() {
                let gm = (raw[k - 1][i] * raw[k + 1][i]).sqrt();
                prop_assert!((raw[k][i] - gm).abs() < 1e-12);
            }
        }
        // renormalizing each row rescales it by a common factor
        let geo = geometric_trajectory(&req).unwrap();
        let s = geo.steps();
        for k in 1..f {
            let ratio: Vec<f64> = (0..req.num_tokens())
                .map(|i| s[k].get(i) / (s[k - 1].get(i) * s[k + 1].get(i)).sqrt())
                .collect();
            prop_assert!(ratio.iter().all(|r| (r - ratio[0]).abs() < 1e-12 * ratio[0]));
        }
    }

    #[test]
    fn endpoints_are_exact(
        (a, b) in (2usize..6).prop_flat_map(|n| (weights(n, 0.001), weights(n, 0.001))),
        f in 1usize..40,
    ) {
        let req = InterpolationRequest::new(a, b, f).unwrap();
        for scheme in [Scheme::OneStep, Scheme::Linear, Scheme::Geometric, Scheme::ApproxOptimal] {
            let t = closed_form_trajectory(scheme, &req).unwrap();
            prop_assert_eq!(t.num_steps(), f);
            prop_assert!(t.start().max_abs_diff(&req.w_start) <= 1e-12);
            prop_assert!(t.end().max_abs_diff(&req.w_end) <= 1e-12);
        }
    }

    // Holds for weights of at least 0.05 and f >= 5. With fewer steps a large
    // move (e.g. 0.9 -> 0.05 at f = 2) lets the linear scheme win.
    #[test]
    fn constant_price_value_ordering(
        (a, b) in prop::sample::select(vec![2usize, 3, 5]).prop_flat_map(|n| (weights(n, 0.05), weights(n, 0.05))),
        f in 5usize..200,
    ) {
        let p = PriceVector::ones(a.len());
        let before = pool(&a, &p, 1.0);
        let req = InterpolationRequest::new(a, b, f).unwrap();
        let v = |t| apply_trajectory(&before, &t, &p).unwrap().value_after;
        let one = v(one_step_trajectory(&req).unwrap());
        let lin = v(linear_trajectory(&req).unwrap());
        let approx = v(approx_optimal_trajectory(&req).unwrap());
        prop_assert!(one <= lin * (1.0 + 1e-14), "one-step {one} > linear {lin}");
        prop_assert!(lin <= approx * (1.0 + 1e-14), "linear {lin} > approx {approx}");
    }
}
