use eddyflow::dae::{prox_step, DenseMap, EllipticFunctional, ProxConfig, QuadraticFunctional};
use eddyflow::material::{NuCurve, Region, ReluctivityModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn rational() -> ReluctivityModel {
    ReluctivityModel::rational_saturation(1.0, 5.0)
}

proptest! {
    // secant slopes of s ↦ ν(s)s stay in [m̂, L̂] = [1/2, 5]
    #[test]
    fn rational_secants_are_bounded(r in 0.0f64..100.0, s in 0.0f64..100.0) {
        prop_assume!((r - s).abs() > 1e-6);
        let m = rational();
        let h = |x: f64| m.eval(Region::Conductor, x).unwrap().nu * x;
        let q = (h(r) - h(s)) / (r - s);
        prop_assert!((0.5 - 1e-9..=5.0 + 1e-9).contains(&q), "q = {q}");
    }

    #[test]
    fn theta_is_convex_in_gradient(g0 in -20.0f64..20.0, g1 in -20.0f64..20.0, h0 in -20.0f64..20.0, h1 in -20.0f64..20.0, t in 0.0f64..1.0) {
        let m = rational();
        let w = |a: f64, b: f64| m.theta(Region::Insulator, a * a + b * b).unwrap();
        let mid = w(t * g0 + (1.0 - t) * h0, t * g1 + (1.0 - t) * h1);
        prop_assert!(mid <= t * w(g0, g1) + (1.0 - t) * w(h0, h1) + 1e-9 * (1.0 + mid.abs()));
    }

    #[test]
    fn tangent_matches_difference_quotient(g0 in -5.0f64..5.0, g1 in -5.0f64..5.0) {
        prop_assume!(g0.hypot(g1) > 1e-3);
        let m = rational();
        let flux = |a: f64, b: f64| {
            let nu = m.eval(Region::Conductor, a.hypot(b)).unwrap().nu;
            [nu * a, nu * b]
        };
        let t = m.tangent(Region::Conductor, [g0, g1]);
        let h = 1e-6;
        for j in 0..2 {
            let (dp, dm) = if j == 0 { (flux(g0 + h, g1), flux(g0 - h, g1)) } else { (flux(g0, g1 + h), flux(g0, g1 - h)) };
            for i in 0..2 {
                let fd = (dp[i] - dm[i]) / (2.0 * h);
                prop_assert!((fd - t[i][j]).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn constant_curve_is_linear(nu0 in 0.1f64..10.0, s in 0.0f64..50.0) {
        let m = ReluctivityModel::uniform(NuCurve::Constant { nu0 });
        let e = m.eval(Region::Conductor, s).unwrap();
        prop_assert_eq!(e.nu, nu0);
        prop_assert_eq!(e.d_nus_ds, nu0);
    }

    // the prox output is stationary for the step objective
    #[test]
    fn prox_step_is_stationary(
        q in prop::collection::vec(-1.0f64..1.0, 16),
        e in prop::collection::vec(-1.0f64..1.0, 8),
        xp in prop::collection::vec(-1.0f64..1.0, 4),
        f in prop::collection::vec(-1.0f64..1.0, 2),
        tau in 0.01f64..1.0,
    ) {
        let g = DMatrix::from_row_slice(4, 4, &q);
        let phi = QuadraticFunctional::new(&g * g.transpose(), DVector::from_element(4, 0.3));
        let em = DMatrix::from_row_slice(2, 4, &e);
        let x_prev = DVector::from_vec(xp);
        let f = DVector::from_vec(f);
        // a singular Q with a generic E can make J unbounded only along ker Q ∩ ker E
        let sum = phi.q.clone() + em.transpose() * &em;
        prop_assume!(sum.symmetric_eigenvalues().min() > 1e-3);
        let cfg = ProxConfig { newton_tol: 1e-12, ..ProxConfig::new(tau, 1) };
        let x = prox_step(&phi, &DenseMap(em.clone()), &x_prev, &f, &cfg).unwrap().x;
        let resid = phi.gradient(&x) + em.tr_mul(&(&em * (&x - &x_prev) / tau - &f));
        prop_assert!(resid.amax() < 1e-8 * (1.0 + x.amax() / tau), "residual {}", resid.amax());
    }
}
