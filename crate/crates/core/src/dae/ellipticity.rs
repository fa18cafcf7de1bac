//! Sampling check of E-ellipticity: convexity and coercivity of
//! `φ_ω(x) = (ω/2)‖E x‖² + φ(x)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EllipticFunctional, LinearMapE, Vector};
use crate::sampling::standard_normal_vector;

/// Optional quantitative coercivity bound `φ_ω(x) ≥ c · norm_sq(x)`.
pub struct LowerBound<'a> {
    pub c: f64,
    pub norm_sq: &'a dyn Fn(&Vector) -> f64,
}

pub struct EllipticityProbe<'a> {
    pub omega: f64,
    pub samples: usize,
    pub seed: u64,
    /// Standard deviation of the sampled points.
    pub scale: f64,
    pub lower_bound: Option<LowerBound<'a>>,
}

impl EllipticityProbe<'_> {
    pub fn new(omega: f64, samples: usize) -> Self {
        Self { omega, samples, seed: 0, scale: 1.0, lower_bound: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticityReport {
    pub pass: bool,
    pub samples: usize,
    /// Index and defect `φ_ω(mid) − mean` of the first convexity violation.
    pub convexity_violation: Option<(usize, f64)>,
    /// Index of the first direction along which `φ_ω` failed to grow.
    pub coercivity_violation: Option<usize>,
    /// Smallest observed `φ_ω(x) / norm_sq(x)` when a lower bound was requested.
    pub min_bound_ratio: Option<f64>,
    pub bound_violation: Option<usize>,
}

const RADII: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

pub fn check_e_ellipticity(
    phi: &dyn EllipticFunctional,
    e: &dyn LinearMapE,
    probe: &EllipticityProbe<'_>,
) -> EllipticityReport {
    assert!(probe.samples >= 1, "at least one sample");
    let n = phi.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    let shifted = |x: &Vector| 0.5 * probe.omega * e.apply(x).norm_squared() + phi.value(x);

    let mut report = EllipticityReport {
        pass: true,
        samples: probe.samples,
        convexity_violation: None,
        coercivity_violation: None,
        min_bound_ratio: None,
        bound_violation: None,
    };

    for s in 0..probe.samples {
        let x = standard_normal_vector(&mut rng, n) * probe.scale;
        let y = standard_normal_vector(&mut rng, n) * probe.scale;
        let fx = shifted(&x);
        let fy = shifted(&y);
        let fm = shifted(&((&x + &y) * 0.5));
        let mean = 0.5 * (fx + fy);
        let defect = fm - mean;
        if defect > 1e-12 * (1.0 + mean.abs()) && report.convexity_violation.is_none() {
            report.convexity_violation = Some((s, defect));
        }

        let mut d = standard_normal_vector(&mut rng, n);
        let norm = d.norm();
        if norm > 0.0 {
            d /= norm;
        }
        let f0 = shifted(&Vector::zeros(n));
        let vals: Vec<f64> = RADII.iter().map(|r| shifted(&(&d * *r))).collect();
        let increasing = vals.windows(2).skip(1).all(|w| w[1] > w[0]) && vals[1] > f0;
        let grows = vals[3] - f0 >= 10.0 * (vals[1] - f0);
        if !(increasing && grows) && report.coercivity_violation.is_none() {
            report.coercivity_violation = Some(s);
        }

        if let Some(lb) = &probe.lower_bound {
            let nx = (lb.norm_sq)(&x);
            if nx > 0.0 {
                let ratio = fx / nx;
                let slack = fx - lb.c * nx;
                report.min_bound_ratio = Some(report.min_bound_ratio.map_or(ratio, |m: f64| m.min(ratio)));
                if slack < -1e-10 * (1.0 + fx.abs()) && report.bound_violation.is_none() {
                    report.bound_violation = Some(s);
                }
            }
        }
    }
    report.pass = report.convexity_violation.is_none()
        && report.coercivity_violation.is_none()
        && report.bound_violation.is_none();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{DenseMap, FnFunctional};
    use nalgebra::dmatrix;

    #[test]
    fn quartic_is_elliptic_without_shift() {
        let phi = FnFunctional::new(1, |x| x[0].powi(4), |x| x.map(|v| 4.0 * v.powi(3)));
        let e = DenseMap(dmatrix![1.0]);
        assert!(check_e_ellipticity(&phi, &e, &EllipticityProbe::new(0.0, 50)).pass);
    }

    #[test]
    fn concave_needs_large_enough_shift() {
        let phi = FnFunctional::new(1, |x| -x[0] * x[0], |x| x * -2.0);
        let e = DenseMap(dmatrix![1.0]);
        let weak = check_e_ellipticity(&phi, &e, &EllipticityProbe::new(1.0, 50));
        assert!(!weak.pass);
        assert!(weak.convexity_violation.is_some());
        let strong = check_e_ellipticity(&phi, &e, &EllipticityProbe::new(3.0, 50));
        assert!(strong.pass, "{strong:?}");
    }

    #[test]
    fn linear_functional_is_not_coercive() {
        let phi = FnFunctional::new(2, |x| x[0] + x[1], |_| Vector::from_element(2, 1.0));
        let e = DenseMap(dmatrix![0.0, 0.0]);
        let r = check_e_ellipticity(&phi, &e, &EllipticityProbe::new(0.0, 20));
        assert!(r.convexity_violation.is_none());
        assert!(r.coercivity_violation.is_some());
        assert!(!r.pass);
    }
}
