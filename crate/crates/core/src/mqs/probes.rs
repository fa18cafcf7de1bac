//! Sampled checks of the structural inequalities of the discrete energy.
//!
//! Random fields have uniform dof values with a log-uniform amplitude so that
//! element gradients range from the linear regime (`|∇a| ≪ 1`) to deep
//! saturation (`|∇a| ≈ 10`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mqs_energy, MqsOperators};
use crate::dae::Vector;
use crate::sampling::uniform_vector;

fn random_field(rng: &mut ChaCha8Rng, ops: &MqsOperators) -> Vector {
    let h = 1.0 / ops.space.mesh.n.max(1) as f64;
    let amp = h * 10f64.powf(rng.random_range(-2.0..1.0));
    uniform_vector(rng, ops.n_dofs(), amp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub pairs: usize,
    /// Pairs with `a = b`, where both sides vanish.
    pub trivial: usize,
    /// `min ⟨a−b, K(a)−K(b)⟩ / (m̂ ‖a−b‖²_{K_lin})` over non-trivial pairs.
    pub min_ratio: f64,
    /// Pairs where `⟨a−b, K(a)−K(b)⟩ < m̂ ‖a−b‖²_{K_lin} − 1e−10`.
    pub violations: usize,
}

impl MonotonicityReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

/// Strong monotonicity of `K` with constant `m̂`. Every fifth pair is `a = b`.
pub fn monotonicity_probe(ops: &MqsOperators, n_pairs: usize, seed: u64) -> MonotonicityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = MonotonicityReport { pairs: n_pairs, trivial: 0, min_ratio: f64::INFINITY, violations: 0 };
    for p in 0..n_pairs {
        let a = random_field(&mut rng, ops);
        let b = if p % 5 == 4 { a.clone() } else { random_field(&mut rng, ops) };
        let d = &a - &b;
        let lhs = d.dot(&(ops.curlcurl(&a) - ops.curlcurl(&b)));
        let rhs = ops.m_hat * ops.k_lin.quad_form(&d);
        if rhs == 0.0 {
            rep.trivial += 1;
            continue;
        }
        rep.min_ratio = rep.min_ratio.min(lhs / rhs);
        if lhs < rhs - 1e-10 {
            rep.violations += 1;
        }
    }
    rep
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBoundReport {
    pub samples: usize,
    /// `min φ(a) − (m̂/2)‖a‖²_{K_lin}`.
    pub min_lower_slack: f64,
    /// `min (L̂/2)‖a‖²_{K_lin} − φ(a)`.
    pub min_upper_slack: f64,
}

impl EnergyBoundReport {
    pub fn pass(&self, tol: f64) -> bool {
        self.min_lower_slack >= -tol && self.min_upper_slack >= -tol
    }
}

/// `(m̂/2) aᵀK_lin a ≤ φ(a) ≤ (L̂/2) aᵀK_lin a`.
pub fn energy_bound_probe(ops: &MqsOperators, samples: usize, seed: u64) -> EnergyBoundReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = EnergyBoundReport { samples, min_lower_slack: f64::INFINITY, min_upper_slack: f64::INFINITY };
    for _ in 0..samples {
        let a = random_field(&mut rng, ops);
        let q = ops.k_lin.quad_form(&a);
        let e = mqs_energy(ops, &a);
        rep.min_lower_slack = rep.min_lower_slack.min(e - 0.5 * ops.m_hat * q);
        rep.min_upper_slack = rep.min_upper_slack.min(0.5 * ops.l_hat * q - e);
    }
    rep
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub pairs: usize,
    /// `min (L̂/2)(‖a‖+‖b‖)‖a−b‖ − |φ(a)−φ(b)|`, norms in `K_lin`.
    pub min_slack: f64,
}

pub fn lipschitz_probe(ops: &MqsOperators, pairs: usize, seed: u64) -> LipschitzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    for p in 0..pairs {
        let a = random_field(&mut rng, ops);
        // alternate far pairs with nearby ones, where the bound is tighter
        let b = if p % 2 == 0 {
            random_field(&mut rng, ops)
        } else {
            let pert = random_field(&mut rng, ops) * 1e-2;
            &a + pert
        };
        let bound = 0.5 * ops.l_hat * (ops.k_norm(&a) + ops.k_norm(&b)) * ops.k_norm(&(&a - &b));
        min_slack = min_slack.min(bound - (mqs_energy(ops, &a) - mqs_energy(ops, &b)).abs());
    }
    LipschitzReport { pairs, min_slack }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateauxReport {
    pub samples: usize,
    pub h: f64,
    /// `max |(φ(a+hv) − φ(a−hv))/(2h) − ⟨Dφ(a), v⟩| / |⟨Dφ(a), v⟩|`.
    pub max_rel_error: f64,
}

pub fn gateaux_probe(ops: &MqsOperators, samples: usize, h: f64, seed: u64) -> GateauxReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_error: f64 = 0.0;
    for _ in 0..samples {
        let a = random_field(&mut rng, ops);
        let v = random_field(&mut rng, ops);
        let v = &v / v.amax();
        let exact = ops.curlcurl(&a).dot(&v);
        let fd = (mqs_energy(ops, &(&a + &v * h)) - mqs_energy(ops, &(&a - &v * h))) / (2.0 * h);
        max_rel_error = max_rel_error.max((fd - exact).abs() / exact.abs());
    }
    GateauxReport { samples, h, max_rel_error }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::ReluctivityModel;
    use crate::mqs::{build_system, MqsConfig};

    #[test]
    fn constant_nu_ratio_is_one() {
        let ops = build_system(&MqsConfig { n: 16, material: ReluctivityModel::constant(2.0), ..MqsConfig::default() })
            .unwrap();
        let rep = monotonicity_probe(&ops, 20, 1);
        assert_eq!(rep.trivial, 4);
        assert!((rep.min_ratio - 1.0).abs() < 1e-12);
        assert!(rep.pass());
    }

    #[test]
    fn rational_saturation_probes() {
        let ops = build_system(&MqsConfig { n: 16, ..MqsConfig::default() }).unwrap();
        assert!(monotonicity_probe(&ops, 40, 42).min_ratio >= 1.0 - 1e-10);
        assert!(energy_bound_probe(&ops, 40, 1).pass(1e-10));
        assert!(lipschitz_probe(&ops, 40, 2).min_slack >= -1e-10);
        assert!(gateaux_probe(&ops, 10, 1e-6, 3).max_rel_error <= 1e-6);
    }
}
