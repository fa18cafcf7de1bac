use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{asymptotic_order, observed_orders, window_ratios, DiagnosticsError, ExperimentResult};
use crate::dae::{InitialGuess, NewtonSettings, Vector};
use crate::material::Region;
use crate::mqs::{
    build_system, check_weak_solution, energy_bound_probe, gateaux_probe, initial_field, lipschitz_probe,
    monotonicity_probe, schur_step, solve_from, tolerance_scale, InitialField, MqsConfig, MqsOperators,
    MqsTrajectory,
};
use crate::sampling::uniform_vector;

/// Per-step power-balance defects and their running sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBalanceSeries {
    /// `t_k`, `k = 1..=N`.
    pub times: Vec<f64>,
    pub delta: Vec<f64>,
    /// `Σ_{j ≤ k} δ_j`.
    pub cumulative: Vec<f64>,
}

impl PowerBalanceSeries {
    pub fn max_abs(&self) -> f64 {
        self.delta.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// `|Σ_{t0 < t_k ≤ t1} δ_k|`.
    pub fn defect_over(&self, t0: f64, t1: f64) -> f64 {
        let eps = 1e-12 * t1.abs().max(1.0);
        self.times
            .iter()
            .zip(&self.delta)
            .filter(|(t, _)| **t > t0 + eps && **t <= t1 + eps)
            .map(|(_, d)| d)
            .sum::<f64>()
            .abs()
    }
}

pub fn power_balance_series(traj: &MqsTrajectory) -> PowerBalanceSeries {
    let delta: Vec<f64> = traj.balance[1..].iter().map(|d| d.expect("defined for k ≥ 1")).collect();
    let mut acc = 0.0;
    let cumulative = delta
        .iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect();
    PowerBalanceSeries { times: traj.times[1..].to_vec(), delta, cumulative }
}

fn run(config: &MqsConfig) -> Result<(MqsOperators, MqsTrajectory), DiagnosticsError> {
    let ops = build_system(config)?;
    let a0 = initial_field(config, &ops)?;
    let traj = solve_from(&ops, config, &a0)?;
    Ok((ops, traj))
}

fn tau_levels(config: &MqsConfig, tau0: f64, levels: usize) -> Vec<MqsConfig> {
    (0..levels).map(|l| MqsConfig { tau: tau0 / f64::powi(2.0, l as i32), ..config.clone() }).collect()
}

/// `max_k |δ_k|` under τ-halving from `tau0`. For a linear material the
/// defect over `[T/2, T]` at the finest level is reported as well.
pub fn power_balance_study(config: &MqsConfig, tau0: f64, levels: usize) -> Result<ExperimentResult, DiagnosticsError> {
    if levels < 3 {
        return Err(DiagnosticsError::InsufficientLevels { levels });
    }
    let mut res = ExperimentResult::new("power_balance", "observed order of max_k |δ_k| ≥ 0.9");
    let mut maxima = Vec::new();
    let mut last = None;
    for (l, cfg) in tau_levels(config, tau0, levels).iter().enumerate() {
        let (_, traj) = run(cfg)?;
        let s = power_balance_series(&traj);
        res.measure(&format!("max_delta_l{l}"), s.max_abs());
        maxima.push(s.max_abs());
        last = Some(s);
    }
    for (l, o) in observed_orders(&maxima).iter().enumerate() {
        res.measure(&format!("order_l{l}"), *o);
    }
    let order = asymptotic_order(&maxima);
    res.measure("order", order);
    res.pass = order >= 0.9;
    if config.material.is_linear() {
        let s = last.expect("levels ≥ 3");
        let d = s.defect_over(0.5 * config.t_end, config.t_end);
        res.measure("late_window_defect", d);
        res.criterion.push_str("; linear material: |Σ δ_k| over [T/2, T] ≤ 1e-3 at the finest level");
        res.pass &= d <= 1e-3;
    }
    Ok(res)
}

/// Basis-tested residuals of a single run against `10·newton_tol·scale`.
pub fn weak_residual_experiment(config: &MqsConfig) -> Result<ExperimentResult, DiagnosticsError> {
    let (ops, traj) = run(config)?;
    let rep = check_weak_solution(&ops, &traj);
    let scale = tolerance_scale(&ops, &traj);
    let bound = 10.0 * config.newton_tol * scale;
    let mut res = ExperimentResult::new("weak_residual", "max_k residual ≤ 10·newton_tol·scale for k ≥ 1");
    res.measure("max_field_residual", rep.max_field)
        .measure("max_circuit_residual", rep.max_circuit)
        .measure("scale", scale)
        .measure("bound", bound);
    res.pass = rep.max() <= bound;
    Ok(res)
}

/// Re-solves every step of the prox trajectory through the current-eliminated
/// equation from the same previous field.
pub fn schur_equivalence(config: &MqsConfig) -> Result<ExperimentResult, DiagnosticsError> {
    let (ops, traj) = run(config)?;
    let scale = tolerance_scale(&ops, &traj);
    let settings = NewtonSettings { tol: config.newton_tol, max_iter: config.newton_max_iter, ..NewtonSettings::default() };
    let mut max_diff: f64 = 0.0;
    for k in 1..=traj.n_steps() {
        let load = traj.loads.as_ref().map(|g| &g[k - 1]);
        let a = schur_step(&ops, &traj.fields[k - 1], &traj.voltages[k], load, traj.tau, &settings, config.initial_guess)
            .map_err(crate::mqs::MqsError::from)?;
        max_diff = max_diff.max((&a - &traj.fields[k]).norm());
    }
    let mut res = ExperimentResult::new("schur_equivalence", "max_k ‖a_k(schur) − a_k(prox)‖ ≤ 1e-10·scale");
    res.measure("max_difference", max_diff).measure("scale", scale).measure("steps", traj.n_steps() as f64);
    res.pass = max_diff <= 1e-10 * scale;
    Ok(res)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    /// Same data; Newton started from zero with a 100× tighter tolerance.
    Uniqueness,
    /// `A0' = A0 + w` with `M_σ w = 0` and `Cᵀ w = 0`.
    Initializability,
    /// `A0' = A0 + w` with `Cᵀ w ≠ 0`: genuinely different initial data.
    Adversarial,
}

impl PerturbationKind {
    fn name(self) -> &'static str {
        match self {
            PerturbationKind::Uniqueness => "uniqueness",
            PerturbationKind::Initializability => "initializability",
            PerturbationKind::Adversarial => "initializability_adversarial",
        }
    }
}

/// Random dof vector vanishing on every vertex of a conducting triangle,
/// projected onto the orthogonal complement of the columns of `C`.
fn invisible_perturbation(ops: &MqsOperators, seed: u64, amplitude: f64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
    let mut w = uniform_vector(&mut rng, ops.n_dofs(), amplitude);
    for el in &ops.space.elements {
        if el.region == Region::Conductor {
            for d in el.dofs.iter().flatten() {
                w[*d] = 0.0;
            }
        }
    }
    project_out_columns(&w, &ops.c)
}

fn project_out_columns(w: &Vector, c: &DMatrix<f64>) -> Vector {
    let svd = c.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let mut out = w.clone();
    for (j, s) in svd.singular_values.iter().enumerate() {
        if *s > 1e-12 * smax {
            let col = u.column(j);
            out -= col * col.dot(w);
        }
    }
    out
}

fn max_discrepancy(ops: &MqsOperators, a: &MqsTrajectory, b: &MqsTrajectory) -> (f64, f64) {
    let mut field: f64 = 0.0;
    let mut current: f64 = 0.0;
    for k in 1..=a.n_steps() {
        field = field.max(ops.k_norm(&(&a.fields[k] - &b.fields[k])));
        current = current.max((a.current(k) - b.current(k)).norm());
    }
    (field, current)
}

/// Paired solves; `pass` iff `max_k (‖A_k − A'_k‖_{K_lin} + |i_k − i'_k|) ≤ 100·newton_tol·scale`.
pub fn perturbation_experiment(config: &MqsConfig, kind: PerturbationKind) -> Result<ExperimentResult, DiagnosticsError> {
    let ops = build_system(config)?;
    let a0 = initial_field(config, &ops)?;
    let base = solve_from(&ops, config, &a0)?;
    let scale = tolerance_scale(&ops, &base);
    let mut res = ExperimentResult::new(kind.name(), "max_k ‖A_k − A'_k‖_{K_lin} + |i_k − i'_k| ≤ 100·newton_tol·scale");
    let other = match kind {
        PerturbationKind::Uniqueness => {
            let cfg = MqsConfig { initial_guess: InitialGuess::Zero, newton_tol: 1e-2 * config.newton_tol, ..config.clone() };
            solve_from(&ops, &cfg, &a0)?
        }
        PerturbationKind::Initializability => {
            let w = invisible_perturbation(&ops, config.seed, 0.05);
            res.measure("w_norm", ops.k_norm(&w))
                .measure("sigma_mass_of_w", ops.m_sigma.mul_vec(&w).amax())
                .measure("flux_of_w", ops.flux(&w).amax());
            solve_from(&ops, config, &(&a0 + w))?
        }
        PerturbationKind::Adversarial => {
            let col = ops.c.column(0).into_owned();
            let w = &col / col.amax().max(f64::MIN_POSITIVE) * 0.05;
            res.measure("flux_of_w", ops.flux(&w).amax());
            solve_from(&ops, config, &(&a0 + w))?
        }
    };
    let (field, current) = max_discrepancy(&ops, &base, &other);
    let bound = 100.0 * config.newton_tol * scale;
    res.measure("field_discrepancy", field).measure("current_discrepancy", current).measure("scale", scale).measure("bound", bound);
    res.pass = field + current <= bound;
    Ok(res)
}

/// Time-weighted monitors from a rough random `A0`, and unweighted ones from
/// `A0 = 0`, under τ-halving; `pass` iff every windowed successive ratio is ≤ 1.1.
pub fn regularity_study(config: &MqsConfig, tau0: f64, levels: usize) -> Result<ExperimentResult, DiagnosticsError> {
    if levels < 3 {
        return Err(DiagnosticsError::InsufficientLevels { levels });
    }
    let mut res = ExperimentResult::new("regularity", "windowed successive ratios of W1, S1 (rough A0) and W0, I0 (A0 = 0) ≤ 1.1");
    let rough = MqsConfig { a0: InitialField::Random { amplitude: 1.0 }, ..config.clone() };
    let smooth = MqsConfig { a0: InitialField::Zero, ..config.clone() };
    let (mut w1, mut s1, mut w0, mut i0) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for cfg in tau_levels(&rough, tau0, levels) {
        let (ops, traj) = run(&cfg)?;
        let (w, s, _, _) = monitors(&ops, &traj);
        w1.push(w);
        s1.push(s);
    }
    for cfg in tau_levels(&smooth, tau0, levels) {
        let (ops, traj) = run(&cfg)?;
        let (_, _, w, i) = monitors(&ops, &traj);
        w0.push(w);
        i0.push(i);
    }
    let mut worst: f64 = 0.0;
    for (name, vals) in [("W1", &w1), ("S1", &s1), ("W0", &w0), ("I0", &i0)] {
        for (l, v) in vals.iter().enumerate() {
            res.measure(&format!("{name}_l{l}"), *v);
        }
        let r = window_ratios(vals).into_iter().fold(0.0, f64::max);
        res.measure(&format!("{name}_max_ratio"), r);
        worst = worst.max(r);
    }
    res.pass = worst <= 1.1;
    Ok(res)
}

/// `(Σ τ t_k ‖r_k‖², max t_k E(A_k), Σ τ ‖r_k‖², Σ τ |i_k|²)` with
/// `‖r_k‖² = ‖E(A_k − A_{k−1})‖²/τ²`.
fn monitors(ops: &MqsOperators, traj: &MqsTrajectory) -> (f64, f64, f64, f64) {
    let tau = traj.tau;
    let (mut w1, mut w0, mut i0) = (0.0, 0.0, 0.0);
    for k in 1..=traj.n_steps() {
        let d = (&traj.fields[k] - &traj.fields[k - 1]) / tau;
        let cd = ops.c.transpose() * &d;
        let r2 = ops.m_sigma.quad_form(&d) + cd.dot(&(&ops.r_inv * &cd));
        w1 += tau * traj.times[k] * r2;
        w0 += tau * r2;
        i0 += tau * traj.current(k).norm_squared();
    }
    let s1 = traj.times.iter().zip(&traj.energies).map(|(t, e)| t * e).fold(0.0, f64::max);
    (w1, s1, w0, i0)
}

/// Monotonicity, energy bounds, Lipschitz estimate, Gâteaux consistency and
/// the coercivity bound on the configured system.
pub fn probe_suite(config: &MqsConfig) -> Result<Vec<ExperimentResult>, DiagnosticsError> {
    let ops = build_system(config)?;
    let seed = config.seed;
    let mut out = Vec::new();

    let m = monotonicity_probe(&ops, 200, seed.wrapping_add(42));
    let mut r = ExperimentResult::new("monotonicity", "min ⟨a−b, K(a)−K(b)⟩ / (m̂‖a−b‖²_{K_lin}) ≥ 1 − 1e-10");
    r.measure("min_ratio", m.min_ratio).measure("pairs", m.pairs as f64).measure("trivial_pairs", m.trivial as f64);
    r.pass = m.min_ratio >= 1.0 - 1e-10;
    out.push(r);

    let e = energy_bound_probe(&ops, 200, seed.wrapping_add(1));
    let l = lipschitz_probe(&ops, 200, seed.wrapping_add(2));
    let mut r = ExperimentResult::new("energy_bounds", "two-sided energy bound and Lipschitz estimate, slack ≥ −1e-10");
    r.measure("min_lower_slack", e.min_lower_slack)
        .measure("min_upper_slack", e.min_upper_slack)
        .measure("min_lipschitz_slack", l.min_slack);
    r.pass = e.pass(1e-10) && l.min_slack >= -1e-10;
    out.push(r);

    let g = gateaux_probe(&ops, 50, 1e-6, seed.wrapping_add(3));
    let mut r = ExperimentResult::new("gateaux", "central differences vs ⟨Dφ, v⟩, relative error ≤ 1e-6");
    r.measure("max_rel_error", g.max_rel_error);
    r.pass = g.max_rel_error <= 1e-6;
    out.push(r);

    out.push(coercivity_bound(&ops, 100, seed.wrapping_add(4)));
    Ok(out)
}

/// `E_1(a) = φ(a) + ½‖E a‖² ≥ c ‖a‖²_{L²}` on random fields.
fn coercivity_bound(ops: &MqsOperators, samples: usize, seed: u64) -> ExperimentResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    for s in 0..samples {
        let amp = 10f64.powi(s as i32 % 4 - 2);
        let a = uniform_vector(&mut rng, ops.n_dofs(), amp);
        let ca = ops.c.transpose() * &a;
        let e_omega = crate::mqs::mqs_energy(ops, &a) + 0.5 * (ops.m_sigma.quad_form(&a) + ca.dot(&(&ops.r_inv * &ca)));
        min_ratio = min_ratio.min(e_omega / (ops.certified_c * ops.mass.quad_form(&a)));
    }
    let mut r = ExperimentResult::new("coercivity", "E_1(a) ≥ c‖a‖² with c = min{m̂, σ_C}/(2 L_C) on random fields");
    r.measure("c", ops.certified_c).measure("l_c", ops.coercivity.l_c).measure("min_ratio", min_ratio);
    r.pass = min_ratio >= 1.0;
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn small() -> MqsConfig {
        MqsConfig { n: 16, t_end: 0.5, ..MqsConfig::default() }
    }

    #[test]
    fn zero_trajectory_has_no_defect() {
        let cfg = MqsConfig { voltage: crate::mqs::VoltageSignal::Constant(DVector::zeros(1)), ..small() };
        let (_, traj) = run(&cfg).unwrap();
        let s = power_balance_series(&traj);
        assert!(s.delta.iter().all(|d| *d == 0.0));
        assert_eq!(s.defect_over(0.0, 0.5), 0.0);
    }

    #[test]
    fn too_few_levels() {
        assert_eq!(
            power_balance_study(&small(), 0.125, 2).unwrap_err(),
            DiagnosticsError::InsufficientLevels { levels: 2 }
        );
    }

    #[test]
    fn invisible_perturbation_is_invisible() {
        let ops = build_system(&small()).unwrap();
        let w = invisible_perturbation(&ops, 7, 0.05);
        assert!(ops.m_sigma.mul_vec(&w).amax() == 0.0);
        assert!(ops.flux(&w).amax() < 1e-15);
        assert!(w.amax() > 0.01);
    }

    #[test]
    fn perturbation_kinds() {
        let cfg = small();
        assert!(perturbation_experiment(&cfg, PerturbationKind::Uniqueness).unwrap().pass);
        assert!(perturbation_experiment(&cfg, PerturbationKind::Initializability).unwrap().pass);
        assert!(!perturbation_experiment(&cfg, PerturbationKind::Adversarial).unwrap().pass);
    }
}
