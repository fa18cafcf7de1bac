use nalgebra::DVector;

use super::{initial_field, manufactured_loads, MqsConfig, MqsError, MqsOperators};
use crate::dae::{
    damped_newton, solve_trajectory_loaded, DaeError, InitialGuess, NewtonObjective, NewtonSettings, ProxConfig,
    Vector,
};
use crate::linalg::SymMatrix;

/// Discrete field–circuit trajectory on `t_k = kτ`.
///
/// The scheme does not define a current at `t_0`, so `currents[0]` and
/// `balance[0]` are `None`.
#[derive(Debug, Clone)]
pub struct MqsTrajectory {
    pub tau: f64,
    pub times: Vec<f64>,
    pub fields: Vec<Vector>,
    pub currents: Vec<Option<DVector<f64>>>,
    /// `v(t_k)`; index 0 holds `v(0)` for reference only.
    pub voltages: Vec<DVector<f64>>,
    pub fluxes: Vec<DVector<f64>>,
    pub energies: Vec<f64>,
    /// Per-step power-balance defect `δ_k`.
    pub balance: Vec<Option<f64>>,
    pub newton_iterations: Vec<usize>,
    /// Extra field-equation sources `g_k` (index `k−1`), manufactured runs only.
    pub loads: Option<Vec<Vector>>,
}

impl MqsTrajectory {
    pub fn n_steps(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn m(&self) -> usize {
        self.fluxes[0].len()
    }

    pub fn current(&self, k: usize) -> &DVector<f64> {
        self.currents[k].as_ref().expect("currents are defined for k ≥ 1")
    }
}

fn prox_config(config: &MqsConfig) -> ProxConfig {
    ProxConfig {
        newton_tol: config.newton_tol,
        newton_max_iter: config.newton_max_iter,
        initial_guess: config.initial_guess,
        ..ProxConfig::new(config.tau, config.n_steps())
    }
}

/// Builds the system and integrates from the configured initial field.
pub fn solve(config: &MqsConfig) -> Result<(MqsOperators, MqsTrajectory), MqsError> {
    let ops = super::build_system(config)?;
    let a0 = initial_field(config, &ops)?;
    let traj = solve_from(&ops, config, &a0)?;
    Ok((ops, traj))
}

/// Integrates the assembled system from `a0`.
pub fn solve_from(ops: &MqsOperators, config: &MqsConfig, a0: &Vector) -> Result<MqsTrajectory, MqsError> {
    let n = config.n_steps();
    let tau = config.tau;
    let cfg = prox_config(config);
    let e = ops.e_map();
    let phi = ops.energy();
    let volts = config.voltage.samples(tau, n);
    let zf = e.field_part_len();
    let f: Vec<Vector> = volts
        .iter()
        .map(|v| {
            let mut z = DVector::zeros(zf + v.len());
            z.rows_mut(zf, v.len()).copy_from(&(&ops.r_inv_sqrt * v));
            z
        })
        .collect();
    let loads = if config.manufactured_forcing { Some(manufactured_loads(ops, tau, n)?) } else { None };
    let dae = solve_trajectory_loaded(&phi, &e, a0, &f, loads.as_deref(), &cfg)?;

    let mut currents = vec![None];
    let mut voltages = vec![config.voltage.at(0.0)];
    let fluxes: Vec<DVector<f64>> = dae.states.iter().map(|a| ops.flux(a)).collect();
    for k in 1..=n {
        let rate = (&fluxes[k] - &fluxes[k - 1]) / tau;
        currents.push(Some(&ops.r_inv * (&volts[k - 1] - rate)));
        voltages.push(volts[k - 1].clone());
    }
    let mut traj = MqsTrajectory {
        tau,
        times: dae.times,
        fields: dae.states,
        currents,
        voltages,
        fluxes,
        energies: dae.energies,
        balance: Vec::new(),
        newton_iterations: dae.newton_iterations,
        loads,
    };
    traj.balance = balance_residuals(ops, &traj);
    Ok(traj)
}

/// `δ_k = E(a_k) − E(a_{k−1}) − τ(i_k·v_k − i_kᵀ R i_k − σ_C‖(a_k − a_{k−1})/τ‖²_{Ω_C})`.
pub fn balance_residuals(ops: &MqsOperators, traj: &MqsTrajectory) -> Vec<Option<f64>> {
    let tau = traj.tau;
    let mut out = vec![None];
    for k in 1..=traj.n_steps() {
        let i = traj.current(k);
        let da = (&traj.fields[k] - &traj.fields[k - 1]) / tau;
        let power = i.dot(&traj.voltages[k]) - i.dot(&(&ops.r * i)) - ops.m_sigma.quad_form(&da);
        out.push(Some(traj.energies[k] - traj.energies[k - 1] - tau * power));
    }
    out
}

/// `1 + max_k (‖a_k‖_{K_lin} + |i_k|)`, the reference magnitude for tolerances.
pub fn tolerance_scale(ops: &MqsOperators, traj: &MqsTrajectory) -> f64 {
    let mut s: f64 = 0.0;
    for k in 0..=traj.n_steps() {
        let i = traj.currents[k].as_ref().map_or(0.0, |i| i.norm());
        s = s.max(ops.k_norm(&traj.fields[k]) + i);
    }
    1.0 + s
}

struct SchurObjective<'a> {
    ops: &'a MqsOperators,
    a_prev: &'a Vector,
    /// `C R⁻¹ v_k` (plus any extra source).
    rhs: Vector,
    inv_tau: f64,
    /// `M_σ + C R⁻¹ Cᵀ`.
    s: SymMatrix,
}

impl NewtonObjective for SchurObjective<'_> {
    fn value(&self, a: &Vector) -> f64 {
        let d = a - self.a_prev;
        self.ops.space.energy(&self.ops.model, a) + 0.5 * self.inv_tau * d.dot(&self.s.mul_vec(&d)) - d.dot(&self.rhs)
    }
    fn gradient(&self, a: &Vector) -> Vector {
        let d = a - self.a_prev;
        self.ops.curlcurl(a) + self.s.mul_vec(&d) * self.inv_tau - &self.rhs
    }
    fn hessian(&self, a: &Vector) -> SymMatrix {
        SymMatrix::Banded(self.ops.tangent(a)).add_scaled(self.inv_tau, &self.s)
    }
}

/// One step of the current-eliminated field equation
/// `((M_σ + C R⁻¹ Cᵀ)/τ)(a_k − a_prev) + K(a_k) = C R⁻¹ v_k (+ g_k)`.
pub fn schur_step(
    ops: &MqsOperators,
    a_prev: &Vector,
    v_k: &DVector<f64>,
    load: Option<&Vector>,
    tau: f64,
    settings: &NewtonSettings,
    initial_guess: InitialGuess,
) -> Result<Vector, DaeError> {
    if !(tau > 0.0) {
        return Err(DaeError::InvalidConfig(format!("tau must be positive, got {tau}")));
    }
    let mut rhs = &ops.c * (&ops.r_inv * v_k);
    if let Some(g) = load {
        rhs += g;
    }
    let s = SymMatrix::LowRankUpdate {
        base: Box::new(SymMatrix::Banded(ops.m_sigma.clone())),
        u: ops.c.clone(),
        w: ops.r_inv.clone(),
    };
    let obj = SchurObjective { ops, a_prev, rhs, inv_tau: 1.0 / tau, s };
    let start = match initial_guess {
        InitialGuess::Previous => a_prev.clone(),
        InitialGuess::Zero => Vector::zeros(a_prev.len()),
    };
    Ok(damped_newton(&obj, start, settings)?.x)
}

/// Basis-tested residuals of both equations, `k = 1..=N` (index `k−1`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeakResidualReport {
    /// `max_i |(M_σ Δa_k)_i/τ + K(a_k)_i − (C i_k)_i|`.
    pub field: Vec<f64>,
    /// `‖CᵀΔa_k/τ + R i_k − v_k‖`.
    pub circuit: Vec<f64>,
    pub max_field: f64,
    pub max_circuit: f64,
}

impl WeakResidualReport {
    pub fn max(&self) -> f64 {
        self.max_field.max(self.max_circuit)
    }
}

pub fn check_weak_solution(ops: &MqsOperators, traj: &MqsTrajectory) -> WeakResidualReport {
    let tau = traj.tau;
    let mut field = Vec::with_capacity(traj.n_steps());
    let mut circuit = Vec::with_capacity(traj.n_steps());
    for k in 1..=traj.n_steps() {
        let i = traj.current(k);
        let da = &traj.fields[k] - &traj.fields[k - 1];
        let mut r1 = ops.m_sigma.mul_vec(&da) / tau + ops.curlcurl(&traj.fields[k]) - &ops.c * i;
        if let Some(g) = &traj.loads {
            r1 -= &g[k - 1];
        }
        let r2 = ops.c.transpose() * &da / tau + &ops.r * i - &traj.voltages[k];
        field.push(r1.amax());
        circuit.push(r2.norm());
    }
    let max_field = field.iter().copied().fold(0.0, f64::max);
    let max_circuit = circuit.iter().copied().fold(0.0, f64::max);
    WeakResidualReport { field, circuit, max_field, max_circuit }
}
