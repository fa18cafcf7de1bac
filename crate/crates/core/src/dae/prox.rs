//! Implicit Euler as minimizing movements in the `E`-metric.
//!
//! One step from `x_prev` with input sample `f_k` minimizes
//!
//! ```text
//!     J(x) = φ(x) + (1/2τ) ‖E x − (E x_prev + τ f_k)‖²_Z
//! ```
//!
//! whose stationarity condition `Dφ(x) + E*(E x − E x_prev)/τ − E* f_k = 0`
//! is the backward-Euler form of the differential inclusion. Only `E x_prev`
//! enters the objective, so components of `x_prev` in `ker E` are forgotten
//! after the first step.

use super::newton::{damped_newton, NewtonObjective, NewtonSettings};
use super::{hessian_or_fd, DaeError, EllipticFunctional, LinearMapE, LoadedFunctional, Vector};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialGuess {
    /// Start Newton at the previous state.
    #[default]
    Previous,
    /// Start Newton at the origin.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxConfig {
    pub tau: f64,
    pub n_steps: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub initial_guess: InitialGuess,
}

impl ProxConfig {
    pub fn new(tau: f64, n_steps: usize) -> Self {
        Self {
            tau,
            n_steps,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            initial_guess: InitialGuess::Previous,
        }
    }

    /// Rejects non-positive steps and steps too large for the declared
    /// ellipticity shift (`ωτ < 1` keeps every step objective convex and coercive).
    pub fn validate(&self, omega: f64) -> Result<(), DaeError> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(DaeError::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if omega > 0.0 && self.tau * omega >= 1.0 {
            return Err(DaeError::InvalidConfig(format!(
                "tau = {} violates tau < 1/omega = {}",
                self.tau,
                1.0 / omega
            )));
        }
        if self.newton_max_iter == 0 || !(self.newton_tol > 0.0) {
            return Err(DaeError::InvalidConfig("Newton settings must be positive".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) || !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(DaeError::InvalidConfig("Armijo parameters must lie in (0,1)".into()));
        }
        Ok(())
    }

    pub fn newton_settings(&self) -> NewtonSettings {
        NewtonSettings {
            tol: self.newton_tol,
            max_iter: self.newton_max_iter,
            armijo_c: self.armijo_c,
            armijo_shrink: self.armijo_shrink,
        }
    }
}

struct StepObjective<'a> {
    phi: &'a dyn EllipticFunctional,
    e: &'a dyn LinearMapE,
    target: Vector,
    inv_tau: f64,
    gram: SymMatrix,
}

impl NewtonObjective for StepObjective<'_> {
    fn value(&self, x: &Vector) -> f64 {
        let d = self.e.apply(x) - &self.target;
        self.phi.value(x) + 0.5 * self.inv_tau * d.norm_squared()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        let d = self.e.apply(x) - &self.target;
        self.phi.gradient(x) + self.e.apply_adjoint(&d) * self.inv_tau
    }
    fn hessian(&self, x: &Vector) -> SymMatrix {
        hessian_or_fd(self.phi, x).add_scaled(self.inv_tau, &self.gram)
    }
}

#[derive(Debug, Clone)]
pub struct ProxOutcome {
    pub x: Vector,
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
}

/// One proximal (backward-Euler) step. See the module docs for the objective.
pub fn prox_step(
    phi: &dyn EllipticFunctional,
    e: &dyn LinearMapE,
    x_prev: &Vector,
    f_k: &Vector,
    config: &ProxConfig,
) -> Result<ProxOutcome, DaeError> {
    let gram = e.gram();
    prox_step_with_gram(phi, e, &gram, x_prev, f_k, config)
}

fn prox_step_with_gram(
    phi: &dyn EllipticFunctional,
    e: &dyn LinearMapE,
    gram: &SymMatrix,
    x_prev: &Vector,
    f_k: &Vector,
    config: &ProxConfig,
) -> Result<ProxOutcome, DaeError> {
    let tau = config.tau;
    if !(tau > 0.0) {
        return Err(DaeError::InvalidConfig(format!("tau must be positive, got {tau}")));
    }
    let target = e.apply(x_prev) + f_k * tau;
    let obj = StepObjective { phi, e, target, inv_tau: 1.0 / tau, gram: gram.clone() };
    let start = match config.initial_guess {
        InitialGuess::Previous => x_prev.clone(),
        InitialGuess::Zero => Vector::zeros(x_prev.len()),
    };
    let out = damped_newton(&obj, start, &config.newton_settings())?;
    Ok(ProxOutcome {
        x: out.x,
        iterations: out.iterations,
        initial_residual: out.initial_residual,
        final_residual: out.final_residual,
    })
}

/// How a time-continuous input is reduced to one sample per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputSampling {
    /// `f_k = f(t_k)`; for continuous inputs.
    #[default]
    RightEndpoint,
    /// `f_k = (1/τ)∫_{t_{k-1}}^{t_k} f`; for merely square-integrable inputs.
    IntervalAverage,
}

/// Samples `f` on the grid `t_k = kτ`, `k = 1..=n_steps`.
///
/// Interval averages use composite 5-point Gauss–Legendre quadrature on
/// eight subintervals per step.
pub fn sample_input(
    f: &dyn Fn(f64) -> Vector,
    tau: f64,
    n_steps: usize,
    mode: InputSampling,
) -> Vec<Vector> {
    const NODES: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];
    const SUB: usize = 8;
    (1..=n_steps)
        .map(|k| {
            let t1 = k as f64 * tau;
            match mode {
                InputSampling::RightEndpoint => f(t1),
                InputSampling::IntervalAverage => {
                    let t0 = t1 - tau;
                    let h = tau / SUB as f64;
                    let mut acc: Option<Vector> = None;
                    for s in 0..SUB {
                        let mid = t0 + (s as f64 + 0.5) * h;
                        for (xi, w) in NODES.iter().zip(WEIGHTS) {
                            let v = f(mid + 0.5 * h * xi) * (0.5 * w / SUB as f64);
                            acc = Some(match acc {
                                Some(a) => a + v,
                                None => v,
                            });
                        }
                    }
                    acc.expect("at least one quadrature node")
                }
            }
        })
        .collect()
}

/// Discrete trajectory `x_0, …, x_N` on `t_k = kτ`.
#[derive(Debug, Clone)]
pub struct DaeTrajectory {
    pub tau: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    /// `z_k = E x_k`.
    pub images: Vec<Vector>,
    /// `φ(x_k)`, without any per-step load.
    pub energies: Vec<f64>,
    pub newton_iterations: Vec<usize>,
}

impl DaeTrajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    /// `r_k = (z_k − z_{k−1})/τ` for `k ≥ 1`.
    pub fn rate(&self, k: usize) -> Vector {
        assert!(k >= 1, "rates start at k = 1");
        (&self.images[k] - &self.images[k - 1]) / self.tau
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }
}

/// Runs `n_steps` proximal steps from `x0` with input samples `f[k-1] = f_k`.
pub fn solve_trajectory(
    phi: &dyn EllipticFunctional,
    e: &dyn LinearMapE,
    x0: &Vector,
    f: &[Vector],
    config: &ProxConfig,
) -> Result<DaeTrajectory, DaeError> {
    solve_trajectory_loaded(phi, e, x0, f, None, config)
}

/// As [`solve_trajectory`], with an optional per-step linear load `g_k ∈ X`
/// subtracted from `φ` (step `k` minimizes `φ(x) − ⟨g_k, x⟩ + …`).
pub fn solve_trajectory_loaded(
    phi: &dyn EllipticFunctional,
    e: &dyn LinearMapE,
    x0: &Vector,
    f: &[Vector],
    loads: Option<&[Vector]>,
    config: &ProxConfig,
) -> Result<DaeTrajectory, DaeError> {
    config.validate(phi.ellipticity_omega())?;
    if f.len() != config.n_steps {
        return Err(DaeError::InvalidConfig(format!(
            "expected {} input samples, got {}",
            config.n_steps,
            f.len()
        )));
    }
    if let Some(g) = loads {
        if g.len() != config.n_steps {
            return Err(DaeError::InvalidConfig("load sequence length differs from n_steps".into()));
        }
    }
    if x0.len() != e.dim_x() || phi.dim() != e.dim_x() {
        return Err(DaeError::InvalidConfig("dimension mismatch between x0, φ and E".into()));
    }
    let gram = e.gram();
    let n = config.n_steps;
    let mut traj = DaeTrajectory {
        tau: config.tau,
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        images: Vec::with_capacity(n + 1),
        energies: Vec::with_capacity(n + 1),
        newton_iterations: Vec::with_capacity(n),
    };
    traj.times.push(0.0);
    traj.images.push(e.apply(x0));
    traj.energies.push(phi.value(x0));
    traj.states.push(x0.clone());
    for k in 1..=n {
        let prev = &traj.states[k - 1];
        let step = match loads {
            Some(g) => {
                let loaded = LoadedFunctional { inner: phi, load: &g[k - 1] };
                prox_step_with_gram(&loaded, e, &gram, prev, &f[k - 1], config)
            }
            None => prox_step_with_gram(phi, e, &gram, prev, &f[k - 1], config),
        }
        .map_err(|source| DaeError::AtStep { step: k, source: Box::new(source) })?;
        traj.times.push(k as f64 * config.tau);
        traj.images.push(e.apply(&step.x));
        traj.energies.push(phi.value(&step.x));
        traj.states.push(step.x);
        traj.newton_iterations.push(step.iterations);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{DenseMap, FnFunctional, QuadraticFunctional};
    use nalgebra::{dmatrix, dvector, DMatrix};

    fn scalar_half_square() -> QuadraticFunctional {
        QuadraticFunctional::new(dmatrix![1.0], dvector![0.0])
    }

    #[test]
    fn scalar_prox_closed_form() {
        let e = DenseMap(dmatrix![1.0]);
        let cfg = ProxConfig::new(1.0, 1);
        let out = prox_step(&scalar_half_square(), &e, &dvector![1.0], &dvector![0.0], &cfg).unwrap();
        assert!((out.x[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn unobserved_coordinate_jumps_to_algebraic_value() {
        let e = DenseMap(dmatrix![1.0, 0.0; 0.0, 0.0]);
        let phi = QuadraticFunctional::squared_distance(dvector![1.0, 2.0]);
        let cfg = ProxConfig::new(1.0, 1);
        let out = prox_step(&phi, &e, &dvector![0.0, 0.0], &dvector![0.0, 0.0], &cfg).unwrap();
        assert!((out.x - dvector![0.5, 2.0]).norm() < 1e-13);
    }

    #[test]
    fn stationary_start_is_returned_unchanged() {
        let e = DenseMap(dmatrix![1.0, 0.0; 0.0, 0.0]);
        let phi = QuadraticFunctional::squared_distance(dvector![1.0, 2.0]);
        let cfg = ProxConfig::new(0.1, 1);
        let x = dvector![1.0, 2.0];
        let out = prox_step(&phi, &e, &x, &dvector![0.0, 0.0], &cfg).unwrap();
        assert_eq!(out.x, x);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn prox_optimality_holds_for_nonquadratic_phi() {
        // φ(x) = Σ cosh(x_i) with a rank-one E
        let phi = FnFunctional::new(
            3,
            |x| x.iter().map(|v| v.cosh()).sum(),
            |x| x.map(f64::sinh),
        )
        .with_hessian(|x| DMatrix::from_diagonal(&x.map(f64::cosh)));
        let e = DenseMap(dmatrix![1.0, 2.0, -1.0]);
        let cfg = ProxConfig::new(0.3, 1);
        let x_prev = dvector![0.5, -1.0, 2.0];
        let f = dvector![0.7];
        let out = prox_step(&phi, &e, &x_prev, &f, &cfg).unwrap();
        let resid = phi.gradient(&out.x) + e.apply_adjoint(&(e.apply(&out.x) - e.apply(&x_prev))) / cfg.tau
            - e.apply_adjoint(&f);
        assert!(resid.norm() <= cfg.newton_tol * (1.0 + out.initial_residual));
    }

    #[test]
    fn finite_difference_hessian_fallback() {
        let phi = FnFunctional::new(2, |x| x.iter().map(|v| v.powi(4) + v * v).sum(), |x| {
            x.map(|v| 4.0 * v.powi(3) + 2.0 * v)
        });
        let e = DenseMap(DMatrix::identity(2, 2));
        let cfg = ProxConfig::new(0.5, 1);
        let out = prox_step(&phi, &e, &dvector![1.0, -2.0], &dvector![0.0, 0.0], &cfg).unwrap();
        let g = phi.gradient(&out.x) + (&out.x - dvector![1.0, -2.0]) / 0.5;
        assert!(g.norm() < 1e-8);
    }

    #[test]
    fn step_size_validation() {
        assert!(ProxConfig::new(0.0, 1).validate(0.0).is_err());
        assert!(ProxConfig::new(-1.0, 1).validate(0.0).is_err());
        assert!(ProxConfig::new(0.5, 1).validate(2.0).is_err());
        assert!(ProxConfig::new(0.4, 1).validate(2.0).is_ok());
    }

    #[test]
    fn failing_step_reports_its_index() {
        // concave φ: Newton system indefinite once τ is large
        let phi = QuadraticFunctional::new(dmatrix![-2.0], dvector![0.0]);
        let e = DenseMap(dmatrix![1.0]);
        let cfg = ProxConfig::new(1.0, 3);
        let err = solve_trajectory(&phi, &e, &dvector![1.0], &vec![dvector![0.0]; 3], &cfg).unwrap_err();
        match err {
            DaeError::AtStep { step, source } => {
                assert_eq!(step, 1);
                assert!(matches!(*source, DaeError::SingularStep(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn interval_average_of_linear_input_is_midpoint_value() {
        let f = |t: f64| dvector![3.0 * t + 1.0];
        let s = sample_input(&f, 0.25, 4, InputSampling::IntervalAverage);
        for (k, v) in s.iter().enumerate() {
            let mid = (k as f64 + 0.5) * 0.25;
            assert!((v[0] - (3.0 * mid + 1.0)).abs() < 1e-13);
        }
        let r = sample_input(&f, 0.25, 4, InputSampling::RightEndpoint);
        assert_eq!(r[3][0], 4.0);
    }
}
