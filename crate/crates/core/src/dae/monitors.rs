use super::{DaeTrajectory, Vector};

/// Per-step defects of the discrete energy identity
///
/// `ρ_k = φ(x_k) − φ(x_{k−1}) − τ⟨f_k, r_k⟩ + τ‖r_k‖²`, for `k = 1..=N`.
pub fn energy_identity_residual(traj: &DaeTrajectory, f: &[Vector]) -> Vec<f64> {
    assert_eq!(f.len(), traj.n_steps(), "one input sample per step");
    let tau = traj.tau;
    (1..=traj.n_steps())
        .map(|k| {
            let r = traj.rate(k);
            traj.energies[k] - traj.energies[k - 1] - tau * f[k - 1].dot(&r) + tau * r.norm_squared()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityMonitors {
    /// `Σ τ t_k ‖r_k‖²`, the time-weighted rate norm.
    pub w1: f64,
    /// `max_k t_k φ(x_k)`.
    pub s1: f64,
    /// `Σ τ ‖r_k‖²`; bounded only for initial data in `E D(φ)`.
    pub w0: f64,
}

pub fn regularity_monitors(traj: &DaeTrajectory) -> RegularityMonitors {
    let tau = traj.tau;
    let mut w1 = 0.0;
    let mut w0 = 0.0;
    for k in 1..=traj.n_steps() {
        let r2 = traj.rate(k).norm_squared();
        w1 += tau * traj.times[k] * r2;
        w0 += tau * r2;
    }
    let s1 = traj
        .times
        .iter()
        .zip(&traj.energies)
        .map(|(t, e)| t * e)
        .fold(f64::NEG_INFINITY, f64::max);
    RegularityMonitors { w1, s1, w0 }
}
