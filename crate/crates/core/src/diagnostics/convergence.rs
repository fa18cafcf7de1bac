//! Refinement studies on the manufactured linear problem.

use super::{asymptotic_order, observed_orders, DiagnosticsError, ExperimentResult};
use crate::fem::WindingSpec;
use crate::material::{NuCurve, Region, ReluctivityModel};
use crate::mqs::{build_system, manufactured_energy_error, solve_from, InitialField, MqsConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    /// Halve τ on the configured mesh; successive differences at `T`.
    Tau,
    /// Double the grid resolution from 8 at the configured τ; error against the exact field at `T`.
    H,
    /// Halve τ and double the resolution together; error against the exact field.
    Both,
}

impl Refinement {
    fn name(self) -> &'static str {
        match self {
            Refinement::Tau => "convergence_tau",
            Refinement::H => "convergence_h",
            Refinement::Both => "convergence_both",
        }
    }
}

/// Manufactured-solution variant of `config`: uniform constant reluctivity
/// (`ν = 1` unless the configured material already is one), windings without
/// density, `A0 = 0`, and the extra source switched on.
fn manufactured_config(config: &MqsConfig) -> MqsConfig {
    let material = match (config.material.curve(Region::Conductor), config.material.curve(Region::Insulator)) {
        (NuCurve::Constant { nu0: a }, NuCurve::Constant { nu0: b }) if a == b => config.material.clone(),
        _ => ReluctivityModel::constant(1.0),
    };
    let winding = WindingSpec {
        windings: config
            .winding
            .windings
            .iter()
            .map(|w| w.iter().map(|r| crate::fem::SupportRect { kappa: 0.0, ..*r }).collect())
            .collect(),
    };
    MqsConfig { material, winding, a0: InitialField::Zero, manufactured_forcing: true, ..config.clone() }
}

/// Observed energy-norm order; `pass` iff it lies in `[0.8, 1.2]`.
pub fn convergence_study(config: &MqsConfig, levels: usize, refine: Refinement) -> Result<ExperimentResult, DiagnosticsError> {
    if levels < 3 {
        return Err(DiagnosticsError::InsufficientLevels { levels });
    }
    let base = manufactured_config(config);
    let mut res = ExperimentResult::new(refine.name(), "observed energy-norm order in [0.8, 1.2]");
    let scale = |l: usize| f64::powi(2.0, l as i32);
    let errors: Vec<f64> = match refine {
        Refinement::Tau => {
            let ops = build_system(&base)?;
            let mut finals = Vec::new();
            for l in 0..levels {
                let cfg = MqsConfig { tau: base.tau / scale(l), ..base.clone() };
                let traj = solve_from(&ops, &cfg, &nalgebra::DVector::zeros(ops.n_dofs()))?;
                finals.push(traj.fields.last().expect("non-empty").clone());
            }
            finals.windows(2).map(|w| ops.k_norm(&(&w[0] - &w[1]))).collect()
        }
        Refinement::H | Refinement::Both => {
            let mut errs = Vec::new();
            for l in 0..levels {
                let tau = if refine == Refinement::Both { base.tau / scale(l) } else { base.tau };
                let cfg = MqsConfig { n: 8 << l, tau, ..base.clone() };
                let ops = build_system(&cfg)?;
                let traj = solve_from(&ops, &cfg, &nalgebra::DVector::zeros(ops.n_dofs()))?;
                errs.push(manufactured_energy_error(&ops, traj.fields.last().expect("non-empty"), cfg.t_end));
            }
            errs
        }
    };
    for (l, e) in errors.iter().enumerate() {
        res.measure(&format!("error_l{l}"), *e);
    }
    for (l, o) in observed_orders(&errors).iter().enumerate() {
        res.measure(&format!("order_l{l}"), *o);
    }
    let order = asymptotic_order(&errors);
    res.measure("order", order);
    res.pass = (0.8..=1.2).contains(&order);
    Ok(res)
}
