use nalgebra::{DMatrix, DVector, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{InitialField, MqsConfig, MqsError};
use crate::dae::{EllipticFunctional, LinearMapE, Vector};
use crate::fem::{assemble_coupling, build_mesh, estimate_coercivity_constant, CoercivityEstimate, FemSpace};
use crate::linalg::{spd_sqrt_and_inv_sqrt, BandedSym, SymMatrix};
use crate::material::{validate_assumptions, AssumptionReport, Region, ReluctivityModel};
use crate::sampling::uniform_vector;

/// Assembled discrete operators of the field–circuit system.
#[derive(Debug, Clone)]
pub struct MqsOperators {
    pub space: FemSpace,
    pub model: ReluctivityModel,
    pub sigma_c: f64,
    /// `σ_C ∫_{Ω_C} φ_i φ_j`.
    pub m_sigma: BandedSym,
    /// `∫_Ω φ_i φ_j`.
    pub mass: BandedSym,
    /// Unit-coefficient stiffness `∫ ∇φ_i·∇φ_j`.
    pub k_lin: BandedSym,
    /// Coupling `C_{ij} = ∫ χ_j φ_i` (n_dofs × m).
    pub c: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub r_inv: DMatrix<f64>,
    /// Principal square root of `R⁻¹`.
    pub r_inv_sqrt: DMatrix<f64>,
    pub m_hat: f64,
    pub l_hat: f64,
    pub coercivity: CoercivityEstimate,
    /// `min{m̂, σ_C}/(2 L_C)`: lower bound of `E_1(a)/‖a‖²`.
    pub certified_c: f64,
    pub assumptions: AssumptionReport,
}

impl MqsOperators {
    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    pub fn m(&self) -> usize {
        self.c.ncols()
    }

    /// `K(a)`.
    pub fn curlcurl(&self, a: &Vector) -> Vector {
        self.space.curlcurl_residual(&self.model, a)
    }

    /// `K'(a)`.
    pub fn tangent(&self, a: &Vector) -> BandedSym {
        self.space.curlcurl_jacobian(&self.model, a)
    }

    /// `‖a‖_{K_lin} = (aᵀ K_lin a)^{1/2}`.
    pub fn k_norm(&self, a: &Vector) -> f64 {
        self.k_lin.quad_form(a).max(0.0).sqrt()
    }

    /// Flux linkages `Cᵀ a`.
    pub fn flux(&self, a: &Vector) -> DVector<f64> {
        self.c.transpose() * a
    }

    pub fn energy(&self) -> MagneticEnergy<'_> {
        MagneticEnergy { ops: self }
    }

    pub fn e_map(&self) -> MqsEMap {
        MqsEMap::new(self)
    }
}

/// `φ(a) = Σ_e area_e θ(ξ_e, |∇a|_e²)` as a functional on dof coefficients.
#[derive(Clone, Copy)]
pub struct MagneticEnergy<'a> {
    ops: &'a MqsOperators,
}

impl EllipticFunctional for MagneticEnergy<'_> {
    fn dim(&self) -> usize {
        self.ops.n_dofs()
    }
    fn value(&self, x: &Vector) -> f64 {
        self.ops.space.energy(&self.ops.model, x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.ops.curlcurl(x)
    }
    fn hessian(&self, x: &Vector) -> Option<SymMatrix> {
        Some(SymMatrix::Banded(self.ops.tangent(x)))
    }
    fn ellipticity_omega(&self) -> f64 {
        1.0
    }
}

pub fn mqs_energy(ops: &MqsOperators, a: &Vector) -> f64 {
    ops.space.energy(&ops.model, a)
}

pub fn mqs_energy_gateaux(ops: &MqsOperators, a: &Vector) -> Vector {
    ops.curlcurl(a)
}

/// `E a = (E_σ a, R^{-1/2} Cᵀ a)`, where `E_σ` stacks per conducting element
/// the transposed Cholesky factor of the local σ-mass, so `‖E_σ a‖² = aᵀ M_σ a`.
#[derive(Debug, Clone)]
pub struct MqsEMap {
    n_dofs: usize,
    blocks: Vec<([usize; 3], Matrix3<f64>)>,
    /// `R^{-1/2} Cᵀ`.
    rc: DMatrix<f64>,
    m_sigma: BandedSym,
    c: DMatrix<f64>,
    r_inv: DMatrix<f64>,
}

impl MqsEMap {
    fn new(ops: &MqsOperators) -> Self {
        let mut blocks = Vec::new();
        for el in &ops.space.elements {
            if el.region != Region::Conductor {
                continue;
            }
            let dofs = el.dofs.map(|d| d.expect("conducting elements have interior vertices"));
            let s = ops.sigma_c * el.area / 12.0;
            let m = Matrix3::new(2.0 * s, s, s, s, 2.0 * s, s, s, s, 2.0 * s);
            let l = m.cholesky().expect("local mass is SPD").l();
            blocks.push((dofs, l.transpose()));
        }
        Self {
            n_dofs: ops.n_dofs(),
            blocks,
            rc: &ops.r_inv_sqrt * ops.c.transpose(),
            m_sigma: ops.m_sigma.clone(),
            c: ops.c.clone(),
            r_inv: ops.r_inv.clone(),
        }
    }

    /// Length of the σ-block of `z`.
    pub fn field_part_len(&self) -> usize {
        3 * self.blocks.len()
    }
}

impl LinearMapE for MqsEMap {
    fn dim_x(&self) -> usize {
        self.n_dofs
    }
    fn dim_z(&self) -> usize {
        3 * self.blocks.len() + self.rc.nrows()
    }
    fn apply(&self, x: &Vector) -> Vector {
        let mut z = DVector::zeros(self.dim_z());
        for (b, (d, lt)) in self.blocks.iter().enumerate() {
            let y = lt * nalgebra::Vector3::new(x[d[0]], x[d[1]], x[d[2]]);
            z.fixed_rows_mut::<3>(3 * b).copy_from(&y);
        }
        let off = 3 * self.blocks.len();
        z.rows_mut(off, self.rc.nrows()).copy_from(&(&self.rc * x));
        z
    }
    fn apply_adjoint(&self, z: &Vector) -> Vector {
        let off = 3 * self.blocks.len();
        let mut x = self.rc.transpose() * z.rows(off, self.rc.nrows());
        for (b, (d, lt)) in self.blocks.iter().enumerate() {
            let y = lt.transpose() * z.fixed_rows::<3>(3 * b);
            for k in 0..3 {
                x[d[k]] += y[k];
            }
        }
        x
    }
    fn gram(&self) -> SymMatrix {
        SymMatrix::LowRankUpdate {
            base: Box::new(SymMatrix::Banded(self.m_sigma.clone())),
            u: self.c.clone(),
            w: self.r_inv.clone(),
        }
    }
}

/// Assembles the operators and checks every model assumption.
pub fn build_system(config: &MqsConfig) -> Result<MqsOperators, MqsError> {
    config.check_basic()?;
    let assumptions =
        validate_assumptions(&config.material, config.sigma_c, &config.r, config.s_max, config.n_grid);
    if !assumptions.pass {
        return Err(MqsError::Validation(assumptions.reasons));
    }
    let (mesh, dofs) = build_mesh(config.n, Some(config.conductor))?;
    let space = FemSpace::new(mesh, dofs);
    let c = assemble_coupling(&space, &config.winding)?;
    let masses = space.masses();
    let k_lin = space.stiffness();
    let m_sigma = masses.conductor.scaled(config.sigma_c);
    let (_, r_inv_sqrt) = spd_sqrt_and_inv_sqrt(&config.r).map_err(|e| MqsError::Validation(vec![e.to_string()]))?;
    let r_inv = &r_inv_sqrt * &r_inv_sqrt;
    let coercivity = estimate_coercivity_constant(&space)?;
    let (m_hat, l_hat) = assumptions.constants();
    let certified_c = m_hat.min(config.sigma_c) / (2.0 * coercivity.l_c);
    log::debug!(
        "system: {} dofs, bandwidth {}, m̂ = {m_hat}, L̂ = {l_hat}, L_C = {}, c = {certified_c}",
        space.n_dofs(),
        space.bandwidth(),
        coercivity.l_c
    );
    Ok(MqsOperators {
        space,
        model: config.material.clone(),
        sigma_c: config.sigma_c,
        m_sigma,
        mass: masses.full,
        k_lin,
        c,
        r: config.r.clone(),
        r_inv,
        r_inv_sqrt,
        m_hat,
        l_hat,
        coercivity,
        certified_c,
        assumptions,
    })
}

/// Initial coefficients as described by the config.
pub fn initial_field(config: &MqsConfig, ops: &MqsOperators) -> Result<Vector, MqsError> {
    let n = ops.n_dofs();
    match &config.a0 {
        InitialField::Zero => Ok(DVector::zeros(n)),
        InitialField::Random { amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            Ok(uniform_vector(&mut rng, n, *amplitude))
        }
        InitialField::File(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| MqsError::Io(format!("{}: {e}", path.display())))?;
            let vals: Vec<f64> = text
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| MqsError::Config(format!("{}: `{t}` is not a number", path.display()))))
                .collect::<Result<_, _>>()?;
            if vals.len() != n {
                return Err(MqsError::Config(format!(
                    "{}: expected {n} dof values, found {}",
                    path.display(),
                    vals.len()
                )));
            }
            Ok(DVector::from_vec(vals))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::WindingSpec;

    fn small() -> MqsConfig {
        MqsConfig { n: 16, ..MqsConfig::default() }
    }

    #[test]
    fn default_build_has_positive_constant() {
        let ops = build_system(&MqsConfig::default()).unwrap();
        assert!(ops.certified_c > 0.0);
        let prod = &ops.r_inv_sqrt * &ops.r_inv_sqrt * &ops.r;
        assert!((prod - DMatrix::identity(1, 1)).norm() < 1e-12);
    }

    #[test]
    fn indefinite_r_fails_validation() {
        let cfg = MqsConfig { r: DMatrix::from_element(1, 1, -1.0), ..small() };
        let err = build_system(&cfg).unwrap_err();
        assert!(err.to_string().contains("material assumption c)"), "{err}");
    }

    #[test]
    fn zero_winding_gives_zero_coupling() {
        let cfg = MqsConfig { winding: WindingSpec::go_return(0.0), ..small() };
        assert!(build_system(&cfg).unwrap().c.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn e_map_gram_and_adjoint() {
        let cfg = MqsConfig { r: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), ..small() };
        let cfg = MqsConfig {
            winding: WindingSpec {
                windings: vec![
                    WindingSpec::go_return(100.0).windings[0].clone(),
                    WindingSpec::go_return(-30.0).windings[0].clone(),
                ],
            },
            voltage: super::super::VoltageSignal::Constant(DVector::from_element(2, 1.0)),
            ..cfg
        };
        let ops = build_system(&cfg).unwrap();
        let e = ops.e_map();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = uniform_vector(&mut rng, e.dim_x(), 1.0);
        let z = uniform_vector(&mut rng, e.dim_z(), 1.0);
        let lhs = e.apply(&x).dot(&z);
        let rhs = x.dot(&e.apply_adjoint(&z));
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        // ‖E x‖² against the assembled Gram form
        let ex = e.apply(&x).norm_squared();
        let gx = x.dot(&e.gram().mul_vec(&x));
        let direct = ops.m_sigma.quad_form(&x) + (ops.c.transpose() * &x).dot(&(&ops.r_inv * ops.c.transpose() * &x));
        assert!((ex - gx).abs() < 1e-12 * ex.max(1.0));
        assert!((ex - direct).abs() < 1e-12 * ex.max(1.0));
    }

    #[test]
    fn energy_of_zero_and_linear_case() {
        let ops = build_system(&small()).unwrap();
        let z = DVector::zeros(ops.n_dofs());
        assert_eq!(mqs_energy(&ops, &z), 0.0);
        assert!(mqs_energy_gateaux(&ops, &z).iter().all(|v| *v == 0.0));

        let lin = build_system(&MqsConfig { material: ReluctivityModel::constant(2.5), ..small() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = uniform_vector(&mut rng, lin.n_dofs(), 0.1);
        let expected = 0.5 * 2.5 * lin.k_lin.quad_form(&a);
        assert!((mqs_energy(&lin, &a) - expected).abs() < 1e-13 * expected);
    }

    #[test]
    fn random_initial_field_is_seeded() {
        let cfg = MqsConfig { a0: InitialField::Random { amplitude: 0.5 }, seed: 9, ..small() };
        let ops = build_system(&cfg).unwrap();
        let a = initial_field(&cfg, &ops).unwrap();
        assert_eq!(a, initial_field(&cfg, &ops).unwrap());
        assert!(a.amax() <= 0.5);
    }
}
