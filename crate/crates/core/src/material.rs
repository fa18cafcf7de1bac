//! Reluctivity models `ν(ξ, s)` and the magnetic energy density
//!
//! ```text
//!     θ(ξ, ρ) = ∫_0^{√ρ} ν(ξ, ζ) ζ dζ,
//! ```
//!
//! together with grid certification of the monotonicity constant `m_ν` and
//! Lipschitz constant `L_ν` of `s ↦ ν(s) s`.

use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("field magnitude must be non-negative, got {0}")]
    NegativeFieldMagnitude(f64),
    #[error("energy density argument must be non-negative, got {0}")]
    NegativeArgument(f64),
    #[error("invalid reluctivity table: {0}")]
    InvalidTable(String),
    #[error("invalid reluctivity parameters: {0}")]
    InvalidParameters(String),
}

/// Subdomain label of a point or element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// Conducting subdomain.
    Conductor,
    /// Non-conducting subdomain.
    Insulator,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Conductor => "C",
            Region::Insulator => "I",
        })
    }
}

/// Piecewise-linear interpolation of `h(s) = ν(s) s` through tabulated points.
///
/// `h(0) = 0` is implied; beyond the last point `h` continues with the last slope.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluctivityTable {
    s: Vec<f64>,
    h: Vec<f64>,
}

impl ReluctivityTable {
    /// Builds the table from `(s, ν)` pairs with strictly increasing `s > 0`.
    /// A leading `s = 0` row is accepted and ignored.
    pub fn new(points: &[(f64, f64)]) -> Result<Self, MaterialError> {
        let mut s = vec![0.0];
        let mut h = vec![0.0];
        for &(si, nu) in points {
            if si == 0.0 && s.len() == 1 {
                continue;
            }
            if !(si > *s.last().unwrap()) || !si.is_finite() {
                return Err(MaterialError::InvalidTable(format!("s values must be strictly increasing, got {si}")));
            }
            if !(nu > 0.0) || !nu.is_finite() {
                return Err(MaterialError::InvalidTable(format!("ν must be positive, got {nu} at s = {si}")));
            }
            s.push(si);
            h.push(si * nu);
        }
        if s.len() < 2 {
            return Err(MaterialError::InvalidTable("need at least one point with s > 0".into()));
        }
        Ok(Self { s, h })
    }

    /// Reads a CSV with header columns `s,nu`.
    pub fn from_csv_path(path: &std::path::Path) -> Result<Self, MaterialError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| MaterialError::InvalidTable(format!("{}: {e}", path.display())))?;
        let headers = rdr.headers().map_err(|e| MaterialError::InvalidTable(e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| MaterialError::InvalidTable(format!("missing column `{name}`")))
        };
        let (is, inu) = (col("s")?, col("nu")?);
        let mut pts = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| MaterialError::InvalidTable(e.to_string()))?;
            let parse = |i: usize| {
                rec.get(i)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| MaterialError::InvalidTable(format!("bad number in row {:?}: {e}", rec)))
            };
            pts.push((parse(is)?, parse(inu)?));
        }
        Self::new(&pts)
    }

    fn segment(&self, s: f64) -> usize {
        // index j with s in [s_j, s_{j+1}); last segment extends to infinity
        match self.s.partition_point(|&x| x <= s) {
            0 => 0,
            p => (p - 1).min(self.s.len() - 2),
        }
    }

    fn slope(&self, j: usize) -> f64 {
        (self.h[j + 1] - self.h[j]) / (self.s[j + 1] - self.s[j])
    }

    fn h_at(&self, s: f64) -> f64 {
        let j = self.segment(s);
        self.h[j] + self.slope(j) * (s - self.s[j])
    }

    fn nu(&self, s: f64) -> f64 {
        if s == 0.0 {
            self.slope(0)
        } else {
            self.h_at(s) / s
        }
    }

    /// `∫_0^r h(ζ) dζ`, exact for the piecewise-linear `h`.
    fn integral_h(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        let last = self.segment(r);
        for j in 0..last {
            acc += 0.5 * (self.h[j] + self.h[j + 1]) * (self.s[j + 1] - self.s[j]);
        }
        let a = self.s[last];
        acc + 0.5 * (self.h[last] + self.h_at(r)) * (r - a)
    }
}

/// `s ↦ ν(s)` on a single subdomain.
#[derive(Debug, Clone, PartialEq)]
pub enum NuCurve {
    Constant { nu0: f64 },
    /// `ν(s) = ν_min + (ν_max − ν_min)/(1 + s²)`.
    RationalSaturation { nu_min: f64, nu_max: f64 },
    Tabulated(ReluctivityTable),
}

impl NuCurve {
    pub fn validate(&self) -> Result<(), MaterialError> {
        match *self {
            NuCurve::Constant { nu0 } if !(nu0 > 0.0) || !nu0.is_finite() => {
                Err(MaterialError::InvalidParameters(format!("ν₀ must be positive, got {nu0}")))
            }
            NuCurve::RationalSaturation { nu_min, nu_max } if !(nu_min > 0.0) || !(nu_max >= nu_min) || !nu_max.is_finite() => {
                Err(MaterialError::InvalidParameters(format!(
                    "need 0 < ν_min ≤ ν_max, got ν_min = {nu_min}, ν_max = {nu_max}"
                )))
            }
            _ => Ok(()),
        }
    }

    fn nu(&self, s: f64) -> f64 {
        match self {
            NuCurve::Constant { nu0 } => *nu0,
            NuCurve::RationalSaturation { nu_min, nu_max } => nu_min + (nu_max - nu_min) / (1.0 + s * s),
            NuCurve::Tabulated(t) => t.nu(s),
        }
    }

    fn d_nus_ds(&self, s: f64) -> f64 {
        match self {
            NuCurve::Constant { nu0 } => *nu0,
            NuCurve::RationalSaturation { nu_min, nu_max } => {
                let q = 1.0 + s * s;
                nu_min + (nu_max - nu_min) * (1.0 - s * s) / (q * q)
            }
            NuCurve::Tabulated(t) => t.slope(t.segment(s)),
        }
    }

    fn theta(&self, rho: f64) -> f64 {
        match self {
            NuCurve::Constant { nu0 } => 0.5 * nu0 * rho,
            NuCurve::RationalSaturation { nu_min, nu_max } => {
                0.5 * nu_min * rho + 0.5 * (nu_max - nu_min) * rho.ln_1p()
            }
            NuCurve::Tabulated(t) => t.integral_h(rho.sqrt()),
        }
    }

    /// `ν'(s)/s`, the coefficient of the rank-one part of the consistent tangent;
    /// `None` when the closed form is unavailable (tabulated curves use the
    /// generic `(d/ds[νs] − ν)/s²` form).
    fn dnu_over_s(&self, s: f64) -> Option<f64> {
        match self {
            NuCurve::Constant { .. } => Some(0.0),
            NuCurve::RationalSaturation { nu_min, nu_max } => {
                let q = 1.0 + s * s;
                Some(-2.0 * (nu_max - nu_min) / (q * q))
            }
            NuCurve::Tabulated(_) => None,
        }
    }
}

/// `ν` together with `d/ds[ν(s) s]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuEval {
    pub nu: f64,
    pub d_nus_ds: f64,
}

/// Per-subdomain reluctivity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluctivityModel {
    pub conductor: NuCurve,
    pub insulator: NuCurve,
}

impl Default for ReluctivityModel {
    fn default() -> Self {
        Self::uniform(NuCurve::RationalSaturation { nu_min: 1.0, nu_max: 5.0 })
    }
}

impl ReluctivityModel {
    pub fn uniform(curve: NuCurve) -> Self {
        Self { conductor: curve.clone(), insulator: curve }
    }

    pub fn constant(nu0: f64) -> Self {
        Self::uniform(NuCurve::Constant { nu0 })
    }

    pub fn rational_saturation(nu_min: f64, nu_max: f64) -> Self {
        Self::uniform(NuCurve::RationalSaturation { nu_min, nu_max })
    }

    pub fn curve(&self, region: Region) -> &NuCurve {
        match region {
            Region::Conductor => &self.conductor,
            Region::Insulator => &self.insulator,
        }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        self.conductor.validate()?;
        self.insulator.validate()
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.conductor, NuCurve::Constant { .. }) && matches!(self.insulator, NuCurve::Constant { .. })
    }

    pub fn eval(&self, region: Region, s: f64) -> Result<NuEval, MaterialError> {
        if !(s >= 0.0) {
            return Err(MaterialError::NegativeFieldMagnitude(s));
        }
        let c = self.curve(region);
        Ok(NuEval { nu: c.nu(s), d_nus_ds: c.d_nus_ds(s) })
    }

    /// Unchecked `ν(s)` for hot loops where `s = |g| ≥ 0` by construction.
    #[inline]
    pub(crate) fn nu_unchecked(&self, region: Region, s: f64) -> f64 {
        self.curve(region).nu(s)
    }

    /// `θ(ρ)`; closed form for every shipped model kind.
    pub fn theta(&self, region: Region, rho: f64) -> Result<f64, MaterialError> {
        if !(rho >= 0.0) {
            return Err(MaterialError::NegativeArgument(rho));
        }
        Ok(self.curve(region).theta(rho))
    }

    #[inline]
    pub(crate) fn theta_unchecked(&self, region: Region, rho: f64) -> f64 {
        self.curve(region).theta(rho)
    }

    /// Consistent tangent of `g ↦ ν(|g|) g` in 2D:
    /// `T = ν I + (d/ds[νs] − ν) g gᵀ / s²`, with `T = ν(0) I` for `s < 1e-12`.
    pub fn tangent(&self, region: Region, g: [f64; 2]) -> [[f64; 2]; 2] {
        let c = self.curve(region);
        let s = g[0].hypot(g[1]);
        if s < 1e-12 {
            let nu0 = c.nu(0.0);
            return [[nu0, 0.0], [0.0, nu0]];
        }
        let nu = c.nu(s);
        let coef = match c.dnu_over_s(s) {
            Some(v) => v,
            None => (c.d_nus_ds(s) - nu) / (s * s),
        };
        [
            [nu + coef * g[0] * g[0], coef * g[0] * g[1]],
            [coef * g[1] * g[0], nu + coef * g[1] * g[1]],
        ]
    }
}

/// Grid estimates of the secant constants of `s ↦ ν(s) s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialValidationReport {
    pub region: Region,
    pub m_hat: f64,
    pub l_hat: f64,
    pub s_max: f64,
    pub n_grid: usize,
    /// Offending `(s, r)` pairs: non-positive secant slope, or (for `s == r`)
    /// a point where `m̂ ≤ ν(s) ≤ L̂` fails. At most [`MAX_VIOLATIONS`] are kept.
    pub violations: Vec<(f64, f64)>,
    pub violation_count: usize,
}

pub const MAX_VIOLATIONS: usize = 16;

impl MaterialValidationReport {
    pub fn pass(&self) -> bool {
        self.m_hat > 0.0 && self.violation_count == 0
    }
}

/// Secant constants over all grid pairs on `[0, s_max]`, including the
/// diagonal limit `r → s` (the derivative `d/ds[νs]` at grid points).
pub fn estimate_constants(
    model: &ReluctivityModel,
    region: Region,
    s_max: f64,
    n_grid: usize,
) -> MaterialValidationReport {
    assert!(s_max > 0.0 && n_grid >= 2, "need s_max > 0 and n_grid ≥ 2");
    let curve = model.curve(region);
    let s: Vec<f64> = (0..n_grid).map(|i| s_max * i as f64 / (n_grid - 1) as f64).collect();
    let h: Vec<f64> = s.iter().map(|&v| curve.nu(v) * v).collect();
    let mut m_hat = f64::INFINITY;
    let mut l_hat: f64 = 0.0;
    let mut violations = Vec::new();
    let mut count = 0usize;
    for i in 0..n_grid {
        let d = curve.d_nus_ds(s[i]);
        m_hat = m_hat.min(d);
        l_hat = l_hat.max(d.abs());
        for j in i + 1..n_grid {
            let q = (h[j] - h[i]) / (s[j] - s[i]);
            m_hat = m_hat.min(q);
            l_hat = l_hat.max(q.abs());
            if q <= 0.0 {
                count += 1;
                if violations.len() < MAX_VIOLATIONS {
                    violations.push((s[i], s[j]));
                }
            }
        }
    }
    for &si in &s {
        let nu = curve.nu(si);
        if !(m_hat <= nu && nu <= l_hat) {
            count += 1;
            if violations.len() < MAX_VIOLATIONS {
                violations.push((si, si));
            }
        }
    }
    MaterialValidationReport { region, m_hat, l_hat, s_max, n_grid, violations, violation_count: count }
}

/// Outcome of [`validate_assumptions`]; `reasons` is empty iff `pass`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub pass: bool,
    pub reasons: Vec<String>,
    pub material: Vec<MaterialValidationReport>,
}

impl AssumptionReport {
    /// Smallest `m̂` and largest `L̂` over both subdomains.
    pub fn constants(&self) -> (f64, f64) {
        let m = self.material.iter().map(|r| r.m_hat).fold(f64::INFINITY, f64::min);
        let l = self.material.iter().map(|r| r.l_hat).fold(0.0, f64::max);
        (m, l)
    }
}

pub const DEFAULT_S_MAX: f64 = 100.0;
pub const DEFAULT_N_GRID: usize = 2000;

/// Checks conductivity, resistance matrix and reluctivity requirements.
pub fn validate_assumptions(
    model: &ReluctivityModel,
    sigma_c: f64,
    r: &DMatrix<f64>,
    s_max: f64,
    n_grid: usize,
) -> AssumptionReport {
    let mut reasons = Vec::new();
    if !(sigma_c > 0.0) || !sigma_c.is_finite() {
        reasons.push("σ_C must be positive (material assumption a))".to_string());
    }
    if let Err(e) = model.validate() {
        reasons.push(format!("{e} (material assumption b))"));
    }
    if r.nrows() != r.ncols() || r.nrows() == 0 {
        reasons.push(format!(
            "resistance matrix R must be square and non-empty, got {}x{} (material assumption c))",
            r.nrows(),
            r.ncols()
        ));
    } else {
        let asym = (r - r.transpose()).norm();
        if asym > 1e-12 * r.norm() {
            reasons.push(format!("resistance matrix R is not symmetric, ‖R−Rᵀ‖ = {asym:e} (material assumption c))"));
        } else if r.clone().cholesky().is_none() {
            reasons.push("resistance matrix R is not positive definite (material assumption c))".to_string());
        }
    }
    let mut material = Vec::new();
    if model.validate().is_ok() {
        for region in [Region::Conductor, Region::Insulator] {
            let rep = estimate_constants(model, region, s_max, n_grid);
            if !rep.pass() {
                reasons.push(format!(
                    "ν·s on region {region} is not strongly monotone/Lipschitz on [0, {s_max}]: m̂ = {:.6}, {} violations (material assumption b))",
                    rep.m_hat, rep.violation_count
                ));
            }
            material.push(rep);
        }
    }
    AssumptionReport { pass: reasons.is_empty(), reasons, material }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn sat() -> ReluctivityModel {
        ReluctivityModel::rational_saturation(1.0, 5.0)
    }

    /// Adaptive Simpson quadrature, the independent route to θ.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    #[test]
    fn constant_model_eval() {
        let m = ReluctivityModel::constant(2.0);
        let e = m.eval(Region::Insulator, 7.0).unwrap();
        assert_eq!((e.nu, e.d_nus_ds), (2.0, 2.0));
    }

    #[test]
    fn saturation_at_zero_and_sqrt3() {
        let e = sat().eval(Region::Conductor, 0.0).unwrap();
        assert_eq!((e.nu, e.d_nus_ds), (5.0, 5.0));
        let e = sat().eval(Region::Conductor, 3f64.sqrt()).unwrap();
        // d/ds[s + 4s/(1+s²)] = 1 + 4(1−s²)/(1+s²)² at s² = 3
        assert!((e.d_nus_ds - 0.5).abs() < 1e-14);
    }

    #[test]
    fn negative_arguments_rejected() {
        assert_eq!(sat().eval(Region::Conductor, -1.0), Err(MaterialError::NegativeFieldMagnitude(-1.0)));
        assert_eq!(sat().theta(Region::Conductor, -0.5), Err(MaterialError::NegativeArgument(-0.5)));
    }

    #[test]
    fn theta_values() {
        assert_eq!(ReluctivityModel::constant(2.0).theta(Region::Conductor, 4.0).unwrap(), 4.0);
        assert_eq!(sat().theta(Region::Conductor, 0.0).unwrap(), 0.0);
        let t = sat().theta(Region::Conductor, 1.0).unwrap();
        let expected = 0.5 + 2.0 * 2f64.ln();
        assert!((t - expected).abs() < 1e-15);
        assert!((t - 1.886294).abs() < 1e-6);
    }

    #[test]
    fn theta_matches_quadrature_oracle() {
        let table = ReluctivityTable::new(&[(0.5, 4.0), (1.0, 3.0), (2.0, 2.0), (4.0, 1.5)]).unwrap();
        for model in [sat(), ReluctivityModel::constant(3.0), ReluctivityModel::uniform(NuCurve::Tabulated(table))] {
            for rho in [0.01f64, 0.7, 1.0, 2.5, 9.0, 30.0] {
                let c = model.curve(Region::Conductor).clone();
                // split at the table knots, where the integrand has kinks
                let r = rho.sqrt();
                let mut cuts = vec![0.0];
                cuts.extend([0.5, 1.0, 2.0, 4.0].into_iter().filter(|&k| k < r));
                cuts.push(r);
                let oracle: f64 = cuts.windows(2).map(|w| adaptive_simpson(&|z| c.nu(z) * z, w[0], w[1], 1e-13)).sum();
                let closed = model.theta(Region::Conductor, rho).unwrap();
                assert!((closed - oracle).abs() < 1e-10 * (1.0 + oracle), "{model:?} rho={rho}");
            }
        }
    }

    #[test]
    fn theta_derivative_is_half_nu() {
        let model = sat();
        for rho in [0.0, 0.3, 1.0, 3.0, 17.0] {
            let h = 1e-6 * f64::max(1.0, rho);
            let lo = (rho - h).max(0.0);
            let fd = (model.theta(Region::Conductor, rho + h).unwrap() - model.theta(Region::Conductor, lo).unwrap())
                / (rho + h - lo);
            let exact = 0.5 * model.eval(Region::Conductor, rho.sqrt()).unwrap().nu;
            assert!((fd - exact).abs() <= 1e-6 * exact, "rho={rho}: {fd} vs {exact}");
        }
    }

    #[test]
    fn constants_of_constant_model() {
        let r = estimate_constants(&ReluctivityModel::constant(2.0), Region::Conductor, 10.0, 50);
        assert!((r.m_hat - 2.0).abs() < 1e-12 && (r.l_hat - 2.0).abs() < 1e-12);
        assert!(r.pass());
    }

    #[test]
    fn constants_of_default_saturation() {
        let r = estimate_constants(&sat(), Region::Conductor, 100.0, 2000);
        assert!((r.m_hat - 0.5).abs() < 0.01, "m_hat = {}", r.m_hat);
        assert!((r.l_hat - 5.0).abs() < 0.01, "l_hat = {}", r.l_hat);
        assert!(r.pass());
    }

    #[test]
    fn strong_saturation_breaks_monotonicity() {
        let r = estimate_constants(&ReluctivityModel::rational_saturation(1.0, 10.0), Region::Conductor, 100.0, 2000);
        assert!(r.m_hat < 0.0);
        assert!(!r.pass());
        // the descending part of ν·s lies around s² = 3
        let (a, b) = r.violations[0];
        assert!(a < 3f64.sqrt() && b > 3f64.sqrt() - 0.5);
    }

    #[test]
    fn tabulated_interpolates_nu_times_s() {
        let t = ReluctivityTable::new(&[(1.0, 2.0), (3.0, 1.0)]).unwrap();
        let m = ReluctivityModel::uniform(NuCurve::Tabulated(t));
        // h(1) = 2, h(3) = 3 → h(2) = 2.5, ν(2) = 1.25
        let e = m.eval(Region::Insulator, 2.0).unwrap();
        assert!((e.nu - 1.25).abs() < 1e-15);
        assert!((e.d_nus_ds - 0.5).abs() < 1e-15);
        // first segment: ν constant = h(1)/1
        assert_eq!(m.eval(Region::Insulator, 0.0).unwrap().nu, 2.0);
        assert!(ReluctivityTable::new(&[(1.0, 2.0), (0.5, 1.0)]).is_err());
    }

    #[test]
    fn tangent_matches_finite_differences_of_flux_map() {
        let m = sat();
        let flux = |g: [f64; 2]| {
            let s = g[0].hypot(g[1]);
            let nu = m.eval(Region::Conductor, s).unwrap().nu;
            [nu * g[0], nu * g[1]]
        };
        let g = [0.8, -1.3];
        let t = m.tangent(Region::Conductor, g);
        let h = 1e-6;
        for j in 0..2 {
            let mut gp = g;
            let mut gm = g;
            gp[j] += h;
            gm[j] -= h;
            let (fp, fm) = (flux(gp), flux(gm));
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((fd - t[i][j]).abs() < 1e-8);
            }
        }
        assert_eq!(m.tangent(Region::Conductor, [0.0, 0.0]), [[5.0, 0.0], [0.0, 5.0]]);
    }

    #[test]
    fn assumption_checks() {
        let one = dmatrix![1.0];
        assert!(validate_assumptions(&sat(), 1.0, &one, 100.0, 200).pass);
        let r = validate_assumptions(&sat(), 0.0, &one, 100.0, 200);
        assert!(!r.pass && r.reasons[0].contains("σ_C must be positive"));
        // eigenvalues 3 and −1
        let bad = dmatrix![1.0, 2.0; 2.0, 1.0];
        let r = validate_assumptions(&sat(), 1.0, &bad, 100.0, 200);
        assert!(!r.pass && r.reasons[0].contains("positive definite"));
        let asym = dmatrix![1.0, 0.5; 0.0, 1.0];
        assert!(validate_assumptions(&sat(), 1.0, &asym, 100.0, 200).reasons[0].contains("symmetric"));
    }
}
