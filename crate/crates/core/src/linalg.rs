//! Symmetric matrix storage and deterministic SPD factorizations.
//!
//! Stiffness and mass matrices on the structured meshes are banded; the
//! winding coupling adds a dense rank-`m` term. [`SymMatrix`] keeps these
//! shapes apart so that Newton systems can be factored with a banded
//! Cholesky plus a Woodbury correction instead of a dense solve.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Symmetric band matrix, lower band stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    // row i holds columns i-bw ..= i at offsets 0 ..= bw
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0);
        for i in 0..n {
            m.data[i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to the symmetric pair `(i,j)`/`(j,i)`.
    ///
    /// Panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i},{j}) outside bandwidth {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let off = self.bw - (i - j0);
            let mut acc = row[self.bw] * x[i];
            for (t, j) in (j0..i).enumerate() {
                let a = row[off + t];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
        y
    }

    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.mul_vec(x))
    }

    /// Returns `self + s * other`, widening the band as needed.
    pub fn add_scaled(&self, s: f64, other: &BandedSym) -> BandedSym {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = BandedSym::zeros(self.n, bw);
        for src in [(1.0, self), (s, other)] {
            let (c, m) = src;
            for i in 0..m.n {
                for j in i.saturating_sub(m.bw)..=i {
                    let v = m.data[m.idx(i, j)];
                    if v != 0.0 {
                        let k = out.idx(i, j);
                        out.data[k] += c * v;
                    }
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> BandedSym {
        BandedSym { n: self.n, bw: self.bw, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Row sums, `A * 1`.
    pub fn row_sums(&self) -> DVector<f64> {
        self.mul_vec(&DVector::from_element(self.n, 1.0))
    }

    pub fn cholesky(&self) -> Result<BandedCholesky, LinalgError> {
        let n = self.n;
        let bw = self.bw;
        let mut l = self.data.clone();
        let at = |i: usize, j: usize| i * (bw + 1) + (bw - (i - j));
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut d = l[at(j, j)];
            for k in k0..j {
                let v = l[at(j, k)];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: j, pivot: d });
            }
            let d = d.sqrt();
            l[at(j, j)] = d;
            let i_max = (j + bw).min(n - 1);
            for i in j + 1..=i_max {
                let k0 = i.saturating_sub(bw);
                let mut s = l[at(i, j)];
                for k in k0..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                l[at(i, j)] = s / d;
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * (self.bw + 1) + (self.bw - (i - j))]
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = b.clone();
        for i in 0..self.n {
            let mut s = y[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.at(i, k) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for k in i + 1..=(i + self.bw).min(self.n - 1) {
                s -= self.at(k, i) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        y
    }
}

/// A symmetric matrix in one of the shapes the solvers know how to factor.
#[derive(Debug, Clone)]
pub enum SymMatrix {
    Dense(DMatrix<f64>),
    Banded(BandedSym),
    /// `base + U W Uᵀ` with `W` symmetric positive definite (m×m).
    LowRankUpdate { base: Box<SymMatrix>, u: DMatrix<f64>, w: DMatrix<f64> },
}

impl SymMatrix {
    pub fn dim(&self) -> usize {
        match self {
            SymMatrix::Dense(m) => m.nrows(),
            SymMatrix::Banded(b) => b.dim(),
            SymMatrix::LowRankUpdate { base, .. } => base.dim(),
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            SymMatrix::Dense(m) => m * x,
            SymMatrix::Banded(b) => b.mul_vec(x),
            SymMatrix::LowRankUpdate { base, u, w } => {
                let ut_x = u.transpose() * x;
                base.mul_vec(x) + u * (w * ut_x)
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SymMatrix::Dense(m) => m.clone(),
            SymMatrix::Banded(b) => b.to_dense(),
            SymMatrix::LowRankUpdate { base, u, w } => base.to_dense() + u * w * u.transpose(),
        }
    }

    pub fn scaled(&self, s: f64) -> SymMatrix {
        match self {
            SymMatrix::Dense(m) => SymMatrix::Dense(m * s),
            SymMatrix::Banded(b) => SymMatrix::Banded(b.scaled(s)),
            SymMatrix::LowRankUpdate { base, u, w } => SymMatrix::LowRankUpdate {
                base: Box::new(base.scaled(s)),
                u: u.clone(),
                w: w * s,
            },
        }
    }

    /// `self + s * other`, preserving structure where possible.
    pub fn add_scaled(&self, s: f64, other: &SymMatrix) -> SymMatrix {
        use SymMatrix::*;
        match (self, other) {
            (Banded(a), Banded(b)) => Banded(a.add_scaled(s, b)),
            (LowRankUpdate { base, u, w }, o) => LowRankUpdate {
                base: Box::new(base.add_scaled(s, o)),
                u: u.clone(),
                w: w.clone(),
            },
            (o, LowRankUpdate { base, u, w }) if s > 0.0 => LowRankUpdate {
                base: Box::new(o.add_scaled(s, base)),
                u: u.clone(),
                w: w * s,
            },
            (a, b) => Dense(a.to_dense() + b.to_dense() * s),
        }
    }

    pub fn factor(&self) -> Result<SymFactor, LinalgError> {
        match self {
            SymMatrix::Dense(m) => {
                let n = m.nrows();
                m.clone().cholesky().map(SymFactor::Dense).ok_or(LinalgError::NotPositiveDefinite {
                    row: n,
                    pivot: f64::NAN,
                })
            }
            SymMatrix::Banded(b) => b.cholesky().map(SymFactor::Banded),
            SymMatrix::LowRankUpdate { base, u, w } => {
                let base_f = base.factor()?;
                let m = u.ncols();
                let w_inv = w
                    .clone()
                    .cholesky()
                    .ok_or(LinalgError::NotPositiveDefinite { row: m, pivot: f64::NAN })?
                    .inverse();
                let mut binv_u = DMatrix::zeros(u.nrows(), m);
                for c in 0..m {
                    let col = base_f.solve(&u.column(c).into_owned());
                    binv_u.set_column(c, &col);
                }
                let cap = w_inv + u.transpose() * &binv_u;
                let cap = cap
                    .cholesky()
                    .ok_or(LinalgError::NotPositiveDefinite { row: m, pivot: f64::NAN })?;
                Ok(SymFactor::Woodbury { base: Box::new(base_f), binv_u, u: u.clone(), cap })
            }
        }
    }
}

pub enum SymFactor {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Banded(BandedCholesky),
    Woodbury {
        base: Box<SymFactor>,
        binv_u: DMatrix<f64>,
        u: DMatrix<f64>,
        cap: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    },
}

impl SymFactor {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            SymFactor::Dense(c) => c.solve(b),
            SymFactor::Banded(c) => c.solve(b),
            SymFactor::Woodbury { base, binv_u, u, cap } => {
                let y = base.solve(b);
                let t = cap.solve(&(u.transpose() * &y));
                y - binv_u * t
            }
        }
    }
}

/// Principal square root of a symmetric positive definite matrix and its inverse.
pub fn spd_sqrt_and_inv_sqrt(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), LinalgError> {
    let eig = a.clone().symmetric_eigen();
    if let Some((row, &lam)) = eig.eigenvalues.iter().enumerate().find(|(_, l)| !(**l > 0.0)) {
        return Err(LinalgError::NotPositiveDefinite { row, pivot: lam });
    }
    let q = &eig.eigenvectors;
    let s = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let si = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok((q * s * q.transpose(), q * si * q.transpose()))
}
