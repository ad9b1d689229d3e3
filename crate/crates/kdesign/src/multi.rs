//! Joint estimation of several integrals `int r_j f dmu` with a trend
//! spanned by the same functions `r`.
//!
//! Moments of mu are taken from an explicit sample (its empirical measure),
//! so every identity below holds exactly for that measure.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::Cholesky;
use crate::points::PointSet;
use crate::quadrature::gram;

pub type RFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Default sample size for the moments.
pub const DEFAULT_SAMPLE: usize = 4000;

/// Trend functions `r = (1, r_1, ..., r_p)` with the moments `M_r`, `U(mu)`
/// of a sampled measure.
#[derive(Clone)]
pub struct MultiIntegralSpec {
    kernel: Kernel,
    funcs: Vec<RFn>,
    sample: PointSet,
    /// `r` evaluated on the sample, one row per sample point.
    r_sample: DMatrix<f64>,
    m_r: DMatrix<f64>,
    m_inv: DMatrix<f64>,
    u: DMatrix<f64>,
}

impl fmt::Debug for MultiIntegralSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiIntegralSpec")
            .field("kernel", &self.kernel)
            .field("p", &(self.funcs.len() - 1))
            .field("sample", &self.sample.len())
            .field("m_r", &self.m_r)
            .field("u", &self.u)
            .finish()
    }
}

impl MultiIntegralSpec {
    /// `extra` are `r_1..r_p`; the constant `r_0 = 1` is prepended.
    pub fn new(kernel: &Kernel, extra: Vec<RFn>, sample: PointSet) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Empty("moment sample"));
        }
        kernel.check_dim(sample.dim())?;
        if kernel.is_singular() {
            return Err(Error::Unsupported("trend moments need a bounded kernel".into()));
        }
        let mut funcs: Vec<RFn> = vec![Arc::new(|_: &[f64]| 1.0)];
        funcs.extend(extra);
        let q = funcs.len();
        let n = sample.len();
        let r_sample = DMatrix::from_fn(n, q, |i, j| funcs[j](sample.row(i)));
        if r_sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trend function on the sample".into()));
        }
        let m_r = r_sample.transpose() * &r_sample / n as f64;
        let m_inv = Cholesky::new(&m_r)
            .map_err(|_| Error::Singular("M_r is not positive definite".into()))?
            .inverse();
        // U = (1/N^2) R' K R over the sample, built row by row.
        let rows: Vec<DVector<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = sample.row(i);
                let mut acc = DVector::zeros(q);
                for j in 0..n {
                    let k = kernel.value(xi, sample.row(j));
                    for c in 0..q {
                        acc[c] += k * r_sample[(j, c)];
                    }
                }
                acc
            })
            .collect();
        let mut u = DMatrix::zeros(q, q);
        for (i, kr) in rows.iter().enumerate() {
            for a in 0..q {
                for b in 0..q {
                    u[(a, b)] += r_sample[(i, a)] * kr[b];
                }
            }
        }
        u /= (n * n) as f64;
        let u = (&u + u.transpose()) * 0.5;
        Ok(MultiIntegralSpec { kernel: kernel.clone(), funcs, sample, r_sample, m_r, m_inv, u })
    }

    /// Sample of size `n` from the uniform measure on the unit cube.
    pub fn uniform(kernel: &Kernel, extra: Vec<RFn>, dim: usize, n: usize, seed: u64) -> Result<Self> {
        let sample = crate::potential::MeasureSpec::UniformCube { dim }.sample(n, seed)?;
        Self::new(kernel, extra, sample)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Number of trend functions, `p + 1`.
    pub fn q(&self) -> usize {
        self.funcs.len()
    }

    pub fn sample(&self) -> &PointSet {
        &self.sample
    }

    pub fn m_r(&self) -> &DMatrix<f64> {
        &self.m_r
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn r(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.q(), self.funcs.iter().map(|f| f(x)))
    }

    /// `u_mu(x) = E{r(X) K(X, x)}`.
    pub fn u_mu(&self, x: &[f64]) -> DVector<f64> {
        let mut acc = DVector::zeros(self.q());
        for (j, s) in self.sample.rows().enumerate() {
            let k = self.kernel.value(x, s);
            for c in 0..self.q() {
                acc[c] += k * self.r_sample[(j, c)];
            }
        }
        acc / self.sample.len() as f64
    }

    /// Reduced kernel that removes the projection onto span(r).
    pub fn reduced_value(&self, x: &[f64], y: &[f64]) -> f64 {
        let (rx, ry) = (self.r(x), self.r(y));
        let (ux, uy) = (self.u_mu(x), self.u_mu(y));
        self.reduced_from_parts(self.kernel.value(x, y), &rx, &ry, &ux, &uy)
    }

    fn reduced_from_parts(&self, k: f64, rx: &DVector<f64>, ry: &DVector<f64>, ux: &DVector<f64>, uy: &DVector<f64>) -> f64 {
        let a = self.m_inv.clone() * ry;
        let b = self.m_inv.clone() * rx;
        let c = &self.m_inv * &self.u * &a;
        k - ux.dot(&a) - b.dot(uy) + rx.dot(&c)
    }

    /// Posterior for the design `x`.
    pub fn posterior(&self, design: &PointSet) -> Result<MultiPosterior> {
        MultiPosterior::new(self, design)
    }
}

/// Posterior quantities for one design: `R_n`, `K~_n` and
/// `V_n = M_r (R_n' K~_n^{-1} R_n)^{-1} M_r`.
#[derive(Clone, Debug)]
pub struct MultiPosterior {
    design: PointSet,
    r: DMatrix<f64>,
    u_rows: Vec<DVector<f64>>,
    kt: DMatrix<f64>,
    chol_kt: Cholesky,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    m_r: DMatrix<f64>,
    v: DMatrix<f64>,
}

impl MultiPosterior {
    fn new(spec: &MultiIntegralSpec, design: &PointSet) -> Result<Self> {
        if design.is_empty() {
            return Err(Error::Empty("design"));
        }
        spec.kernel.check_dim(design.dim())?;
        if let Some(i) = design.first_duplicate() {
            return Err(Error::DuplicatePoint(i));
        }
        let n = design.len();
        let q = spec.q();
        if n < q {
            return Err(Error::Degenerate(format!("{n} points cannot identify {q} trend coefficients")));
        }
        let r_rows: Vec<DVector<f64>> = design.rows().map(|x| spec.r(x)).collect();
        let u_rows: Vec<DVector<f64>> = (0..n).into_par_iter().map(|i| spec.u_mu(design.row(i))).collect();
        let k = gram(&spec.kernel, design);
        let kt = DMatrix::from_fn(n, n, |i, j| spec.reduced_from_parts(k[(i, j)], &r_rows[i], &r_rows[j], &u_rows[i], &u_rows[j]));
        let kt = (&kt + kt.transpose()) * 0.5;
        let chol_kt = Cholesky::robust(&kt)?;
        let r = DMatrix::from_fn(n, q, |i, j| r_rows[i][j]);
        let a = r.transpose() * chol_kt.solve_mat(&r);
        let a = (&a + a.transpose()) * 0.5;
        let a_inv = Cholesky::new(&a).map_err(|_| Error::Degenerate("R_n is rank deficient".into()))?.inverse();
        let v = &spec.m_r * &a_inv * &spec.m_r;
        let v = (&v + v.transpose()) * 0.5;
        Ok(MultiPosterior { design: design.clone(), r, u_rows, kt, chol_kt, a, a_inv, m_r: spec.m_r.clone(), v })
    }

    pub fn design(&self) -> &PointSet {
        &self.design
    }

    pub fn r_matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn kt(&self) -> &DMatrix<f64> {
        &self.kt
    }

    /// `R_n' K~_n^{-1} R_n`.
    pub fn info(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// `M_r A^{-1} R_n' K~^{-1} y`.
    pub fn estimate(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.design.len() {
            return Err(Error::DimensionMismatch { expected: self.design.len(), got: y.len() });
        }
        let kty = DVector::from_vec(self.chol_kt.solve(y));
        Ok(&self.m_r * &self.a_inv * (self.r.transpose() * kty))
    }

    /// Covariance from the unreduced kernel, with trend `h = r`:
    /// `U - P K^{-1} P' + G (R'K^{-1}R)^{-1} G'` with `G = M_r - P K^{-1} R`.
    pub fn covariance_unreduced(&self, spec: &MultiIntegralSpec) -> Result<DMatrix<f64>> {
        let n = self.design.len();
        let q = spec.q();
        let k = gram(&spec.kernel, &self.design);
        let c = Cholesky::robust(&k)?;
        // P is q x n with columns u_mu(x_i)
        let p = DMatrix::from_fn(q, n, |a, i| self.u_rows[i][a]);
        let kinv_pt = c.solve_mat(&p.transpose());
        let kinv_r = c.solve_mat(&self.r);
        let g = &spec.m_r - &p * &kinv_r;
        let hkh = self.r.transpose() * &kinv_r;
        let hkh_inv = Cholesky::new(&hkh).map_err(|_| Error::Degenerate("R_n is rank deficient".into()))?.inverse();
        let v = &spec.u - &p * kinv_pt + &g * hkh_inv * g.transpose();
        Ok((&v + v.transpose()) * 0.5)
    }

    /// Effect of adding `x`: `(det V_{n+1} / det V_n, tr V_n - tr V_{n+1})`.
    pub fn greedy_scores(&self, spec: &MultiIntegralSpec, x: &[f64]) -> Result<(f64, f64)> {
        let rx = spec.r(x);
        let ux = spec.u_mu(x);
        let kx: Vec<f64> = (0..self.design.len())
            .map(|i| {
                let xi = self.design.row(i);
                let ri = self.r.row(i).transpose();
                spec.reduced_from_parts(spec.kernel.value(x, xi), &rx, &ri, &ux, &self.u_rows[i])
            })
            .collect();
        let kxx = spec.reduced_from_parts(spec.kernel.diag(x), &rx, &rx, &ux, &ux);
        let a = self.chol_kt.solve(&kx);
        let sigma2 = kxx - crate::quadrature::dot(&kx, &a);
        let scale = kxx.abs().max(1e-300);
        if !(sigma2 > 1e-12 * scale) {
            return Err(Error::Degenerate(format!("conditional variance {sigma2:e} at candidate")));
        }
        let g = &rx - self.r.transpose() * DVector::from_vec(a);
        let ag = &self.a_inv * &g;
        let rho2 = sigma2 + g.dot(&ag);
        let m_ag = &self.m_r * &ag;
        Ok((sigma2 / rho2, m_ag.dot(&m_ag) / rho2))
    }
}
