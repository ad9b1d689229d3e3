//! Gram matrices, optimal quadrature weights, posterior variances and IMSPE.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::{solve_general, solve_spd_or_general, Cholesky};
use crate::points::PointSet;
use crate::potential::PotentialProvider;

/// Gram matrix `K_n`, reduced Gram `K~_n`, potentials and their factorizations.
#[derive(Clone, Debug)]
pub struct GramBundle {
    kernel: Kernel,
    design: PointSet,
    k: DMatrix<f64>,
    kt: DMatrix<f64>,
    p: Vec<f64>,
    e_mu: f64,
    chol_k: std::result::Result<Cholesky, usize>,
    chol_kt: std::result::Result<Cholesky, usize>,
}

fn pivot_of(e: Error) -> usize {
    match e {
        Error::NotPositiveDefinite { pivot } => pivot,
        _ => 0,
    }
}

/// Symmetric Gram matrix of a kernel on a point set.
pub fn gram(kernel: &Kernel, pts: &PointSet) -> DMatrix<f64> {
    let n = pts.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.value(pts.row(i), pts.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `K - p 1' - 1 p' + E 1 1'`, entry by entry.
pub fn reduce_gram(k: &DMatrix<f64>, p: &[f64], e_mu: f64) -> DMatrix<f64> {
    let n = k.nrows();
    let mut kt = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = k[(i, j)] - p[i] - p[j] + e_mu;
            kt[(i, j)] = v;
            kt[(j, i)] = v;
        }
    }
    kt
}

impl GramBundle {
    pub fn assemble(kernel: &Kernel, design: &PointSet, provider: &PotentialProvider, e_mu: f64) -> Result<Self> {
        if design.is_empty() {
            return Err(Error::Empty("design"));
        }
        kernel.check_dim(design.dim())?;
        provider.ensure_kernel(kernel)?;
        if let Some(i) = design.first_duplicate() {
            return Err(Error::DuplicatePoint(i));
        }
        if kernel.is_singular() {
            return Err(Error::Unsupported("Gram matrices need a kernel that is finite on the diagonal".into()));
        }
        if !e_mu.is_finite() {
            return Err(Error::NonFinite(format!("energy {e_mu}")));
        }
        let p = provider.potentials(design);
        if let Some(v) = p.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("potential {v}")));
        }
        let k = gram(kernel, design);
        let kt = reduce_gram(&k, &p, e_mu);
        let chol_k = Cholesky::robust(&k).map_err(pivot_of);
        let chol_kt = Cholesky::robust(&kt).map_err(pivot_of);
        Ok(GramBundle { kernel: kernel.clone(), design: design.clone(), k, kt, p, e_mu, chol_k, chol_kt })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
    pub fn design(&self) -> &PointSet {
        &self.design
    }
    pub fn n(&self) -> usize {
        self.design.len()
    }
    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }
    pub fn kt(&self) -> &DMatrix<f64> {
        &self.kt
    }
    pub fn p(&self) -> &[f64] {
        &self.p
    }
    pub fn e_mu(&self) -> f64 {
        self.e_mu
    }

    pub fn chol_k(&self) -> Result<&Cholesky> {
        self.chol_k.as_ref().map_err(|&pivot| Error::NotPositiveDefinite { pivot })
    }

    pub fn chol_kt(&self) -> Result<&Cholesky> {
        self.chol_kt.as_ref().map_err(|&pivot| Error::NotPositiveDefinite { pivot })
    }

    /// Jitter used for `K_n`, or the failing pivot.
    pub fn jitter_k(&self) -> std::result::Result<f64, usize> {
        self.chol_k.as_ref().map(|c| c.jitter()).map_err(|p| *p)
    }

    pub fn jitter_kt(&self) -> std::result::Result<f64, usize> {
        self.chol_kt.as_ref().map(|c| c.jitter()).map_err(|p| *p)
    }

    /// Weights `w* = K^{-1} p` and variance `E - p'K^{-1}p`.
    pub fn unconstrained(&self) -> Result<QuadratureSolution> {
        let c = self.chol_k()?;
        let w = c.solve(&self.p);
        let pw: f64 = dot(&self.p, &w);
        Ok(QuadratureSolution { weights: w, variance: self.e_mu - pw, estimate: None, mode: WeightMode::Unconstrained })
    }

    /// Optimal weights under `sum w = 1`, from `K_n`. Falls through to the
    /// bordered system when `K_n` cannot be factored.
    pub fn sum_to_one(&self) -> Result<QuadratureSolution> {
        let Ok(c) = self.chol_k() else {
            return self.bordered();
        };
        let a = c.solve(&self.p);
        let b = c.solve(&vec![1.0; self.n()]);
        let sa: f64 = a.iter().sum();
        let sb: f64 = b.iter().sum();
        let shift = (1.0 - sa) / sb;
        let w: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a + b * shift).collect();
        let variance = self.e_mu - dot(&self.p, &a) + (1.0 - sa) * (1.0 - sa) / sb;
        Ok(QuadratureSolution { weights: w, variance, estimate: None, mode: WeightMode::SumToOne })
    }

    /// `(1' K~^{-1} 1)^{-1}`.
    pub fn variance_reduced(&self) -> Result<f64> {
        Ok(1.0 / self.inv_quad_reduced()?)
    }

    /// `1' K~^{-1} 1`.
    pub fn inv_quad_reduced(&self) -> Result<f64> {
        Ok(self.chol_kt()?.quad_form(&vec![1.0; self.n()]))
    }

    /// `K~^{-1} 1 / (1' K~^{-1} 1)`.
    pub fn sum_to_one_reduced(&self) -> Result<QuadratureSolution> {
        let c = self.chol_kt()?;
        let b = c.solve(&vec![1.0; self.n()]);
        let s: f64 = b.iter().sum();
        Ok(QuadratureSolution {
            weights: b.iter().map(|v| v / s).collect(),
            variance: 1.0 / s,
            estimate: None,
            mode: WeightMode::SumToOne,
        })
    }

    /// Bordered solution through `(K~ + 1 1')^{-1} 1`, valid for
    /// conditionally positive definite kernels.
    pub fn bordered(&self) -> Result<QuadratureSolution> {
        let n = self.n();
        let b = DMatrix::from_fn(n, n, |i, j| self.kt[(i, j)] + 1.0);
        let c = solve_spd_or_general(&b, &DVector::from_element(n, 1.0))?;
        let s: f64 = c.iter().sum();
        if !(s.is_finite() && s != 0.0) {
            return Err(Error::Singular("bordered system".into()));
        }
        Ok(QuadratureSolution {
            weights: c.iter().map(|v| v / s).collect(),
            variance: 1.0 / s - 1.0,
            estimate: None,
            mode: WeightMode::Bordered,
        })
    }

    /// Posterior mean in its expanded form: `b0 + p'K^{-1}(y - b0 1)` with
    /// `b0` the discrete BLUE.
    pub fn posterior_mean_expanded(&self, y: &[f64]) -> Result<f64> {
        check_len(self.n(), y.len())?;
        let (b0, _) = self.discrete_blue(y)?;
        let c = self.chol_k()?;
        let r: Vec<f64> = y.iter().map(|v| v - b0).collect();
        Ok(b0 + dot(&self.p, &c.solve(&r)))
    }

    /// `K^{-1} 1` without regularization: a jittered factor would damp the
    /// alternating weights of smooth kernels, so LU takes over instead.
    fn k_inv_ones(&self) -> Result<Vec<f64>> {
        let ones = vec![1.0; self.n()];
        match self.chol_k() {
            Ok(c) if c.jitter() == 0.0 => Ok(c.solve(&ones)),
            _ => Ok(solve_general(&self.k, &DVector::from_vec(ones))?.as_slice().to_vec()),
        }
    }

    /// BLUE weights `K^{-1}1 / (1'K^{-1}1)`.
    pub fn blue_weights(&self) -> Result<Vec<f64>> {
        let b = self.k_inv_ones()?;
        let s: f64 = b.iter().sum();
        Ok(b.iter().map(|v| v / s).collect())
    }

    /// Discrete BLUE of the mean and its variance `(1'K^{-1}1)^{-1}`.
    pub fn discrete_blue(&self, y: &[f64]) -> Result<(f64, f64)> {
        check_len(self.n(), y.len())?;
        let b = self.k_inv_ones()?;
        let s: f64 = b.iter().sum();
        Ok((dot(&b, y) / s, 1.0 / s))
    }

    /// Integrated posterior variance over mu, without the sigma^2 factor.
    ///
    /// `diag_mean` is `int K(x,x) dmu(x)`; `h` holds `int K(x,x_j)K(x,x_k) dmu`.
    pub fn imspe(&self, h: &DMatrix<f64>, diag_mean: f64) -> Result<f64> {
        let n = self.n();
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: h.nrows() });
        }
        let c = self.chol_k()?;
        let b = c.solve(&vec![1.0; n]);
        let s: f64 = b.iter().sum();
        let kinv_h = c.solve_mat(h);
        let tr: f64 = (0..n).map(|i| kinv_h[(i, i)]).sum();
        let bv = DVector::from_column_slice(&b);
        let bhb = (h * &bv).dot(&bv);
        Ok(diag_mean + 1.0 / s - 2.0 * dot(&self.p, &b) / s - (tr - bhb / s))
    }

    /// IMSPE for translation-invariant kernels, where `K(x,x)` is constant.
    pub fn imspe_stationary(&self, h: &DMatrix<f64>) -> Result<f64> {
        if !self.kernel.is_translation_invariant() {
            return Err(Error::Unsupported("diagonal integral needed for this kernel".into()));
        }
        let d = self.kernel.diag(self.design.row(0));
        self.imspe(h, d)
    }

    /// Posterior variance of f(x) in the constant-mean model (without sigma^2).
    pub fn pointwise_variance(&self, x: &[f64]) -> Result<f64> {
        let c = self.chol_k()?;
        let k: Vec<f64> = self.design.rows().map(|xi| self.kernel.value(x, xi)).collect();
        let a = c.solve(&k);
        let b = c.solve(&vec![1.0; self.n()]);
        let s: f64 = b.iter().sum();
        let g = 1.0 - a.iter().sum::<f64>();
        Ok(self.kernel.diag(x) - dot(&k, &a) + g * g / s)
    }
}

fn check_len(n: usize, m: usize) -> Result<()> {
    if n == m {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: n, got: m })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// No constraint on the weights (known mean).
    Unconstrained,
    /// Weights summing to one.
    SumToOne,
    /// Weights summing to one, from the bordered reduced system.
    Bordered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSolution {
    pub mode: WeightMode,
    pub weights: Vec<f64>,
    pub variance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimate: Option<f64>,
}

impl QuadratureSolution {
    /// `w'y`, accumulated around `y_1` so that constants are reproduced exactly.
    pub fn estimate_integral(&self, y: &[f64]) -> Result<f64> {
        if self.mode == WeightMode::Unconstrained {
            return Err(Error::Unsupported("integral estimate needs weights summing to one".into()));
        }
        check_len(self.weights.len(), y.len())?;
        let y0 = y[0];
        Ok(y0 + self.weights.iter().zip(y).map(|(w, v)| w * (v - y0)).sum::<f64>())
    }

    pub fn with_estimate(mut self, y: &[f64]) -> Result<Self> {
        self.estimate = Some(self.estimate_integral(y)?);
        Ok(self)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            dp = n * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        if order == 1 {
            x = 0.0;
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order == 1 {
        weights[0] = 2.0;
    }
    (nodes, weights)
}

/// `int_0^1 f(u) du` on panels that also break at the given kinks.
fn panel_integral(f: impl Fn(f64) -> f64, kinks: &[f64], panels: usize, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
    let mut bps: Vec<f64> = (0..=panels).map(|i| i as f64 / panels as f64).collect();
    bps.extend(kinks.iter().copied().filter(|v| *v > 0.0 && *v < 1.0));
    bps.sort_by(|a, b| a.total_cmp(b));
    bps.dedup();
    let mut total = 0.0;
    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, wt) in gl.0.iter().zip(&gl.1) {
            total += wt * half * f(mid + half * x);
        }
    }
    total
}

/// `H_n(mu)` for mu uniform on the unit cube, through per-coordinate
/// piecewise Gauss-Legendre products (tensor kernels or d = 1).
pub fn h_matrix_quadrature(kernel: &Kernel, design: &PointSet, panels: usize, order: usize) -> Result<DMatrix<f64>> {
    kernel.check_dim(design.dim())?;
    let factors: Vec<Kernel> = match kernel {
        Kernel::TensorProduct(fs) => fs.clone(),
        _ if design.dim() == 1 => vec![kernel.clone()],
        _ => return Err(Error::Unsupported("per-coordinate quadrature needs a tensor kernel".into())),
    };
    let gl = gauss_legendre(order);
    let n = design.len();
    let mut h = DMatrix::from_element(n, n, 1.0);
    for (d, f) in factors.iter().enumerate() {
        for j in 0..n {
            for k in 0..=j {
                let (a, b) = (design.row(j)[d], design.row(k)[d]);
                let v = panel_integral(|u| f.value(&[u], &[a]) * f.value(&[u], &[b]), &[a, b], panels, &gl);
                h[(j, k)] *= v;
                if j != k {
                    h[(k, j)] *= v;
                }
            }
        }
    }
    Ok(h)
}

/// `H_n(mu)` as a sample average, with the entrywise standard errors.
pub fn h_matrix_sampled(kernel: &Kernel, design: &PointSet, sample: &PointSet) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = design.len();
    let m = sample.len() as f64;
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut sum2 = DMatrix::<f64>::zeros(n, n);
    let mut kv = vec![0.0; n];
    for s in sample.rows() {
        for (j, x) in design.rows().enumerate() {
            kv[j] = kernel.value(s, x);
        }
        for j in 0..n {
            for k in 0..n {
                let v = kv[j] * kv[k];
                sum[(j, k)] += v;
                sum2[(j, k)] += v * v;
            }
        }
    }
    let mean = &sum / m;
    let se = DMatrix::from_fn(n, n, |j, k| {
        let var: f64 = (sum2[(j, k)] / m - mean[(j, k)] * mean[(j, k)]) * m / (m - 1.0).max(1.0);
        (var.max(0.0) / m).sqrt()
    });
    (mean, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri_bundle(xs: &[f64]) -> GramBundle {
        let k = Kernel::triangular(1.0).unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        GramBundle::assemble(&k, &PointSet::from_scalars(xs), &p, p.energy()).unwrap()
    }

    #[test]
    fn one_point_triangular() {
        let g = tri_bundle(&[0.5]);
        assert_eq!(g.k()[(0, 0)], 1.0);
        assert!((g.p()[0] - 0.75).abs() < 1e-15);
        assert!((g.kt()[(0, 0)] - 1.0 / 6.0).abs() < 1e-15);
        let u = g.unconstrained().unwrap();
        assert!((u.weights[0] - 0.75).abs() < 1e-15);
        assert!((u.variance - (2.0 / 3.0 - 0.5625)).abs() < 1e-15);
        let s = g.sum_to_one().unwrap();
        assert!((s.weights[0] - 1.0).abs() < 1e-15);
        assert!((s.variance - 1.0 / 6.0).abs() < 1e-15);
        assert!((g.bordered().unwrap().weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_design_equal_diagonal() {
        let g = tri_bundle(&[0.25, 0.75]);
        assert_eq!(g.kt()[(0, 0)], g.kt()[(1, 1)]);
        assert_eq!(g.kt()[(0, 1)], g.kt()[(1, 0)]);
    }

    #[test]
    fn constants_integrate_exactly() {
        let g = tri_bundle(&[0.1, 0.35, 0.6, 0.95]);
        let s = g.sum_to_one().unwrap();
        assert_eq!(s.estimate_integral(&[3.0; 4]).unwrap(), 3.0);
        assert!(g.unconstrained().unwrap().estimate_integral(&[3.0; 4]).is_err());
    }

    #[test]
    fn one_point_blue() {
        let g = tri_bundle(&[0.3]);
        let (est, var) = g.discrete_blue(&[2.5]).unwrap();
        assert_eq!(est, 2.5);
        assert_eq!(var, 1.0);
    }

    #[test]
    fn blue_limits_on_a_fine_grid() {
        let x: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let pts = PointSet::from_scalars(&x);
        let k = Kernel::exponential(1.0).unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        let (_, var) = GramBundle::assemble(&k, &pts, &p, p.energy()).unwrap().discrete_blue(&x).unwrap();
        assert!((var / (2.0 / 3.0) - 1.0).abs() < 0.01);
        // smooth kernel: weights alternate in sign
        let k = Kernel::squared_exponential(1.0).unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        let w = GramBundle::assemble(&k, &pts, &p, p.energy()).unwrap().blue_weights().unwrap();
        let changes = w.windows(2).filter(|a| a[0].signum() != a[1].signum()).count();
        assert!(changes >= 40, "{changes} sign changes");
    }

    #[test]
    fn duplicates_rejected() {
        let k = Kernel::triangular(1.0).unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        let r = GramBundle::assemble(&k, &PointSet::from_scalars(&[0.2, 0.2]), &p, p.energy());
        assert!(matches!(r, Err(Error::DuplicatePoint(_))));
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bordered_for_negdist() {
        let k = Kernel::neg_distance(1.0).unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        let g = GramBundle::assemble(&k, &PointSet::from_scalars(&[0.0, 0.3, 0.7, 1.0]), &p, p.energy()).unwrap();
        assert!(g.chol_k().is_err());
        let s = g.sum_to_one().unwrap();
        assert_eq!(s.mode, WeightMode::Bordered);
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
