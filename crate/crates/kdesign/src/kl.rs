//! Truncated Karhunen-Loeve expansion of the centred kernel and the Bayesian
//! linear model built on it: information matrix, c-optimal design measure
//! for the intercept, and extraction of an exact design from that measure.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::Cholesky;
use crate::measure::DiscreteSignedMeasure;
use crate::points::{dist, PointSet};

/// Floor applied to the residual variance `v(x)`.
pub const V_FLOOR: f64 = 1e-10;
/// Largest quadrature grid handled by a dense eigendecomposition.
pub const DIRECT_LIMIT: usize = 2500;

/// Support weights below this are folded into the entering point.
const DROP_WEIGHT: f64 = 1e-12;

const SUBSPACE_MAX_ITER: usize = 3000;
const SUBSPACE_TOL: f64 = 1e-12;

/// Leading eigenpairs of the integral operator of the kernel centred with
/// respect to the uniform measure on a regular grid, with Nystrom extension
/// of the eigenfunctions to arbitrary points.
#[derive(Clone, Debug)]
pub struct KlBasis {
    kernel: Kernel,
    axis: Vec<f64>,
    grid: PointSet,
    eigenvalues: Vec<f64>,
    /// Eigenfunction values at the grid nodes, one column per eigenpair.
    grid_values: DMatrix<f64>,
    /// `(1/N) sum_g P(g) phi_k(g)`, the centring correction of the extension.
    shifts: Vec<f64>,
    energy: f64,
    total_trace: f64,
    tensor: bool,
}

/// Values needed by the linear model at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct KlEval {
    pub phi: Vec<f64>,
    /// Residual variance before clamping.
    pub v_raw: f64,
    pub v: f64,
}

/// Description written next to serialized bases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlHeader {
    #[serde(rename = "M")]
    pub m_terms: usize,
    pub grid: usize,
    pub dim: usize,
    pub family: String,
    pub kernel: String,
    pub eigenvalues: Vec<f64>,
}

fn regular_axis(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn product_grid(axis: &[f64], d: usize) -> PointSet {
    let n1 = axis.len();
    let total = n1.pow(d as u32);
    let mut out = PointSet::with_capacity(d, total);
    let mut row = vec![0.0; d];
    for mut g in 0..total {
        // first coordinate varies slowest
        for j in (0..d).rev() {
            row[j] = axis[g % n1];
            g /= n1;
        }
        out.push(&row).expect("row has the grid dimension");
    }
    out
}

/// Multiply a tensor stored with the first mode slowest by `u` along `mode`.
fn mode_apply(v: &[f64], n1: usize, d: usize, mode: usize, u: &DMatrix<f64>) -> Vec<f64> {
    let inner = n1.pow((d - 1 - mode) as u32);
    let outer = n1.pow(mode as u32);
    let mut out = vec![0.0; v.len()];
    for o in 0..outer {
        for r in 0..n1 {
            let dst = (o * n1 + r) * inner;
            for j in 0..n1 {
                let c = u[(r, j)];
                if c == 0.0 {
                    continue;
                }
                let src = (o * n1 + j) * inner;
                for t in 0..inner {
                    out[dst + t] += c * v[src + t];
                }
            }
        }
    }
    out
}

fn sorted_desc(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    idx
}

impl KlBasis {
    /// `m_terms - 1` leading eigenpairs (the constant accounts for the
    /// remaining term of the model) on a grid of `grid` points per axis.
    pub fn nystrom(kernel: &Kernel, dim: usize, grid: usize, m_terms: usize) -> Result<Self> {
        kernel.check_dim(dim)?;
        if m_terms < 2 {
            return Err(Error::InvalidParameter("the model needs M >= 2".into()));
        }
        if grid < 2 {
            return Err(Error::InvalidParameter("the quadrature grid needs at least two points per axis".into()));
        }
        if kernel.is_singular() {
            return Err(Error::Unsupported("eigen-expansion of a singular kernel".into()));
        }
        let axis = regular_axis(grid);
        let total = grid
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidParameter("quadrature grid too large".into()))?;
        let r = m_terms - 1;
        if r >= total {
            return Err(Error::InvalidParameter(format!("M - 1 = {r} must be below the grid size {total}")));
        }
        let pts = product_grid(&axis, dim);
        let tensor = matches!(kernel, Kernel::TensorProduct(_)) && dim >= 2;
        let (eigenvalues, grid_values, total_trace, p_grid) = if tensor {
            let Kernel::TensorProduct(fs) = kernel else { unreachable!() };
            tensor_decomposition(fs, &axis, r)?
        } else {
            if total > DIRECT_LIMIT {
                return Err(Error::Unsupported(format!(
                    "grid of {total} points for a non-product kernel (limit {DIRECT_LIMIT})"
                )));
            }
            direct_decomposition(kernel, &pts, r)?
        };
        let n = total as f64;
        let lead = eigenvalues[0];
        if !(lead > 0.0) || eigenvalues.iter().any(|l| !(*l > 1e-14 * lead)) {
            return Err(Error::Degenerate(format!("fewer than {r} positive eigenvalues")));
        }
        let energy = p_grid.iter().sum::<f64>() / n;
        let shifts = (0..r)
            .map(|k| grid_values.column(k).iter().zip(&p_grid).map(|(a, b)| a * b).sum::<f64>() / n)
            .collect();
        Ok(KlBasis { kernel: kernel.clone(), axis, grid: pts, eigenvalues, grid_values, shifts, energy, total_trace, tensor })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }
    pub fn grid(&self) -> &PointSet {
        &self.grid
    }
    /// Quadrature weight of every grid node.
    pub fn grid_weight(&self) -> f64 {
        1.0 / self.grid.len() as f64
    }
    /// `Lambda_1 >= ... >= Lambda_{M-1}`
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    pub fn terms(&self) -> usize {
        self.eigenvalues.len() + 1
    }
    pub fn grid_values(&self) -> &DMatrix<f64> {
        &self.grid_values
    }
    /// Sum of all eigenvalues of the discretized operator, not only the
    /// retained ones.
    pub fn total_trace(&self) -> f64 {
        self.total_trace
    }
    pub fn used_tensor_shortcut(&self) -> bool {
        self.tensor
    }
    /// Mean of the kernel over the grid.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Grid average of `K(x, .)`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        let n = self.grid.len() as f64;
        self.grid.rows().map(|g| self.kernel.value(x, g)).sum::<f64>() / n
    }

    /// Kernel centred with respect to the grid measure.
    pub fn reduced_value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.kernel.value(x, y) - self.potential(x) - self.potential(y) + self.energy
    }

    /// `(1/N) sum_g K_mu(g, g)`
    pub fn quadrature_trace(&self) -> f64 {
        let n = self.grid.len() as f64;
        self.grid.rows().map(|g| self.kernel.diag(g) - 2.0 * self.potential(g) + self.energy).sum::<f64>() / n
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<KlEval> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let n = self.grid.len() as f64;
        let kx: Vec<f64> = self.grid.rows().map(|g| self.kernel.value(x, g)).collect();
        let p = kx.iter().sum::<f64>() / n;
        let mut phi = vec![0.0; self.eigenvalues.len()];
        let mut explained = 0.0;
        for (k, out) in phi.iter_mut().enumerate() {
            let s: f64 = self.grid_values.column(k).iter().zip(&kx).map(|(a, b)| a * b).sum();
            let lam = self.eigenvalues[k];
            *out = (s / n - self.shifts[k]) / lam;
            explained += lam * *out * *out;
        }
        let v_raw = self.kernel.diag(x) - 2.0 * p + self.energy - explained;
        Ok(KlEval { phi, v_raw, v: v_raw.max(V_FLOOR) })
    }

    pub fn evaluate_many(&self, xs: &PointSet) -> Result<Vec<KlEval>> {
        (0..xs.len()).into_par_iter().map(|i| self.evaluate(xs.row(i))).collect()
    }

    /// `sum_k Lambda_k phi_k(x) phi_k(y)` over the retained terms.
    pub fn reconstruct(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let a = self.evaluate(x)?;
        let b = self.evaluate(y)?;
        Ok(self.eigenvalues.iter().zip(a.phi.iter().zip(&b.phi)).map(|(l, (p, q))| l * p * q).sum())
    }

    pub fn header(&self) -> KlHeader {
        KlHeader {
            m_terms: self.terms(),
            grid: self.axis.len(),
            dim: self.dim(),
            family: self.kernel.family_name().to_string(),
            kernel: self.kernel.to_string(),
            eigenvalues: self.eigenvalues.clone(),
        }
    }
}

/// Dense route: eigenpairs of the centred Gram matrix divided by N.
fn direct_decomposition(kernel: &Kernel, pts: &PointSet, r: usize) -> Result<(Vec<f64>, DMatrix<f64>, f64, Vec<f64>)> {
    let n = pts.len();
    let g = DMatrix::from_fn(n, n, |i, j| kernel.value(pts.row(i), pts.row(j)));
    let p: Vec<f64> = (0..n).map(|i| g.row(i).sum() / n as f64).collect();
    let e = p.iter().sum::<f64>() / n as f64;
    let c = DMatrix::from_fn(n, n, |i, j| (g[(i, j)] - p[i] - p[j] + e) / n as f64);
    let eig = c.symmetric_eigen();
    let order = sorted_desc(eig.eigenvalues.as_slice());
    let total = eig.eigenvalues.sum();
    let lam: Vec<f64> = order[..r].iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = (n as f64).sqrt();
    let vals = DMatrix::from_fn(n, r, |i, k| eig.eigenvectors[(i, order[k])] * scale);
    Ok((lam, vals, total, p))
}

/// Product route: per-axis eigenpairs, then the leading eigenpairs of the
/// diagonal product operator restricted to the complement of the constants.
fn tensor_decomposition(factors: &[Kernel], axis: &[f64], r: usize) -> Result<(Vec<f64>, DMatrix<f64>, f64, Vec<f64>)> {
    let d = factors.len();
    let n1 = axis.len();
    let n = n1.pow(d as u32);
    let mut evals = Vec::with_capacity(d);
    let mut evecs = Vec::with_capacity(d);
    let mut means = Vec::with_capacity(d);
    let mut consts = Vec::with_capacity(d);
    for f in factors {
        let k1 = DMatrix::from_fn(n1, n1, |i, j| f.value(&[axis[i]], &[axis[j]]));
        means.push((0..n1).map(|i| k1.row(i).sum() / n1 as f64).collect::<Vec<_>>());
        let eig = (k1 / n1 as f64).symmetric_eigen();
        let u = eig.eigenvectors;
        consts.push((0..n1).map(|j| u.column(j).sum()).collect::<Vec<_>>());
        evals.push(eig.eigenvalues);
        evecs.push(u);
    }
    // product coordinates share the grid layout: first mode slowest
    let mut dvec = vec![1.0; n];
    let mut q = vec![1.0; n];
    for (idx, (dv, qv)) in dvec.iter_mut().zip(q.iter_mut()).enumerate() {
        let mut rest = idx;
        for m in (0..d).rev() {
            let j = rest % n1;
            rest /= n1;
            *dv *= evals[m][j];
            *qv *= consts[m][j];
        }
    }
    let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.iter_mut().for_each(|v| *v /= qn);
    let q = DVector::from_vec(q);
    let dv = DVector::from_vec(dvec);
    let total = dv.sum() - q.iter().zip(dv.iter()).map(|(a, b)| a * a * b).sum::<f64>();

    let apply = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let mut y = x - &q * (q.transpose() * x);
        for (mut row, s) in y.row_iter_mut().zip(dv.iter()) {
            row *= *s;
        }
        let qy = q.transpose() * &y;
        y - &q * qy
    };
    let b = (2 * r).max(r + 10).min(n - 1);
    let order = sorted_desc(dv.as_slice());
    let mut x = DMatrix::zeros(n, b);
    for (c, &i) in order[..b].iter().enumerate() {
        x[(i, c)] = 1.0;
    }
    let mut ritz: Option<(Vec<f64>, DMatrix<f64>)> = None;
    for it in 1..=SUBSPACE_MAX_ITER {
        x = apply(&x).qr().q();
        if it % 10 == 0 || it == SUBSPACE_MAX_ITER {
            let ax = apply(&x);
            let h = x.transpose() * &ax;
            let h = (&h + h.transpose()) * 0.5;
            let eig = h.symmetric_eigen();
            let ord = sorted_desc(eig.eigenvalues.as_slice());
            let lam: Vec<f64> = ord[..r].iter().map(|&i| eig.eigenvalues[i]).collect();
            let v = DMatrix::from_fn(b, r, |i, k| eig.eigenvectors[(i, ord[k])]);
            let xv = &x * &v;
            let axv = &ax * &v;
            let mut res: f64 = 0.0;
            for k in 0..r {
                res = res.max((axv.column(k) - xv.column(k) * lam[k]).norm());
            }
            let done = res <= SUBSPACE_TOL * lam[0].abs();
            ritz = Some((lam, xv));
            if done {
                break;
            }
        }
    }
    let (lam, coef) = ritz.ok_or_else(|| Error::Degenerate("subspace iteration".into()))?;
    let scale = (n as f64).sqrt();
    let mut vals = DMatrix::zeros(n, r);
    for k in 0..r {
        let mut v: Vec<f64> = coef.column(k).iter().copied().collect();
        for (m, u) in evecs.iter().enumerate() {
            v = mode_apply(&v, n1, d, m, u);
        }
        for (i, val) in v.into_iter().enumerate() {
            vals[(i, k)] = val * scale;
        }
    }
    let mut p_grid = vec![1.0; n];
    for (idx, p) in p_grid.iter_mut().enumerate() {
        let mut rest = idx;
        for m in (0..d).rev() {
            *p *= means[m][rest % n1];
            rest /= n1;
        }
    }
    Ok((lam, vals, total, p_grid))
}

/// Candidate-level pieces of the Bayesian linear model
/// `y = beta_0 + sum_k beta_k phi_k(x) + eps`, `var(beta_k) = Lambda_k`,
/// `var(eps(x)) = v(x)`, with a vague prior on the intercept.
#[derive(Clone, Debug)]
pub struct BayesModel {
    /// Rows `psi(x)' / sqrt(v(x))` with `psi = (1, phi_1, ..., phi_{M-1})`.
    scaled: DMatrix<f64>,
    /// Diagonal of `Lambda^{-1} / m`, first entry zero.
    prior: Vec<f64>,
    m: f64,
    floored: Vec<bool>,
    min_v_raw: f64,
}

fn scaled_rows(basis: &KlBasis, pts: &PointSet) -> Result<(DMatrix<f64>, Vec<bool>, f64)> {
    let ev = basis.evaluate_many(pts)?;
    let mm = basis.terms();
    let mut s = DMatrix::zeros(pts.len(), mm);
    let mut floored = Vec::with_capacity(pts.len());
    let mut min_raw = f64::INFINITY;
    for (i, e) in ev.iter().enumerate() {
        let w = 1.0 / e.v.sqrt();
        s[(i, 0)] = w;
        for (k, p) in e.phi.iter().enumerate() {
            s[(i, k + 1)] = p * w;
        }
        floored.push(e.v_raw < V_FLOOR);
        min_raw = min_raw.min(e.v_raw);
    }
    Ok((s, floored, min_raw))
}

fn prior_diag(basis: &KlBasis, m: f64) -> Vec<f64> {
    std::iter::once(0.0).chain(basis.eigenvalues().iter().map(|l| 1.0 / (l * m))).collect()
}

impl BayesModel {
    pub fn new(basis: &KlBasis, candidates: &PointSet, m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidParameter("m must be positive".into()));
        }
        if candidates.is_empty() {
            return Err(Error::Empty("candidate set"));
        }
        let (scaled, floored, min_v_raw) = scaled_rows(basis, candidates)?;
        Ok(BayesModel { scaled, prior: prior_diag(basis, m), m, floored, min_v_raw })
    }

    pub fn len(&self) -> usize {
        self.scaled.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn terms(&self) -> usize {
        self.scaled.ncols()
    }
    pub fn m(&self) -> f64 {
        self.m
    }
    /// `Lambda^{-1}/m` as a diagonal.
    pub fn prior(&self) -> &[f64] {
        &self.prior
    }
    /// Candidates whose residual variance was raised to the floor.
    pub fn floored(&self) -> &[bool] {
        &self.floored
    }
    /// Smallest residual variance before clamping.
    pub fn min_v_raw(&self) -> f64 {
        self.min_v_raw
    }
    pub fn scaled_row(&self, i: usize) -> Vec<f64> {
        self.scaled.row(i).iter().copied().collect()
    }

    /// `M_B = sum_i w_i psi_i psi_i' / v_i + Lambda^{-1}/m`
    pub fn info_matrix(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        if w.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: w.len() });
        }
        let mm = self.terms();
        let mut out = DMatrix::from_diagonal(&DVector::from_column_slice(&self.prior));
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            for a in 0..mm {
                let sa = wi * self.scaled[(i, a)];
                for b in 0..mm {
                    out[(a, b)] += sa * self.scaled[(i, b)];
                }
            }
        }
        Ok(out)
    }

    /// `{M_B^{-1}}_{11}` and `M_B^{-1} e_1`.
    pub fn criterion(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mb = self.info_matrix(w)?;
        criterion_of(&mb)
    }

    /// Derivative of the criterion at `w` in the direction of every candidate
    /// Dirac measure.
    pub fn directional_derivatives(&self, w: &[f64], c: &[f64]) -> Vec<f64> {
        let s: Vec<f64> = (0..self.len())
            .map(|i| self.scaled.row(i).iter().zip(c).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let mean: f64 = s.iter().zip(w).map(|(si, wi)| wi * si * si).sum();
        s.iter().map(|si| -(si * si - mean)).collect()
    }
}

fn criterion_of(mb: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let ch = Cholesky::new(mb)?;
    let mut e1 = vec![0.0; mb.nrows()];
    e1[0] = 1.0;
    let c = ch.solve(&e1);
    Ok((c[0], c))
}

/// Unnormalized `M_B(X_n) = Psi' V^{-1} Psi + Lambda^{-1}` of an exact design.
pub fn info_matrix_of_points(basis: &KlBasis, pts: &PointSet) -> Result<DMatrix<f64>> {
    if pts.is_empty() {
        return Err(Error::Empty("design"));
    }
    let (s, _, _) = scaled_rows(basis, pts)?;
    let prior = prior_diag(basis, 1.0);
    Ok(s.transpose() * &s + DMatrix::from_diagonal(&DVector::from_vec(prior)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Every directional derivative exceeds `-tol`.
    Converged,
    MaxIterations,
    /// The line search found no decrease although the derivative was negative.
    Stalled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct COptimalConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub golden_steps: usize,
}

impl Default for COptimalConfig {
    fn default() -> Self {
        COptimalConfig { max_iter: 5000, tol: 1e-6, golden_steps: 80 }
    }
}

#[derive(Clone, Debug)]
pub struct COptimalResult {
    /// Weight of every candidate.
    pub weights: Vec<f64>,
    /// Criterion at the start and after each iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
    /// Smallest directional derivative at the returned measure.
    pub min_derivative: f64,
}

impl COptimalResult {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }
    pub fn criterion(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial value")
    }
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }
    pub fn measure(&self, candidates: &PointSet) -> Result<DiscreteSignedMeasure> {
        let s = self.support();
        DiscreteSignedMeasure::new(candidates.select(&s), s.iter().map(|&i| self.weights[i]).collect())
    }
}

fn lowest_argmin(v: &[f64], keep: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, x) in v.iter().enumerate() {
        if keep(i) && best.is_none_or(|b| *x < v[b]) {
            best = Some(i);
        }
    }
    best
}

/// Vertex exchange with a golden-section step, started from the uniform
/// measure on the candidates.
pub fn c_optimal_measure(model: &BayesModel, cfg: &COptimalConfig) -> Result<COptimalResult> {
    if cfg.max_iter == 0 || cfg.golden_steps == 0 || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter("c-optimal configuration".into()));
    }
    let omega = model.len();
    let mm = model.terms();
    let mut w = vec![1.0 / omega as f64; omega];
    let mut mb = model.info_matrix(&w)?;
    let (mut f, mut c) = criterion_of(&mb)?;
    let mut trace = vec![f];
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    let mut deriv = model.directional_derivatives(&w, &c);
    for _ in 0..cfg.max_iter {
        let ip = lowest_argmin(&deriv, |_| true).expect("non-empty");
        if deriv[ip] > -cfg.tol {
            stop = StopReason::Converged;
            break;
        }
        let neg: Vec<f64> = deriv.iter().map(|v| -v).collect();
        let im = lowest_argmin(&neg, |i| w[i] > 0.0).expect("measure has support");
        if im == ip {
            stop = StopReason::Converged;
            break;
        }
        if w[im] < DROP_WEIGHT {
            // too light for the line search to resolve: move it whole
            w[ip] += w[im];
            w[im] = 0.0;
            mb = model.info_matrix(&w)?;
            let (nf, nc) = criterion_of(&mb)?;
            debug_assert!(nf <= f * (1.0 + 1e-12));
            f = nf.min(f);
            c = nc;
            iterations += 1;
            trace.push(f);
            deriv = model.directional_derivatives(&w, &c);
            continue;
        }
        let sp = model.scaled_row(ip);
        let sm = model.scaled_row(im);
        let mut delta = DMatrix::zeros(mm, mm);
        for a in 0..mm {
            for b in 0..mm {
                delta[(a, b)] = sp[a] * sp[b] - sm[a] * sm[b];
            }
        }
        let phi = |al: f64| criterion_of(&(&mb + &delta * al)).map_or(f64::INFINITY, |r| r.0);
        let hi = w[im];
        let (mut lo_, mut hi_) = (0.0, hi);
        for _ in 0..cfg.golden_steps {
            let m1 = hi_ - gr * (hi_ - lo_);
            let m2 = lo_ + gr * (hi_ - lo_);
            if phi(m1) < phi(m2) {
                hi_ = m2;
            } else {
                lo_ = m1;
            }
        }
        let mut al = 0.5 * (lo_ + hi_);
        let mut fa = phi(al);
        let fh = phi(hi);
        if fh <= fa {
            al = hi;
            fa = fh;
        }
        if !(fa < f || (al == hi && fa <= f)) {
            stop = StopReason::Stalled;
            break;
        }
        iterations += 1;
        w[ip] += al;
        if al == hi {
            w[im] = 0.0;
        } else {
            w[im] -= al;
            if w[im] < DROP_WEIGHT {
                w[ip] += w[im];
                w[im] = 0.0;
            }
        }
        mb = model.info_matrix(&w)?;
        let (nf, nc) = criterion_of(&mb)?;
        // recomputation can differ from the line-search value in the last bits
        debug_assert!(nf <= f * (1.0 + 1e-12));
        f = nf.min(f);
        c = nc;
        trace.push(f);
        deriv = model.directional_derivatives(&w, &c);
    }
    let min_derivative = deriv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(COptimalResult { weights: w, trace, iterations, stop, min_derivative })
}

/// Pick `n` support points of a design measure: by decreasing weight, skipping
/// points closer than half the median nearest-neighbour distance of the
/// support to a point already taken, then filling up by weight.
pub fn extract_exact_design(candidates: &PointSet, weights: &[f64], n: usize) -> Result<Vec<usize>> {
    if weights.len() != candidates.len() {
        return Err(Error::DimensionMismatch { expected: candidates.len(), got: weights.len() });
    }
    let mut support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if n > support.len() {
        return Err(Error::InvalidParameter(format!("n = {n} exceeds the support size {}", support.len())));
    }
    support.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut nn: Vec<f64> = support
        .iter()
        .map(|&i| {
            support
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| dist(candidates.row(i), candidates.row(j)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(f64::total_cmp);
    let radius = if support.len() < 2 { 0.0 } else { 0.5 * nn[nn.len() / 2] };
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for &i in &support {
        if chosen.len() == n {
            break;
        }
        if chosen.iter().all(|&j| dist(candidates.row(i), candidates.row(j)) >= radius) {
            chosen.push(i);
        }
    }
    for &i in &support {
        if chosen.len() == n {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    Ok(chosen)
}
