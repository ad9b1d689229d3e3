//! Covering and packing radii, physical energy, spectral radius and the
//! convergence bounds of the conditional-gradient iterations.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::{is_symmetric, Cholesky};
use crate::points::{sq_dist, PointSet};

/// `max_{x in eval} min_i ||x - x_i||`, a lower approximation of the covering
/// radius over the domain.
pub fn covering_radius(design: &PointSet, eval: &PointSet) -> Result<f64> {
    if design.is_empty() {
        return Err(Error::Empty("design"));
    }
    if eval.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    if design.dim() != eval.dim() {
        return Err(Error::DimensionMismatch { expected: design.dim(), got: eval.dim() });
    }
    let worst = (0..eval.len())
        .into_par_iter()
        .map(|j| {
            let e = eval.row(j);
            design.rows().map(|x| sq_dist(x, e)).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst.sqrt())
}

/// Half the smallest pairwise distance.
pub fn packing_radius(design: &PointSet) -> Result<f64> {
    let n = design.len();
    if n < 2 {
        return Err(Error::InvalidParameter("packing radius needs at least two points".into()));
    }
    let m = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = design.row(i);
            (0..i).map(|j| sq_dist(a, design.row(j))).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(0.5 * m.sqrt())
}

/// Covering radius after each prefix `x_1..x_k`, `k = 1..n`.
pub fn covering_trace(design: &PointSet, eval: &PointSet) -> Result<Vec<f64>> {
    covering_radius(design, eval)?;
    let mut gap = vec![f64::INFINITY; eval.len()];
    let mut out = Vec::with_capacity(design.len());
    for x in design.rows() {
        gap.par_iter_mut().enumerate().for_each(|(j, g)| {
            let d = sq_dist(x, eval.row(j));
            if d < *g {
                *g = d;
            }
        });
        out.push(gap.iter().copied().fold(0.0, f64::max).sqrt());
    }
    Ok(out)
}

/// Packing radius after each prefix (`+inf` for a single point).
pub fn packing_trace(design: &PointSet) -> Vec<f64> {
    let mut m = f64::INFINITY;
    let mut out = Vec::with_capacity(design.len());
    for i in 0..design.len() {
        for j in 0..i {
            m = m.min(sq_dist(design.row(i), design.row(j)));
        }
        out.push(0.5 * m.sqrt());
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub cr: f64,
    /// Always false here: the radius is taken over a finite set.
    pub cr_exact: bool,
    pub pr: f64,
    pub evaluation_set_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physical_energy: Option<f64>,
}

impl MetricReport {
    pub fn compute(design: &PointSet, eval: &PointSet) -> Result<Self> {
        Ok(MetricReport {
            n: design.len(),
            cr: covering_radius(design, eval)?,
            cr_exact: false,
            pr: packing_radius(design)?,
            evaluation_set_size: eval.len(),
            physical_energy: None,
        })
    }
}

/// Mean off-diagonal kernel value, `2/(n(n-1)) sum_{i<j} K(x_i, x_j)`.
pub fn physical_energy(design: &PointSet, kernel: &Kernel) -> Result<f64> {
    let n = design.len();
    if n < 2 {
        return Err(Error::InvalidParameter("physical energy needs at least two points".into()));
    }
    kernel.check_dim(design.dim())?;
    if let Some(i) = design.first_duplicate() {
        return Err(Error::DuplicatePoint(i));
    }
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..i {
            acc += kernel.value(design.row(i), design.row(j));
        }
    }
    Ok(2.0 * acc / (n * (n - 1)) as f64)
}

/// Largest eigenvalue of a symmetric matrix.
///
/// Power iteration on `A + c I`, with `c` from Gershgorin discs so the
/// shifted matrix is positive semidefinite; stops at a relative change of
/// 1e-10 in the Rayleigh quotient. If that does not happen within the
/// iteration limit, a full symmetric eigendecomposition is used instead.
pub fn lambda_max(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Empty("matrix"));
    }
    if !is_symmetric(a) {
        return Err(Error::InvalidParameter("lambda_max needs a symmetric matrix".into()));
    }
    let lower = (0..n)
        .map(|i| a[(i, i)] - (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let shift = (-lower).max(0.0);
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_7).fract() * 1e-3);
    v /= v.norm();
    for _ in 0..20_000 {
        let av = a * &v;
        let rq = v.dot(&av);
        // eigen-residual; the quotient error is quadratic in it
        let res = (&av - &v * rq).norm();
        if res <= 1e-7 * rq.abs().max(f64::MIN_POSITIVE) {
            return Ok(rq);
        }
        let w = av + &v * shift;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(rq);
        }
        v = w / norm;
    }
    Ok(a.clone().symmetric_eigen().eigenvalues.max())
}

/// The bound families for the conditional-gradient iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma {
    /// `lambda / n`, harmonic steps while all selections are new.
    InitialPhase,
    /// `2 lambda (1 + 2 log(n+1)) / n`
    Harmonic,
    /// `8 lambda / (n + 3)`
    #[serde(rename = "two-over-n-plus-3")]
    TwoOverNPlus3,
    /// `8 lambda / (n + 3)`
    Optimal,
    /// `4 R^2 (1 + R^2/a^2) / n^2`, optimum in the interior of the simplex.
    Interior,
    /// `8 lambda / (n + 3)` for vertex exchange.
    VertexExchange,
}

impl Lemma {
    pub const ALL: [Lemma; 6] =
        [Lemma::InitialPhase, Lemma::Harmonic, Lemma::TwoOverNPlus3, Lemma::Optimal, Lemma::Interior, Lemma::VertexExchange];

    pub fn name(self) -> &'static str {
        match self {
            Lemma::InitialPhase => "initial-phase",
            Lemma::Harmonic => "harmonic",
            Lemma::TwoOverNPlus3 => "two-over-n-plus-3",
            Lemma::Optimal => "optimal",
            Lemma::Interior => "interior",
            Lemma::VertexExchange => "vertex-exchange",
        }
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Lemma {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Lemma::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown bound '{s}'")))
    }
}

/// Constants entering the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub lambda_max: f64,
    pub r_star: f64,
    pub alpha_star: f64,
    pub w_star: f64,
    pub l: f64,
    pub omega: usize,
}

impl BoundInputs {
    /// From the kernel matrix on the candidates and the optimal weights.
    pub fn from_matrix(k: &DMatrix<f64>, w_hat: &[f64]) -> Result<Self> {
        let omega = k.nrows();
        if w_hat.len() != omega {
            return Err(Error::DimensionMismatch { expected: omega, got: w_hat.len() });
        }
        let lambda = lambda_max(k)?;
        let inv = Cholesky::robust(k)?.inverse();
        let l = (0..omega).map(|i| inv[(i, i)]).fold(0.0, f64::max).sqrt();
        let w_star = w_hat.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(BoundInputs {
            lambda_max: lambda,
            r_star: (lambda * (1.0 - 1.0 / omega as f64)).sqrt(),
            alpha_star: w_star / l,
            w_star,
            l,
            omega,
        })
    }
}

/// Right-hand side of a bound at iteration `n >= 1`.
pub fn bound_value(lemma: Lemma, inputs: &BoundInputs, n: usize) -> f64 {
    let nf = n as f64;
    let lam = inputs.lambda_max;
    match lemma {
        Lemma::InitialPhase => lam / nf,
        Lemma::Harmonic => 2.0 * lam * (1.0 + 2.0 * (nf + 1.0).ln()) / nf,
        Lemma::TwoOverNPlus3 | Lemma::Optimal | Lemma::VertexExchange => 8.0 * lam / (nf + 3.0),
        Lemma::Interior => {
            let r2 = inputs.r_star * inputs.r_star;
            let a2 = inputs.alpha_star * inputs.alpha_star;
            4.0 * r2 * (1.0 + r2 / a2) / (nf * nf)
        }
    }
}

/// `(u - v)' K (u - v)`.
pub fn k_norm_sq(k: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let d = DVector::from_iterator(u.len(), u.iter().zip(v).map(|(a, b)| a - b));
    (k * &d).dot(&d)
}
