//! Dense symmetric factorizations used throughout the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Diagonal jitter levels tried in order, relative to the mean diagonal.
pub const JITTER_LEVELS: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Lower Cholesky factor `A + jitter I = L L'`, stored row-major.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Factor without jitter. Fails with the index of the first non-positive pivot.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        Self::with_jitter(a, 0.0)
    }

    pub fn with_jitter(a: &DMatrix<f64>, jitter: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
        }
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let (head, tail) = l.split_at_mut(j * n);
            let rj = &mut tail[..n];
            // row j, columns < j
            for k in 0..j {
                let rk = &head[k * n..k * n + n];
                let mut s = a[(j, k)];
                for m in 0..k {
                    s -= rj[m] * rk[m];
                }
                rj[k] = s / rk[k];
            }
            let mut d = a[(j, j)] + jitter;
            for m in 0..j {
                d -= rj[m] * rj[m];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            rj[j] = d.sqrt();
        }
        Ok(Cholesky { n, l, jitter })
    }

    /// Factor with escalating jitter (see [`JITTER_LEVELS`]).
    pub fn robust(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::Empty("matrix"));
        }
        let scale = (0..n).map(|i| a[(i, i)].abs()).sum::<f64>() / n as f64;
        let mut last = Error::NotPositiveDefinite { pivot: 0 };
        for lvl in JITTER_LEVELS {
            match Self::with_jitter(a, lvl * scale) {
                Ok(c) => return Ok(c),
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Absolute jitter added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solve `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let row = &self.l[i * self.n..i * self.n + i];
            let mut s = b[i];
            for (k, lk) in row.iter().enumerate() {
                s -= lk * b[k];
            }
            b[i] = s / self.at(i, i);
        }
    }

    /// Solve `L' x = y` in place.
    pub fn backward(&self, y: &mut [f64]) {
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for k in i + 1..self.n {
                s -= self.at(k, i) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.solve(b.as_slice()))
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for c in 0..b.ncols() {
            let col: Vec<f64> = b.column(c).iter().copied().collect();
            out.set_column(c, &DVector::from_vec(self.solve(&col)));
        }
        out
    }

    /// `b' A^{-1} b` via one triangular solve.
    pub fn quad_form(&self, b: &[f64]) -> f64 {
        let mut y = b.to_vec();
        self.forward(&mut y);
        y.iter().map(|v| v * v).sum()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.solve_mat(&DMatrix::identity(self.n, self.n))
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.at(i, i).ln()).sum::<f64>()
    }
}

/// Solve a general square system by LU with partial pivoting.
pub fn solve_general(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    let x = lu.solve(b).ok_or_else(|| Error::Singular("LU solve failed".into()))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular("non-finite LU solution".into()))
    }
}

/// Symmetric positive definite solve with jitter fallback, then LU.
pub fn solve_spd_or_general(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    match Cholesky::robust(a) {
        Ok(c) => Ok(c.solve_vec(b)),
        Err(_) => solve_general(a, b),
    }
}

pub fn is_symmetric(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    if a.ncols() != n {
        return false;
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        &b * b.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn solves_match_lu() {
        let a = spd(12);
        let b = DVector::from_fn(12, |i, _| i as f64 - 3.0);
        let c = Cholesky::new(&a).unwrap();
        let x = c.solve_vec(&b);
        assert!((&a * &x - &b).norm() < 1e-10);
        assert!((c.quad_form(b.as_slice()) - b.dot(&x)).abs() < 1e-10);
        let det = a.clone().determinant();
        assert!((c.log_det() - det.ln()).abs() < 1e-10);
    }

    #[test]
    fn reports_failing_pivot() {
        let mut a = DMatrix::identity(4, 4);
        a[(2, 2)] = -1.0;
        assert!(matches!(Cholesky::new(&a), Err(Error::NotPositiveDefinite { pivot: 2 })));
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        assert!(Cholesky::new(&a).is_err());
        let c = Cholesky::robust(&a).unwrap();
        assert!(c.jitter() > 0.0);
    }
}
