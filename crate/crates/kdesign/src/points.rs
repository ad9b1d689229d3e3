//! Row-major point storage shared by designs, candidate sets and samples.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        PointSet { dim, data: Vec::new() }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        PointSet { dim, data: Vec::with_capacity(dim * n) }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: data.len() % dim });
        }
        Ok(PointSet { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("point rows"))?;
        let dim = first.as_ref().len();
        let mut ps = PointSet::with_capacity(dim, rows.len());
        for r in rows {
            ps.push(r.as_ref())?;
        }
        Ok(ps)
    }

    /// One-dimensional points.
    pub fn from_scalars(xs: &[f64]) -> Self {
        PointSet { dim: 1, data: xs.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.data[i * d..(i + 1) * d]
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        self.data.extend_from_slice(x);
        Ok(())
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.to_vec()).collect()
    }

    pub fn select(&self, idx: &[usize]) -> PointSet {
        let mut out = PointSet::with_capacity(self.dim, idx.len());
        for &i in idx {
            out.data.extend_from_slice(self.row(i));
        }
        out
    }

    pub fn prefix(&self, n: usize) -> PointSet {
        let n = n.min(self.len());
        PointSet { dim: self.dim, data: self.data[..n * self.dim].to_vec() }
    }

    /// Index of the first pair of identical rows, if any.
    pub fn first_duplicate(&self) -> Option<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.row(a)
                .iter()
                .zip(self.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order
            .windows(2)
            .filter(|w| self.row(w[0]) == self.row(w[1]))
            .map(|w| w[0].max(w[1]))
            .min()
    }

    /// Index of the lowest-index point closest to `c`.
    pub fn nearest(&self, c: &[f64]) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, r) in self.rows().enumerate() {
            let d = sq_dist(r, c);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}
