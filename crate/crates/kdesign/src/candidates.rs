//! Finite candidate sets in the unit cube.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::points::PointSet;
use crate::sobol::sobol;

/// Where a candidate set comes from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateSpec {
    /// First `m` Sobol points after skipping `skip`.
    Sobol {
        m: usize,
        #[serde(default)]
        skip: usize,
    },
    /// Regular grid with `per_axis` levels `0, 1/(k-1), ..., 1` on every axis.
    Grid { per_axis: usize },
    /// Cell-centred grid `(i + 1/2)/k`.
    CentredGrid { per_axis: usize },
    /// Design CSV.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub points: PointSet,
    pub provenance: CandidateSpec,
}

impl CandidateSet {
    pub fn build(spec: &CandidateSpec, dim: usize) -> Result<Self> {
        let points = match spec {
            CandidateSpec::Sobol { m, skip } => sobol(dim, *m, *skip)?,
            CandidateSpec::Grid { per_axis } => grid(dim, *per_axis)?,
            CandidateSpec::CentredGrid { per_axis } => centred_grid(dim, *per_axis)?,
            CandidateSpec::File { path } => from_file(path, dim)?,
        };
        Ok(CandidateSet { points, provenance: spec.clone() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn from_file(path: &Path, dim: usize) -> Result<PointSet> {
    let pts = io::read_points(path)?;
    if pts.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: pts.dim() });
    }
    if pts.is_empty() {
        return Err(Error::Empty("candidate file"));
    }
    if pts.as_flat().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParameter(format!("{} has points outside [0,1]^{dim}", path.display())));
    }
    Ok(pts)
}

fn product(dim: usize, levels: &[f64]) -> Result<PointSet> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let k = levels.len();
    let total = k
        .checked_pow(dim as u32)
        .filter(|t| *t <= 1 << 26)
        .ok_or_else(|| Error::InvalidParameter(format!("{k}^{dim} grid is too large")))?;
    let mut out = PointSet::with_capacity(dim, total);
    let mut row = vec![0.0; dim];
    for mut g in 0..total {
        for j in (0..dim).rev() {
            row[j] = levels[g % k];
            g /= k;
        }
        out.push(&row)?;
    }
    Ok(out)
}

/// Full factorial on `k` equispaced levels per axis (`k = 1` gives the centre).
pub fn grid(dim: usize, k: usize) -> Result<PointSet> {
    if k == 0 {
        return Err(Error::InvalidParameter("grid needs at least one level".into()));
    }
    let levels: Vec<f64> = if k == 1 { vec![0.5] } else { (0..k).map(|i| i as f64 / (k - 1) as f64).collect() };
    product(dim, &levels)
}

pub fn centred_grid(dim: usize, k: usize) -> Result<PointSet> {
    if k == 0 {
        return Err(Error::InvalidParameter("grid needs at least one level".into()));
    }
    let levels: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect();
    product(dim, &levels)
}

/// Corners, edge midpoints and centre: the `3^d` factorial.
pub fn factorial3(dim: usize) -> Result<PointSet> {
    if dim > 12 {
        return Err(Error::Unsupported(format!("3^{dim} factorial")));
    }
    grid(dim, 3)
}

/// Evaluation set for covering radii: Sobol points plus the `3^d` factorial
/// when it is small enough.
pub fn evaluation_set(dim: usize, sobol_points: usize) -> Result<PointSet> {
    let mut s = sobol(dim, sobol_points, 0)?;
    if dim <= 12 {
        for r in factorial3(dim)?.rows() {
            s.push(r)?;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_levels() {
        let g = grid(2, 3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.row(0), &[0.0, 0.0]);
        assert_eq!(g.row(1), &[0.0, 0.5]);
        assert_eq!(g.row(8), &[1.0, 1.0]);
        assert_eq!(grid(3, 1).unwrap().as_flat(), &[0.5, 0.5, 0.5]);
        let c = centred_grid(1, 4).unwrap();
        assert_eq!(c.as_flat(), &[0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn sobol_spec_is_deterministic() {
        let spec = CandidateSpec::Sobol { m: 64, skip: 0 };
        let a = CandidateSet::build(&spec, 3).unwrap();
        let b = CandidateSet::build(&spec, 3).unwrap();
        assert_eq!(a.points.as_flat(), b.points.as_flat());
        assert!(a.points.as_flat().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn evaluation_set_includes_corners() {
        let e = evaluation_set(2, 16).unwrap();
        assert_eq!(e.len(), 25);
        assert!(e.rows().any(|r| r == [1.0, 1.0]));
    }
}
