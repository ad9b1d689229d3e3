//! Finite signed measures, their energies and kernel discrepancies.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{Definiteness, Kernel};
use crate::points::PointSet;
use crate::potential::PotentialProvider;

/// Absolute slack for "nonnegative energy" checks.
pub const ENERGY_TOL: f64 = 1e-12;

/// `sum_i w_i delta_{x_i}` with pairwise distinct support points.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSignedMeasure {
    support: PointSet,
    weights: Vec<f64>,
}

impl DiscreteSignedMeasure {
    pub fn new(support: PointSet, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: support.len(), got: weights.len() });
        }
        if support.is_empty() {
            return Err(Error::Empty("measure support"));
        }
        if let Some(i) = support.first_duplicate() {
            return Err(Error::DuplicatePoint(i));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::NonFinite(format!("weight {w}")));
        }
        Ok(DiscreteSignedMeasure { support, weights })
    }

    /// Empirical measure `(1/n) sum delta_{x_i}`.
    pub fn empirical(support: PointSet) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn dirac(x: &[f64]) -> Self {
        let mut s = PointSet::new(x.len());
        s.push(x).expect("matching dimension");
        DiscreteSignedMeasure { support: s, weights: vec![1.0] }
    }

    pub fn support(&self) -> &PointSet {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// Sum of weights, accumulated left to right.
    pub fn total_mass(&self) -> f64 {
        let mut s = 0.0;
        for w in &self.weights {
            s += w;
        }
        s
    }

    /// `P_xi(x) = sum_i w_i K(x, x_i)`.
    pub fn potential(&self, k: &Kernel, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (xi, w) in self.support.rows().zip(&self.weights) {
            if *w != 0.0 {
                acc += w * k.value(x, xi);
            }
        }
        acc
    }

    /// `sum_ij w_i v_j K(x_i, y_j)`, outer loop over `self`.
    pub fn cross(&self, k: &Kernel, other: &DiscreteSignedMeasure) -> f64 {
        let rows: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let w = self.weights[i];
                if w == 0.0 {
                    0.0
                } else {
                    w * other.potential(k, self.support.row(i))
                }
            })
            .collect();
        rows.iter().sum()
    }

    /// `E_K(xi)`; infinite for singular kernels.
    pub fn energy(&self, k: &Kernel) -> f64 {
        self.cross(k, self)
    }

    /// `a * self + b * other`, merging coincident support points.
    pub fn combine(&self, a: f64, other: &DiscreteSignedMeasure, b: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let mut support = self.support.clone();
        let mut weights: Vec<f64> = self.weights.iter().map(|w| a * w).collect();
        for (y, v) in other.support.rows().zip(&other.weights) {
            let found = support.rows().position(|x| x == y);
            match found {
                Some(i) => weights[i] += b * v,
                None => {
                    support.push(y)?;
                    weights.push(b * v);
                }
            }
        }
        Self::new(support, weights)
    }
}

/// `E_K(xi - mu) = w'K w - 2 w'p + E_K(mu)`.
pub fn energy_of_signed_diff(
    k: &Kernel,
    xi: &DiscreteSignedMeasure,
    provider: &PotentialProvider,
    e_mu: f64,
) -> Result<f64> {
    provider.ensure_kernel(k)?;
    k.check_dim(xi.dim())?;
    let p = provider.potentials(xi.support());
    if let Some(v) = p.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("potential value {v}")));
    }
    let wkw = xi.energy(k);
    let wp: f64 = xi.weights().iter().zip(&p).map(|(w, p)| w * p).sum();
    Ok(wkw - 2.0 * wp + e_mu)
}

/// Squared discrepancy `E_K(xi - nu)`, exactly symmetric in its arguments.
pub fn mmd_sq(k: &Kernel, xi: &DiscreteSignedMeasure, nu: &DiscreteSignedMeasure) -> Result<f64> {
    if xi.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: xi.dim(), got: nu.dim() });
    }
    k.check_dim(xi.dim())?;
    let e = (xi.energy(k) + nu.energy(k)) - (xi.cross(k, nu) + nu.cross(k, xi));
    if e < -ENERGY_TOL && k.definiteness(xi.dim()) == Definiteness::Ispd {
        return Err(Error::NegativeEnergy(e));
    }
    Ok(e)
}

/// `gamma_K(xi, nu)`, the kernel discrepancy.
pub fn mmd(k: &Kernel, xi: &DiscreteSignedMeasure, nu: &DiscreteSignedMeasure) -> Result<f64> {
    Ok(mmd_sq(k, xi, nu)?.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_energy_diff() {
        let k = Kernel::triangular(1.0).unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        let e = energy_of_signed_diff(&k, &DiscreteSignedMeasure::dirac(&[0.5]), &p, p.energy()).unwrap();
        assert!((e - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_duplicates() {
        let s = PointSet::from_scalars(&[0.1, 0.2, 0.1]);
        assert!(matches!(DiscreteSignedMeasure::new(s, vec![1.0; 3]), Err(Error::DuplicatePoint(_))));
    }

    #[test]
    fn mmd_symmetric_and_zero_on_self() {
        let k = Kernel::matern52(2.0).unwrap();
        let a = DiscreteSignedMeasure::new(PointSet::from_scalars(&[0.1, 0.4, 0.9]), vec![0.2, 0.5, 0.3]).unwrap();
        let b = DiscreteSignedMeasure::new(PointSet::from_scalars(&[0.3, 0.7]), vec![0.6, 0.4]).unwrap();
        assert_eq!(mmd(&k, &a, &b).unwrap(), mmd(&k, &b, &a).unwrap());
        assert!(mmd(&k, &a, &a).unwrap() < 1e-7);
    }

    #[test]
    fn combine_merges() {
        let a = DiscreteSignedMeasure::new(PointSet::from_scalars(&[0.1, 0.4]), vec![0.5, 0.5]).unwrap();
        let b = DiscreteSignedMeasure::new(PointSet::from_scalars(&[0.4, 0.8]), vec![0.5, 0.5]).unwrap();
        let c = a.combine(0.5, &b, 0.5).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.weights(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn total_mass_left_to_right() {
        let m = DiscreteSignedMeasure::new(PointSet::from_scalars(&[0.0, 0.5, 1.0]), vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(m.total_mass(), (0.1 + 0.2) + 0.3);
    }
}
