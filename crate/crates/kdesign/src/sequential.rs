//! Greedy nested designs: sequential Bayesian quadrature and coffee-house
//! (farthest point) ordering.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::points::{sq_dist, PointSet};
use crate::potential::PotentialProvider;
use crate::quadrature::{dot, GramBundle};

/// Candidates whose conditional variance is below this are skipped.
pub const SBQ_DEGENERATE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SbqChoice {
    pub index: usize,
    /// `(1 - k'K~^{-1}1)^2 / (K_mu(x,x) - k'K~^{-1}k)`
    pub ratio: f64,
    /// Posterior variance after adding the point.
    pub variance_next: f64,
}

/// Point maximizing the one-step decrease of the posterior variance.
pub fn sbq_select(bundle: &GramBundle, provider: &PotentialProvider, candidates: &PointSet) -> Result<SbqChoice> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate set"));
    }
    let c = bundle.chol_kt()?;
    let n = bundle.n();
    let ones = c.solve(&vec![1.0; n]);
    let s: f64 = ones.iter().sum();
    let k = bundle.kernel();
    let e = bundle.e_mu();
    let design = bundle.design();
    let p = bundle.p();
    let scores: Vec<Option<f64>> = (0..candidates.len())
        .into_par_iter()
        .map(|i| {
            let x = candidates.row(i);
            let px = provider.potential_unchecked(x);
            let kt: Vec<f64> = (0..n).map(|j| k.value(x, design.row(j)) - px - p[j] + e).collect();
            let diag = k.diag(x) - 2.0 * px + e;
            let a = c.solve(&kt);
            let den = diag - dot(&kt, &a);
            if !(den > SBQ_DEGENERATE) {
                return None;
            }
            let num = 1.0 - kt.iter().zip(&ones).map(|(a, b)| a * b).sum::<f64>();
            Some(num * num / den)
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in scores.iter().enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| *v > b) {
                best = Some((i, *v));
            }
        }
    }
    let (index, ratio) = best.ok_or_else(|| Error::Degenerate("every candidate has zero conditional variance".into()))?;
    Ok(SbqChoice { index, ratio, variance_next: 1.0 / (s + ratio) })
}

/// Grow `init` greedily to `n` points. Returns candidate indices in order
/// and the variance after each addition.
pub fn sbq_design(
    kernel: &Kernel,
    provider: &PotentialProvider,
    candidates: &PointSet,
    init: &[usize],
    n: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    if init.is_empty() {
        return Err(Error::Empty("initial design"));
    }
    let e = provider.energy();
    let mut idx = init.to_vec();
    let mut vars = Vec::new();
    while idx.len() < n {
        let b = GramBundle::assemble(kernel, &candidates.select(&idx), provider, e)?;
        let ch = sbq_select(&b, provider, candidates)?;
        idx.push(ch.index);
        vars.push(ch.variance_next);
    }
    Ok((idx, vars))
}

/// Nearest point to `center`, then repeatedly the point farthest from those
/// already chosen. Ties go to the lowest index.
pub fn coffee_house_order(pool: &PointSet, center: &[f64]) -> Result<Vec<usize>> {
    let first = pool.nearest(center).ok_or(Error::Empty("pool"))?;
    if center.len() != pool.dim() {
        return Err(Error::DimensionMismatch { expected: pool.dim(), got: center.len() });
    }
    let m = pool.len();
    let mut order = vec![first];
    let mut taken = vec![false; m];
    taken[first] = true;
    let mut gap: Vec<f64> = (0..m).map(|i| sq_dist(pool.row(i), pool.row(first))).collect();
    while order.len() < m {
        let mut best = usize::MAX;
        let mut far = f64::NEG_INFINITY;
        for i in 0..m {
            if !taken[i] && gap[i] > far {
                far = gap[i];
                best = i;
            }
        }
        taken[best] = true;
        order.push(best);
        let b = pool.row(best);
        for i in 0..m {
            let d = sq_dist(pool.row(i), b);
            if d < gap[i] {
                gap[i] = d;
            }
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coffee_house_small() {
        let pool = PointSet::from_scalars(&[0.1, 0.5, 0.9]);
        assert_eq!(coffee_house_order(&pool, &[0.5]).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn sbq_update_matches_full_recomputation() {
        let k = Kernel::matern52(3.0).unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        let cand = PointSet::from_scalars(&(0..41).map(|i| i as f64 / 40.0).collect::<Vec<_>>());
        let (idx, vars) = sbq_design(&k, &p, &cand, &[20], 6).unwrap();
        let b = GramBundle::assemble(&k, &cand.select(&idx), &p, p.energy()).unwrap();
        let full = b.variance_reduced().unwrap();
        assert!((vars.last().unwrap() - full).abs() < 1e-8 * full);
        for w in vars.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn sbq_first_step_mirror_tie_goes_low() {
        let k = Kernel::matern32(2.0).unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        let cand = PointSet::from_scalars(&[0.1, 0.3, 0.5, 0.7, 0.9]);
        let b = GramBundle::assemble(&k, &cand.select(&[2]), &p, p.energy()).unwrap();
        let ch = sbq_select(&b, &p, &cand).unwrap();
        assert!(ch.index < 2);
        let mirror = PointSet::from_scalars(&[1.0 - cand.row(ch.index)[0]]);
        let other = sbq_select(&b, &p, &mirror).unwrap();
        assert!((other.ratio - ch.ratio).abs() < 1e-12 * ch.ratio);
    }
}
