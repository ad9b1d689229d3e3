//! Local improvement of a design in the unit cube by coordinate pattern search.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::Cholesky;
use crate::points::PointSet;
use crate::potential::PotentialProvider;
use crate::quadrature::{dot, gram, reduce_gram};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefineObjective {
    /// Maximize `1' K~_n^{-1} 1`, i.e. minimize the posterior variance.
    MaximizeInvQuad,
    /// Minimize `E_K(xi_{n,e} - mu) = 1' K~_n 1 / n^2`.
    MinimizeEmpiricalMmd,
}

impl fmt::Display for RefineObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefineObjective::MaximizeInvQuad => "inv-quad",
            RefineObjective::MinimizeEmpiricalMmd => "mmd",
        })
    }
}

impl FromStr for RefineObjective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inv-quad" | "maximize-inv-quad" => Ok(RefineObjective::MaximizeInvQuad),
            "mmd" | "minimize-empirical-mmd" => Ok(RefineObjective::MinimizeEmpiricalMmd),
            _ => Err(Error::Parse(format!("unknown refinement objective '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineConfig {
    pub objective: RefineObjective,
    /// Starting step; `None` means `0.5 / sqrt(n)`.
    pub initial_step: Option<f64>,
    pub min_step: f64,
    /// Maximum number of objective evaluations.
    pub budget: usize,
}

impl RefineConfig {
    pub fn new(objective: RefineObjective) -> Self {
        RefineConfig { objective, initial_step: None, min_step: 1e-4, budget: 1_000_000 }
    }
}

#[derive(Clone, Debug)]
pub struct RefineResult {
    pub design: PointSet,
    /// Objective after every accepted move (in its own sense: increasing for
    /// `MaximizeInvQuad`, decreasing for `MinimizeEmpiricalMmd`).
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub initial: f64,
    pub last: f64,
}

/// Reduced Gram pieces for the current design.
struct Reduced<'a> {
    kernel: &'a Kernel,
    provider: &'a PotentialProvider,
    e_mu: f64,
}

impl Reduced<'_> {
    fn value(&self, x: &[f64], y: &[f64], px: f64, py: f64) -> f64 {
        self.kernel.value(x, y) - px - py + self.e_mu
    }
}

/// Pattern search over single coordinates, halving the step whenever a full
/// sweep brings no improvement. Points stay in [0,1]^d.
pub fn refine_design(
    kernel: &Kernel,
    provider: &PotentialProvider,
    e_mu: f64,
    design: &PointSet,
    cfg: &RefineConfig,
) -> Result<RefineResult> {
    if cfg.budget == 0 {
        return Err(Error::InvalidParameter("refinement budget must be positive".into()));
    }
    if design.is_empty() {
        return Err(Error::Empty("design"));
    }
    kernel.check_dim(design.dim())?;
    provider.ensure_kernel(kernel)?;
    if kernel.is_singular() {
        return Err(Error::Unsupported("refinement needs a bounded kernel".into()));
    }
    if let Some(i) = design.first_duplicate() {
        return Err(Error::DuplicatePoint(i));
    }
    let n = design.len();
    let step0 = cfg.initial_step.unwrap_or(0.5 / (n as f64).sqrt());
    if !(step0 > 0.0) || !(cfg.min_step > 0.0) {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    let red = Reduced { kernel, provider, e_mu };
    match cfg.objective {
        RefineObjective::MaximizeInvQuad => inv_quad_search(&red, design.clone(), step0, cfg),
        RefineObjective::MinimizeEmpiricalMmd => mmd_search(&red, design.clone(), step0, cfg),
    }
}

fn candidate_moves(x: &[f64], d: usize, step: f64) -> [Option<f64>; 2] {
    let old = x[d];
    let up = (old + step).min(1.0);
    let down = (old - step).max(0.0);
    [(up != old).then_some(up), (down != old).then_some(down)]
}

fn mmd_search(red: &Reduced, mut x: PointSet, step0: f64, cfg: &RefineConfig) -> Result<RefineResult> {
    let n = x.len();
    let dim = x.dim();
    let nn = (n * n) as f64;
    let mut p = red.provider.potentials(&x);
    let kt = reduce_gram(&gram(red.kernel, &x), &p, red.e_mu);
    let mut total: f64 = kt.iter().sum();
    let initial = total / nn;
    let mut trace = Vec::new();
    let mut evals = 0;
    let mut step = step0;
    while step >= cfg.min_step && evals < cfg.budget {
        let mut improved = false;
        'points: for i in 0..n {
            for d in 0..dim {
                let mut y = x.row(i).to_vec();
                for mv in candidate_moves(x.row(i), d, step).into_iter().flatten() {
                    if evals >= cfg.budget {
                        break 'points;
                    }
                    y[d] = mv;
                    let py = red.provider.potential_unchecked(&y);
                    let xi = x.row(i);
                    let mut delta = red.value(&y, &y, py, py) - red.value(xi, xi, p[i], p[i]);
                    for j in 0..n {
                        if j != i {
                            let xj = x.row(j);
                            delta += 2.0 * (red.value(&y, xj, py, p[j]) - red.value(xi, xj, p[i], p[j]));
                        }
                    }
                    evals += 1;
                    if delta < 0.0 {
                        total += delta;
                        x.row_mut(i).copy_from_slice(&y);
                        p[i] = py;
                        trace.push(total / nn);
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    // Final value recomputed from scratch.
    let kt = reduce_gram(&gram(red.kernel, &x), &p, red.e_mu);
    let last = kt.iter().sum::<f64>() / nn;
    Ok(RefineResult { design: x, trace, evaluations: evals, initial, last })
}

fn inverse_reduced(red: &Reduced, x: &PointSet, p: &[f64]) -> Result<DMatrix<f64>> {
    let kt = reduce_gram(&gram(red.kernel, x), p, red.e_mu);
    Ok(Cholesky::new(&kt)?.inverse())
}

fn inv_quad_search(red: &Reduced, mut x: PointSet, step0: f64, cfg: &RefineConfig) -> Result<RefineResult> {
    let n = x.len();
    let dim = x.dim();
    let mut p = red.provider.potentials(&x);
    let mut b = inverse_reduced(red, &x, &p)?;
    let mut value: f64 = b.iter().sum();
    let initial = value;
    let mut trace = Vec::new();
    let mut evals = 0;
    let mut step = step0;
    let mut a_inv = vec![0.0; (n - 1) * (n - 1)];
    let mut a1 = vec![0.0; n - 1];
    let mut kv = vec![0.0; n - 1];
    while step >= cfg.min_step && evals < cfg.budget {
        let mut improved = false;
        'points: for i in 0..n {
            // Inverse of K~ with row and column i removed, from the full inverse.
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let beta = b[(i, i)];
            for (r, &jr) in others.iter().enumerate() {
                for (c, &jc) in others.iter().enumerate() {
                    a_inv[r * (n - 1) + c] = b[(jr, jc)] - b[(jr, i)] * b[(i, jc)] / beta;
                }
            }
            for r in 0..n - 1 {
                a1[r] = a_inv[r * (n - 1)..(r + 1) * (n - 1)].iter().sum();
            }
            let base: f64 = a1.iter().sum();
            let mut accepted = false;
            for d in 0..dim {
                let mut y = x.row(i).to_vec();
                for mv in candidate_moves(x.row(i), d, step).into_iter().flatten() {
                    if evals >= cfg.budget {
                        break 'points;
                    }
                    y[d] = mv;
                    let py = red.provider.potential_unchecked(&y);
                    for (r, &j) in others.iter().enumerate() {
                        kv[r] = red.value(&y, x.row(j), py, p[j]);
                    }
                    let c = red.value(&y, &y, py, py);
                    let mut quad = 0.0;
                    for r in 0..n - 1 {
                        quad += kv[r] * dot(&a_inv[r * (n - 1)..(r + 1) * (n - 1)], &kv);
                    }
                    let den = c - quad;
                    evals += 1;
                    if !(den > 1e-12 * c.abs()) {
                        continue;
                    }
                    let g = 1.0 - dot(&kv, &a1);
                    let f = base + g * g / den;
                    if f > value {
                        x.row_mut(i).copy_from_slice(&y);
                        p[i] = py;
                        value = f;
                        trace.push(f);
                        improved = true;
                        accepted = true;
                        break;
                    }
                }
                if accepted {
                    // Later coordinates of this point need the new inverse.
                    break;
                }
            }
            if accepted {
                {
                    let m = inverse_reduced(red, &x, &p)?;
                    b = m
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    let last: f64 = inverse_reduced(red, &x, &p)?.iter().sum();
    Ok(RefineResult { design: x, trace, evaluations: evals, initial, last })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_mmd_moves_to_center() {
        let k = Kernel::matern32(3.0).unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        let r = refine_design(&k, &p, p.energy(), &PointSet::from_scalars(&[0.1]), &RefineConfig::new(RefineObjective::MinimizeEmpiricalMmd)).unwrap();
        assert!((r.design.row(0)[0] - 0.5).abs() < 1e-3);
        assert!(r.last <= r.initial);
    }

    #[test]
    fn inv_quad_trace_increases() {
        let k = Kernel::tensor_power(Kernel::matern32(4.0).unwrap(), 2).unwrap();
        let p = PotentialProvider::uniform(&k, 2).unwrap();
        let x = PointSet::from_rows(&[[0.2, 0.2], [0.3, 0.25], [0.6, 0.7], [0.9, 0.1]]).unwrap();
        let mut cfg = RefineConfig::new(RefineObjective::MaximizeInvQuad);
        cfg.budget = 2000;
        let r = refine_design(&k, &p, p.energy(), &x, &cfg).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] > w[0]));
        assert!((r.last - r.trace.last().copied().unwrap_or(r.initial)).abs() < 1e-8 * r.last);
        assert!(r.design.as_flat().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn zero_budget_rejected() {
        let k = Kernel::matern32(3.0).unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        let mut cfg = RefineConfig::new(RefineObjective::MaximizeInvQuad);
        cfg.budget = 0;
        assert!(refine_design(&k, &p, p.energy(), &PointSet::from_scalars(&[0.1]), &cfg).is_err());
    }
}
