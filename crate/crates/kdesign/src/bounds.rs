//! Replay of a conditional-gradient trace against the convergence bounds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::metrics::{bound_value, k_norm_sq, BoundInputs, Lemma};
use crate::points::PointSet;
use crate::potential::PotentialProvider;
use crate::quadrature::{gram, reduce_gram, GramBundle};

/// Centred kernel matrix on the candidates and the best signed weights.
#[derive(Clone, Debug)]
pub struct BoundSetup {
    kt: DMatrix<f64>,
    w_hat: Vec<f64>,
    inputs: BoundInputs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: usize,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl BoundSetup {
    pub fn new(kernel: &Kernel, provider: &PotentialProvider, candidates: &PointSet) -> Result<Self> {
        if kernel.is_singular() {
            return Err(Error::Unsupported("bounds need a bounded kernel".into()));
        }
        let e = provider.energy();
        let b = GramBundle::assemble(kernel, candidates, provider, e)?;
        let w_hat = b.bordered()?.weights;
        let kt = reduce_gram(&gram(kernel, candidates), &provider.potentials(candidates), e);
        let inputs = BoundInputs::from_matrix(&kt, &w_hat)?;
        Ok(BoundSetup { kt, w_hat, inputs })
    }

    pub fn inputs(&self) -> &BoundInputs {
        &self.inputs
    }
    pub fn w_hat(&self) -> &[f64] {
        &self.w_hat
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.kt
    }
    /// The optimal weights are a probability vector.
    pub fn w_hat_in_simplex(&self) -> bool {
        self.w_hat.iter().all(|w| *w >= 0.0)
    }

    /// `||omega - w_hat||_K^2`
    pub fn distance(&self, omega: &[f64]) -> f64 {
        k_norm_sq(&self.kt, omega, &self.w_hat)
    }

    /// `||omega - 1/Omega||_K^2`
    pub fn distance_to_uniform(&self, omega: &[f64]) -> f64 {
        let u = vec![1.0 / omega.len() as f64; omega.len()];
        k_norm_sq(&self.kt, omega, &u)
    }

    /// Weights after every step of `(index, alpha)` pairs; the first pair is
    /// the starting vertex.
    pub fn replay(&self, steps: &[(usize, f64)]) -> Result<Vec<Vec<f64>>> {
        let omega_len = self.w_hat.len();
        let mut w = vec![0.0; omega_len];
        let mut out = Vec::with_capacity(steps.len());
        for (k, &(i, a)) in steps.iter().enumerate() {
            if i >= omega_len {
                return Err(Error::InvalidParameter(format!("index {i} outside the candidate set")));
            }
            if k == 0 {
                w[i] = 1.0;
            } else {
                w.iter_mut().for_each(|v| *v *= 1.0 - a);
                w[i] += a;
            }
            out.push(w.clone());
        }
        Ok(out)
    }

    /// Bound check at every iteration. The initial-phase bound only applies
    /// while every selected index is new; later rows are omitted.
    pub fn check(&self, steps: &[(usize, f64)], lemma: Lemma) -> Result<Vec<BoundRow>> {
        let ws = self.replay(steps)?;
        let mut seen = vec![false; self.w_hat.len()];
        let mut rows = Vec::with_capacity(ws.len());
        for (k, w) in ws.iter().enumerate() {
            let n = k + 1;
            let value = if lemma == Lemma::InitialPhase {
                let i = steps[k].0;
                if seen[i] {
                    break;
                }
                seen[i] = true;
                self.distance_to_uniform(w)
            } else {
                self.distance(w)
            };
            let bound = bound_value(lemma, &self.inputs, n);
            rows.push(BoundRow { n, value, bound, pass: value <= bound });
        }
        Ok(rows)
    }
}
