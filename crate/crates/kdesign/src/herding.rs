//! Kernel herding (vertex-direction conditional gradient) and vertex exchange
//! over a finite candidate set.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::points::PointSet;
use crate::potential::PotentialProvider;

/// Potentials are recomputed from scratch this often.
pub const REFRESH_EVERY: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepPolicy {
    /// `1/(n+1)`
    Harmonic,
    /// `2/(n+3)`
    #[serde(rename = "two-over-n-plus-3")]
    TwoOverNPlus3,
    /// `a_{n+1} = a_n - a_n^2/2`, `a_0 = 1`
    Dunn,
    /// Exact line search, clamped to [0,1].
    Optimal,
}

impl StepPolicy {
    pub fn name(self) -> &'static str {
        match self {
            StepPolicy::Harmonic => "harmonic",
            StepPolicy::TwoOverNPlus3 => "two-over-n-plus-3",
            StepPolicy::Dunn => "dunn",
            StepPolicy::Optimal => "optimal",
        }
    }
}

impl fmt::Display for StepPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StepPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "harmonic" => Ok(StepPolicy::Harmonic),
            "two-over-n-plus-3" | "2/(n+3)" => Ok(StepPolicy::TwoOverNPlus3),
            "dunn" => Ok(StepPolicy::Dunn),
            "optimal" | "line-search" => Ok(StepPolicy::Optimal),
            other => Err(Error::Parse(format!("unknown step policy '{other}'"))),
        }
    }
}

/// One herding step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// Iteration index before the step.
    pub n: usize,
    pub index: usize,
    pub alpha: f64,
    /// Unclamped line-search step (`NaN` for predefined policies).
    pub alpha_hat: f64,
}

/// One vertex-exchange step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExchangeRecord {
    pub plus: usize,
    pub minus: usize,
    pub alpha: f64,
    pub alpha_hat: f64,
    /// The step was cut to the mass available at `minus`.
    pub clipped: bool,
    pub converged: bool,
}

/// A probability measure on the candidate set, with cached potentials.
#[derive(Clone, Debug)]
pub struct HerdingState {
    kernel: Kernel,
    candidates: PointSet,
    p_mu: Vec<f64>,
    e_mu: f64,
    omega: Vec<f64>,
    pot: Vec<f64>,
    history: Vec<usize>,
    n: usize,
    dunn_alpha: f64,
    since_refresh: usize,
}

impl HerdingState {
    /// Uniform weights on `init` (distinct candidate indices).
    pub fn new(kernel: &Kernel, candidates: PointSet, provider: &PotentialProvider, init: &[usize]) -> Result<Self> {
        if init.is_empty() {
            return Err(Error::Empty("initial support"));
        }
        let mut omega = vec![0.0; candidates.len()];
        for &i in init {
            if i >= candidates.len() {
                return Err(Error::InvalidParameter(format!("initial index {i} out of range")));
            }
            if omega[i] != 0.0 {
                return Err(Error::DuplicatePoint(i));
            }
            omega[i] = 1.0 / init.len() as f64;
        }
        let mut st = Self::from_weights(kernel, candidates, provider, omega)?;
        st.history = init.to_vec();
        st.n = init.len();
        Ok(st)
    }

    /// Start at the candidate closest to the centre of the unit cube.
    pub fn at_center(kernel: &Kernel, candidates: PointSet, provider: &PotentialProvider) -> Result<Self> {
        let c = vec![0.5; candidates.dim()];
        let i = candidates.nearest(&c).ok_or(Error::Empty("candidate set"))?;
        Self::new(kernel, candidates, provider, &[i])
    }

    /// Arbitrary starting weights on the simplex; iteration count starts at 1.
    pub fn from_weights(kernel: &Kernel, candidates: PointSet, provider: &PotentialProvider, omega: Vec<f64>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Empty("candidate set"));
        }
        kernel.check_dim(candidates.dim())?;
        provider.ensure_kernel(kernel)?;
        if omega.len() != candidates.len() {
            return Err(Error::DimensionMismatch { expected: candidates.len(), got: omega.len() });
        }
        if omega.iter().any(|w| !(*w >= 0.0)) || (omega.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("initial weights must lie on the probability simplex".into()));
        }
        let p_mu = provider.potentials(&candidates);
        if let Some(v) = p_mu.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("potential {v} on the candidate set")));
        }
        let e_mu = provider.energy();
        let history = omega.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i).collect();
        let mut st = HerdingState {
            kernel: kernel.clone(),
            candidates,
            p_mu,
            e_mu,
            omega,
            pot: Vec::new(),
            history,
            n: 1,
            dunn_alpha: 1.0,
            since_refresh: 0,
        };
        st.refresh();
        Ok(st)
    }

    /// Replace the stored `E_K(mu)` (it only shifts reported energies).
    pub fn with_energy(mut self, e_mu: f64) -> Self {
        self.e_mu = e_mu;
        self
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
    pub fn candidates(&self) -> &PointSet {
        &self.candidates
    }
    pub fn weights(&self) -> &[f64] {
        &self.omega
    }
    pub fn potentials(&self) -> &[f64] {
        &self.pot
    }
    pub fn p_mu(&self) -> &[f64] {
        &self.p_mu
    }
    pub fn e_mu(&self) -> f64 {
        self.e_mu
    }
    pub fn iteration(&self) -> usize {
        self.n
    }
    /// Selected candidate indices, in order, repeats included.
    pub fn history(&self) -> &[usize] {
        &self.history
    }

    /// Support indices in order of first selection.
    pub fn support_order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.candidates.len()];
        let mut out = Vec::new();
        for &i in &self.history {
            if !seen[i] && self.omega[i] > 0.0 {
                seen[i] = true;
                out.push(i);
            }
        }
        out
    }

    pub fn design(&self) -> PointSet {
        self.candidates.select(&self.support_order())
    }

    /// Recompute `P_xi` on every candidate from the current weights.
    pub fn refresh(&mut self) {
        let support: Vec<usize> = (0..self.omega.len()).filter(|&j| self.omega[j] > 0.0).collect();
        let (k, c, w) = (&self.kernel, &self.candidates, &self.omega);
        self.pot = (0..c.len())
            .into_par_iter()
            .map(|i| {
                let x = c.row(i);
                let mut acc = 0.0;
                for &j in &support {
                    acc += w[j] * k.value(x, c.row(j));
                }
                acc
            })
            .collect();
        self.since_refresh = 0;
    }

    /// `P_xi(s_i) - P_mu(s_i)`.
    #[inline]
    pub fn score(&self, i: usize) -> f64 {
        self.pot[i] - self.p_mu[i]
    }

    /// Lowest-index minimizer of the score; `NaN` counts as `+inf`.
    pub fn select(&self) -> usize {
        argmin_lowest(&self.pot, &self.p_mu)
    }

    /// `E_K(xi)`, summed over the support in index order.
    pub fn energy_xi(&self) -> f64 {
        let mut acc = 0.0;
        for (w, p) in self.omega.iter().zip(&self.pot) {
            if *w > 0.0 {
                acc += w * p;
            }
        }
        acc
    }

    /// `sum_i omega_i P_mu(s_i)`.
    fn weighted_p_mu(&self) -> f64 {
        let mut acc = 0.0;
        for (w, p) in self.omega.iter().zip(&self.p_mu) {
            if *w > 0.0 {
                acc += w * p;
            }
        }
        acc
    }

    /// `E_K(xi - mu)` from the cache (infinite for singular kernels).
    pub fn mmd_sq(&self) -> f64 {
        self.energy_xi() - 2.0 * self.weighted_p_mu() + self.e_mu
    }

    /// Line-search step towards vertex `i`.
    pub fn optimal_alpha_hat(&self, i: usize) -> f64 {
        let e = self.energy_xi();
        let x = self.candidates.row(i);
        let num = e - self.pot[i] - self.weighted_p_mu() + self.p_mu[i];
        let den = e - 2.0 * self.pot[i] + self.kernel.diag(x);
        num / den
    }

    fn check_policy(&self, policy: StepPolicy) -> Result<()> {
        if policy == StepPolicy::Optimal && self.kernel.is_singular() {
            return Err(Error::Unsupported("optimal step size needs a finite energy; kernel is singular".into()));
        }
        Ok(())
    }

    /// One conditional-gradient step.
    pub fn step(&mut self, policy: StepPolicy) -> Result<StepRecord> {
        self.check_policy(policy)?;
        let i = self.select();
        let n = self.n;
        let (alpha, alpha_hat) = match policy {
            StepPolicy::Harmonic => (1.0 / (n as f64 + 1.0), f64::NAN),
            StepPolicy::TwoOverNPlus3 => (2.0 / (n as f64 + 3.0), f64::NAN),
            StepPolicy::Dunn => {
                self.dunn_alpha -= self.dunn_alpha * self.dunn_alpha / 2.0;
                (self.dunn_alpha, f64::NAN)
            }
            StepPolicy::Optimal => {
                let a = self.optimal_alpha_hat(i);
                let a = if a.is_nan() { 0.0 } else { a };
                (a.clamp(0.0, 1.0), a)
            }
        };
        self.move_towards(i, alpha);
        self.history.push(i);
        self.n += 1;
        Ok(StepRecord { n, index: i, alpha, alpha_hat })
    }

    /// `xi <- (1 - a) xi + a delta_{s_i}`.
    fn move_towards(&mut self, i: usize, alpha: f64) {
        for w in self.omega.iter_mut() {
            *w *= 1.0 - alpha;
        }
        self.omega[i] += alpha;
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY || alpha >= 1.0 {
            self.refresh();
            return;
        }
        let (k, c) = (&self.kernel, &self.candidates);
        let xi = c.row(i);
        self.pot.par_iter_mut().enumerate().for_each(|(j, p)| {
            *p = (1.0 - alpha) * *p + alpha * k.value(c.row(j), xi);
        });
    }

    /// Run `steps` steps and return their records.
    pub fn run(&mut self, policy: StepPolicy, steps: usize) -> Result<Vec<StepRecord>> {
        self.check_policy(policy)?;
        (0..steps).map(|_| self.step(policy)).collect()
    }

    /// Grow until the support holds `n` distinct points (or `max_steps` is hit).
    pub fn run_until_support(&mut self, policy: StepPolicy, n: usize, max_steps: usize) -> Result<Vec<StepRecord>> {
        let mut out = Vec::new();
        let mut count = self.support_order().len();
        while count < n && out.len() < max_steps {
            let before = self.omega[self.select()] > 0.0;
            let rec = self.step(policy)?;
            if !before {
                count += 1;
            }
            out.push(rec);
        }
        Ok(out)
    }

    /// One vertex-exchange step: move mass from the worst support point to
    /// the best candidate.
    pub fn exchange_step(&mut self) -> Result<ExchangeRecord> {
        if self.kernel.is_singular() {
            return Err(Error::Unsupported("vertex exchange needs a bounded kernel".into()));
        }
        let plus = self.select();
        let mut minus = usize::MAX;
        let mut worst = f64::NEG_INFINITY;
        for (j, w) in self.omega.iter().enumerate() {
            if *w > 0.0 {
                let s = self.score(j);
                if s > worst {
                    worst = s;
                    minus = j;
                }
            }
        }
        if minus == usize::MAX {
            return Err(Error::Empty("support"));
        }
        let (xp, xm) = (self.candidates.row(plus), self.candidates.row(minus));
        let den = self.kernel.diag(xm) + self.kernel.diag(xp) - 2.0 * self.kernel.value(xm, xp);
        if plus == minus || !(den > 0.0) {
            return Ok(ExchangeRecord { plus, minus, alpha: 0.0, alpha_hat: 0.0, clipped: false, converged: true });
        }
        let alpha_hat = (self.score(minus) - self.score(plus)) / den;
        let avail = self.omega[minus];
        let clipped = alpha_hat > avail;
        let alpha = alpha_hat.min(avail).max(0.0);
        self.omega[plus] += alpha;
        if clipped {
            self.omega[minus] = 0.0;
        } else {
            self.omega[minus] -= alpha;
        }
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.refresh();
        } else {
            let (k, c) = (&self.kernel, &self.candidates);
            self.pot.par_iter_mut().enumerate().for_each(|(j, p)| {
                let s = c.row(j);
                *p += alpha * (k.value(s, xp) - k.value(s, xm));
            });
        }
        self.history.push(plus);
        self.n += 1;
        Ok(ExchangeRecord { plus, minus, alpha, alpha_hat, clipped, converged: false })
    }
}

/// Lowest-index argmin of `a_i - b_i`, independent of thread partitioning.
pub(crate) fn argmin_lowest(a: &[f64], b: &[f64]) -> usize {
    let key = |i: usize| {
        let v = a[i] - b[i];
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    (0..a.len())
        .into_par_iter()
        .map(|i| (key(i), i))
        .reduce(|| (f64::INFINITY, usize::MAX), |x, y| if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x })
        .1
        .min(a.len().saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri_state(xs: &[f64], init: usize) -> HerdingState {
        let k = Kernel::triangular(1.0).unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        HerdingState::new(&k, PointSet::from_scalars(xs), &p, &[init]).unwrap()
    }

    #[test]
    fn select_breaks_ties_low() {
        let st = tri_state(&[0.0, 0.5, 1.0], 1);
        assert!((st.score(0) - 0.0).abs() < 1e-15);
        assert!((st.score(1) - 0.25).abs() < 1e-15);
        assert_eq!(st.select(), 0);
    }

    #[test]
    fn harmonic_keeps_uniform_weights() {
        let mut st = tri_state(&[0.0, 0.25, 0.5, 0.75, 1.0], 2);
        st.step(StepPolicy::Harmonic).unwrap();
        let w: Vec<f64> = st.weights().iter().copied().filter(|w| *w > 0.0).collect();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn singular_kernel_never_reselects() {
        let k = Kernel::riesz_log();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        let c = PointSet::from_scalars(&(0..40).map(|i| (i as f64 + 0.5) / 40.0).collect::<Vec<_>>());
        let mut st = HerdingState::new(&k, c, &p, &[20]).unwrap();
        st.run(StepPolicy::Harmonic, 25).unwrap();
        let mut h = st.history().to_vec();
        h.sort();
        h.dedup();
        assert_eq!(h.len(), 26);
        assert!(st.step(StepPolicy::Optimal).is_err());
    }

    #[test]
    fn dunn_sequence() {
        let mut st = tri_state(&[0.0, 0.25, 0.5, 0.75, 1.0], 2);
        let r: Vec<f64> = st.run(StepPolicy::Dunn, 3).unwrap().iter().map(|r| r.alpha).collect();
        assert_eq!(r, vec![0.5, 0.375, 0.375 - 0.375 * 0.375 / 2.0]);
    }

    #[test]
    fn cache_matches_recomputation() {
        let k = Kernel::tensor_power(Kernel::matern32(5.0).unwrap(), 2).unwrap();
        let p = PotentialProvider::uniform(&k, 2).unwrap();
        let c = PointSet::from_rows(&(0..100).map(|i| vec![(i % 10) as f64 / 9.0, (i / 10) as f64 / 9.0]).collect::<Vec<_>>()).unwrap();
        let mut st = HerdingState::at_center(&k, c, &p).unwrap();
        st.run(StepPolicy::TwoOverNPlus3, 50).unwrap();
        let cached = st.potentials().to_vec();
        st.refresh();
        for (a, b) in cached.iter().zip(st.potentials()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((st.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exchange_same_vertex_converges() {
        let mut st = tri_state(&[0.5], 0);
        let r = st.exchange_step().unwrap();
        assert!(r.converged && r.alpha == 0.0);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in [StepPolicy::Harmonic, StepPolicy::TwoOverNPlus3, StepPolicy::Dunn, StepPolicy::Optimal] {
            assert_eq!(p.to_string().parse::<StepPolicy>().unwrap(), p);
        }
    }
}
