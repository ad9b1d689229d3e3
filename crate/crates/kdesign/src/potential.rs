//! Potentials `P_mu(x)` and energies `E_K(mu)`.
//!
//! Closed forms are for mu uniform on [0,1] (and products of those on the unit
//! cube for tensor kernels). Each one-dimensional potential is written as
//! `S(x) + S(1-x) + T(x)` where `S` is an antiderivative of the kernel profile,
//! so the formulas stay valid for x outside [0,1].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::points::PointSet;

/// Closed-form potential and energy of a one-dimensional kernel under the
/// uniform measure on [0,1].
#[derive(Clone, Debug, PartialEq)]
pub struct UniformForm {
    kernel: Kernel,
    energy: f64,
}

fn odd(x: f64, f: impl Fn(f64) -> f64) -> f64 {
    if x < 0.0 {
        -f(-x)
    } else {
        f(x)
    }
}

impl UniformForm {
    pub fn new(kernel: &Kernel) -> Result<Self> {
        kernel.validate()?;
        let energy = match *kernel {
            Kernel::Exponential { theta } => 2.0 * (theta + (-theta).exp() - 1.0) / (theta * theta),
            Kernel::Matern32 { theta } => {
                let c = 3f64.sqrt() * theta;
                2.0 * (c * (2.0 + (-c).exp()) + 3.0 * ((-c).exp() - 1.0)) / (c * c)
            }
            Kernel::Matern52 { theta } => {
                let a = 5f64.sqrt() * theta;
                2.0 * (8.0 * a - 15.0 + (-a).exp() * (15.0 + 7.0 * a + a * a)) / (3.0 * a * a)
            }
            Kernel::SquaredExponential { t } => {
                (std::f64::consts::PI / t).sqrt() * erf(t.sqrt()) - (1.0 - (-t).exp()) / t
            }
            Kernel::GeneralizedMultiquadric { s: 1.0, eps } => {
                let a = eps.sqrt();
                2.0 * ((1.0 / a).asinh() - (1.0 + eps).sqrt() + a)
            }
            Kernel::GeneralizedMultiquadric { s: 2.0, eps } => {
                let a = eps.sqrt();
                (2.0 / a) * (1.0 / a).atan() - (1.0 + 1.0 / eps).ln()
            }
            Kernel::ShiftedInverseDistance { s, eps } => {
                if s == 1.0 {
                    2.0 * ((1.0 + eps) * (1.0 + 1.0 / eps).ln() - 1.0)
                } else if s == 2.0 {
                    2.0 * (1.0 / eps - (1.0 + 1.0 / eps).ln())
                } else {
                    let q = 1.0 - s;
                    2.0 / q * (((1.0 + eps).powf(q + 1.0) - eps.powf(q + 1.0)) / (q + 1.0) - eps.powf(q))
                }
            }
            Kernel::TriangularOneMinus { theta } => 1.0 - theta / 3.0,
            Kernel::RieszSingular { s } if s < 1.0 => 2.0 / (s * s - 3.0 * s + 2.0),
            Kernel::RieszLog => 1.5,
            Kernel::NegDistance { s } => -2.0 / ((s + 1.0) * (s + 2.0)),
            Kernel::DistanceInduced { s } => 2.0 / (s + 2.0),
            _ => return Err(Error::NoClosedForm(kernel.to_string())),
        };
        Ok(UniformForm { kernel: kernel.clone(), energy })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// The `S` part of the potential.
    pub fn s(&self, x: f64) -> f64 {
        match self.kernel {
            Kernel::Exponential { theta } => odd(x, |x| (1.0 - (-theta * x).exp()) / theta),
            Kernel::Matern32 { theta } => {
                let c = 3f64.sqrt() * theta;
                odd(x, |x| (2.0 - (2.0 + c * x) * (-c * x).exp()) / c)
            }
            Kernel::Matern52 { theta } => {
                let a = 5f64.sqrt() * theta;
                odd(x, |x| (8.0 - (-a * x).exp() * (8.0 + 5.0 * a * x + a * a * x * x)) / (3.0 * a))
            }
            Kernel::SquaredExponential { t } => {
                std::f64::consts::PI.sqrt() / (2.0 * t.sqrt()) * erf(t.sqrt() * x)
            }
            Kernel::GeneralizedMultiquadric { s, eps } => {
                let a = eps.sqrt();
                if s == 1.0 {
                    (x / a).asinh()
                } else {
                    (x / a).atan() / a
                }
            }
            Kernel::ShiftedInverseDistance { s, eps } => {
                if s == 1.0 {
                    odd(x, |x| (1.0 + x / eps).ln())
                } else if s == 2.0 {
                    odd(x, |x| 1.0 / eps - 1.0 / (x + eps))
                } else {
                    let q = 1.0 - s;
                    odd(x, |x| ((x + eps).powf(q) - eps.powf(q)) / q)
                }
            }
            Kernel::TriangularOneMinus { theta } => 0.5 - theta * x * x.abs() / 2.0,
            Kernel::RieszSingular { s } => {
                if x == 0.0 {
                    0.0
                } else {
                    x / ((1.0 - s) * x.abs().powf(s))
                }
            }
            Kernel::RieszLog => {
                if x == 0.0 {
                    0.5
                } else {
                    0.5 - x * x.abs().ln()
                }
            }
            Kernel::NegDistance { s } => -x * x.abs().powf(s) / (s + 1.0),
            Kernel::DistanceInduced { s } => 1.0 / (2.0 * (s + 1.0)) - x * x.abs().powf(s) / (s + 1.0),
            _ => unreachable!("UniformForm built only for supported kernels"),
        }
    }

    /// The `T` part of the potential, zero for translation-invariant kernels.
    pub fn t(&self, x: f64) -> f64 {
        match self.kernel {
            Kernel::DistanceInduced { s } => x.abs().powf(s),
            _ => 0.0,
        }
    }

    pub fn potential(&self, x: f64) -> f64 {
        self.s(x) + self.s(1.0 - x) + self.t(x)
    }
}

/// Probability measures that can be sampled for Monte-Carlo providers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// Uniform on [0,1]^dim.
    UniformCube { dim: usize },
    /// Uniform on the unit sphere of R^dim.
    UniformSphere { dim: usize },
}

impl MeasureSpec {
    pub fn dim(&self) -> usize {
        match *self {
            MeasureSpec::UniformCube { dim } | MeasureSpec::UniformSphere { dim } => dim,
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<PointSet> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Unsupported("measure of dimension 0".into()));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("sample size must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(n * d);
        let mut buf = vec![0.0; d];
        for _ in 0..n {
            match self {
                MeasureSpec::UniformCube { .. } => {
                    for _ in 0..d {
                        data.push(rng.gen::<f64>());
                    }
                }
                MeasureSpec::UniformSphere { .. } => loop {
                    for b in buf.iter_mut() {
                        *b = rng.sample(StandardNormal);
                    }
                    let norm = buf.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        data.extend(buf.iter().map(|v| v / norm));
                        break;
                    }
                },
            }
        }
        PointSet::from_flat(d, data)
    }
}

/// A Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        McEstimate { mean, std_err: (var / n as f64).sqrt(), n }
    }

    /// |estimate - value| in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if self.std_err == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / self.std_err
        }
    }
}

/// Energy estimate from independent pairs `(X_i, X'_i)`; works for singular
/// kernels since pairs coincide with probability zero.
pub fn paired_energy(kernel: &Kernel, mu: MeasureSpec, pairs: usize, seed: u64) -> Result<McEstimate> {
    kernel.check_dim(mu.dim())?;
    let a = mu.sample(pairs, seed)?;
    let b = mu.sample(pairs, seed.wrapping_add(0x9E37_79B9_7F4A_7C15))?;
    let vals: Vec<f64> = (0..pairs).into_par_iter().map(|i| kernel.value(a.row(i), b.row(i))).collect();
    Ok(McEstimate::from_values(&vals))
}

/// Potential estimate at `x` from a sample of mu, with standard error.
pub fn sampled_potential(kernel: &Kernel, x: &[f64], sample: &PointSet) -> McEstimate {
    let vals: Vec<f64> = (0..sample.len()).into_par_iter().map(|j| kernel.value(x, sample.row(j))).collect();
    McEstimate::from_values(&vals)
}

/// Source of `P_mu` and `E_K(mu)` for one kernel.
#[derive(Clone, Debug)]
pub enum PotentialProvider {
    /// Uniform measure on the unit cube, one closed form per coordinate.
    ClosedForm { kernel: Kernel, forms: Vec<UniformForm> },
    /// Empirical measure of a stored sample.
    MonteCarlo { kernel: Kernel, spec: Option<MeasureSpec>, seed: Option<u64>, sample: PointSet },
}

/// Samples up to this size get an exact double-sum energy; larger ones fall
/// back to a paired estimate over consecutive sample points.
const EXACT_ENERGY_LIMIT: usize = 20_000;

impl PotentialProvider {
    /// Closed-form provider for mu uniform on [0,1]^dim.
    pub fn uniform(kernel: &Kernel, dim: usize) -> Result<Self> {
        kernel.check_dim(dim)?;
        let forms = match kernel {
            Kernel::TensorProduct(fs) => fs.iter().map(UniformForm::new).collect::<Result<Vec<_>>>()?,
            _ if dim == 1 => vec![UniformForm::new(kernel)?],
            _ => {
                return Err(Error::NoClosedForm(format!(
                    "{kernel} in dimension {dim} (closed forms exist for d=1 and tensor kernels)"
                )))
            }
        };
        Ok(PotentialProvider::ClosedForm { kernel: kernel.clone(), forms })
    }

    /// Deterministic Monte-Carlo provider from `n` draws of `spec`.
    pub fn monte_carlo(kernel: &Kernel, spec: MeasureSpec, n: usize, seed: u64) -> Result<Self> {
        kernel.check_dim(spec.dim())?;
        let sample = spec.sample(n, seed)?;
        Ok(PotentialProvider::MonteCarlo { kernel: kernel.clone(), spec: Some(spec), seed: Some(seed), sample })
    }

    /// Provider from an explicit sample (for instance a quadrature grid).
    pub fn from_sample(kernel: &Kernel, sample: PointSet) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Empty("sample"));
        }
        kernel.check_dim(sample.dim())?;
        Ok(PotentialProvider::MonteCarlo { kernel: kernel.clone(), spec: None, seed: None, sample })
    }

    pub fn kernel(&self) -> &Kernel {
        match self {
            PotentialProvider::ClosedForm { kernel, .. } | PotentialProvider::MonteCarlo { kernel, .. } => kernel,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PotentialProvider::ClosedForm { forms, .. } => forms.len(),
            PotentialProvider::MonteCarlo { sample, .. } => sample.dim(),
        }
    }

    pub fn ensure_kernel(&self, k: &Kernel) -> Result<()> {
        if self.kernel() == k {
            Ok(())
        } else {
            Err(Error::ProviderMismatch { provider: self.kernel().to_string(), kernel: k.to_string() })
        }
    }

    /// Checked potential.
    pub fn potential(&self, k: &Kernel, x: &[f64]) -> Result<f64> {
        self.ensure_kernel(k)?;
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.potential_unchecked(x))
    }

    #[inline]
    pub fn potential_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            PotentialProvider::ClosedForm { forms, .. } => {
                let mut acc = 1.0;
                for (f, xi) in forms.iter().zip(x) {
                    acc *= f.potential(*xi);
                }
                acc
            }
            PotentialProvider::MonteCarlo { kernel, sample, .. } => {
                let mut acc = 0.0;
                for s in sample.rows() {
                    acc += kernel.value(x, s);
                }
                acc / sample.len() as f64
            }
        }
    }

    /// Potentials at every point of a set.
    pub fn potentials(&self, pts: &PointSet) -> Vec<f64> {
        (0..pts.len()).into_par_iter().map(|i| self.potential_unchecked(pts.row(i))).collect()
    }

    /// `E_K(mu)`.
    ///
    /// Closed form: product of one-dimensional energies. Sample: the
    /// V-statistic (diagonal included) for bounded kernels, the U-statistic
    /// for singular ones; above 20000 points a paired estimate is used.
    pub fn energy(&self) -> f64 {
        match self {
            PotentialProvider::ClosedForm { forms, .. } => forms.iter().map(|f| f.energy()).product(),
            PotentialProvider::MonteCarlo { kernel, sample, .. } => {
                let n = sample.len();
                if n <= EXACT_ENERGY_LIMIT {
                    let singular = kernel.is_singular();
                    if singular && n == 1 {
                        return f64::NAN;
                    }
                    let total: f64 = (0..n)
                        .into_par_iter()
                        .map(|i| {
                            let xi = sample.row(i);
                            let mut row = 0.0;
                            for j in 0..n {
                                if singular && i == j {
                                    continue;
                                }
                                row += kernel.value(xi, sample.row(j));
                            }
                            row
                        })
                        .collect::<Vec<_>>()
                        .iter()
                        .sum();
                    let pairs = if singular { n * (n - 1) } else { n * n };
                    total / pairs as f64
                } else {
                    let m = n / 2;
                    let vals: Vec<f64> =
                        (0..m).map(|i| kernel.value(sample.row(2 * i), sample.row(2 * i + 1))).collect();
                    McEstimate::from_values(&vals).mean
                }
            }
        }
    }

    /// Closed forms per coordinate, if any.
    pub fn forms(&self) -> Option<&[UniformForm]> {
        match self {
            PotentialProvider::ClosedForm { forms, .. } => Some(forms),
            PotentialProvider::MonteCarlo { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(k: &str) -> UniformForm {
        UniformForm::new(&k.parse().unwrap()).unwrap()
    }

    #[test]
    fn table_values() {
        assert!((form("tri:theta=1").potential(0.5) - 0.75).abs() < 1e-15);
        assert!((form("rieszlog").potential(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(form("rieszlog").energy(), 1.5);
        assert!((form("tri:theta=1").energy() - 2.0 / 3.0).abs() < 1e-15);
        assert!((form("exp:theta=1").energy() - 2.0 / std::f64::consts::E).abs() < 1e-15);
        assert!((form("distind:s=1").energy() - 2.0 / 3.0).abs() < 1e-15);
        assert!((form("distind:s=0.5").energy() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn tensor_potential_is_product() {
        let k: Kernel = "tensor(matern32:theta=10, d=2)".parse().unwrap();
        let p = PotentialProvider::uniform(&k, 2).unwrap();
        let f = form("matern32:theta=10");
        let v = p.potential(&k, &[0.3, 0.8]).unwrap();
        assert_eq!(v, f.potential(0.3) * f.potential(0.8));
        assert_eq!(p.energy(), f.energy() * f.energy());
    }

    #[test]
    fn mismatch_is_an_error() {
        let k: Kernel = "matern32:theta=1".parse().unwrap();
        let other: Kernel = "matern32:theta=2".parse().unwrap();
        let p = PotentialProvider::uniform(&k, 1).unwrap();
        assert!(matches!(p.potential(&other, &[0.1]), Err(Error::ProviderMismatch { .. })));
        assert!(PotentialProvider::uniform(&k, 2).is_err());
        assert!(PotentialProvider::uniform(&"riesz:s=1.5".parse().unwrap(), 1).is_err());
    }

    #[test]
    fn single_point_sample() {
        let k: Kernel = "exp:theta=2".parse().unwrap();
        let p = PotentialProvider::monte_carlo(&k, MeasureSpec::UniformCube { dim: 1 }, 1, 3).unwrap();
        let PotentialProvider::MonteCarlo { sample, .. } = &p else { unreachable!() };
        let x1 = sample.row(0)[0];
        assert_eq!(p.potential(&k, &[0.25]).unwrap(), k.value(&[0.25], &[x1]));
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = MeasureSpec::UniformSphere { dim: 3 };
        assert_eq!(s.sample(100, 7).unwrap(), s.sample(100, 7).unwrap());
        let pts = s.sample(10, 1).unwrap();
        for r in pts.rows() {
            assert!((r.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn potential_outside_unit_interval() {
        // numerical integral of exp(-2|x-u|) over u in [0,1] at x = -0.3 and 1.4
        let f = form("exp:theta=2");
        for x in [-0.3, 1.4] {
            let n = 20000;
            let num: f64 = (0..n).map(|i| (-2.0 * (x - (i as f64 + 0.5) / n as f64).abs()).exp()).sum::<f64>() / n as f64;
            assert!((f.potential(x) - num).abs() < 1e-8);
        }
    }
}
