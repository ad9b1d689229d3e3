//! Kernel families, pointwise evaluation and the reduced kernel `K_mu`.
//!
//! Singular kernels (Riesz and logarithmic) evaluate to `f64::INFINITY` on the
//! diagonal; that value is the marker, not an error.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::potential::PotentialProvider;

#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    /// exp(-t r^2)
    SquaredExponential { t: f64 },
    /// exp(-theta r)
    Exponential { theta: f64 },
    /// (1 + sqrt(3) theta r) exp(-sqrt(3) theta r)
    Matern32 { theta: f64 },
    /// (1 + sqrt(5) theta r + 5 theta^2 r^2 / 3) exp(-sqrt(5) theta r)
    Matern52 { theta: f64 },
    /// (r^2 + eps)^(-s/2)
    GeneralizedMultiquadric { s: f64, eps: f64 },
    /// (r + eps)^(-s)
    ShiftedInverseDistance { s: f64, eps: f64 },
    /// r^(-s)
    RieszSingular { s: f64 },
    /// -log r
    RieszLog,
    /// -r^s
    NegDistance { s: f64 },
    /// |x|^s + |x'|^s - r^s
    DistanceInduced { s: f64 },
    /// 1 - theta r
    TriangularOneMinus { theta: f64 },
    /// Product of one-dimensional factors, one per coordinate.
    TensorProduct(Vec<Kernel>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Definiteness {
    Ispd,
    Cispd,
    SpdOnly,
    Unknown,
}

impl Definiteness {
    fn rank(self) -> u8 {
        match self {
            Definiteness::Ispd => 3,
            Definiteness::Cispd => 2,
            Definiteness::SpdOnly => 1,
            Definiteness::Unknown => 0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Kernel {
    pub fn squared_exponential(t: f64) -> Result<Self> {
        Self::checked(Kernel::SquaredExponential { t })
    }
    pub fn exponential(theta: f64) -> Result<Self> {
        Self::checked(Kernel::Exponential { theta })
    }
    pub fn matern32(theta: f64) -> Result<Self> {
        Self::checked(Kernel::Matern32 { theta })
    }
    pub fn matern52(theta: f64) -> Result<Self> {
        Self::checked(Kernel::Matern52 { theta })
    }
    pub fn multiquadric(s: f64, eps: f64) -> Result<Self> {
        Self::checked(Kernel::GeneralizedMultiquadric { s, eps })
    }
    pub fn shifted_inverse(s: f64, eps: f64) -> Result<Self> {
        Self::checked(Kernel::ShiftedInverseDistance { s, eps })
    }
    pub fn riesz(s: f64) -> Result<Self> {
        Self::checked(Kernel::RieszSingular { s })
    }
    pub fn riesz_log() -> Self {
        Kernel::RieszLog
    }
    pub fn neg_distance(s: f64) -> Result<Self> {
        Self::checked(Kernel::NegDistance { s })
    }
    pub fn distance_induced(s: f64) -> Result<Self> {
        Self::checked(Kernel::DistanceInduced { s })
    }
    pub fn triangular(theta: f64) -> Result<Self> {
        Self::checked(Kernel::TriangularOneMinus { theta })
    }
    pub fn tensor(factors: Vec<Kernel>) -> Result<Self> {
        Self::checked(Kernel::TensorProduct(factors))
    }
    /// `d` copies of the same one-dimensional factor.
    pub fn tensor_power(factor: Kernel, d: usize) -> Result<Self> {
        Self::tensor(vec![factor; d])
    }

    fn checked(k: Kernel) -> Result<Self> {
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::SquaredExponential { t } => positive("t", *t),
            Kernel::Exponential { theta }
            | Kernel::Matern32 { theta }
            | Kernel::Matern52 { theta }
            | Kernel::TriangularOneMinus { theta } => positive("theta", *theta),
            Kernel::GeneralizedMultiquadric { s, eps } | Kernel::ShiftedInverseDistance { s, eps } => {
                positive("s", *s)?;
                positive("eps", *eps)
            }
            Kernel::RieszSingular { s } | Kernel::NegDistance { s } | Kernel::DistanceInduced { s } => {
                positive("s", *s)
            }
            Kernel::RieszLog => Ok(()),
            Kernel::TensorProduct(fs) => {
                if fs.is_empty() {
                    return Err(Error::InvalidParameter("tensor product needs at least one factor".into()));
                }
                for f in fs {
                    if matches!(f, Kernel::TensorProduct(_)) {
                        return Err(Error::InvalidParameter("tensor factors must be one-dimensional".into()));
                    }
                    f.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Required input dimension, if fixed by the kernel itself.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            Kernel::TensorProduct(fs) => Some(fs.len()),
            _ => None,
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self.fixed_dim() {
            Some(k) if k != d => Err(Error::DimensionMismatch { expected: k, got: d }),
            _ if d == 0 => Err(Error::InvalidParameter("dimension must be positive".into())),
            _ => Ok(()),
        }
    }

    pub fn is_singular(&self) -> bool {
        match self {
            Kernel::RieszSingular { .. } | Kernel::RieszLog => true,
            Kernel::TensorProduct(fs) => fs.iter().any(|f| f.is_singular()),
            _ => false,
        }
    }

    pub fn is_translation_invariant(&self) -> bool {
        match self {
            Kernel::DistanceInduced { .. } => false,
            Kernel::TensorProduct(fs) => fs.iter().all(|f| f.is_translation_invariant()),
            _ => true,
        }
    }

    /// Definiteness class on subsets of R^dim. Declarative: taken from the
    /// classical statements for each family, never computed.
    pub fn definiteness(&self, dim: usize) -> Definiteness {
        use Definiteness::*;
        match self {
            Kernel::SquaredExponential { .. }
            | Kernel::Exponential { .. }
            | Kernel::Matern32 { .. }
            | Kernel::Matern52 { .. }
            | Kernel::GeneralizedMultiquadric { .. } => Ispd,
            Kernel::ShiftedInverseDistance { .. } => Unknown,
            Kernel::RieszSingular { s } => {
                if *s < dim as f64 {
                    Ispd
                } else {
                    Unknown
                }
            }
            Kernel::RieszLog => Cispd,
            Kernel::NegDistance { s } => {
                if *s < 2.0 {
                    Cispd
                } else {
                    Unknown
                }
            }
            Kernel::DistanceInduced { s } => {
                if *s < 2.0 {
                    Cispd
                } else if *s == 2.0 {
                    SpdOnly
                } else {
                    Unknown
                }
            }
            Kernel::TriangularOneMinus { theta } => {
                if dim == 1 && *theta == 1.0 {
                    Ispd
                } else {
                    Unknown
                }
            }
            Kernel::TensorProduct(fs) => {
                if !self.is_translation_invariant() || self.is_singular() {
                    return Unknown;
                }
                let worst = fs.iter().map(|f| f.definiteness(1)).min_by_key(|c| c.rank()).unwrap_or(Unknown);
                match worst {
                    Ispd => Ispd,
                    Cispd => Cispd,
                    _ => Unknown,
                }
            }
        }
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Kernel::TensorProduct(fs) => {
                let mut acc = 1.0;
                for (i, f) in fs.iter().enumerate() {
                    let v = f.radial(x[i] - y[i], x[i], y[i]);
                    if v == f64::INFINITY {
                        return f64::INFINITY;
                    }
                    acc *= v;
                }
                acc
            }
            Kernel::DistanceInduced { s } => {
                let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
                let r = crate::points::dist(x, y);
                (nx.powf(*s) + ny.powf(*s)) - r.powf(*s)
            }
            _ => self.of_sq_dist(crate::points::sq_dist(x, y)),
        }
    }

    /// Checked evaluation.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        self.check_dim(x.len())?;
        Ok(self.value(x, y))
    }

    /// One-dimensional evaluation used by tensor factors.
    #[inline]
    fn radial(&self, diff: f64, x: f64, y: f64) -> f64 {
        match self {
            Kernel::DistanceInduced { s } => (x.abs().powf(*s) + y.abs().powf(*s)) - diff.abs().powf(*s),
            _ => self.of_sq_dist(diff * diff),
        }
    }

    /// Value of a translation-invariant isotropic kernel at squared distance `r2`.
    #[inline]
    pub fn of_sq_dist(&self, r2: f64) -> f64 {
        match self {
            Kernel::SquaredExponential { t } => (-t * r2).exp(),
            Kernel::GeneralizedMultiquadric { s, eps } => (r2 + eps).powf(-0.5 * s),
            _ => self.of_dist(r2.sqrt()),
        }
    }

    #[inline]
    pub fn of_dist(&self, r: f64) -> f64 {
        match self {
            Kernel::SquaredExponential { t } => (-t * r * r).exp(),
            Kernel::Exponential { theta } => (-theta * r).exp(),
            Kernel::Matern32 { theta } => {
                let a = 3f64.sqrt() * theta * r;
                (1.0 + a) * (-a).exp()
            }
            Kernel::Matern52 { theta } => {
                let a = 5f64.sqrt() * theta * r;
                (1.0 + a + a * a / 3.0) * (-a).exp()
            }
            Kernel::GeneralizedMultiquadric { s, eps } => (r * r + eps).powf(-0.5 * s),
            Kernel::ShiftedInverseDistance { s, eps } => (r + eps).powf(-s),
            Kernel::RieszSingular { s } => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    r.powf(-s)
                }
            }
            Kernel::RieszLog => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    -r.ln()
                }
            }
            Kernel::NegDistance { s } => -r.powf(*s),
            Kernel::TriangularOneMinus { theta } => 1.0 - theta * r,
            Kernel::DistanceInduced { .. } | Kernel::TensorProduct(_) => {
                panic!("of_dist called on a kernel that is not a function of distance")
            }
        }
    }

    /// K(x, x).
    pub fn diag(&self, x: &[f64]) -> f64 {
        self.value(x, x)
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Kernel::SquaredExponential { .. } => "sqexp",
            Kernel::Exponential { .. } => "exp",
            Kernel::Matern32 { .. } => "matern32",
            Kernel::Matern52 { .. } => "matern52",
            Kernel::GeneralizedMultiquadric { .. } => "gmq",
            Kernel::ShiftedInverseDistance { .. } => "shifted",
            Kernel::RieszSingular { .. } => "riesz",
            Kernel::RieszLog => "rieszlog",
            Kernel::NegDistance { .. } => "negdist",
            Kernel::DistanceInduced { .. } => "distind",
            Kernel::TriangularOneMinus { .. } => "tri",
            Kernel::TensorProduct(_) => "tensor",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::SquaredExponential { t } => write!(f, "sqexp:t={t}"),
            Kernel::Exponential { theta } => write!(f, "exp:theta={theta}"),
            Kernel::Matern32 { theta } => write!(f, "matern32:theta={theta}"),
            Kernel::Matern52 { theta } => write!(f, "matern52:theta={theta}"),
            Kernel::GeneralizedMultiquadric { s, eps } => write!(f, "gmq:s={s},eps={eps}"),
            Kernel::ShiftedInverseDistance { s, eps } => write!(f, "shifted:s={s},eps={eps}"),
            Kernel::RieszSingular { s } => write!(f, "riesz:s={s}"),
            Kernel::RieszLog => write!(f, "rieszlog"),
            Kernel::NegDistance { s } => write!(f, "negdist:s={s}"),
            Kernel::DistanceInduced { s } => write!(f, "distind:s={s}"),
            Kernel::TriangularOneMinus { theta } => write!(f, "tri:theta={theta}"),
            Kernel::TensorProduct(fs) => {
                if fs.len() > 1 && fs.iter().all(|k| k == &fs[0]) {
                    write!(f, "tensor({}, d={})", fs[0], fs.len())
                } else {
                    let parts: Vec<String> = fs.iter().map(|k| k.to_string()).collect();
                    write!(f, "tensor({})", parts.join(", "))
                }
            }
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad value for {key}: '{v}'")))
}

fn parse_simple(spec: &str) -> Result<Kernel> {
    let spec = spec.trim();
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n.trim(), r.trim()),
        None => (spec, ""),
    };
    let mut params: Vec<(String, f64)> = Vec::new();
    if !rest.is_empty() {
        for kv in rest.split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{kv}'")))?;
            let k = k.trim().to_string();
            let v = parse_f64(&k, v)?;
            params.push((k, v));
        }
    }
    let take = |key: &str| -> Result<f64> {
        params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Parse(format!("kernel '{name}' needs parameter '{key}'")))
    };
    let allowed: &[&str] = match name {
        "sqexp" => &["t"],
        "exp" | "matern32" | "matern52" | "tri" => &["theta"],
        "gmq" | "shifted" => &["s", "eps"],
        "riesz" | "negdist" | "distind" => &["s"],
        "rieszlog" => &[],
        other => return Err(Error::Parse(format!("unknown kernel family '{other}'"))),
    };
    if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(Error::Parse(format!("kernel '{name}' has no parameter '{k}'")));
    }
    match name {
        "sqexp" => Kernel::squared_exponential(take("t")?),
        "exp" => Kernel::exponential(take("theta")?),
        "matern32" => Kernel::matern32(take("theta")?),
        "matern52" => Kernel::matern52(take("theta")?),
        "tri" => Kernel::triangular(take("theta")?),
        "gmq" => Kernel::multiquadric(take("s")?, take("eps")?),
        "shifted" => Kernel::shifted_inverse(take("s")?, take("eps")?),
        "riesz" => Kernel::riesz(take("s")?),
        "negdist" => Kernel::neg_distance(take("s")?),
        "distind" => Kernel::distance_induced(take("s")?),
        _ => Ok(Kernel::RieszLog),
    }
}

impl FromStr for Kernel {
    type Err = Error;

    /// Grammar: `family[:key=value[,key=value]]`, or
    /// `tensor(<factor>, d=<n>)`, or `tensor(<factor>, <factor>, ...)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let Some(inner) = s.strip_prefix("tensor(") else {
            return parse_simple(s);
        };
        let inner = inner
            .strip_suffix(')')
            .ok_or_else(|| Error::Parse("tensor(...) is missing ')'".into()))?;
        let mut factors: Vec<String> = Vec::new();
        let mut reps: Option<usize> = None;
        for tok in inner.split(',').map(str::trim) {
            if tok.is_empty() {
                return Err(Error::Parse("empty token in tensor(...)".into()));
            }
            if let Some(d) = tok.strip_prefix("d=") {
                let d = d.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad d in '{tok}'")))?;
                reps = Some(d);
            } else if tok.contains(':') || !tok.contains('=') {
                factors.push(tok.to_string());
            } else {
                let last = factors
                    .last_mut()
                    .ok_or_else(|| Error::Parse(format!("dangling parameter '{tok}'")))?;
                last.push(',');
                last.push_str(tok);
            }
        }
        let parsed = factors.iter().map(|f| parse_simple(f)).collect::<Result<Vec<_>>>()?;
        match reps {
            Some(d) => {
                if parsed.len() != 1 {
                    return Err(Error::Parse("d=<n> requires exactly one factor".into()));
                }
                if d == 0 {
                    return Err(Error::Parse("d must be positive".into()));
                }
                Kernel::tensor_power(parsed[0].clone(), d)
            }
            None => Kernel::tensor(parsed),
        }
    }
}

/// `K_mu(x, x') = K(x, x') - P_mu(x) - P_mu(x') + E_K(mu)`.
#[derive(Clone, Debug)]
pub struct ReducedKernel {
    base: Kernel,
    potential: PotentialProvider,
    energy: f64,
}

impl ReducedKernel {
    pub fn new(base: Kernel, potential: PotentialProvider, energy: f64) -> Result<Self> {
        if !energy.is_finite() {
            return Err(Error::NonFinite(format!("measure energy {energy}")));
        }
        potential.ensure_kernel(&base)?;
        Ok(ReducedKernel { base, potential, energy })
    }

    /// Reduction with respect to the uniform measure on the unit cube, using closed forms.
    pub fn uniform(base: Kernel, dim: usize) -> Result<Self> {
        let p = PotentialProvider::uniform(&base, dim)?;
        let e = p.energy();
        Self::new(base, p, e)
    }

    pub fn base(&self) -> &Kernel {
        &self.base
    }

    pub fn provider(&self) -> &PotentialProvider {
        &self.potential
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    #[inline]
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let px = self.potential.potential_unchecked(x);
        let py = self.potential.potential_unchecked(y);
        self.value_with(x, y, px, py)
    }

    /// Same as [`value`](Self::value) with precomputed potentials.
    #[inline]
    pub fn value_with(&self, x: &[f64], y: &[f64], px: f64, py: f64) -> f64 {
        self.base.value(x, y) - px - py + self.energy
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.base.eval(x, y)?;
        Ok(self.value(x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matern_diag_is_one() {
        let k = Kernel::matern32(10.0).unwrap();
        assert_eq!(k.eval(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 1.0);
    }

    #[test]
    fn gmq_diag() {
        let k = Kernel::multiquadric(1.0, 0.25).unwrap();
        assert_eq!(k.eval(&[0.4], &[0.4]).unwrap(), 2.0);
    }

    #[test]
    fn triangular_value() {
        let k = Kernel::triangular(1.0).unwrap();
        assert_eq!(k.eval(&[0.0], &[0.5]).unwrap(), 0.5);
    }

    #[test]
    fn singular_diagonal_is_infinite() {
        assert_eq!(Kernel::RieszLog.eval(&[0.2], &[0.2]).unwrap(), f64::INFINITY);
        let r = Kernel::riesz(0.5).unwrap();
        assert_eq!(r.eval(&[0.2, 0.1], &[0.2, 0.1]).unwrap(), f64::INFINITY);
        assert!(r.eval(&[0.2, 0.1], &[0.3, 0.1]).unwrap().is_finite());
    }

    #[test]
    fn dimension_mismatch() {
        let k = Kernel::tensor_power(Kernel::matern32(1.0).unwrap(), 2).unwrap();
        assert!(matches!(k.eval(&[0.1], &[0.2]), Err(Error::DimensionMismatch { .. })));
        assert!(k.eval(&[0.1, 0.2], &[0.2]).is_err());
    }

    #[test]
    fn validation() {
        assert!(Kernel::multiquadric(0.0, 1.0).is_err());
        assert!(Kernel::multiquadric(1.0, 0.0).is_err());
        assert!(Kernel::matern32(-1.0).is_err());
        assert!(Kernel::tensor(vec![]).is_err());
        let inner = Kernel::tensor_power(Kernel::RieszLog, 2).unwrap();
        assert!(Kernel::tensor(vec![inner]).is_err());
        // flagged, not rejected
        let k = Kernel::neg_distance(2.5).unwrap();
        assert_eq!(k.definiteness(1), Definiteness::Unknown);
    }

    #[test]
    fn definiteness_metadata() {
        assert_eq!(Kernel::neg_distance(1.0).unwrap().definiteness(2), Definiteness::Cispd);
        assert_eq!(Kernel::RieszLog.definiteness(1), Definiteness::Cispd);
        assert_eq!(Kernel::riesz(0.5).unwrap().definiteness(1), Definiteness::Ispd);
        assert_eq!(Kernel::riesz(1.5).unwrap().definiteness(1), Definiteness::Unknown);
        assert_eq!(Kernel::triangular(1.0).unwrap().definiteness(1), Definiteness::Ispd);
        assert_eq!(Kernel::triangular(0.5).unwrap().definiteness(1), Definiteness::Unknown);
        assert_eq!(Kernel::distance_induced(2.0).unwrap().definiteness(1), Definiteness::SpdOnly);
        assert_eq!(Kernel::shifted_inverse(1.0, 0.1).unwrap().definiteness(1), Definiteness::Unknown);
        let t = Kernel::tensor_power(Kernel::matern32(10.0).unwrap(), 2).unwrap();
        assert_eq!(t.definiteness(2), Definiteness::Ispd);
    }

    #[test]
    fn tensor_is_product() {
        let f = Kernel::matern52(3.0).unwrap();
        let g = Kernel::exponential(2.0).unwrap();
        let t = Kernel::tensor(vec![f.clone(), g.clone()]).unwrap();
        let x = [0.1, 0.9];
        let y = [0.35, 0.2];
        let expect = f.eval(&[0.1], &[0.35]).unwrap() * g.eval(&[0.9], &[0.2]).unwrap();
        assert_eq!(t.eval(&x, &y).unwrap(), expect);
    }

    #[test]
    fn parse_examples() {
        let k: Kernel = "matern32:theta=10".parse().unwrap();
        assert_eq!(k, Kernel::Matern32 { theta: 10.0 });
        let k: Kernel = "tensor(matern32:theta=10, d=2)".parse().unwrap();
        assert_eq!(k, Kernel::tensor_power(Kernel::Matern32 { theta: 10.0 }, 2).unwrap());
        let k: Kernel = "gmq:s=1,eps=1e-3".parse().unwrap();
        assert_eq!(k, Kernel::GeneralizedMultiquadric { s: 1.0, eps: 1e-3 });
        assert_eq!("rieszlog".parse::<Kernel>().unwrap(), Kernel::RieszLog);
        assert_eq!("negdist:s=1".parse::<Kernel>().unwrap(), Kernel::NegDistance { s: 1.0 });
        let k: Kernel = "tensor(gmq:s=1,eps=1e-3, exp:theta=2)".parse().unwrap();
        assert_eq!(
            k,
            Kernel::TensorProduct(vec![
                Kernel::GeneralizedMultiquadric { s: 1.0, eps: 1e-3 },
                Kernel::Exponential { theta: 2.0 }
            ])
        );
        assert!("matern32".parse::<Kernel>().is_err());
        assert!("matern32:eps=1".parse::<Kernel>().is_err());
        assert!("wavelet:a=1".parse::<Kernel>().is_err());
        assert!("tensor(matern32:theta=1".parse::<Kernel>().is_err());
    }

    #[test]
    fn display_round_trips() {
        let ks = vec![
            Kernel::squared_exponential(0.3).unwrap(),
            Kernel::multiquadric(1.0, 1e-20).unwrap(),
            Kernel::tensor_power(Kernel::RieszLog, 10).unwrap(),
            Kernel::tensor(vec![Kernel::matern52(0.1).unwrap(), Kernel::shifted_inverse(0.5, 0.01).unwrap()]).unwrap(),
            Kernel::distance_induced(0.5).unwrap(),
        ];
        for k in ks {
            let back: Kernel = k.to_string().parse().unwrap();
            assert_eq!(back, k);
        }
    }

    #[test]
    fn reduced_triangular_center() {
        let k = Kernel::triangular(1.0).unwrap();
        let r = ReducedKernel::uniform(k, 1).unwrap();
        // 1 - 0.75 - 0.75 + 2/3
        assert!((r.eval(&[0.5], &[0.5]).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }
}
