//! Noise distributions and the population losses `L+` and `L-`.
//!
//! A [`NoiseModel`] is a base distribution (symmetric about 0) optionally
//! shifted so that its `tau`-quantile sits at 0. Mean-regression noise is
//! never shifted.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::loss::LossModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Normal with standard deviation `scale`.
    Gaussian,
    /// Uniform on `[-scale, scale]`.
    Uniform,
    /// Laplace with scale `scale`.
    Laplace,
    /// Cauchy with scale `scale`.
    Cauchy,
    /// Point mass at 0.
    Zero,
}

/// Serialized form: `{ kind, scale, tau }`.
///
/// `tau` requests quantile centering; leave it out for mean regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseSpec", into = "NoiseSpec")]
pub struct NoiseModel {
    kind: NoiseKind,
    scale: f64,
    tau: Option<f64>,
    /// Base `tau`-quantile; draws are `base - shift`.
    shift: f64,
}

impl TryFrom<NoiseSpec> for NoiseModel {
    type Error = Error;

    fn try_from(s: NoiseSpec) -> Result<Self> {
        let base = NoiseModel::new(s.kind, s.scale)?;
        match s.tau {
            Some(tau) => base.centered_at_quantile(tau),
            None => Ok(base),
        }
    }
}

impl From<NoiseModel> for NoiseSpec {
    fn from(m: NoiseModel) -> Self {
        NoiseSpec {
            kind: m.kind,
            scale: m.scale,
            tau: m.tau,
        }
    }
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, scale: f64) -> Result<Self> {
        if kind != NoiseKind::Zero && !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise scale = {scale} must be finite and positive"
            )));
        }
        let scale = if kind == NoiseKind::Zero { 0.0 } else { scale };
        Ok(Self {
            kind,
            scale,
            tau: None,
            shift: 0.0,
        })
    }

    pub fn gaussian(scale: f64) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, scale)
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        Self::new(NoiseKind::Uniform, half_width)
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        Self::new(NoiseKind::Laplace, scale)
    }

    pub fn cauchy(scale: f64) -> Result<Self> {
        Self::new(NoiseKind::Cauchy, scale)
    }

    pub fn zero() -> Self {
        Self {
            kind: NoiseKind::Zero,
            scale: 0.0,
            tau: None,
            shift: 0.0,
        }
    }

    /// Shifts the distribution so that `F(0) = tau`.
    pub fn centered_at_quantile(self, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidInput(format!("tau = {tau} must lie in (0, 1)")));
        }
        Ok(Self {
            tau: Some(tau),
            shift: self.base_quantile(tau),
            ..self
        })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn spec(&self) -> NoiseSpec {
        (*self).into()
    }

    fn base_quantile(&self, p: f64) -> f64 {
        let s = self.scale;
        match self.kind {
            NoiseKind::Gaussian => s * std_normal_quantile(p),
            NoiseKind::Uniform => s * (2.0 * p - 1.0),
            NoiseKind::Laplace => {
                if p < 0.5 {
                    s * (2.0 * p).ln()
                } else {
                    -s * (2.0 - 2.0 * p).ln()
                }
            }
            NoiseKind::Cauchy => s * (PI * (p - 0.5)).tan(),
            NoiseKind::Zero => 0.0,
        }
    }

    fn base_cdf(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.kind {
            NoiseKind::Gaussian => std_normal().cdf(x / s),
            NoiseKind::Uniform => ((x + s) / (2.0 * s)).clamp(0.0, 1.0),
            NoiseKind::Laplace => {
                if x < 0.0 {
                    0.5 * (x / s).exp()
                } else {
                    1.0 - 0.5 * (-x / s).exp()
                }
            }
            NoiseKind::Cauchy => 0.5 + (x / s).atan() / PI,
            NoiseKind::Zero => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn base_density(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.kind {
            NoiseKind::Gaussian => std_normal().pdf(x / s) / s,
            NoiseKind::Uniform => {
                if x.abs() <= s {
                    0.5 / s
                } else {
                    0.0
                }
            }
            NoiseKind::Laplace => (-(x.abs()) / s).exp() / (2.0 * s),
            NoiseKind::Cauchy => 1.0 / (PI * s * (1.0 + (x / s) * (x / s))),
            NoiseKind::Zero => 0.0,
        }
    }

    /// `F(x) = P(eps <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.base_cdf(x + self.shift)
    }

    /// `F-(x) = P(eps < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self.kind {
            NoiseKind::Zero => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.cdf(x),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.base_density(x + self.shift)
    }

    /// Quantile function of the (shifted) distribution.
    pub fn quantile(&self, p: f64) -> f64 {
        self.base_quantile(p) - self.shift
    }

    /// Sub-Gaussian parameter of `rho'(eps - t)`, uniformly in `t`.
    pub fn sigma_for(&self, loss: &LossModel) -> Result<f64> {
        match loss {
            LossModel::Quantile { .. } => Ok(0.5),
            LossModel::Square => {
                self.require_mean_zero()?;
                match self.kind {
                    NoiseKind::Gaussian | NoiseKind::Uniform => Ok(self.scale),
                    NoiseKind::Zero => Ok(0.0),
                    NoiseKind::Laplace | NoiseKind::Cauchy => Err(Error::Unsupported(format!(
                        "{:?} noise is not sub-Gaussian; use it with the quantile loss",
                        self.kind
                    ))),
                }
            }
        }
    }

    fn require_mean_zero(&self) -> Result<()> {
        if self.kind == NoiseKind::Cauchy {
            return Err(Error::Unsupported("Cauchy noise has no mean".into()));
        }
        if self.shift != 0.0 {
            return Err(Error::Unsupported(
                "mean regression needs centered noise, not quantile-shifted noise".into(),
            ));
        }
        Ok(())
    }

    /// Minimum density of the noise on `[-1, 1]`, which is a valid constant
    /// `L` with `|F(x) - F(0)| >= L |x|` there.
    pub fn growth_constant(&self) -> Result<f64> {
        match self.kind {
            NoiseKind::Zero => Err(Error::Unsupported("point-mass noise has no density".into())),
            NoiseKind::Uniform => {
                let lo = -self.scale - self.shift;
                let hi = self.scale - self.shift;
                if lo > -1.0 || hi < 1.0 {
                    return Err(Error::Unsupported(format!(
                        "uniform support [{lo}, {hi}] does not cover [-1, 1]"
                    )));
                }
                Ok(0.5 / self.scale)
            }
            // Unimodal about -shift: the minimum is at the far endpoint.
            _ => Ok(self.base_density(self.shift.abs() + 1.0)),
        }
    }

    /// `n` draws from one seeded stream.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = vec![0.0; n];
        self.fill(&mut rng, &mut out);
        out
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.scale;
        let base = match self.kind {
            NoiseKind::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            }
            NoiseKind::Uniform => rng.random_range(-s..=s),
            NoiseKind::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -s * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            NoiseKind::Cauchy => Cauchy::new(0.0, s).expect("positive scale").sample(rng),
            NoiseKind::Zero => 0.0,
        };
        base - self.shift
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out {
            *v = self.draw(rng);
        }
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Standard normal quantile with one Newton correction on the CDF.
fn std_normal_quantile(p: f64) -> f64 {
    let n = std_normal();
    let x = n.inverse_cdf(p);
    let dens = n.pdf(x);
    if x.is_finite() && dens > 0.0 {
        x - (n.cdf(x) - p) / dens
    } else {
        x
    }
}

fn check_pair(loss: &LossModel, noise: &NoiseModel) -> Result<()> {
    loss.validate()?;
    if let LossModel::Square = loss {
        noise.require_mean_zero()?;
    }
    Ok(())
}

/// `L+(t) = E rho'_+(eps - t)`.
pub fn l_plus(loss: &LossModel, noise: &NoiseModel, t: f64) -> Result<f64> {
    check_pair(loss, noise)?;
    Ok(match *loss {
        LossModel::Square => -t,
        LossModel::Quantile { tau } => tau - noise.cdf_left(t),
    })
}

/// `L-(t) = E rho'_-(eps - t)`.
pub fn l_minus(loss: &LossModel, noise: &NoiseModel, t: f64) -> Result<f64> {
    check_pair(loss, noise)?;
    Ok(match *loss {
        LossModel::Square => -t,
        LossModel::Quantile { tau } => tau - noise.cdf(t),
    })
}

/// Width below which bisection stops.
const BISECT_TOL: f64 = 1e-13;
/// Largest bracket half-width tried before giving up.
const MAX_BRACKET: f64 = (1u64 << 40) as f64;

/// `t` with `L+(t) = v`, found by bisection.
pub fn invert_l_plus(loss: &LossModel, noise: &NoiseModel, v: f64) -> Result<f64> {
    check_pair(loss, noise)?;
    invert_decreasing(|t| l_plus(loss, noise, t).expect("pair checked"), v)
}

/// `t` with `L-(t) = v`, found by bisection.
pub fn invert_l_minus(loss: &LossModel, noise: &NoiseModel, v: f64) -> Result<f64> {
    check_pair(loss, noise)?;
    invert_decreasing(|t| l_minus(loss, noise, t).expect("pair checked"), v)
}

/// Bisection for a nonincreasing `f`, starting on `[-1, 1]` and doubling.
fn invert_decreasing(f: impl Fn(f64) -> f64, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::InvalidInput(format!("target value {v} is not finite")));
    }
    let mut w = 1.0;
    let (mut lo, mut hi) = loop {
        let (flo, fhi) = (f(-w), f(w));
        if flo >= v && fhi <= v {
            break (-w, w);
        }
        if w >= MAX_BRACKET {
            return Err(Error::OutOfRange {
                value: v,
                lo: fhi,
                hi: flo,
            });
        }
        w *= 2.0;
    };
    while hi - lo > BISECT_TOL * hi.abs().max(lo.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replication stream `stream` under base seed `base`.
pub fn stream_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}
