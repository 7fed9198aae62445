//! Experiment configuration (TOML).

use serde::{Deserialize, Serialize};

use crate::bounds::LambdaRule;
use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::noise::{NoiseModel, NoiseSpec};
use crate::signal::{PiecewiseConstantSignal, SignalGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Pointwise,
    ElementwiseQuantile,
    Sse,
    RateSweep,
    LambdaSweep,
}

/// The truth signal, either explicit or an equal-length family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Explicit { values: Vec<f64>, lengths: Vec<usize> },
    /// Values `0, jump, 0, jump, ...`.
    Alternating { segments: usize, length: usize, jump: f64 },
    /// Values `0, jump, 2 jump, ...`.
    Staircase { segments: usize, length: usize, jump: f64 },
}

impl SignalSpec {
    pub fn build(&self) -> Result<PiecewiseConstantSignal> {
        match self {
            SignalSpec::Explicit { values, lengths } => {
                PiecewiseConstantSignal::new(values.clone(), lengths.clone())
            }
            SignalSpec::Alternating { segments, length, jump } => {
                PiecewiseConstantSignal::alternating(*segments, *length, *jump)
            }
            SignalSpec::Staircase { segments, length, jump } => {
                PiecewiseConstantSignal::staircase(*segments, *length, *jump)
            }
        }
    }

    /// The same family rescaled to total length `n` (equal segments).
    pub fn with_len(&self, n: usize) -> Result<PiecewiseConstantSignal> {
        let (segments, jump, alternating) = match *self {
            SignalSpec::Alternating { segments, jump, .. } => (segments, jump, true),
            SignalSpec::Staircase { segments, jump, .. } => (segments, jump, false),
            SignalSpec::Explicit { .. } => {
                return Err(Error::Config(
                    "an n-sweep needs an alternating or staircase signal family".into(),
                ))
            }
        };
        if segments == 0 || !n.is_multiple_of(segments) {
            return Err(Error::Config(format!("n = {n} is not a multiple of {segments} segments")));
        }
        if alternating {
            PiecewiseConstantSignal::alternating(segments, n / segments, jump)
        } else {
            PiecewiseConstantSignal::staircase(segments, n / segments, jump)
        }
    }
}

/// Indices to monitor; all positions in the config are 1-based.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "set", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexSet {
    #[default]
    All,
    /// Indices at distance at least `min_distance` from a change point.
    Interior { min_distance: usize },
    /// The first and last point of every segment.
    ChangePoints,
    Explicit { indices: Vec<usize> },
}

impl IndexSet {
    /// Resolved 0-based indices in increasing order.
    pub fn resolve(&self, geom: &SignalGeometry) -> Result<Vec<usize>> {
        let n = geom.n();
        let out: Vec<usize> = match self {
            IndexSet::All => (0..n).collect(),
            IndexSet::Interior { min_distance } => (0..n).filter(|&i| geom.d[i] >= *min_distance).collect(),
            IndexSet::ChangePoints => (0..n).filter(|&i| geom.d[i] == 1).collect(),
            IndexSet::Explicit { indices } => {
                let mut v = Vec::with_capacity(indices.len());
                for &i in indices {
                    if i == 0 || i > n {
                        return Err(Error::Config(format!("monitored index {i} outside 1..={n}")));
                    }
                    v.push(i - 1);
                }
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        if out.is_empty() {
            return Err(Error::Config("the monitored index set is empty".into()));
        }
        Ok(out)
    }
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub replications: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub signal: SignalSpec,
    pub noise: NoiseSpec,
    pub loss: LossModel,
    pub lambda: LambdaRule,
    #[serde(default)]
    pub monitor: IndexSet,
    /// Overrides the growth constant derived from the noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_l: Option<f64>,
    /// Run the sse experiment even when the quantile bound's
    /// preconditions fail; the result is labelled as outside the guarantee.
    #[serde(default)]
    pub allow_outside_guarantee: bool,
    /// Signal lengths for the change-point part of a rate sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_sweep: Vec<usize>,
    /// Distances from the change point for the slope part of a rate sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d_grid: Vec<usize>,
    /// Multipliers of `sqrt(n / K)` for a lambda sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda_factors: Vec<f64>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        self.loss.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.signal.build().map_err(|e| Error::Config(e.to_string()))?;
        self.noise_model()?;
        if let LambdaRule::Fixed { value } = self.lambda {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Config(format!("fixed lambda {value} must be nonnegative")));
            }
        }
        match self.experiment {
            ExperimentKind::RateSweep if self.n_sweep.is_empty() && self.d_grid.is_empty() => {
                Err(Error::Config("rate_sweep needs n_sweep or d_grid".into()))
            }
            ExperimentKind::LambdaSweep if self.lambda_factors.is_empty() => {
                Err(Error::Config("lambda_sweep needs lambda_factors".into()))
            }
            _ => Ok(()),
        }
    }

    /// The noise model, centered at the loss's quantile level when needed.
    pub fn noise_model(&self) -> Result<NoiseModel> {
        let mut spec = self.noise;
        if let (Some(tau), None) = (self.loss.tau(), spec.tau) {
            spec.tau = Some(tau);
        }
        if let (Some(a), Some(b)) = (self.loss.tau(), spec.tau) {
            if a != b {
                return Err(Error::Config(format!(
                    "noise is centered at tau = {b} but the loss uses tau = {a}"
                )));
            }
        }
        if self.loss.tau().is_none() && spec.tau.is_some() {
            return Err(Error::Config("mean regression needs uncentered (mean-zero) noise".into()));
        }
        NoiseModel::try_from(spec).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        super::output::config_hash(self)
    }
}
