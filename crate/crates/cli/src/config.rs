//! Per-subcommand configuration files (TOML). Every key may also be given
//! as a flag; flags take precedence.

use std::path::{Path, PathBuf};

use fusedlasso::lil::LilRun;
use fusedlasso::{LossModel, NoiseKind, PiecewiseConstantSignal};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn require<T>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("missing `{key}` (flag or config key)")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Square,
    Quantile,
}

pub fn loss_model(kind: LossKind, tau: Option<f64>) -> Result<LossModel, CliError> {
    match (kind, tau) {
        (LossKind::Square, None) => Ok(LossModel::Square),
        (LossKind::Square, Some(_)) => Err(CliError::Config("tau only applies to the quantile loss".into())),
        (LossKind::Quantile, t) => LossModel::quantile(t.unwrap_or(0.5)).map_err(|e| CliError::Config(e.to_string())),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub input: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub loss: Option<LossKind>,
    pub tau: Option<f64>,
}

/// Resolved solve inputs; the config hash covers the data itself.
#[derive(Debug, Serialize)]
pub struct SolveRun {
    pub lambda: f64,
    pub loss: LossModel,
    pub y: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub signal: Option<PiecewiseConstantSignal>,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub growth_l: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct BoundsRun {
    pub signal: PiecewiseConstantSignal,
    pub params: fusedlasso::bounds::BoundParams,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LilConfig {
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub horizon: Option<u64>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub noise: Option<NoiseKind>,
    pub scale: Option<f64>,
    pub envelope_scale: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct LilRunConfig {
    pub sigma: f64,
    pub delta: f64,
    pub noise: NoiseKind,
    pub scale: f64,
    pub run: LilRun,
}

pub fn read_column(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut y = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if rec.len() != 1 {
            return Err(CliError::Config(format!(
                "{} record {}: expected one column, found {}",
                path.display(),
                line + 1,
                rec.len()
            )));
        }
        let v: f64 = rec[0].parse().map_err(|_| {
            CliError::Config(format!("{} record {}: `{}` is not a number", path.display(), line + 1, &rec[0]))
        })?;
        y.push(v);
    }
    if y.is_empty() {
        return Err(CliError::Config(format!("{} holds no values", path.display())));
    }
    Ok(y)
}
