//! Anytime envelope for partial sums of sub-Gaussian noise:
//! `|S_t| <= 4 sigma sqrt(t (lnln(2t) + ln(1/delta)))` for all `t >= 1`
//! with probability at least `1 - 6 delta^2 / (ln 2)^2`.

use std::f64::consts::LN_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{check_delta_pointwise, lnln};
use crate::error::{Error, Result};
use crate::noise::{stream_seed, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LilEnvelope {
    pub sigma: f64,
    pub delta: f64,
}

impl LilEnvelope {
    pub fn new(sigma: f64, delta: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidInput(format!("sigma = {sigma} must be positive")));
        }
        check_delta_pointwise(delta)?;
        Ok(Self { sigma, delta })
    }

    pub fn at(&self, t: u64) -> f64 {
        envelope(t, self)
    }

    /// `6 delta^2 / (ln 2)^2`.
    pub fn failure_bound(&self) -> f64 {
        6.0 * self.delta * self.delta / (LN_2 * LN_2)
    }
}

pub fn envelope(t: u64, env: &LilEnvelope) -> f64 {
    let t = t as f64;
    4.0 * env.sigma * (t * (lnln(2.0 * t) + (1.0 / env.delta).ln())).sqrt()
}

/// Binomial slack `3 sqrt(p (1 - p) / r)`.
pub fn binomial_slack(p: f64, r: usize) -> f64 {
    3.0 * (p * (1.0 - p) / r as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LilRun {
    pub horizon: u64,
    pub paths: usize,
    pub seed: u64,
    /// Multiplier on the envelope (1 for the stated bound).
    #[serde(default = "unit")]
    pub envelope_scale: f64,
}

fn unit() -> f64 {
    1.0
}

/// Quantiles of `|S_t| / envelope(t)` across paths at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointQuantiles {
    pub t: u64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LilResult {
    pub envelope: LilEnvelope,
    pub horizon: u64,
    pub paths: usize,
    pub seed: u64,
    pub envelope_scale: f64,
    pub violations: usize,
    pub frequency: f64,
    pub bound: f64,
    pub slack: f64,
    pub passed: bool,
    pub checkpoints: Vec<CheckpointQuantiles>,
}

/// Checkpoints `1, 2, 4, ...` up to and including `horizon`.
fn checkpoints(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = std::iter::successors(Some(1u64), |&t| t.checked_mul(2))
        .take_while(|&t| t < horizon)
        .collect();
    out.push(horizon);
    out
}

/// Simulates `paths` random walks of length `horizon` and counts those that
/// leave the envelope at some `t <= horizon`.
pub fn verify_paths(noise: &NoiseModel, env: &LilEnvelope, run: &LilRun) -> Result<LilResult> {
    if run.horizon == 0 || run.paths == 0 {
        return Err(Error::InvalidInput("horizon and path count must be positive".into()));
    }
    let horizon = run.horizon;
    let bound_t: Vec<f64> = (1..=horizon).map(|t| run.envelope_scale * env.at(t)).collect();
    let marks = checkpoints(horizon);

    let per_path: Vec<(bool, Vec<f64>)> = (0..run.paths as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(run.seed, r));
            let mut s = 0.0;
            let mut hit = false;
            let mut ratios = Vec::with_capacity(marks.len());
            let mut next = 0;
            for t in 1..=horizon {
                s += noise.draw(&mut rng);
                let b = bound_t[(t - 1) as usize];
                hit |= s.abs() > b;
                if marks[next] == t {
                    ratios.push(s.abs() / b);
                    next += 1;
                }
            }
            (hit, ratios)
        })
        .collect();

    let violations = per_path.iter().filter(|(hit, _)| *hit).count();
    let frequency = violations as f64 / run.paths as f64;
    let bound = env.failure_bound();
    let slack = binomial_slack(frequency, run.paths);
    let checkpoints = marks
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let mut col: Vec<f64> = per_path.iter().map(|(_, r)| r[j]).collect();
            col.sort_by(f64::total_cmp);
            CheckpointQuantiles {
                t,
                q50: quantile_sorted(&col, 0.5),
                q90: quantile_sorted(&col, 0.9),
                q99: quantile_sorted(&col, 0.99),
                max: *col.last().expect("paths > 0"),
            }
        })
        .collect();
    Ok(LilResult {
        envelope: *env,
        horizon,
        paths: run.paths,
        seed: run.seed,
        envelope_scale: run.envelope_scale,
        violations,
        frequency,
        bound,
        slack,
        passed: frequency <= bound.min(1.0) + slack,
        checkpoints,
    })
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
