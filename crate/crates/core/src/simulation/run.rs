use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::TOOL;
use super::spec::{ExperimentKind, ExperimentSpec};
use crate::bounds::{
    self, compute_b, elementwise_quantile_bound, prob_const, sse_bound_mean, sse_bound_quantile,
    sse_bound_quantile_unchecked, uniform_quantile_bound, BoundParams, ElementwiseBound, SseBound,
};
use crate::error::{Error, Result};
use crate::lil::{binomial_slack, quantile_sorted};
use crate::loss::LossModel;
use crate::noise::{l_minus, l_plus, stream_seed, NoiseModel};
use crate::signal::{PiecewiseConstantSignal, SignalGeometry};
use crate::solver::solve_theta;

/// Thresholds for the rate sweep, fixed by a pilot run (see the file for
/// the generating command).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateThresholds {
    pub slope_min: f64,
    pub slope_max: f64,
    pub change_point_ratio_max: f64,
    pub interior_shrink_min: f64,
}

impl RateThresholds {
    pub fn defaults() -> Self {
        #[derive(Deserialize)]
        struct File {
            #[allow(dead_code)]
            version: u32,
            rate: RateThresholds,
        }
        let f: File = toml::from_str(include_str!("../../defaults/rate_thresholds.toml"))
            .expect("bundled thresholds parse");
        f.rate
    }
}

/// One probability statement checked against its empirical frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    /// Raw closed-form bound (may exceed 1).
    pub bound: f64,
    pub slack: f64,
    /// The bound is at least 1, so the check carries no information.
    pub vacuous: bool,
    /// The preconditions of the underlying statement hold.
    pub guaranteed: bool,
    pub passed: bool,
}

impl Check {
    /// `observed <= min(bound, 1) + slack`, with the slack computed from
    /// `slack_p` over `r` replications.
    pub fn frequency(name: impl Into<String>, observed: f64, bound: f64, slack_p: f64, r: usize) -> Self {
        let slack = binomial_slack(slack_p, r);
        Self {
            name: name.into(),
            observed,
            bound,
            slack,
            vacuous: bound >= 1.0,
            guaranteed: true,
            passed: observed <= bound.min(1.0) + slack,
        }
    }

    /// `lo <= observed <= hi`.
    pub fn within(name: impl Into<String>, observed: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            bound: hi,
            slack: 0.0,
            vacuous: false,
            guaranteed: true,
            passed: observed >= lo && observed <= hi,
        }
    }

    fn outside_guarantee(mut self) -> Self {
        self.guaranteed = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexStats {
    /// 1-based index.
    pub i: usize,
    pub k: usize,
    pub d: usize,
    pub median_err: f64,
    pub q90_err: f64,
    /// Bound the events are compared with (`B`, or `B^quantile / L`).
    pub bound: f64,
    pub freq_up: f64,
    pub freq_down: f64,
    /// `max(freq_up, freq_down)` for pointwise runs, the two-sided
    /// frequency for elementwise runs.
    pub freq_event: f64,
    /// 90% quantile of (event statistic) / bound, a tightness measure.
    pub ratio_q90: f64,
    pub ratio_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SseStats {
    pub samples: Vec<f64>,
    pub bound: SseBound,
    pub bound_improved: SseBound,
    pub guaranteed: bool,
    pub freq_exceed: f64,
    pub freq_exceed_improved: f64,
    pub ratio_max: f64,
    /// Frequency of `theta_hat` leaving `[min theta* - 1, max theta* + 1]`.
    pub freq_range_crude: f64,
    /// Frequency of leaving the uniform quantile range, when it applies.
    pub freq_range_uniform: Option<f64>,
    pub uniform_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistancePoint {
    pub d: usize,
    pub median_err: f64,
    pub q90_err: f64,
    /// Median error of the block mean over the `d` points nearest the
    /// change point (noise-only baseline).
    pub baseline_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizePoint {
    pub n: usize,
    pub lambda: f64,
    pub change_point_median: f64,
    pub interior_index: usize,
    pub interior_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateStats {
    pub thresholds: RateThresholds,
    pub distances: Vec<DistancePoint>,
    pub slope: Option<f64>,
    pub baseline_slope: Option<f64>,
    pub sizes: Vec<SizePoint>,
    pub change_point_ratio: Option<f64>,
    pub interior_shrink: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaPoint {
    pub factor: f64,
    pub lambda: f64,
    pub mean_sse: f64,
    pub median_sse: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSweepStats {
    pub reference: f64,
    pub points: Vec<LambdaPoint>,
    pub empirical_argmin: f64,
    pub bound_argmin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub tool: String,
    pub config_hash: String,
    pub spec: ExperimentSpec,
    pub n: usize,
    pub num_segments: usize,
    pub lambda: f64,
    pub sigma: Option<f64>,
    pub growth_l: Option<f64>,
    pub prob_const: f64,
    pub indices: Vec<IndexStats>,
    pub sse: Option<SseStats>,
    pub rate: Option<RateStats>,
    pub lambda_sweep: Option<LambdaSweepStats>,
    pub checks: Vec<Check>,
    pub notices: Vec<String>,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.guaranteed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Truth, noise and tuning shared by all replications of one signal.
struct Setup {
    signal: PiecewiseConstantSignal,
    geom: SignalGeometry,
    theta: Vec<f64>,
    noise: NoiseModel,
    loss: LossModel,
    lambda: f64,
}

impl Setup {
    fn new(spec: &ExperimentSpec, signal: PiecewiseConstantSignal) -> Result<Self> {
        let geom = signal.geometry();
        let lambda = spec.lambda.resolve(signal.len(), signal.num_segments());
        Ok(Self {
            theta: signal.expand(),
            geom,
            signal,
            noise: spec.noise_model()?,
            loss: spec.loss,
            lambda,
        })
    }

    fn data(&self, seed: u64, r: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, r));
        self.theta.iter().map(|&t| t + self.noise.draw(&mut rng)).collect()
    }

    fn fit(&self, y: &[f64], lambda: f64) -> Vec<f64> {
        solve_theta(y, lambda, &self.loss).expect("validated inputs")
    }

    fn growth_l(&self, spec: &ExperimentSpec) -> Result<f64> {
        match spec.growth_l {
            Some(l) => Ok(l),
            None => self.noise.growth_constant(),
        }
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn median(v: &[f64]) -> f64 {
    quantile_sorted(&sorted(v.to_vec()), 0.5)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.iter().chain(y).any(|&v| v.is_nan() || v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Some(sxy / sxx)
}

/// Runs the experiment named in the spec.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    match spec.experiment {
        ExperimentKind::Pointwise => run_pointwise(spec),
        ExperimentKind::ElementwiseQuantile => run_elementwise_quantile(spec),
        ExperimentKind::Sse => run_sse(spec),
        ExperimentKind::RateSweep => run_rate_sweep(spec),
        ExperimentKind::LambdaSweep => run_lambda_sweep(spec),
    }
}

fn base_result(spec: &ExperimentSpec, setup: &Setup) -> ExperimentResult {
    ExperimentResult {
        tool: TOOL.to_string(),
        config_hash: spec.hash(),
        spec: spec.clone(),
        n: setup.signal.len(),
        num_segments: setup.signal.num_segments(),
        lambda: setup.lambda,
        sigma: setup.noise.sigma_for(&setup.loss).ok(),
        growth_l: None,
        prob_const: prob_const(),
        indices: Vec::new(),
        sse: None,
        rate: None,
        lambda_sweep: None,
        checks: Vec::new(),
        notices: Vec::new(),
    }
}

/// Errors `theta_hat_i - theta*_i` at `indices`, one row per replication.
fn monitored_errors(spec: &ExperimentSpec, setup: &Setup, indices: &[usize]) -> Vec<Vec<f64>> {
    (0..spec.replications as u64)
        .into_par_iter()
        .map(|r| {
            let y = setup.data(spec.seed, r);
            let th = setup.fit(&y, setup.lambda);
            indices.iter().map(|&i| th[i] - setup.theta[i]).collect()
        })
        .collect()
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

/// Pointwise one-sided events `L+(e) <= -B` and `L-(e) >= B`.
pub fn run_pointwise(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let setup = Setup::new(spec, spec.signal.build()?)?;
    let sigma = setup.noise.sigma_for(&setup.loss)?;
    let params = BoundParams {
        sigma,
        delta: spec.delta,
        lambda: setup.lambda,
        growth_l: None,
    };
    let indices = spec.monitor.resolve(&setup.geom)?;
    let b: Vec<f64> = indices
        .iter()
        .map(|&i| compute_b(i, &setup.geom, &params))
        .collect::<Result<_>>()?;
    let errs = monitored_errors(spec, &setup, &indices);

    let mut res = base_result(spec, &setup);
    if setup.loss.tau().is_some() {
        let l = setup.growth_l(spec)?;
        res.growth_l = Some(l);
        let adm = bounds::admissibility(&setup.geom, spec.delta, setup.lambda, l)?;
        for c in adm.conditions.iter().filter(|c| !c.holds) {
            res.notices.push(format!("lambda window: {c}"));
        }
    }
    let r = spec.replications;
    let rf = r as f64;
    let target = prob_const() * spec.delta * spec.delta;
    let (loss, noise) = (&setup.loss, &setup.noise);
    let mut worst = 0.0f64;
    let mut all_pass = true;
    let mut forms_agree = true;
    for (j, &i) in indices.iter().enumerate() {
        let e = column(&errs, j);
        let mut up = 0usize;
        let mut down = 0usize;
        let mut ratios = Vec::with_capacity(r);
        for &v in &e {
            let lp = l_plus(loss, noise, v)?;
            let lm = l_minus(loss, noise, v)?;
            let is_up = lp <= -b[j];
            let is_down = lm >= b[j];
            // The same events written directly in the error or CDF scale.
            let (alt_up, alt_down) = match loss {
                LossModel::Square => (v >= b[j], v <= -b[j]),
                LossModel::Quantile { .. } => (
                    noise.cdf_left(v) - noise.cdf_left(0.0) >= b[j],
                    noise.cdf(0.0) - noise.cdf(v) >= b[j],
                ),
            };
            forms_agree &= is_up == alt_up && is_down == alt_down;
            up += is_up as usize;
            down += is_down as usize;
            ratios.push((-lp).max(lm) / b[j]);
        }
        let (fu, fd) = (up as f64 / rf, down as f64 / rf);
        for f in [fu, fd] {
            all_pass &= f <= target.min(1.0) + binomial_slack(f, r);
        }
        worst = worst.max(fu).max(fd);
        let abs = sorted(e.iter().map(|v| v.abs()).collect());
        let ratios = sorted(ratios);
        res.indices.push(IndexStats {
            i: i + 1,
            k: setup.geom.k_of[i] + 1,
            d: setup.geom.d[i],
            median_err: quantile_sorted(&abs, 0.5),
            q90_err: quantile_sorted(&abs, 0.9),
            bound: b[j],
            freq_up: fu,
            freq_down: fd,
            freq_event: fu.max(fd),
            ratio_q90: quantile_sorted(&ratios, 0.9),
            ratio_max: *ratios.last().expect("r >= 1"),
        });
    }
    let mut check = Check::frequency("pointwise_events", worst, target, worst, r);
    check.passed = all_pass;
    res.checks.push(check);
    res.checks.push(Check::within(
        "event_form_identity",
        if forms_agree { 1.0 } else { 0.0 },
        1.0,
        1.0,
    ));
    if target >= 1.0 {
        res.notices.push(format!(
            "pointwise bound c delta^2 = {target:.4} is at least 1 (vacuous at delta = {})",
            spec.delta
        ));
    }
    Ok(res)
}

/// `|theta_hat_i - theta*_i| > B^quantile / L` at indices where the bound applies.
pub fn run_elementwise_quantile(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    if spec.loss.tau().is_none() {
        return Err(Error::Config("elementwise_quantile needs the quantile loss".into()));
    }
    let setup = Setup::new(spec, spec.signal.build()?)?;
    let l = setup.growth_l(spec)?;
    let adm = bounds::admissibility(&setup.geom, spec.delta, setup.lambda, l)?;
    let mut res = base_result(spec, &setup);
    res.growth_l = Some(l);
    if !adm.signal_level {
        let failed: Vec<String> = adm.conditions.iter().filter(|c| !c.holds).map(|c| c.to_string()).collect();
        res.notices.push(format!("signal-level admissibility fails: {}", failed.join("; ")));
    }

    let mut included = Vec::new();
    let mut bounds_at = Vec::new();
    let mut excluded = 0usize;
    for i in spec.monitor.resolve(&setup.geom)? {
        match elementwise_quantile_bound(i, &setup.geom, spec.delta, setup.lambda, l)? {
            ElementwiseBound::Applicable { bound, .. } => {
                included.push(i);
                bounds_at.push(bound);
            }
            ElementwiseBound::NotApplicable { .. } => excluded += 1,
        }
    }
    if excluded > 0 {
        res.notices.push(format!(
            "{excluded} monitored indices excluded: B^quantile exceeds L = {l:.6}"
        ));
    }
    let lemma_ok = included.iter().filter(|&&i| adm.per_index[i]).count();
    res.notices.push(format!(
        "{lemma_ok} of {} included indices also meet the distance threshold {:.1}",
        included.len(),
        adm.index_threshold
    ));
    if included.is_empty() {
        res.notices.push("no monitored index is covered by the elementwise bound".into());
        return Ok(res);
    }

    let errs = monitored_errors(spec, &setup, &included);
    let r = spec.replications;
    let target = 2.0 * prob_const() * spec.delta * spec.delta;
    let mut worst = 0.0f64;
    let mut all_pass = true;
    for (j, &i) in included.iter().enumerate() {
        let e = column(&errs, j);
        let up = e.iter().filter(|&&v| v > bounds_at[j]).count() as f64 / r as f64;
        let down = e.iter().filter(|&&v| v < -bounds_at[j]).count() as f64 / r as f64;
        let both = up + down;
        all_pass &= both <= target.min(1.0) + binomial_slack(both, r);
        worst = worst.max(both);
        let abs = sorted(e.iter().map(|v| v.abs()).collect());
        let ratios: Vec<f64> = abs.iter().map(|v| v / bounds_at[j]).collect();
        res.indices.push(IndexStats {
            i: i + 1,
            k: setup.geom.k_of[i] + 1,
            d: setup.geom.d[i],
            median_err: quantile_sorted(&abs, 0.5),
            q90_err: quantile_sorted(&abs, 0.9),
            bound: bounds_at[j],
            freq_up: up,
            freq_down: down,
            freq_event: both,
            ratio_q90: quantile_sorted(&ratios, 0.9),
            ratio_max: *ratios.last().expect("r >= 1"),
        });
    }
    let mut check = Check::frequency("elementwise_quantile", worst, target, worst, r);
    check.passed = all_pass;
    res.checks.push(check);
    Ok(res)
}

/// Sum of squared errors against the mean or quantile bound.
pub fn run_sse(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let setup = Setup::new(spec, spec.signal.build()?)?;
    let geom = &setup.geom;
    let mut res = base_result(spec, &setup);
    let (bound, bound_improved, guaranteed, uniform) = match setup.loss {
        LossModel::Square => {
            let sigma = setup.noise.sigma_for(&setup.loss)?;
            (
                sse_bound_mean(geom, spec.delta, setup.lambda, sigma, false)?,
                sse_bound_mean(geom, spec.delta, setup.lambda, sigma, true)?,
                true,
                None,
            )
        }
        LossModel::Quantile { .. } => {
            let l = setup.growth_l(spec)?;
            res.growth_l = Some(l);
            let v = geom.range;
            let checked = sse_bound_quantile(geom, spec.delta, setup.lambda, l, v, false);
            let guaranteed = match checked {
                Ok(_) => true,
                Err(e @ Error::Precondition(_)) => {
                    if !spec.allow_outside_guarantee {
                        return Err(e);
                    }
                    res.notices.push(format!("outside guarantee: {e}"));
                    false
                }
                Err(e) => return Err(e),
            };
            let uniform = uniform_quantile_bound(setup.signal.len(), spec.delta, setup.lambda, l).ok();
            (
                sse_bound_quantile_unchecked(geom, spec.delta, setup.lambda, l, v, false),
                sse_bound_quantile_unchecked(geom, spec.delta, setup.lambda, l, v, true),
                guaranteed,
                uniform,
            )
        }
    };
    let lo = setup.theta.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = setup.theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = uniform.as_ref().and_then(|u| u.margin);

    // (sse, left the crude range, left the uniform range)
    let rows: Vec<(f64, bool, bool)> = (0..spec.replications as u64)
        .into_par_iter()
        .map(|r| {
            let y = setup.data(spec.seed, r);
            let th = setup.fit(&y, setup.lambda);
            let sse: f64 = th.iter().zip(&setup.theta).map(|(a, b)| (a - b) * (a - b)).sum();
            let tmin = th.iter().copied().fold(f64::INFINITY, f64::min);
            let tmax = th.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let crude = tmin < lo - 1.0 || tmax > hi + 1.0;
            let unif = margin.is_some_and(|m| tmin < lo - m || tmax > hi + m);
            (sse, crude, unif)
        })
        .collect();
    let r = spec.replications;
    let rf = r as f64;
    let samples: Vec<f64> = rows.iter().map(|t| t.0).collect();
    let freq = |b: f64| samples.iter().filter(|&&s| s > b).count() as f64 / rf;
    let (fe, fi) = (freq(bound.total), freq(bound_improved.total));
    let target = 4.0 * prob_const() * spec.delta;
    for (name, f) in [("sse", fe), ("sse_improved", fi)] {
        let c = Check::frequency(name, f, target, f, r);
        res.checks.push(if guaranteed { c } else { c.outside_guarantee() });
    }
    let lam_o = bound.term("lambda_squared").unwrap_or(0.0);
    let lam_i = bound_improved.term("lambda_squared").unwrap_or(0.0);
    res.checks.push(Check::within("improved_lambda_term_at_most_6x", lam_i / lam_o, 0.0, 6.0));
    let freq_crude = rows.iter().filter(|t| t.1).count() as f64 / rf;
    let freq_unif = margin.map(|_| rows.iter().filter(|t| t.2).count() as f64 / rf);
    if let Some(f) = freq_unif {
        let c = Check::frequency("uniform_range", f, 2.0 * prob_const() * spec.delta * spec.delta, f, r);
        res.checks.push(c);
    }
    let ratio_max = samples.iter().map(|s| s / bound.total).fold(0.0, f64::max);
    res.sse = Some(SseStats {
        samples,
        bound,
        bound_improved,
        guaranteed,
        freq_exceed: fe,
        freq_exceed_improved: fi,
        ratio_max,
        freq_range_crude: freq_crude,
        freq_range_uniform: freq_unif,
        uniform_margin: margin,
    });
    Ok(res)
}

/// Error against distance to the change point, and error at the change
/// point against `n`.
pub fn run_rate_sweep(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let thresholds = RateThresholds::defaults();
    let base = Setup::new(spec, spec.signal.build()?)?;
    let mut res = base_result(spec, &base);
    let r = spec.replications;

    let mut distances = Vec::new();
    if !spec.d_grid.is_empty() {
        let m = base.geom.lengths[0];
        if base.signal.num_segments() < 2 {
            return Err(Error::Config("the d-sweep needs a change point".into()));
        }
        let mut idx = Vec::new();
        for &d in &spec.d_grid {
            if d == 0 || d > m.div_ceil(2) {
                return Err(Error::Config(format!("distance {d} does not fit a segment of length {m}")));
            }
            // Left of the first change point at distance d.
            idx.push(m - d);
        }
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..r as u64)
            .into_par_iter()
            .map(|rep| {
                let y = base.data(spec.seed, rep);
                let th = base.fit(&y, base.lambda);
                let errs = idx.iter().map(|&i| th[i] - base.theta[i]).collect();
                let block = spec
                    .d_grid
                    .iter()
                    .map(|&d| (m - d..m).map(|i| y[i] - base.theta[i]).sum::<f64>() / d as f64)
                    .collect();
                (errs, block)
            })
            .collect();
        for (j, &d) in spec.d_grid.iter().enumerate() {
            let abs = sorted(rows.iter().map(|row| row.0[j].abs()).collect());
            let blk: Vec<f64> = rows.iter().map(|row| row.1[j].abs()).collect();
            distances.push(DistancePoint {
                d,
                median_err: quantile_sorted(&abs, 0.5),
                q90_err: quantile_sorted(&abs, 0.9),
                baseline_median: median(&blk),
            });
        }
    }
    let ds: Vec<f64> = distances.iter().map(|p| p.d as f64).collect();
    let slope = log_log_slope(&ds, &distances.iter().map(|p| p.median_err).collect::<Vec<_>>());
    let baseline_slope = log_log_slope(&ds, &distances.iter().map(|p| p.baseline_median).collect::<Vec<_>>());
    if let Some(s) = slope {
        res.checks.push(Check::within("interior_slope", s, thresholds.slope_min, thresholds.slope_max));
    }

    let mut sizes = Vec::new();
    for &n in &spec.n_sweep {
        let setup = Setup::new(spec, spec.signal.with_len(n)?)?;
        let m = setup.geom.lengths[0];
        let cp = m - 1;
        let interior = m / 2 - 1;
        let rows = monitored_errors(spec, &setup, &[cp, interior]);
        sizes.push(SizePoint {
            n,
            lambda: setup.lambda,
            change_point_median: median(&rows.iter().map(|v| v[0].abs()).collect::<Vec<_>>()),
            interior_index: interior + 1,
            interior_median: median(&rows.iter().map(|v| v[1].abs()).collect::<Vec<_>>()),
        });
    }
    let (mut cp_ratio, mut shrink) = (None, None);
    if sizes.len() >= 2 {
        let cps: Vec<f64> = sizes.iter().map(|s| s.change_point_median).collect();
        let max = cps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = cps.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio = max / min;
        let s = sizes[0].interior_median / sizes[sizes.len() - 1].interior_median;
        res.checks.push(Check::within(
            "change_point_ratio",
            ratio,
            1.0,
            thresholds.change_point_ratio_max,
        ));
        res.checks.push(Check::within("interior_shrink", s, thresholds.interior_shrink_min, f64::INFINITY));
        cp_ratio = Some(ratio);
        shrink = Some(s);
    }
    res.rate = Some(RateStats {
        thresholds,
        distances,
        slope,
        baseline_slope,
        sizes,
        change_point_ratio: cp_ratio,
        interior_shrink: shrink,
    });
    Ok(res)
}

/// Empirical and bound-optimal `lambda` on a grid of multiples of `sqrt(n / K)`.
pub fn run_lambda_sweep(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let setup = Setup::new(spec, spec.signal.build()?)?;
    let mut res = base_result(spec, &setup);
    let n = setup.signal.len();
    let reference = (n as f64 / setup.signal.num_segments() as f64).sqrt();
    let lambdas: Vec<f64> = spec.lambda_factors.iter().map(|f| f * reference).collect();
    if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::Config("lambda factors must be positive".into()));
    }
    let sse: Vec<Vec<f64>> = (0..spec.replications as u64)
        .into_par_iter()
        .map(|r| {
            let y = setup.data(spec.seed, r);
            lambdas
                .iter()
                .map(|&l| {
                    let th = setup.fit(&y, l);
                    th.iter().zip(&setup.theta).map(|(a, b)| (a - b) * (a - b)).sum()
                })
                .collect()
        })
        .collect();
    let growth = match setup.loss {
        LossModel::Quantile { .. } => Some(setup.growth_l(spec)?),
        LossModel::Square => None,
    };
    res.growth_l = growth;
    let mut points = Vec::new();
    for (j, &lambda) in lambdas.iter().enumerate() {
        let col = column(&sse, j);
        let bound = match growth {
            Some(l) => sse_bound_quantile_unchecked(&setup.geom, spec.delta, lambda, l, setup.geom.range, false).total,
            None => sse_bound_mean(&setup.geom, spec.delta, lambda, setup.noise.sigma_for(&setup.loss)?, false)?.total,
        };
        points.push(LambdaPoint {
            factor: spec.lambda_factors[j],
            lambda,
            mean_sse: col.iter().sum::<f64>() / col.len() as f64,
            median_sse: median(&col),
            bound,
        });
    }
    let argmin = |f: &dyn Fn(&LambdaPoint) -> f64| {
        points
            .iter()
            .min_by(|a, b| f(a).total_cmp(&f(b)))
            .map(|p| p.lambda)
            .expect("non-empty grid")
    };
    let emp = argmin(&|p| p.mean_sse);
    let bnd = argmin(&|p| p.bound);
    res.checks.push(Check::within("empirical_argmin_window", emp / reference, 0.125, 8.0));
    res.checks.push(Check::within("bound_argmin_window", bnd / reference, 0.125, 8.0));
    res.lambda_sweep = Some(LambdaSweepStats {
        reference,
        points,
        empirical_argmin: emp,
        bound_argmin: bnd,
    });
    Ok(res)
}
