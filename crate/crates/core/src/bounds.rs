//! Explicit error bounds and their admissibility conditions.
//!
//! All logarithms are natural; `lnln(x)` is `ln(ln(x))`. Probabilities are
//! reported twice: the raw closed form (which can leave `[0, 1]` in vacuous
//! regimes) and its clamp.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Condition, Diagnosis, Error, Result};
use crate::signal::SignalGeometry;

/// Upper end of the pointwise `delta` range, `ln 2 / e`.
pub const DELTA_MAX: f64 = LN_2 / E;

/// `1 + 24 / (ln 2)^2`.
pub fn prob_const() -> f64 {
    1.0 + 24.0 / (LN_2 * LN_2)
}

#[inline]
pub fn lnln(x: f64) -> f64 {
    x.ln().ln()
}

fn clamp01(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

fn check_delta(delta: f64, hi: f64, context: &'static str) -> Result<()> {
    if delta > 0.0 && delta < hi {
        Ok(())
    } else {
        Err(Error::DeltaOutOfRange {
            delta,
            lo: 0.0,
            hi,
            context,
        })
    }
}

pub fn check_delta_pointwise(delta: f64) -> Result<()> {
    check_delta(delta, DELTA_MAX, "pointwise bounds")
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} = {v} must be finite and positive")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub sigma: f64,
    pub delta: f64,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_l: Option<f64>,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("sigma", self.sigma)?;
        check_positive("lambda", self.lambda)?;
        if let Some(l) = self.growth_l {
            check_positive("growth constant L", l)?;
        }
        check_delta_pointwise(self.delta)
    }
}

/// The three summands of the elementwise bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BTerms {
    /// `4 sigma (sqrt(lnln(2 max(3,d)) / max(3,d)) + sqrt(ln(1/delta) / d))`
    pub local: f64,
    /// `4 sigma^2 (lnln(2m) + ln(1/delta)) / lambda`
    pub penalty: f64,
    /// `(2 sqrt(m sigma^2 ln(1/delta)) + 2 lambda) / m`, or its improved form.
    pub segment: f64,
}

impl BTerms {
    pub fn total(&self) -> f64 {
        self.local + self.penalty + self.segment
    }
}

fn b_terms(d: usize, m: usize, sigma: f64, delta: f64, lambda: f64) -> BTerms {
    let d3 = (d.max(3)) as f64;
    let d = d as f64;
    let m = m as f64;
    let l1d = (1.0 / delta).ln();
    BTerms {
        local: 4.0 * sigma * ((lnln(2.0 * d3) / d3).sqrt() + (l1d / d).sqrt()),
        penalty: 4.0 * sigma * sigma * (lnln(2.0 * m) + l1d) / lambda,
        segment: (2.0 * (m * sigma * sigma * l1d).sqrt() + 2.0 * lambda) / m,
    }
}

fn checked_terms(i: usize, geom: &SignalGeometry, p: &BoundParams) -> Result<BTerms> {
    p.validate()?;
    if i >= geom.n() {
        return Err(Error::InvalidInput(format!("index {i} outside 0..{}", geom.n())));
    }
    Ok(b_terms(geom.d[i], geom.m_of(i), p.sigma, p.delta, p.lambda))
}

/// Elementwise bound `B_{i,delta}` at the 0-based index `i`.
pub fn compute_b(i: usize, geom: &SignalGeometry, params: &BoundParams) -> Result<f64> {
    Ok(checked_terms(i, geom, params)?.total())
}

pub fn compute_b_terms(i: usize, geom: &SignalGeometry, params: &BoundParams) -> Result<BTerms> {
    checked_terms(i, geom, params)
}

/// `B_{i,delta}` with `2 lambda / m` replaced by
/// `2 (lambda / m_left + lambda / m_right)`.
pub fn compute_b_improved(i: usize, geom: &SignalGeometry, params: &BoundParams) -> Result<f64> {
    let mut t = checked_terms(i, geom, params)?;
    let m = geom.m_of(i) as f64;
    let l1d = (1.0 / params.delta).ln();
    let lam = params.lambda;
    t.segment = 2.0 * (m * params.sigma * params.sigma * l1d).sqrt() / m
        + 2.0 * (lam / geom.m_left(i) as f64 + lam / geom.m_right(i) as f64);
    Ok(t.total())
}

/// `B_{i,delta}` at `sigma = 1/2`, the quantile-loss case.
pub fn compute_b_quantile(i: usize, geom: &SignalGeometry, delta: f64, lambda: f64) -> Result<f64> {
    compute_b(
        i,
        geom,
        &BoundParams {
            sigma: 0.5,
            delta,
            lambda,
            growth_l: None,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ElementwiseBound {
    /// `|theta_hat_i - theta*_i| <= bound` with the given probability.
    Applicable {
        bound: f64,
        b_quantile: f64,
        probability_raw: f64,
        probability: f64,
    },
    /// `B^quantile > L`.
    NotApplicable { b_quantile: f64, growth_l: f64 },
}

impl ElementwiseBound {
    pub fn from_b(b_quantile: f64, growth_l: f64, delta: f64) -> Self {
        if b_quantile <= growth_l {
            let raw = 1.0 - 2.0 * prob_const() * delta * delta;
            ElementwiseBound::Applicable {
                bound: b_quantile / growth_l,
                b_quantile,
                probability_raw: raw,
                probability: clamp01(raw),
            }
        } else {
            ElementwiseBound::NotApplicable { b_quantile, growth_l }
        }
    }

    pub fn bound(&self) -> Option<f64> {
        match *self {
            ElementwiseBound::Applicable { bound, .. } => Some(bound),
            ElementwiseBound::NotApplicable { .. } => None,
        }
    }
}

/// Elementwise error bound for quantile regression: `B^quantile / L` when
/// `B^quantile <= L`, holding with probability `1 - 2 c delta^2`.
pub fn elementwise_quantile_bound(
    i: usize,
    geom: &SignalGeometry,
    delta: f64,
    lambda: f64,
    growth_l: f64,
) -> Result<ElementwiseBound> {
    check_positive("growth constant L", growth_l)?;
    let b = compute_b_quantile(i, geom, delta, lambda)?;
    Ok(ElementwiseBound::from_b(b, growth_l, delta))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub signal_level: bool,
    pub conditions: Vec<Condition>,
    /// Minimum distance to a change point for an index to qualify.
    pub index_threshold: f64,
    pub per_index: Vec<bool>,
}

impl Admissibility {
    pub fn admissible_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_index
            .iter()
            .enumerate()
            .filter(|(_, &ok)| ok)
            .map(|(i, _)| i)
    }
}

/// `max(3, 12^4 / L^4, (12^2 / L^2) ln(1/delta))`.
pub fn index_threshold(delta: f64, growth_l: f64) -> f64 {
    let l2 = growth_l * growth_l;
    3f64.max(20736.0 / (l2 * l2)).max(144.0 / l2 * (1.0 / delta).ln())
}

/// Sufficient conditions for the elementwise quantile bound to apply.
pub fn admissibility(
    geom: &SignalGeometry,
    delta: f64,
    lambda: f64,
    growth_l: f64,
) -> Result<Admissibility> {
    check_positive("growth constant L", growth_l)?;
    check_delta_pointwise(delta)?;
    let l = growth_l;
    let m_min = geom.min_length() as f64;
    let l1d = (1.0 / delta).ln();
    let conditions = vec![
        Condition::le("m_min >= 36 ln(1/delta) / L^2", 36.0 / (l * l) * l1d, m_min),
        Condition::le(
            "lambda >= 6 (lnln(2 m_min) + ln(1/delta)) / L",
            6.0 * (lnln(2.0 * m_min) + l1d) / l,
            lambda,
        ),
        Condition::le("lambda <= L m_min / 12", lambda, l / 12.0 * m_min),
    ];
    let threshold = index_threshold(delta, l);
    Ok(Admissibility {
        signal_level: conditions.iter().all(|c| c.holds),
        conditions,
        index_threshold: threshold,
        per_index: geom.d.iter().map(|&d| d as f64 >= threshold).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBound {
    /// `(lnln(2n) + ln(1/delta)) / lambda + sqrt(ln(1/delta) / n)`.
    pub b_uniform: f64,
    pub applicable: bool,
    /// Half-width of the range enlargement, `b_uniform / L`, when applicable.
    pub margin: Option<f64>,
    pub probability_raw: f64,
    pub probability: f64,
    /// The simpler pair of conditions that implies applicability.
    pub sufficient_condition: bool,
}

pub fn b_uniform(n: usize, delta: f64, lambda: f64) -> f64 {
    let n = n as f64;
    let l1d = (1.0 / delta).ln();
    (lnln(2.0 * n) + l1d) / lambda + (l1d / n).sqrt()
}

/// Uniform range bound for quantile regression.
pub fn uniform_quantile_bound(n: usize, delta: f64, lambda: f64, growth_l: f64) -> Result<UniformBound> {
    check_positive("growth constant L", growth_l)?;
    check_positive("lambda", lambda)?;
    check_delta_pointwise(delta)?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let b = b_uniform(n, delta, lambda);
    let applicable = b <= growth_l;
    let l1d = (1.0 / delta).ln();
    let nf = n as f64;
    let raw = 1.0 - 2.0 * prob_const() * delta * delta;
    Ok(UniformBound {
        b_uniform: b,
        applicable,
        margin: applicable.then(|| b / growth_l),
        probability_raw: raw,
        probability: clamp01(raw),
        sufficient_condition: nf >= 4.0 / (growth_l * growth_l) * l1d
            && lambda >= 2.0 / growth_l * (lnln(2.0 * nf) + l1d),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SseTerm {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SseBound {
    pub terms: Vec<SseTerm>,
    pub total: f64,
    pub improved: bool,
    pub probability_raw: f64,
    pub probability: f64,
    /// Preconditions, all satisfied when returned from a checked call.
    pub conditions: Vec<Condition>,
}

impl SseBound {
    fn new(terms: Vec<SseTerm>, improved: bool, delta: f64, conditions: Vec<Condition>) -> Self {
        let total = terms.iter().map(|t| t.value).sum();
        let raw = 1.0 - 4.0 * prob_const() * delta;
        Self {
            terms,
            total,
            improved,
            probability_raw: raw,
            probability: clamp01(raw),
            conditions,
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// `sum_k 1/m_k` over all segments, or over direction-change segments.
fn inv_length_sum(geom: &SignalGeometry, improved: bool) -> f64 {
    if improved {
        geom.direction_change_segments()
            .into_iter()
            .map(|k| 1.0 / geom.lengths[k] as f64)
            .sum()
    } else {
        geom.lengths.iter().map(|&m| 1.0 / m as f64).sum()
    }
}

/// `K + sum_k ln(m_k / 2)`.
fn log_length_sum(geom: &SignalGeometry) -> f64 {
    geom.num_segments() as f64 + geom.lengths.iter().map(|&m| (m as f64 / 2.0).ln()).sum::<f64>()
}

pub const SSE_DELTA_MAX_QUANTILE: f64 = DELTA_MAX * DELTA_MAX;

/// Preconditions of the quantile sum-of-squares bound.
pub fn sse_quantile_conditions(geom: &SignalGeometry, delta: f64, lambda: f64, growth_l: f64) -> Vec<Condition> {
    let l = growth_l;
    let n = geom.n() as f64;
    let m_min = geom.min_length() as f64;
    let lnd = (n / delta).ln();
    vec![
        Condition::le("m_min >= 18 ln(n/delta) / L^2", 18.0 / (l * l) * lnd, m_min),
        Condition::le(
            "lambda >= 3 (2 lnln(2n) + ln(n/delta)) / L",
            3.0 * (2.0 * lnln(2.0 * n) + lnd) / l,
            lambda,
        ),
        Condition::le("lambda <= L m_min / 12", lambda, l / 12.0 * m_min),
    ]
}

/// The five terms of the quantile bound, without enforcing preconditions.
pub fn sse_bound_quantile_unchecked(
    geom: &SignalGeometry,
    delta: f64,
    lambda: f64,
    growth_l: f64,
    v: f64,
    improved: bool,
) -> SseBound {
    let l2 = growth_l * growth_l;
    let n = geom.n() as f64;
    let kk = geom.num_segments() as f64;
    let lnd = (n / delta).ln();
    let ll = lnln(2.0 * n);
    let lambda_sq = if improved {
        144.0 * lambda * lambda / l2 * inv_length_sum(geom, true)
    } else {
        24.0 * lambda * lambda / l2 * inv_length_sum(geom, false)
    };
    let terms = vec![
        SseTerm {
            name: "local",
            value: 24.0 / l2 * (2.0 * ll + lnd) * log_length_sum(geom),
        },
        SseTerm {
            name: "penalty",
            value: 3.0 * n / l2 * (4.0 * (ll * ll + lnd * lnd) / (lambda * lambda)),
        },
        SseTerm {
            name: "segment_count",
            value: 6.0 * kk / l2 * lnd,
        },
        SseTerm {
            name: "lambda_squared",
            value: lambda_sq,
        },
        SseTerm {
            name: "near_change_points",
            value: 2.0
                * kk
                * 3f64
                    .max(20736.0 / (l2 * l2))
                    .max(144.0 / (2.0 * l2) * lnd)
                * v
                * v,
        },
    ];
    SseBound::new(terms, improved, delta, sse_quantile_conditions(geom, delta, lambda, growth_l))
}

/// Sum-of-squares bound for quantile regression.
///
/// Fails with [`Error::Precondition`] listing the violated inequalities.
pub fn sse_bound_quantile(
    geom: &SignalGeometry,
    delta: f64,
    lambda: f64,
    growth_l: f64,
    v: f64,
    improved: bool,
) -> Result<SseBound> {
    check_positive("growth constant L", growth_l)?;
    check_positive("lambda", lambda)?;
    check_delta(delta, SSE_DELTA_MAX_QUANTILE, "the quantile sum-of-squares bound")?;
    let b = sse_bound_quantile_unchecked(geom, delta, lambda, growth_l, v, improved);
    let failed: Vec<Condition> = b.conditions.iter().filter(|c| !c.holds).cloned().collect();
    if failed.is_empty() {
        Ok(b)
    } else {
        Err(Error::Precondition(Diagnosis(failed)))
    }
}

/// Sum-of-squares bound for mean regression; `delta` must lie in
/// `(0, n (ln 2 / e)^2)`.
pub fn sse_bound_mean(
    geom: &SignalGeometry,
    delta: f64,
    lambda: f64,
    sigma: f64,
    improved: bool,
) -> Result<SseBound> {
    check_positive("lambda", lambda)?;
    check_positive("sigma", sigma)?;
    let n = geom.n() as f64;
    check_delta(delta, n * SSE_DELTA_MAX_QUANTILE, "the mean sum-of-squares bound")?;
    let s2 = sigma * sigma;
    let kk = geom.num_segments() as f64;
    let lnd = (n / delta).ln();
    let ll = lnln(2.0 * n);
    let lambda_sq = if improved {
        144.0 * lambda * lambda * inv_length_sum(geom, true)
    } else {
        24.0 * lambda * lambda * inv_length_sum(geom, false)
    };
    let terms = vec![
        SseTerm {
            name: "local",
            value: 192.0 * s2 * (ll + 0.5 * lnd) * log_length_sum(geom),
        },
        SseTerm {
            name: "penalty",
            value: 24.0 * n * s2 * s2 * ((ll * ll + 0.25 * lnd * lnd) / (lambda * lambda)),
        },
        SseTerm {
            name: "segment_count",
            value: 12.0 * kk * s2 * lnd,
        },
        SseTerm {
            name: "lambda_squared",
            value: lambda_sq,
        },
    ];
    Ok(SseBound::new(terms, improved, delta, Vec::new()))
}

/// `(sum_j m_j / (m_j + ... + m_K)^2, 3 / m_K)`.
pub fn iterative_sum_check(m: &[f64]) -> Result<(f64, f64)> {
    if m.is_empty() || m.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("lengths must be positive and finite".into()));
    }
    let mut tail = 0.0;
    let mut lhs = 0.0;
    for &mj in m.iter().rev() {
        tail += mj;
        lhs += mj / (tail * tail);
    }
    Ok((lhs, 3.0 / m[m.len() - 1]))
}

/// How the tuning parameter is chosen from the signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaRule {
    Fixed { value: f64 },
    /// `sqrt(n / K)`.
    SqrtNOverK,
    /// `ln(n) sqrt(n / K)`.
    LogNSqrtNOverK,
}

impl LambdaRule {
    pub fn resolve(&self, n: usize, k: usize) -> f64 {
        let base = (n as f64 / k as f64).sqrt();
        match *self {
            LambdaRule::Fixed { value } => value,
            LambdaRule::SqrtNOverK => base,
            LambdaRule::LogNSqrtNOverK => (n as f64).ln() * base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexBound {
    pub i: usize,
    pub k: usize,
    pub d: usize,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "B_improved")]
    pub b_improved: f64,
    #[serde(rename = "B_quantile")]
    pub b_quantile: f64,
    /// Elementwise quantile bound applies (only when `L` is known).
    pub applicable: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Failed(Vec<Condition>),
    Error(String),
}

impl<T> Outcome<T> {
    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(Error::Precondition(Diagnosis(c))) => Outcome::Failed(c),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub params: BoundParams,
    pub n: usize,
    pub num_segments: usize,
    pub m_min: usize,
    pub v: f64,
    pub prob_const: f64,
    /// `c delta^2`, the failure bound of each one-sided pointwise event.
    pub pointwise_failure_raw: f64,
    pub pointwise_probability: f64,
    pub indices: Vec<IndexBound>,
    pub admissibility: Option<Admissibility>,
    pub uniform: Option<UniformBound>,
    pub sse_quantile: Option<Outcome<SseBound>>,
    pub sse_quantile_improved: Option<Outcome<SseBound>>,
    pub sse_mean: Outcome<SseBound>,
    pub sse_mean_improved: Outcome<SseBound>,
}

/// Evaluates every bound for one signal geometry.
///
/// The sum-of-squares bounds are evaluated at the same `delta`.
pub fn bound_report(geom: &SignalGeometry, params: &BoundParams) -> Result<BoundReport> {
    params.validate()?;
    let n = geom.n();
    let c = prob_const();
    let adm = params
        .growth_l
        .map(|l| admissibility(geom, params.delta, params.lambda, l))
        .transpose()?;
    let mut indices = Vec::with_capacity(n);
    for i in 0..n {
        let b_quantile = compute_b_quantile(i, geom, params.delta, params.lambda)?;
        indices.push(IndexBound {
            i: i + 1,
            k: geom.k_of[i] + 1,
            d: geom.d[i],
            b: compute_b(i, geom, params)?,
            b_improved: compute_b_improved(i, geom, params)?,
            b_quantile,
            applicable: params.growth_l.map(|l| b_quantile <= l),
        });
    }
    let uniform = params
        .growth_l
        .map(|l| uniform_quantile_bound(n, params.delta, params.lambda, l))
        .transpose()?;
    let sse_q = |improved| {
        params.growth_l.map(|l| {
            Outcome::from_result(sse_bound_quantile(
                geom,
                params.delta,
                params.lambda,
                l,
                geom.range,
                improved,
            ))
        })
    };
    Ok(BoundReport {
        params: *params,
        n,
        num_segments: geom.num_segments(),
        m_min: geom.min_length(),
        v: geom.range,
        prob_const: c,
        pointwise_failure_raw: c * params.delta * params.delta,
        pointwise_probability: clamp01(1.0 - c * params.delta * params.delta),
        indices,
        admissibility: adm,
        uniform,
        sse_quantile: sse_q(false),
        sse_quantile_improved: sse_q(true),
        sse_mean: Outcome::from_result(sse_bound_mean(geom, params.delta, params.lambda, params.sigma, false)),
        sse_mean_improved: Outcome::from_result(sse_bound_mean(
            geom,
            params.delta,
            params.lambda,
            params.sigma,
            true,
        )),
    })
}
