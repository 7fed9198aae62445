//! Seeded Monte Carlo experiments that compare empirical error frequencies
//! with the closed-form bounds.
//!
//! A run is fully determined by its [`ExperimentSpec`]: replication `r`
//! draws its noise from the stream `stream_seed(seed, r)`, so results do not
//! depend on the thread count.

pub mod output;
pub mod run;
pub mod spec;

use std::path::Path;

pub use output::{config_hash, csv_header, write_atomic, Table, TOOL};
pub use run::{
    log_log_slope, run, run_elementwise_quantile, run_lambda_sweep, run_pointwise, run_rate_sweep,
    run_sse, Check, ExperimentResult, IndexStats, RateThresholds,
};
pub use spec::{ExperimentKind, ExperimentSpec, IndexSet, SignalSpec};

use crate::error::Result;
use output::{num, opt};

/// Writes `summary.json` and the CSV tables that apply to the result.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    let hash = &result.config_hash;
    let mut json = serde_json::to_string_pretty(result).expect("result serializes");
    json.push('\n');
    write_atomic(&dir.join("summary.json"), json.as_bytes())?;

    if !result.indices.is_empty() {
        let mut t = Table::new(&["i", "k", "d", "median_err", "q90_err", "B", "freq_event"]);
        for s in &result.indices {
            t.push(vec![
                s.i.to_string(),
                s.k.to_string(),
                s.d.to_string(),
                num(s.median_err),
                num(s.q90_err),
                num(s.bound),
                num(s.freq_event),
            ]);
        }
        t.write(&dir.join("per_index.csv"), hash)?;
    }
    if let Some(sse) = &result.sse {
        let mut t = Table::new(&["replication", "sse", "bound", "bound_improved", "exceeds", "exceeds_improved"]);
        for (r, &s) in sse.samples.iter().enumerate() {
            t.push(vec![
                r.to_string(),
                num(s),
                num(sse.bound.total),
                num(sse.bound_improved.total),
                u8::from(s > sse.bound.total).to_string(),
                u8::from(s > sse.bound_improved.total).to_string(),
            ]);
        }
        t.write(&dir.join("sse.csv"), hash)?;
    }
    if let Some(rate) = &result.rate {
        if !rate.distances.is_empty() {
            let mut t = Table::new(&["d", "median_err", "q90_err", "baseline_median"]);
            for p in &rate.distances {
                t.push(vec![p.d.to_string(), num(p.median_err), num(p.q90_err), num(p.baseline_median)]);
            }
            t.write(&dir.join("plotdata_rate_d.csv"), hash)?;
        }
        if !rate.sizes.is_empty() {
            let mut t = Table::new(&["n", "lambda", "change_point_median", "interior_index", "interior_median"]);
            for p in &rate.sizes {
                t.push(vec![
                    p.n.to_string(),
                    num(p.lambda),
                    num(p.change_point_median),
                    p.interior_index.to_string(),
                    num(p.interior_median),
                ]);
            }
            t.write(&dir.join("plotdata_rate_n.csv"), hash)?;
        }
    }
    if let Some(sweep) = &result.lambda_sweep {
        let mut t = Table::new(&["factor", "lambda", "mean_sse", "median_sse", "bound"]);
        for p in &sweep.points {
            t.push(vec![num(p.factor), num(p.lambda), num(p.mean_sse), num(p.median_sse), num(p.bound)]);
        }
        t.write(&dir.join("plotdata_lambda.csv"), hash)?;
    }
    let mut t = Table::new(&["check", "observed", "bound", "slack", "vacuous", "guaranteed", "passed"]);
    for c in &result.checks {
        t.push(vec![
            c.name.clone(),
            num(c.observed),
            opt(c.bound.is_finite().then_some(c.bound)),
            num(c.slack),
            c.vacuous.to_string(),
            c.guaranteed.to_string(),
            c.passed.to_string(),
        ]);
    }
    t.write(&dir.join("checks.csv"), hash)
}
