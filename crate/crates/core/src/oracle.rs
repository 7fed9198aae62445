//! Grid brute force for tiny problems, used to cross-check the solver.
//!
//! Every coordinate ranges over the grid `min y - 1, min y - 1 + h, ...,
//! max y + 1`. The minimum over all `grid^n` candidates is computed exactly
//! by min-plus dynamic programming; the edge step uses the L1 distance
//! transform, which is exact on a uniform grid.

use crate::error::{Error, Result};
use crate::loss::ConvexLoss;
use crate::solver::FusedLassoProblem;

pub const ORACLE_MAX_N: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub grid_step: f64,
}

pub fn oracle_solve(problem: &FusedLassoProblem, h: f64) -> Result<OracleSolution> {
    oracle_grid(&problem.y, problem.lambda, &problem.loss, None, h)
}

/// Same grid search for the objective with `lambda (|theta_1 - a| + |theta_m - b|)` added.
pub fn oracle_solve_augmented<L: ConvexLoss>(
    y: &[f64],
    lambda: f64,
    a: f64,
    b: f64,
    loss: &L,
    h: f64,
) -> Result<OracleSolution> {
    oracle_grid(y, lambda, loss, Some((a, b)), h)
}

fn oracle_grid<L: ConvexLoss>(
    y: &[f64],
    lambda: f64,
    loss: &L,
    anchors: Option<(f64, f64)>,
    h: f64,
) -> Result<OracleSolution> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidInput("data vector is empty".into()));
    }
    if n > ORACLE_MAX_N {
        return Err(Error::OracleTooLarge { n, max: ORACLE_MAX_N });
    }
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidInput(format!("grid step {h} must be positive")));
    }
    let mut lo = y.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    if let Some((a, b)) = anchors {
        lo = lo.min(a.min(b));
        hi = hi.max(a.max(b));
    }
    let size = ((hi - lo) / h).ceil() as usize + 1;
    let grid: Vec<f64> = (0..size).map(|g| lo + g as f64 * h).collect();
    let step = lambda * h;

    let mut values: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v: Vec<f64> = grid.iter().map(|&g| loss.rho(y[0] - g)).collect();
    if let Some((a, _)) = anchors {
        for (vi, &g) in v.iter_mut().zip(&grid) {
            *vi += lambda * (g - a).abs();
        }
    }
    for &yi in &y[1..] {
        values.push(v.clone());
        // W(g) = min_g' V(g') + lambda |g - g'|.
        for g in 1..size {
            v[g] = v[g].min(v[g - 1] + step);
        }
        for g in (0..size - 1).rev() {
            v[g] = v[g].min(v[g + 1] + step);
        }
        for (vi, &g) in v.iter_mut().zip(&grid) {
            *vi += loss.rho(yi - g);
        }
    }
    if let Some((_, b)) = anchors {
        for (vi, &g) in v.iter_mut().zip(&grid) {
            *vi += lambda * (g - b).abs();
        }
    }
    values.push(v);

    let mut idx = vec![0usize; n];
    idx[n - 1] = argmin(values[n - 1].iter().copied());
    for i in (0..n - 1).rev() {
        let next = idx[i + 1] as f64;
        idx[i] = argmin(
            values[i]
                .iter()
                .enumerate()
                .map(|(g, &val)| val + step * (g as f64 - next).abs()),
        );
    }
    let theta: Vec<f64> = idx.iter().map(|&g| grid[g]).collect();
    let mut objective = crate::solver::objective(y, lambda, loss, &theta);
    if let Some((a, b)) = anchors {
        objective += lambda * ((theta[0] - a).abs() + (theta[n - 1] - b).abs());
    }
    Ok(OracleSolution {
        theta,
        objective,
        grid_step: h,
    })
}

fn argmin(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, v) in it.enumerate() {
        if v < best.1 {
            best = (j, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossModel;
    use crate::solver::objective;

    /// Plain double loop over the grid, no distance transform.
    fn naive_two(y: [f64; 2], lambda: f64, loss: &LossModel, h: f64) -> f64 {
        let lo = y[0].min(y[1]) - 1.0;
        let size = ((y[0].max(y[1]) + 1.0 - lo) / h).ceil() as usize + 1;
        let mut best = f64::INFINITY;
        for p in 0..size {
            for q in 0..size {
                let t = [lo + p as f64 * h, lo + q as f64 * h];
                best = best.min(objective(&y, lambda, loss, &t));
            }
        }
        best
    }

    #[test]
    fn matches_double_loop() {
        let cases = [([0.0, 1.0], 0.1), ([0.3, -0.4], 0.5), ([2.0, 2.5], 0.0)];
        for loss in [LossModel::Square, LossModel::Quantile { tau: 0.5 }, LossModel::Quantile { tau: 0.2 }] {
            for (y, lambda) in cases {
                let p = FusedLassoProblem { y: y.to_vec(), lambda, loss };
                let o = oracle_solve(&p, 1e-2).unwrap();
                let naive = naive_two(y, lambda, &loss, 1e-2);
                assert!((o.objective - naive).abs() < 1e-9, "{loss:?} {y:?}: {} vs {naive}", o.objective);
            }
        }
    }

    #[test]
    fn single_point_is_data() {
        for loss in [LossModel::Square, LossModel::Quantile { tau: 0.9 }] {
            let p = FusedLassoProblem { y: vec![1.5], lambda: 1.0, loss };
            let o = oracle_solve(&p, 1e-3).unwrap();
            assert!((o.theta[0] - 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn refuses_large_n() {
        let p = FusedLassoProblem { y: vec![0.0; 5], lambda: 1.0, loss: LossModel::Square };
        assert!(matches!(oracle_solve(&p, 1e-3), Err(Error::OracleTooLarge { n: 5, .. })));
    }

    #[test]
    fn known_instance() {
        let p = FusedLassoProblem { y: vec![0.0, 0.0, 10.0], lambda: 1.0, loss: LossModel::Square };
        let o = oracle_solve(&p, 1e-3).unwrap();
        for (t, e) in o.theta.iter().zip([0.5, 0.5, 9.0]) {
            assert!((t - e).abs() < 2e-3, "{:?}", o.theta);
        }
    }
}
