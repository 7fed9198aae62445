//! Exact minimization of
//!
//! ```text
//! sum_i rho(y_i - theta_i) + lambda * sum_i |theta_{i+1} - theta_i|
//! ```
//!
//! by dynamic programming over the chain. The forward pass carries the
//! derivative of the partial value function (a [`Message`]) and clips it to
//! `[-lambda, lambda]` at every edge; the backward pass clamps each
//! coordinate into the interval recorded during clipping. For the square
//! loss the messages are piecewise quadratic, for the check loss piecewise
//! linear, and in both cases the result is an exact global minimizer up to
//! floating-point rounding.
//!
//! When the minimizer is not unique (check loss), the backward pass picks the
//! smallest optimal value at every step.

pub mod kkt;
pub mod message;

use serde::{Deserialize, Serialize};

pub use kkt::{check_kkt, check_kkt_augmented, KktCertificate};
pub use message::{Affine, Message};

use crate::error::{Error, Result};
use crate::loss::{ConvexLoss, LossModel, PiecewiseLoss};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedLassoProblem {
    pub y: Vec<f64>,
    pub lambda: f64,
    pub loss: LossModel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusedLassoSolution {
    pub theta_hat: Vec<f64>,
    /// Edge duals, length `n - 1`.
    pub dual_z: Vec<f64>,
    pub kkt_residual: f64,
    pub objective_value: f64,
}

impl FusedLassoProblem {
    pub fn new(y: Vec<f64>, lambda: f64, loss: LossModel) -> Result<Self> {
        let p = Self { y, lambda, loss };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        validate_inputs(&self.y, self.lambda)?;
        self.loss.validate()
    }

    pub fn objective(&self, theta: &[f64]) -> f64 {
        objective(&self.y, self.lambda, &self.loss, theta)
    }

    pub fn solve(&self) -> Result<FusedLassoSolution> {
        solve(self)
    }
}

/// Solves the problem and certifies the result with a dual vector.
pub fn solve(problem: &FusedLassoProblem) -> Result<FusedLassoSolution> {
    problem.loss.validate()?;
    let theta_hat = solve_theta(&problem.y, problem.lambda, &problem.loss)?;
    let cert = check_kkt(problem, &theta_hat);
    Ok(FusedLassoSolution {
        objective_value: problem.objective(&theta_hat),
        kkt_residual: cert.residual,
        dual_z: cert.dual_z,
        theta_hat,
    })
}

/// Minimizer of the fused lasso objective without the certificate.
pub fn solve_theta<L: PiecewiseLoss>(y: &[f64], lambda: f64, loss: &L) -> Result<Vec<f64>> {
    validate_inputs(y, lambda)?;
    Ok(run_chain(y, lambda, loss, None))
}

/// Minimizer of
/// `sum rho(y_i - theta_i) + lambda (|theta_1 - a| + |theta_m - b| + TV(theta))`.
///
/// The two boundary terms enter as the first and last messages; the chain
/// length is unchanged.
pub fn solve_augmented<L: PiecewiseLoss>(
    y: &[f64],
    lambda: f64,
    a: f64,
    b: f64,
    loss: &L,
) -> Result<Vec<f64>> {
    validate_inputs(y, lambda)?;
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInput("boundary anchors must be finite".into()));
    }
    Ok(run_chain(y, lambda, loss, Some((a, b))))
}

pub fn objective<L: ConvexLoss>(y: &[f64], lambda: f64, loss: &L, theta: &[f64]) -> f64 {
    let fit: f64 = y.iter().zip(theta).map(|(&yi, &ti)| loss.rho(yi - ti)).sum();
    fit + lambda * total_variation(theta)
}

pub fn objective_augmented<L: ConvexLoss>(
    y: &[f64],
    lambda: f64,
    a: f64,
    b: f64,
    loss: &L,
    theta: &[f64],
) -> f64 {
    let ends = (theta[0] - a).abs() + (theta[theta.len() - 1] - b).abs();
    objective(y, lambda, loss, theta) + lambda * ends
}

pub fn total_variation(theta: &[f64]) -> f64 {
    theta.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

fn validate_inputs(y: &[f64], lambda: f64) -> Result<()> {
    if y.is_empty() {
        return Err(Error::InvalidInput("data vector is empty".into()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("y[{i}] is not finite")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda = {lambda} must be finite and nonnegative"
        )));
    }
    Ok(())
}

fn run_chain<L: PiecewiseLoss>(
    y: &[f64],
    lambda: f64,
    loss: &L,
    anchors: Option<(f64, f64)>,
) -> Vec<f64> {
    let n = y.len();
    let mut msg = Message::new();
    // Clamp interval for theta_i given theta_{i+1}.
    let mut lo = vec![0.0; n.saturating_sub(1)];
    let mut hi = vec![0.0; n.saturating_sub(1)];

    if let Some((a, _)) = anchors {
        msg.add_abs(a, lambda);
    }
    for i in 0..n {
        loss.add_data_term(y[i], &mut msg);
        if i + 1 == n {
            break;
        }
        if lambda == 0.0 {
            let x = msg.argmin();
            lo[i] = x;
            hi[i] = x;
            msg.clear();
        } else {
            lo[i] = msg.clip_below(lambda);
            hi[i] = msg.clip_above(lambda);
        }
    }
    if let Some((_, b)) = anchors {
        msg.add_abs(b, lambda);
    }

    let mut theta = vec![0.0; n];
    theta[n - 1] = msg.argmin();
    for i in (0..n - 1).rev() {
        theta[i] = theta[i + 1].clamp(lo[i], hi[i]);
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn known_square_instance() {
        let p = FusedLassoProblem::new(vec![0.0, 0.0, 10.0], 1.0, LossModel::Square).unwrap();
        let s = p.solve().unwrap();
        assert!(close(&s.theta_hat, &[0.5, 0.5, 9.0], 1e-12), "{:?}", s.theta_hat);
        assert!(s.kkt_residual <= 1e-12);
        // Hand KKT: z_1 = 0.5, z_2 = 1 = lambda on the jump edge.
        assert!(close(&s.dual_z, &[0.5, 1.0], 1e-12), "{:?}", s.dual_z);
        assert!((s.objective_value - (0.25 + 0.5 + 8.5)).abs() < 1e-12);
    }

    #[test]
    fn known_quantile_instance() {
        let loss = LossModel::Quantile { tau: 0.5 };
        let p = FusedLassoProblem::new(vec![0.0, 0.0, 10.0], 1.0, loss).unwrap();
        let s = p.solve().unwrap();
        assert_eq!(s.theta_hat, vec![0.0, 0.0, 0.0]);
        assert!(s.kkt_residual <= 1e-12);
        assert_eq!(s.objective_value, 5.0);
    }

    #[test]
    fn zero_lambda_returns_data() {
        let y = vec![1.5, -2.0, 0.25, 9.0];
        assert_eq!(solve_theta(&y, 0.0, &LossModel::Square).unwrap(), y);
        assert_eq!(solve_theta(&y, 0.0, &LossModel::Quantile { tau: 0.3 }).unwrap(), y);
        let p = FusedLassoProblem::new(y.clone(), 0.0, LossModel::Square).unwrap();
        assert_eq!(p.solve().unwrap().kkt_residual, 0.0);
    }

    #[test]
    fn constant_data_is_fixed_point() {
        let y = vec![2.75; 6];
        for loss in [LossModel::Square, LossModel::Quantile { tau: 0.8 }] {
            for lambda in [0.0, 0.3, 100.0] {
                assert_eq!(solve_theta(&y, lambda, &loss).unwrap(), y);
            }
        }
    }

    #[test]
    fn single_point() {
        assert_eq!(solve_theta(&[3.5], 2.0, &LossModel::Square).unwrap(), vec![3.5]);
        assert_eq!(
            solve_theta(&[3.5], 2.0, &LossModel::Quantile { tau: 0.1 }).unwrap(),
            vec![3.5]
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_theta(&[], 1.0, &LossModel::Square).is_err());
        assert!(solve_theta(&[1.0, f64::NAN], 1.0, &LossModel::Square).is_err());
        assert!(solve_theta(&[1.0], -1.0, &LossModel::Square).is_err());
        assert!(solve_theta(&[1.0], f64::INFINITY, &LossModel::Square).is_err());
        assert!(solve_augmented(&[1.0], 1.0, f64::NAN, 0.0, &LossModel::Square).is_err());
        assert!(FusedLassoProblem::new(vec![1.0], 1.0, LossModel::Quantile { tau: 1.5 }).is_err());
    }

    #[test]
    fn augmented_examples() {
        // Soft threshold: min theta^2/2 - 5 theta + 2e6 |theta| -> 0.
        let t = solve_augmented(&[5.0], 1e6, 0.0, 0.0, &LossModel::Square).unwrap();
        assert!(t[0].abs() <= 5e-6, "{t:?}");
        let y = [0.3, -1.2, 4.0];
        assert_eq!(solve_augmented(&y, 0.0, 7.0, -7.0, &LossModel::Square).unwrap(), y);
        let t = solve_augmented(&[0.0, 0.0, 10.0], 1.0, 0.5, 9.0, &LossModel::Square).unwrap();
        assert!(close(&t, &[0.5, 0.5, 9.0], 1e-12), "{t:?}");
        // (x-1)^2/2 + 2 lambda |x-3|: x = min(3, 1 + 2 lambda).
        let t = solve_augmented(&[1.0], 1.0, 3.0, 3.0, &LossModel::Square).unwrap();
        assert!((t[0] - 3.0).abs() < 1e-12);
        let t = solve_augmented(&[1.0], 0.5, 3.0, 3.0, &LossModel::Square).unwrap();
        assert!((t[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn large_lambda_collapses_to_constant_fit() {
        let y = vec![0.4, -1.0, 2.0, 3.5, 0.0];
        for loss in [LossModel::Square, LossModel::Quantile { tau: 0.3 }] {
            let t = solve_theta(&y, 1e3, &loss).unwrap();
            let c = loss.constant_fit(&y);
            assert!(t.iter().all(|&v| (v - c).abs() < 1e-9), "{loss:?}: {t:?} vs {c}");
        }
    }
}
