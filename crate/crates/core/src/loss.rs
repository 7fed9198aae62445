//! Convex per-observation losses with one-sided derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::message::{Affine, Message};

/// A convex loss `rho` with left and right derivatives.
///
/// Both derivative evaluators must be nondecreasing with
/// `deriv_minus(x) <= deriv_plus(x)`.
pub trait ConvexLoss {
    fn rho(&self, x: f64) -> f64;
    fn deriv_minus(&self, x: f64) -> f64;
    fn deriv_plus(&self, x: f64) -> f64;
}

/// A loss whose data term `theta -> rho(y - theta)` has a piecewise-affine
/// derivative, which is what the exact dynamic program propagates.
///
/// Implementors add the derivative of the data term to a message: an affine
/// part valid left of every breakpoint plus one increment per breakpoint.
pub trait PiecewiseLoss: ConvexLoss {
    fn add_data_term(&self, y: f64, msg: &mut Message);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LossModel {
    /// `rho(x) = x^2 / 2`.
    Square,
    /// Check loss at level `tau`: `tau x` for `x >= 0`, `(tau - 1) x` otherwise.
    Quantile { tau: f64 },
}

impl LossModel {
    pub fn quantile(tau: f64) -> Result<Self> {
        let loss = LossModel::Quantile { tau };
        loss.validate()?;
        Ok(loss)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossModel::Square => Ok(()),
            LossModel::Quantile { tau } if tau > 0.0 && tau < 1.0 => Ok(()),
            LossModel::Quantile { tau } => Err(Error::InvalidInput(format!(
                "quantile level tau = {tau} must lie in (0, 1)"
            ))),
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match *self {
            LossModel::Square => None,
            LossModel::Quantile { tau } => Some(tau),
        }
    }

    /// `argmin_t sum_i rho(y_i - t)`: the mean, or the smallest `tau`-quantile
    /// minimizer.
    pub fn constant_fit(&self, y: &[f64]) -> f64 {
        match *self {
            LossModel::Square => y.iter().sum::<f64>() / y.len() as f64,
            LossModel::Quantile { tau } => {
                let mut sorted = y.to_vec();
                sorted.sort_by(f64::total_cmp);
                // Smallest t whose right derivative (1-tau)#{y <= t} - tau #{y > t} is >= 0.
                let n = sorted.len() as f64;
                for (j, &v) in sorted.iter().enumerate() {
                    let at_or_below = (j + 1) as f64;
                    if (1.0 - tau) * at_or_below - tau * (n - at_or_below) >= -1e-12 {
                        return v;
                    }
                }
                *sorted.last().expect("non-empty")
            }
        }
    }
}

impl ConvexLoss for LossModel {
    fn rho(&self, x: f64) -> f64 {
        match *self {
            LossModel::Square => 0.5 * x * x,
            LossModel::Quantile { tau } => {
                if x >= 0.0 {
                    tau * x
                } else {
                    (tau - 1.0) * x
                }
            }
        }
    }

    fn deriv_minus(&self, x: f64) -> f64 {
        match *self {
            LossModel::Square => x,
            LossModel::Quantile { tau } => {
                if x > 0.0 {
                    tau
                } else {
                    tau - 1.0
                }
            }
        }
    }

    fn deriv_plus(&self, x: f64) -> f64 {
        match *self {
            LossModel::Square => x,
            LossModel::Quantile { tau } => {
                if x >= 0.0 {
                    tau
                } else {
                    tau - 1.0
                }
            }
        }
    }
}

impl PiecewiseLoss for LossModel {
    fn add_data_term(&self, y: f64, msg: &mut Message) {
        match *self {
            // d/dtheta (y - theta)^2 / 2 = theta - y
            LossModel::Square => msg.add_affine(Affine::new(1.0, -y)),
            // -tau left of y, 1 - tau right of y
            LossModel::Quantile { tau } => {
                msg.add_affine(Affine::new(0.0, -tau));
                msg.add_knot(y, Affine::new(0.0, 1.0));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_derivatives_match_definition() {
        let q = LossModel::Quantile { tau: 0.3 };
        assert_eq!(q.deriv_plus(0.0), 0.3);
        assert_eq!(q.deriv_minus(0.0), -0.7);
        assert_eq!(q.deriv_plus(-1e-9), -0.7);
        assert_eq!(q.deriv_minus(1e-9), 0.3);
        assert_eq!(q.rho(2.0), 0.6);
        assert!((q.rho(-2.0) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn one_sided_derivatives_ordered_and_monotone() {
        let losses = [LossModel::Square, LossModel::Quantile { tau: 0.5 }, LossModel::Quantile { tau: 0.9 }];
        let grid: Vec<f64> = (-40..=40).map(|j| j as f64 * 0.05).collect();
        for loss in losses {
            for w in grid.windows(2) {
                assert!(loss.deriv_minus(w[0]) <= loss.deriv_plus(w[0]));
                assert!(loss.deriv_plus(w[0]) <= loss.deriv_plus(w[1]));
                assert!(loss.deriv_minus(w[0]) <= loss.deriv_minus(w[1]));
                // Convexity through the chord.
                let mid = 0.5 * (w[0] + w[1]);
                assert!(loss.rho(mid) <= 0.5 * (loss.rho(w[0]) + loss.rho(w[1])) + 1e-15);
            }
        }
    }

    #[test]
    fn tau_validation() {
        assert!(LossModel::quantile(0.0).is_err());
        assert!(LossModel::quantile(1.0).is_err());
        assert!(LossModel::quantile(0.25).is_ok());
    }

    #[test]
    fn constant_fit_is_minimizer() {
        let y = [3.0, -1.0, 0.5, 7.0, 2.0];
        assert_eq!(LossModel::Square.constant_fit(&y), 2.3);
        assert_eq!(LossModel::Quantile { tau: 0.5 }.constant_fit(&y), 2.0);
        assert_eq!(LossModel::Quantile { tau: 0.1 }.constant_fit(&y), -1.0);
        let q = LossModel::Quantile { tau: 0.7 };
        let t = q.constant_fit(&y);
        let obj = |c: f64| y.iter().map(|&v| q.rho(v - c)).sum::<f64>();
        for j in -100..100 {
            assert!(obj(t) <= obj(j as f64 * 0.1) + 1e-12);
        }
    }

    #[test]
    fn serde_shape() {
        let q: LossModel = serde_json::from_str(r#"{"kind":"quantile","tau":0.5}"#).unwrap();
        assert_eq!(q, LossModel::Quantile { tau: 0.5 });
        let s: LossModel = serde_json::from_str(r#"{"kind":"square"}"#).unwrap();
        assert_eq!(s, LossModel::Square);
    }
}
