//! Optimality certificates.
//!
//! `theta` minimizes the objective iff there are edge duals `z_1..z_{n-1}`
//! with `|z_i| <= lambda`, `z_i = lambda sign(theta_{i+1} - theta_i)` on
//! every jump, and for each point
//!
//! ```text
//! 0 in [-rho'_+(y_i - theta_i), -rho'_-(y_i - theta_i)] + z_{i-1} - z_i
//! ```
//!
//! with `z_0 = z_n = 0`. The check sweeps left to right keeping the whole
//! interval of feasible `z_i`, so it is exact for set-valued subgradients;
//! a violated step records the gap and continues from the nearest point.

use serde::Serialize;

use super::FusedLassoProblem;
use crate::loss::ConvexLoss;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktCertificate {
    /// Largest stationarity or dual-feasibility gap encountered.
    pub residual: f64,
    /// One admissible dual vector (exact when `residual == 0`).
    pub dual_z: Vec<f64>,
    /// Index of the point where the largest gap occurred.
    pub worst_index: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    fn shift(self, by: Interval) -> Self {
        Self {
            lo: self.lo + by.lo,
            hi: self.hi + by.hi,
        }
    }

    /// Intersection, or the point of `self` nearest to `other` with the gap.
    fn meet(self, other: Interval) -> (Interval, f64) {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            (Interval { lo, hi }, 0.0)
        } else if other.hi < self.lo {
            (Interval::point(self.lo), self.lo - other.hi)
        } else {
            (Interval::point(self.hi), other.lo - self.hi)
        }
    }

    fn nearest(self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// Admissible values of `lambda * sign(delta)`.
fn sign_set(delta: f64, lambda: f64) -> Interval {
    if delta > 0.0 {
        Interval::point(lambda)
    } else if delta < 0.0 {
        Interval::point(-lambda)
    } else {
        Interval { lo: -lambda, hi: lambda }
    }
}

pub fn check_kkt(problem: &FusedLassoProblem, theta: &[f64]) -> KktCertificate {
    certify(&problem.y, problem.lambda, &problem.loss, theta, None)
}

/// Certificate for the problem with the extra terms
/// `lambda (|theta_1 - a| + |theta_m - b|)`.
pub fn check_kkt_augmented<L: ConvexLoss>(
    y: &[f64],
    lambda: f64,
    a: f64,
    b: f64,
    loss: &L,
    theta: &[f64],
) -> KktCertificate {
    certify(y, lambda, loss, theta, Some((a, b)))
}

fn certify<L: ConvexLoss>(
    y: &[f64],
    lambda: f64,
    loss: &L,
    theta: &[f64],
    anchors: Option<(f64, f64)>,
) -> KktCertificate {
    let n = y.len();
    assert_eq!(theta.len(), n, "theta and y lengths differ");

    // Stationarity contribution interval of each point.
    let grad: Vec<Interval> = y
        .iter()
        .zip(theta)
        .map(|(&yi, &ti)| Interval {
            lo: -loss.deriv_plus(yi - ti),
            hi: -loss.deriv_minus(yi - ti),
        })
        .collect();

    // z_0: zero, or the subgradient of lambda |theta_1 - a|.
    let z0 = match anchors {
        Some((a, _)) => sign_set(theta[0] - a, lambda),
        None => Interval::point(0.0),
    };
    // z_n must lie here: zero, or lambda sign(b - theta_n).
    let zn = match anchors {
        Some((_, b)) => sign_set(b - theta[n - 1], lambda),
        None => Interval::point(0.0),
    };

    let mut residual = 0.0f64;
    let mut worst = None;
    let mut feasible = Vec::with_capacity(n);
    let mut prev = z0;
    for i in 0..n {
        let reach = prev.shift(grad[i]);
        let target = if i + 1 < n { sign_set(theta[i + 1] - theta[i], lambda) } else { zn };
        let (z, gap) = target.meet(reach);
        if gap > residual {
            residual = gap;
            worst = Some(i);
        }
        feasible.push(z);
        prev = z;
    }

    // Walk back choosing z_i consistent with z_{i+1}.
    let mut dual = vec![0.0; n.saturating_sub(1)];
    let mut next = feasible[n - 1].nearest(0.0);
    for i in (0..n.saturating_sub(1)).rev() {
        let want = Interval {
            lo: next - grad[i + 1].hi,
            hi: next - grad[i + 1].lo,
        };
        let (z, _) = feasible[i].meet(want);
        dual[i] = z.nearest(0.5 * (want.lo + want.hi));
        next = dual[i];
    }

    KktCertificate {
        residual,
        dual_z: dual,
        worst_index: worst,
    }
}
