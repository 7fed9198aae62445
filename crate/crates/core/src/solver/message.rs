//! Derivatives of convex piecewise messages.
//!
//! A message is a convex function of one variable represented through its
//! right derivative `D`, which is nondecreasing and piecewise affine:
//!
//! ```text
//! D(x) = base(x) + sum over knots k with k.x <= x of k.delta(x)
//! ```
//!
//! `total` caches `base + sum of all deltas`, the affine piece right of the
//! last knot. Clipping `D` to `[-lambda, lambda]` is the min-convolution with
//! `lambda |.|` that carries a message across one edge of the chain.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use ordered_float::OrderedFloat;

/// Relative size below which a knot increment is dropped.
const PRUNE_TOL: f64 = 1e-12;

/// `a x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
}

impl Affine {
    pub const ZERO: Affine = Affine { a: 0.0, b: 0.0 };

    pub const fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub const fn constant(b: f64) -> Self {
        Self { a: 0.0, b }
    }

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        self.a * x + self.b
    }

    /// Point where `self` equals `level`; requires a positive slope.
    #[inline]
    fn solve(self, level: f64) -> f64 {
        debug_assert!(self.a > 0.0);
        (level - self.b) / self.a
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(self, o: Affine) -> Affine {
        Affine::new(self.a + o.a, self.b + o.b)
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, o: Affine) -> Affine {
        Affine::new(self.a - o.a, self.b - o.b)
    }
}

impl AddAssign for Affine {
    fn add_assign(&mut self, o: Affine) {
        self.a += o.a;
        self.b += o.b;
    }
}

impl SubAssign for Affine {
    fn sub_assign(&mut self, o: Affine) {
        self.a -= o.a;
        self.b -= o.b;
    }
}

#[derive(Debug, Clone, Default)]
pub struct Message {
    base: Affine,
    total: Affine,
    knots: BTreeMap<OrderedFloat<f64>, Affine>,
}

impl Message {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.base = Affine::ZERO;
        self.total = Affine::ZERO;
        self.knots.clear();
    }

    pub fn num_knots(&self) -> usize {
        self.knots.len()
    }

    /// Adds an affine term valid on the whole line.
    pub fn add_affine(&mut self, f: Affine) {
        self.base += f;
        self.total += f;
    }

    /// Adds `delta` to the derivative right of `x`.
    pub fn add_knot(&mut self, x: f64, delta: Affine) {
        *self.knots.entry(OrderedFloat(x)).or_insert(Affine::ZERO) += delta;
        self.total += delta;
    }

    /// Adds the derivative of `weight |x - at|`.
    pub fn add_abs(&mut self, at: f64, weight: f64) {
        if weight > 0.0 {
            self.add_affine(Affine::constant(-weight));
            self.add_knot(at, Affine::constant(2.0 * weight));
        }
    }

    /// Right derivative at `x`.
    pub fn derivative(&self, x: f64) -> f64 {
        let mut cur = self.base;
        for d in self.knots.range(..=OrderedFloat(x)).map(|(_, d)| *d) {
            cur += d;
        }
        cur.eval(x)
    }

    /// Smallest `x` with `D(x) >= level`, without modifying the message.
    pub fn first_reaching(&self, level: f64) -> f64 {
        let mut cur = self.base;
        if cur.a == 0.0 && cur.b >= level {
            return f64::NEG_INFINITY;
        }
        for (&OrderedFloat(x), &d) in &self.knots {
            if cur.a > 0.0 && cur.eval(x) >= level {
                return cur.solve(level).min(x);
            }
            cur += d;
            if cur.eval(x) >= level {
                return x;
            }
        }
        if cur.a > 0.0 {
            cur.solve(level)
        } else {
            f64::INFINITY
        }
    }

    /// Smallest minimizer of the message.
    pub fn argmin(&self) -> f64 {
        self.first_reaching(0.0)
    }

    /// Replaces `D` by `max(D, -lambda)` and returns the smallest `x` with
    /// `D(x) >= -lambda` (negative infinity when no clipping was needed).
    pub fn clip_below(&mut self, lambda: f64) -> f64 {
        let floor = -lambda;
        if !(self.base.a > 0.0 || self.base.b < floor) {
            return f64::NEG_INFINITY;
        }
        let mut cur = self.base;
        let x_cut;
        loop {
            match self.knots.first_key_value() {
                Some((&OrderedFloat(x), &d)) => {
                    if cur.a > 0.0 && cur.eval(x) >= floor {
                        x_cut = cur.solve(floor).min(x);
                        break;
                    }
                    self.knots.pop_first();
                    cur += d;
                    if cur.eval(x) >= floor {
                        x_cut = x;
                        break;
                    }
                }
                None => {
                    debug_assert!(cur.a > 0.0, "message derivative never reaches -lambda");
                    x_cut = cur.solve(floor);
                    break;
                }
            }
        }
        self.base = Affine::constant(floor);
        self.insert_pruned(x_cut, cur - self.base, lambda);
        x_cut
    }

    /// Replaces `D` by `min(D, lambda)` and returns the smallest `x` with
    /// `D(x) >= lambda` (positive infinity when no clipping was needed).
    pub fn clip_above(&mut self, lambda: f64) -> f64 {
        let ceil = lambda;
        if !(self.total.a > 0.0 || self.total.b > ceil) {
            return f64::INFINITY;
        }
        let mut cur = self.total;
        let x_cut;
        loop {
            match self.knots.last_key_value() {
                Some((&OrderedFloat(x), &d)) => {
                    if cur.eval(x) < ceil {
                        x_cut = cur.solve(ceil).max(x);
                        break;
                    }
                    self.knots.pop_last();
                    cur -= d;
                    if cur.eval(x) < ceil {
                        x_cut = x;
                        break;
                    }
                }
                None => {
                    debug_assert!(cur.a > 0.0, "message derivative never drops below lambda");
                    x_cut = cur.solve(ceil);
                    break;
                }
            }
        }
        self.total = Affine::constant(ceil);
        self.insert_pruned(x_cut, self.total - cur, lambda);
        x_cut
    }

    fn insert_pruned(&mut self, x: f64, delta: Affine, lambda: f64) {
        let scale = 1.0f64.max(lambda).max((delta.a * x).abs());
        if delta.a.abs() <= PRUNE_TOL && delta.b.abs() <= PRUNE_TOL * scale {
            return;
        }
        *self.knots.entry(OrderedFloat(x)).or_insert(Affine::ZERO) += delta;
    }
}
