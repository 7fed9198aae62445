//! Piecewise-constant truth signals and the structural quantities derived
//! from them (segment membership, distance to the nearest change point,
//! jump directions and monotone runs).
//!
//! Indices are 0-based in the API. Distances follow the usual 1-based
//! convention: for the `j`-th point (1-based) of a segment of length `m`,
//! `d = min(j, m - j + 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A piecewise-constant sequence described by its segment values and lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSignal", into = "RawSignal")]
pub struct PiecewiseConstantSignal {
    values: Vec<f64>,
    lengths: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSignal {
    values: Vec<f64>,
    lengths: Vec<usize>,
}

impl TryFrom<RawSignal> for PiecewiseConstantSignal {
    type Error = Error;

    fn try_from(raw: RawSignal) -> Result<Self> {
        Self::new(raw.values, raw.lengths)
    }
}

impl From<PiecewiseConstantSignal> for RawSignal {
    fn from(s: PiecewiseConstantSignal) -> Self {
        RawSignal {
            values: s.values,
            lengths: s.lengths,
        }
    }
}

impl PiecewiseConstantSignal {
    /// Adjacent segments must carry different values; equal neighbours are
    /// rejected rather than merged.
    pub fn new(values: Vec<f64>, lengths: Vec<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSignal("at least one segment is required".into()));
        }
        if values.len() != lengths.len() {
            return Err(Error::InvalidSignal(format!(
                "{} values but {} lengths",
                values.len(),
                lengths.len()
            )));
        }
        if let Some(k) = lengths.iter().position(|&m| m == 0) {
            return Err(Error::InvalidSignal(format!("segment {k} has length 0")));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!("segment {k} has a non-finite value")));
        }
        if let Some(k) = values.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::InvalidSignal(format!(
                "segments {k} and {} share the value {}; merge them",
                k + 1,
                values[k]
            )));
        }
        Ok(Self { values, lengths })
    }

    /// `k` segments of equal length `m` with values `0, jump, 0, jump, ...`.
    pub fn alternating(k: usize, m: usize, jump: f64) -> Result<Self> {
        let values = (0..k).map(|j| if j % 2 == 0 { 0.0 } else { jump }).collect();
        Self::new(values, vec![m; k])
    }

    /// `k` segments of equal length `m` with values `0, jump, 2 jump, ...`.
    pub fn staircase(k: usize, m: usize, jump: f64) -> Result<Self> {
        let values = (0..k).map(|j| j as f64 * jump).collect();
        Self::new(values, vec![m; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn num_segments(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.lengths.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Shortest segment length.
    pub fn min_length(&self) -> usize {
        *self.lengths.iter().min().expect("non-empty")
    }

    /// Range `max - min` of the signal values.
    pub fn range(&self) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// 0-based start index of every segment.
    pub fn starts(&self) -> Vec<usize> {
        let mut acc = 0;
        self.lengths
            .iter()
            .map(|&m| {
                let s = acc;
                acc += m;
                s
            })
            .collect()
    }

    /// Full vector of length `n`.
    pub fn expand(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (&v, &m) in self.values.iter().zip(&self.lengths) {
            out.extend(std::iter::repeat_n(v, m));
        }
        out
    }

    pub fn geometry(&self) -> SignalGeometry {
        SignalGeometry::new(self)
    }
}

/// Per-index and per-segment structure of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalGeometry {
    /// Segment index of each point.
    pub k_of: Vec<usize>,
    /// Distance to the nearest change point, `>= 1`.
    pub d: Vec<usize>,
    /// Jump directions with sentinels: `eta[0] = eta[K] = 0`, and `eta[k]`
    /// (`1 <= k < K`) is the sign of the jump from segment `k` to `k + 1`
    /// (1-based segments).
    pub eta: Vec<i8>,
    /// Per segment: total length of the monotone run ending at the segment.
    pub seg_m_left: Vec<usize>,
    /// Per segment: total length of the monotone run starting at the segment.
    pub seg_m_right: Vec<usize>,
    pub lengths: Vec<usize>,
    pub starts: Vec<usize>,
    pub range: f64,
}

impl SignalGeometry {
    fn new(signal: &PiecewiseConstantSignal) -> Self {
        let lengths = signal.lengths.clone();
        let kk = lengths.len();
        let starts = signal.starts();
        let n = signal.len();

        let mut k_of = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for (k, &m) in lengths.iter().enumerate() {
            for j in 1..=m {
                k_of.push(k);
                d.push(j.min(m - j + 1));
            }
        }

        let mut eta = vec![0i8; kk + 1];
        for (k, w) in signal.values.windows(2).enumerate() {
            eta[k + 1] = if w[1] > w[0] { 1 } else { -1 };
        }

        // Runs only extend through a segment whose incoming and outgoing jumps
        // agree; at a reversal or at either end the run is the segment itself.
        let mut seg_m_left = lengths.clone();
        let mut seg_m_right = lengths.clone();
        for j in 2..kk {
            // j is 1-based and strictly interior here.
            if eta[j - 1] != eta[j] {
                continue;
            }
            let dir = eta[j];
            let mut left = j - 1;
            while left > 1 && eta[left - 1] == dir {
                left -= 1;
            }
            let mut right = j + 1;
            while right < kk && eta[right] == dir {
                right += 1;
            }
            seg_m_left[j - 1] = lengths[left - 1..j].iter().sum();
            seg_m_right[j - 1] = lengths[j - 1..right].iter().sum();
        }

        Self {
            k_of,
            d,
            eta,
            seg_m_left,
            seg_m_right,
            lengths,
            starts,
            range: signal.range(),
        }
    }

    pub fn n(&self) -> usize {
        self.k_of.len()
    }

    pub fn num_segments(&self) -> usize {
        self.lengths.len()
    }

    pub fn min_length(&self) -> usize {
        *self.lengths.iter().min().expect("non-empty")
    }

    /// Length of the segment containing index `i`.
    pub fn m_of(&self, i: usize) -> usize {
        self.lengths[self.k_of[i]]
    }

    pub fn m_left(&self, i: usize) -> usize {
        self.seg_m_left[self.k_of[i]]
    }

    pub fn m_right(&self, i: usize) -> usize {
        self.seg_m_right[self.k_of[i]]
    }

    /// Segments (0-based) where the jump direction changes,
    /// `{k : eta[k-1] != eta[k]}` in 1-based terms. A single-segment signal
    /// reports its only segment.
    pub fn direction_change_segments(&self) -> Vec<usize> {
        let kk = self.num_segments();
        if kk == 1 {
            return vec![0];
        }
        (1..=kk)
            .filter(|&k| self.eta[k - 1] != self.eta[k])
            .map(|k| k - 1)
            .collect()
    }

    /// `sum_i 1/d_i`.
    pub fn harmonic_sum(&self) -> f64 {
        self.d.iter().map(|&d| 1.0 / d as f64).sum()
    }
}
