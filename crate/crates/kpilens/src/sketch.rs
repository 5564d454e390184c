//! Streaming quantile estimation with the P² algorithm.
//!
//! One [`QuantileSketch`] tracks a single target percentile with five
//! markers in O(1) memory and O(1) update time. The markers hold estimated
//! heights at the cumulative fractions
//!
//! ```text
//! [min, p/2, p, (1+p)/2, max]
//! ```
//!
//! and are nudged toward their desired positions with a piecewise-parabolic
//! (hence "P²") interpolation on every insert; when the parabolic prediction
//! would break marker ordering the update falls back to linear
//! interpolation. The middle marker is the running estimate of the target
//! percentile.
//!
//! The first five observations are stored sorted, and queries during that
//! warm-up interpolate the sorted values directly, so small streams get
//! exact answers instead of half-initialized markers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Streaming estimator for one percentile of a numeric stream.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuantileSketch {
    /// Target cumulative fraction in (0, 1), e.g. 0.2 for the 20th percentile.
    target: f64,
    /// Number of observations so far.
    count: u64,
    /// Marker heights; for `count <= 5` the first `count` entries are the
    /// sorted observations.
    markers: [f64; 5],
    /// 1-based marker positions (only meaningful once `count > 5`).
    positions: [f64; 5],
}

impl QuantileSketch {
    /// Create a sketch for the given cumulative fraction (0 < target < 1).
    pub fn new(target: f64) -> Result<Self> {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::Config(format!(
                "sketch target must be in (0, 1), got {target}"
            )));
        }
        Ok(QuantileSketch {
            target,
            count: 0,
            markers: [0.0; 5],
            positions: [1.0, 2.0, 3.0, 4.0, 5.0],
        })
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Ideal (fractional) position of marker `i` for the current count.
    fn desired(&self, i: usize) -> f64 {
        let fractions = [
            0.0,
            self.target / 2.0,
            self.target,
            (1.0 + self.target) / 2.0,
            1.0,
        ];
        1.0 + (self.count as f64 - 1.0) * fractions[i]
    }

    /// Insert one observation. `v` must be finite; feeding a NaN or
    /// infinity is a caller bug and panics.
    pub fn add(&mut self, v: f64) {
        assert!(v.is_finite(), "non-finite value fed to quantile sketch");
        if self.count < 5 {
            // Warm-up: keep the first observations sorted in place.
            let n = self.count as usize;
            let mut i = n;
            self.markers[i] = v;
            while i > 0 && self.markers[i - 1] > self.markers[i] {
                self.markers.swap(i - 1, i);
                i -= 1;
            }
            self.count += 1;
            return;
        }

        // Locate the cell, pinning the extreme markers to the running
        // min/max.
        let cell = if v < self.markers[0] {
            self.markers[0] = v;
            0
        } else if v >= self.markers[4] {
            if v > self.markers[4] {
                self.markers[4] = v;
            }
            3
        } else {
            let mut k = 0;
            for i in 0..4 {
                if self.markers[i] <= v {
                    k = i;
                }
            }
            k
        };
        self.count += 1;

        for i in (cell + 1)..5 {
            self.positions[i] += 1.0;
        }

        // Nudge the three interior markers toward their desired positions.
        for i in 1..4 {
            let d = self.desired(i) - self.positions[i];
            let ahead = self.positions[i + 1] - self.positions[i];
            let behind = self.positions[i - 1] - self.positions[i];
            if (d >= 1.0 && ahead > 1.0) || (d <= -1.0 && behind < -1.0) {
                let s = d.signum();
                let parabolic = self.parabolic(i, s);
                let ok = self.markers[i - 1] < parabolic && parabolic < self.markers[i + 1];
                self.markers[i] = if ok { parabolic } else { self.linear(i, s) };
                self.positions[i] += s;
            }
        }
    }

    fn parabolic(&self, i: usize, s: f64) -> f64 {
        let q = &self.markers;
        let n = &self.positions;
        q[i] + s / (n[i + 1] - n[i - 1])
            * ((n[i] - n[i - 1] + s) * (q[i + 1] - q[i]) / (n[i + 1] - n[i])
                + (n[i + 1] - n[i] - s) * (q[i] - q[i - 1]) / (n[i] - n[i - 1]))
    }

    fn linear(&self, i: usize, s: f64) -> f64 {
        let j = if s > 0.0 { i + 1 } else { i - 1 };
        self.markers[i]
            + s * (self.markers[j] - self.markers[i]) / (self.positions[j] - self.positions[i])
    }

    /// Current estimate of the target percentile, or `None` before the
    /// first observation. During warm-up (count <= 5) this interpolates the
    /// sorted observations directly.
    pub fn query(&self) -> Option<f64> {
        match self.count {
            0 => None,
            n if n <= 5 => Some(interpolate_sorted(&self.markers[..n as usize], self.target)),
            _ => Some(self.markers[2]),
        }
    }

    /// Check internal invariants; used when restoring from a snapshot.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::Snapshot(reason));
        if !(self.target > 0.0 && self.target < 1.0) {
            return fail(format!("sketch target {} out of range", self.target));
        }
        let live = self.count.min(5) as usize;
        if self.markers[..live].iter().any(|m| !m.is_finite()) {
            return fail("non-finite sketch marker".into());
        }
        if self.markers[..live].windows(2).any(|w| w[0] > w[1]) {
            return fail("sketch markers out of order".into());
        }
        if self.count > 5 {
            if self.positions.windows(2).any(|w| w[0] >= w[1]) {
                return fail("sketch positions not increasing".into());
            }
            if self.positions[0] != 1.0 || self.positions[4] != self.count as f64 {
                return fail("sketch positions inconsistent with count".into());
            }
        }
        Ok(())
    }
}

/// Linear interpolation of a sorted slice at cumulative fraction `p`.
fn interpolate_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (pos - lo as f64) * (sorted[lo + 1] - sorted[lo])
}
