//! Throughput smoothing, cross-version bitrate estimation and representative
//! bitrates maintained over a sliding window of segments.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Estimates `version`'s bitrate for the same segment from the measured
/// bitrate of another version, using the QP model
/// `theta * b_actual * 2^((qp_from - qp_to) / 6)`.
pub fn estimate_cross_version_bitrate(b_actual: f64, qp_from: i32, qp_to: i32, theta: f64) -> f64 {
    theta * b_actual * ((qp_from - qp_to) as f64 / 6.0).exp2()
}

/// Per-session estimator state. Versions are 1-based at the API; vectors
/// are indexed by `version - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    smoothed_throughput: Option<f64>,
    rep_bitrates: Vec<f64>,
    windows: Vec<VecDeque<f64>>,
    window_n: usize,
    segments_seen: usize,
}

impl EstimatorState {
    pub fn new(num_versions: usize, window_n: usize) -> Result<Self> {
        if num_versions == 0 {
            return Err(Error::input("estimator needs at least one version"));
        }
        if window_n == 0 {
            return Err(Error::input("window_n must be at least 1"));
        }
        Ok(Self {
            smoothed_throughput: None,
            rep_bitrates: vec![0.0; num_versions],
            windows: vec![VecDeque::with_capacity(window_n); num_versions],
            window_n,
            segments_seen: 0,
        })
    }

    /// Smoothed throughput, used as the estimate for the next segment.
    pub fn smoothed_throughput(&self) -> Option<f64> {
        self.smoothed_throughput
    }

    /// Representative bitrate of every version after the last ingested segment.
    pub fn rep_bitrates(&self) -> &[f64] {
        &self.rep_bitrates
    }

    pub fn rep_bitrate(&self, version: usize) -> Option<f64> {
        if self.segments_seen == 0 {
            return None;
        }
        version
            .checked_sub(1)
            .and_then(|k| self.rep_bitrates.get(k))
            .copied()
    }

    /// Retained per-segment bitrates of one version, oldest first.
    pub fn window(&self, version: usize) -> Option<&VecDeque<f64>> {
        version.checked_sub(1).and_then(|k| self.windows.get(k))
    }

    /// Bitrate of the last ingested segment in every version: actual for the
    /// received version, estimated for the others.
    pub fn latest_bitrates(&self) -> Option<Vec<f64>> {
        if self.segments_seen == 0 {
            return None;
        }
        Some(
            self.windows
                .iter()
                .map(|w| *w.back().expect("non-empty after ingest"))
                .collect(),
        )
    }

    pub fn segments_seen(&self) -> usize {
        self.segments_seen
    }

    pub fn window_n(&self) -> usize {
        self.window_n
    }

    pub fn num_versions(&self) -> usize {
        self.rep_bitrates.len()
    }

    /// Folds one instant throughput sample into the exponentially smoothed
    /// estimate and returns it. The first sample is taken as-is.
    pub fn update_smoothed_throughput(&mut self, t_instant: f64, delta: f64) -> Result<f64> {
        if !(t_instant > 0.0 && t_instant.is_finite()) {
            return Err(Error::input(format!(
                "instant throughput must be positive, got {t_instant}"
            )));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::input(format!(
                "delta must lie in (0, 1], got {delta}"
            )));
        }
        let next = match self.smoothed_throughput {
            None => t_instant,
            // (1 - delta) * prev + delta * t, arranged so equal inputs are a fixed point.
            Some(prev) => prev + delta * (t_instant - prev),
        };
        self.smoothed_throughput = Some(next);
        Ok(next)
    }

    /// Records segment `index`, received at `received_version` with measured
    /// bitrate `b_actual`, and updates every version's representative bitrate.
    ///
    /// Until `window_n` segments exist the representative bitrate is the mean
    /// of everything seen; afterwards the oldest entry leaves the window.
    pub fn ingest_segment(
        &mut self,
        index: usize,
        received_version: usize,
        b_actual: f64,
        qps: &[i32],
        theta: f64,
    ) -> Result<&[f64]> {
        if index != self.segments_seen {
            return Err(Error::state(format!(
                "segment {index} ingested out of order, expected {}",
                self.segments_seen
            )));
        }
        let v = self.num_versions();
        if qps.len() != v {
            return Err(Error::input(format!("expected {v} QPs, got {}", qps.len())));
        }
        if received_version == 0 || received_version > v {
            return Err(Error::input(format!(
                "received version {received_version} outside [1, {v}]"
            )));
        }
        if !(b_actual > 0.0 && b_actual.is_finite()) {
            return Err(Error::input(format!(
                "bitrate must be positive, got {b_actual}"
            )));
        }

        let qp_received = qps[received_version - 1];
        let n = self.window_n as f64;
        for k in 0..v {
            let bitrate = if k + 1 == received_version {
                b_actual
            } else {
                estimate_cross_version_bitrate(b_actual, qp_received, qps[k], theta)
            };
            let window = &mut self.windows[k];
            let rep = &mut self.rep_bitrates[k];
            if window.len() < self.window_n {
                window.push_back(bitrate);
                *rep += (bitrate - *rep) / window.len() as f64;
            } else {
                let evicted = window.pop_front().expect("full window");
                window.push_back(bitrate);
                *rep += (bitrate - evicted) / n;
            }
            debug_assert!({
                let mean = window.iter().sum::<f64>() / window.len() as f64;
                (mean - *rep).abs() <= 1e-9 * mean.abs().max(1.0)
            });
        }
        self.segments_seen += 1;
        Ok(&self.rep_bitrates)
    }
}
