//! Synthetic inputs: rectangular and random bandwidth traces, and VBR ladders
//! whose versions follow the QP bitrate model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BandwidthTrace, Breakpoint, VersionInfo, VideoManifest};

/// Alternating high/low trace starting high. Equal neighbouring levels are
/// merged, so `high == low` yields a single piece.
pub fn gen_rect_bandwidth(
    high: f64,
    low: f64,
    period_high: f64,
    period_low: f64,
    total: f64,
) -> Result<BandwidthTrace> {
    for (name, v) in [
        ("high", high),
        ("low", low),
        ("period_high", period_high),
        ("period_low", period_low),
        ("total", total),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::input(format!("{name} must be positive, got {v}")));
        }
    }
    let mut points: Vec<Breakpoint> = Vec::new();
    let mut t = 0.0;
    let mut is_high = true;
    while t < total {
        let bandwidth = if is_high { high } else { low };
        if points.last().map_or(true, |p| p.bandwidth != bandwidth) {
            points.push(Breakpoint {
                start: t,
                bandwidth,
            });
        }
        t += if is_high { period_high } else { period_low };
        is_high = !is_high;
    }
    BandwidthTrace::new(
        format!("rect-{}-{}kbps", high / 1000.0, low / 1000.0),
        points,
    )
}

/// Seeded random trace: hold times uniform in `[min_hold, max_hold]` and
/// levels log-uniform in `[low, high]`, covering `[0, total)`.
pub fn gen_random_bandwidth(
    low: f64,
    high: f64,
    min_hold: f64,
    max_hold: f64,
    total: f64,
    seed: u64,
) -> Result<BandwidthTrace> {
    if !(low > 0.0 && low <= high && high.is_finite()) {
        return Err(Error::input(format!(
            "need 0 < low <= high, got {low}, {high}"
        )));
    }
    if !(min_hold > 0.0 && min_hold <= max_hold && max_hold.is_finite()) {
        return Err(Error::input(format!(
            "need 0 < min_hold <= max_hold, got {min_hold}, {max_hold}"
        )));
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::input(format!("total must be positive, got {total}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ln_lo, ln_hi) = (low.ln(), high.ln());
    let mut points = Vec::new();
    let mut t = 0.0;
    while t < total {
        let level = if ln_lo == ln_hi {
            low
        } else {
            rng.gen_range(ln_lo..=ln_hi).exp()
        };
        points.push(Breakpoint {
            start: t,
            bandwidth: level,
        });
        t += if min_hold == max_hold {
            min_hold
        } else {
            rng.gen_range(min_hold..=max_hold)
        };
    }
    BandwidthTrace::new(format!("random-{seed}"), points)
}

/// Parameters of a synthetic VBR ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub title: String,
    pub num_versions: usize,
    /// QP per version, strictly decreasing with index.
    pub qps: Vec<i32>,
    /// Target mean bitrate per version, bit/s.
    pub target_avg_bitrates: Vec<f64>,
    pub segment_count: usize,
    pub segment_duration: f64,
    /// Coefficient of variation of the per-segment bitrate. Zero gives CBR.
    pub burstiness: f64,
    /// Every `burst_period`-th segment is a scene-change burst. Zero disables
    /// bursts.
    pub burst_period: usize,
    /// Coefficient of variation of the per-segment deviation of each lower
    /// version from the QP model.
    pub model_error: f64,
    /// Compensation factor assumed by the QP model.
    pub theta: f64,
    pub seed: u64,
}

/// Per-version QPs of the preset ladders.
pub const PRESET_QPS: [i32; 6] = [48, 42, 38, 34, 28, 22];
/// Mean bitrates (kbps) of the `sony-like` preset.
pub const SONY_AVG_KBPS: [f64; 6] = [203.77, 390.75, 602.96, 991.32, 2194.05, 5180.58];
/// Mean bitrates (kbps) of the `t2-like` preset.
pub const T2_AVG_KBPS: [f64; 6] = [201.55, 377.97, 567.02, 882.29, 1798.93, 4127.86];

impl LadderSpec {
    fn from_kbps(title: &str, kbps: &[f64; 6], seed: u64) -> Self {
        Self {
            title: title.to_string(),
            num_versions: 6,
            qps: PRESET_QPS.to_vec(),
            target_avg_bitrates: kbps.iter().map(|k| k * 1000.0).collect(),
            segment_count: 300,
            segment_duration: 2.0,
            burstiness: 0.3,
            burst_period: 30,
            model_error: 0.05,
            theta: 1.05,
            seed,
        }
    }

    /// Six versions, 300 two-second segments, Sony Demo mean bitrates.
    pub fn sony_like(seed: u64) -> Self {
        Self::from_kbps("sony-like", &SONY_AVG_KBPS, seed)
    }

    /// Six versions, 300 two-second segments, Terminator 2 mean bitrates.
    pub fn t2_like(seed: u64) -> Self {
        Self::from_kbps("t2-like", &T2_AVG_KBPS, seed)
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "sony-like" => Ok(Self::sony_like(seed)),
            "t2-like" => Ok(Self::t2_like(seed)),
            other => Err(Error::input(format!(
                "unknown ladder preset {other:?} (expected sony-like or t2-like)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_versions < 2 {
            return Err(Error::input(format!(
                "need at least 2 versions, got {}",
                self.num_versions
            )));
        }
        if self.qps.len() != self.num_versions
            || self.target_avg_bitrates.len() != self.num_versions
        {
            return Err(Error::input(format!(
                "{} versions but {} QPs and {} target bitrates",
                self.num_versions,
                self.qps.len(),
                self.target_avg_bitrates.len()
            )));
        }
        if self.qps.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::input(
                "QPs must strictly decrease with version index",
            ));
        }
        if self
            .target_avg_bitrates
            .iter()
            .any(|&b| !(b > 0.0 && b.is_finite()))
        {
            return Err(Error::input("target bitrates must be positive"));
        }
        if self.segment_count == 0 {
            return Err(Error::input("segment_count must be positive"));
        }
        if !(self.segment_duration > 0.0 && self.segment_duration.is_finite()) {
            return Err(Error::input("segment_duration must be positive"));
        }
        if !(self.burstiness >= 0.0 && self.burstiness.is_finite()) {
            return Err(Error::input("burstiness must be non-negative"));
        }
        if !(self.model_error >= 0.0 && self.model_error.is_finite()) {
            return Err(Error::input("model_error must be non-negative"));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::input("theta must be positive"));
        }
        Ok(())
    }
}

fn lognormal_unit_mean(cv: f64) -> LogNormal<f64> {
    let var = (1.0 + cv * cv).ln();
    LogNormal::new(-var / 2.0, var.sqrt()).expect("finite parameters")
}

/// Per-segment bitrates (bit/s) for every version before rescaling: the top
/// version follows a unit-mean log-normal shape scaled to its target, and
/// each lower version `k` is `top * 2^((qp_top - qp_k) / 6) / theta`.
pub fn model_consistent_bitrates(spec: &LadderSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let top = spec.num_versions - 1;
    let shape: Vec<f64> = if spec.burstiness == 0.0 {
        vec![1.0; spec.segment_count]
    } else {
        let dist = lognormal_unit_mean(spec.burstiness);
        let burst_gain = 1.0 + 2.0 * spec.burstiness;
        (0..spec.segment_count)
            .map(|i| {
                let base = dist.sample(&mut rng);
                if spec.burst_period > 0 && i % spec.burst_period == 0 {
                    base * burst_gain
                } else {
                    base
                }
            })
            .collect()
    };
    let top_rates: Vec<f64> = shape
        .iter()
        .map(|s| s * spec.target_avg_bitrates[top])
        .collect();
    let qp_top = spec.qps[top];
    Ok((0..spec.num_versions)
        .map(|k| {
            if k == top {
                top_rates.clone()
            } else {
                let factor = ((qp_top - spec.qps[k]) as f64 / 6.0).exp2() / spec.theta;
                top_rates.iter().map(|b| b * factor).collect()
            }
        })
        .collect())
}

/// Generates a seeded VBR ladder. Lower versions follow the QP model with
/// multiplicative log-normal deviation of CV `model_error`; each version is
/// then rescaled so its mean bitrate hits its target. With zero burstiness
/// the ladder is CBR and `model_error` has nothing to perturb.
pub fn gen_vbr_ladder(spec: &LadderSpec) -> Result<VideoManifest> {
    let mut rates = model_consistent_bitrates(spec)?;
    if spec.burstiness > 0.0 && spec.model_error > 0.0 {
        // Separate stream so the shape is unchanged by the model-error setting.
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
        let dist = lognormal_unit_mean(spec.model_error);
        let top = spec.num_versions - 1;
        for series in rates.iter_mut().take(top) {
            for b in series.iter_mut() {
                *b *= dist.sample(&mut rng);
            }
        }
    }
    let versions = rates
        .into_iter()
        .enumerate()
        .map(|(k, series)| {
            let mean = series.iter().sum::<f64>() / series.len() as f64;
            let scale = spec.target_avg_bitrates[k] / mean * spec.segment_duration;
            VersionInfo {
                index: k + 1,
                qp: spec.qps[k],
                segment_sizes: series
                    .iter()
                    .map(|b| ((b * scale).round() as u64).max(1))
                    .collect(),
            }
        })
        .collect();
    VideoManifest::new(spec.title.clone(), spec.segment_duration, versions)
}
