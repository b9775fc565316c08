//! Version selection: the buffer-based AVG policy with representative
//! bitrates, and the ITB instant-throughput reference.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorState;
use crate::model::{ClientConfig, ClientView, PolicyKind, UptrendGate};

/// Which rule produced a version choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseLabel {
    /// The first segment, requested at the configured start version.
    Start,
    Uptrend,
    Stable,
    Downtrend,
    Panic,
    Itb,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::Start => "start",
            CaseLabel::Uptrend => "uptrend",
            CaseLabel::Stable => "stable",
            CaseLabel::Downtrend => "downtrend",
            CaseLabel::Panic => "panic",
            CaseLabel::Itb => "itb",
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "start" => CaseLabel::Start,
            "uptrend" => CaseLabel::Uptrend,
            "stable" => CaseLabel::Stable,
            "downtrend" => CaseLabel::Downtrend,
            "panic" => CaseLabel::Panic,
            "itb" => CaseLabel::Itb,
            other => return Err(Error::input(format!("unknown case label {other:?}"))),
        })
    }
}

/// Outcome of one policy invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Version (1-based) for the next segment.
    pub next_version: usize,
    pub case_label: CaseLabel,
    /// Flexible buffer threshold in seconds, for the AVG policy.
    pub flexible_threshold: Option<f64>,
    /// Target bitrate, set in the downtrend case when one exists.
    pub target_bitrate: Option<f64>,
}

/// Boundary between the stable and downtrend cases.
///
/// A logistic function of the throughput/bitrate mismatch: equal values give
/// the midpoint of `[beta_min, beta_max]`, and the threshold rises toward
/// `beta_max` as throughput falls short of the bitrate.
pub fn flexible_threshold(
    t_instant: f64,
    b_instant: f64,
    beta_min: f64,
    beta_max: f64,
) -> Result<f64> {
    if !(b_instant > 0.0) {
        return Err(Error::input(format!(
            "instant bitrate must be positive, got {b_instant}"
        )));
    }
    if !(t_instant >= 0.0) {
        return Err(Error::input(format!(
            "instant throughput must be non-negative, got {t_instant}"
        )));
    }
    if !(beta_min < beta_max) {
        return Err(Error::input(format!(
            "need beta_min < beta_max, got {beta_min} >= {beta_max}"
        )));
    }
    let sigma = 1.0 - t_instant / b_instant;
    Ok(beta_max - (beta_max - beta_min) / (1.0 + sigma.exp()))
}

/// Highest version whose instant bitrate is strictly below `t_instant`.
/// Falls back to version 1 when none qualifies; equal bitrates resolve to
/// the higher index.
pub fn select_panic_version(instant_bitrates: &[f64], t_instant: f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (k, &b) in instant_bitrates.iter().enumerate() {
        if b < t_instant && best.map_or(true, |(_, bb)| b >= bb) {
            best = Some((k + 1, b));
        }
    }
    best.map_or(1, |(v, _)| v)
}

/// Inputs both policies read from the view and estimator.
struct Observed {
    t_instant: f64,
    b_instant: f64,
    current: usize,
    num_versions: usize,
    latest: Vec<f64>,
}

fn observe(view: &ClientView, est: &EstimatorState) -> Result<Observed> {
    let t_instant = view
        .last_throughput()
        .ok_or_else(|| Error::state("no segment received yet"))?;
    let b_instant = view
        .last_bitrate()
        .ok_or_else(|| Error::state("last segment size unknown"))?;
    let latest = est
        .latest_bitrates()
        .ok_or_else(|| Error::state("estimator has not ingested any segment"))?;
    if latest.len() != view.num_versions() {
        return Err(Error::state(format!(
            "estimator tracks {} versions, view has {}",
            latest.len(),
            view.num_versions()
        )));
    }
    Ok(Observed {
        t_instant,
        b_instant,
        current: view.last_version,
        num_versions: view.num_versions(),
        latest,
    })
}

/// The representative-bitrate, buffer-based decision for the next segment.
pub fn avg_decide(view: &ClientView, est: &EstimatorState, cfg: &ClientConfig) -> Result<Decision> {
    let obs = observe(view, est)?;
    let t_est = est
        .smoothed_throughput()
        .ok_or_else(|| Error::state("no smoothed throughput"))?;
    let reps = est.rep_bitrates();
    let current = obs.current;
    let rep_current = reps[current - 1];
    let threshold = flexible_threshold(obs.t_instant, obs.b_instant, cfg.beta_min, cfg.beta_max)?;
    let buffer = view.buffer_level;

    let decision = |next_version, case_label, target_bitrate| Decision {
        next_version,
        case_label,
        flexible_threshold: Some(threshold),
        target_bitrate,
    };

    if buffer > cfg.beta_max {
        let gate_rep = match cfg.uptrend_gate {
            UptrendGate::Prose => reps.get(current).copied(),
            UptrendGate::Pseudocode => Some(rep_current),
        };
        let next = match gate_rep {
            Some(rep) if current < obs.num_versions && rep < t_est => current + 1,
            _ => current,
        };
        Ok(decision(next, CaseLabel::Uptrend, None))
    } else if buffer >= threshold {
        Ok(decision(current, CaseLabel::Stable, None))
    } else if buffer >= cfg.beta_min {
        let target = reps
            .iter()
            .copied()
            .filter(|&r| r < t_est)
            .fold(None, |acc: Option<f64>, r| {
                Some(acc.map_or(r, |a| a.max(r)))
            });
        let step_down = current.saturating_sub(1).max(1);
        let next = match target {
            Some(tar) if obs.b_instant <= tar && rep_current <= tar => current,
            _ => step_down,
        };
        Ok(decision(next, CaseLabel::Downtrend, target))
    } else {
        // The panic rule only ever holds or lowers the version.
        let next = select_panic_version(&obs.latest, obs.t_instant).min(current);
        Ok(decision(next, CaseLabel::Panic, None))
    }
}

/// The instant-throughput/instant-bitrate reference: the panic rule applied
/// to every segment regardless of buffer.
pub fn itb_decide(view: &ClientView, est: &EstimatorState) -> Result<Decision> {
    let obs = observe(view, est)?;
    Ok(Decision {
        next_version: select_panic_version(&obs.latest, obs.t_instant),
        case_label: CaseLabel::Itb,
        flexible_threshold: None,
        target_bitrate: None,
    })
}

/// A version-selection rule driven by the simulator.
pub trait AdaptationPolicy {
    fn decide(
        &self,
        view: &ClientView,
        est: &EstimatorState,
        cfg: &ClientConfig,
    ) -> Result<Decision>;
}

impl AdaptationPolicy for PolicyKind {
    fn decide(
        &self,
        view: &ClientView,
        est: &EstimatorState,
        cfg: &ClientConfig,
    ) -> Result<Decision> {
        match self {
            PolicyKind::Avg => avg_decide(view, est, cfg),
            PolicyKind::Itb => itb_decide(view, est),
        }
    }
}
