//! Deterministic segment-by-segment streaming simulation over a bandwidth
//! trace.
//!
//! The client requests one segment at a time. A download takes the RTT plus
//! the time needed to move the segment's bits through the piecewise-constant
//! trace. Playback starts once the first segment has arrived; from then on
//! the buffer drains in real time and stalls whenever it is empty. When a
//! completed segment leaves the buffer above `beta_max`, the client waits
//! until it has drained back to `beta_max` before the next request.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorState;
use crate::model::{BandwidthTrace, ClientConfig, ClientView, VideoManifest};
use crate::policy::{AdaptationPolicy, CaseLabel};

/// Wall-clock time to fetch `size` bits starting at `start`: the RTT plus the
/// transfer time obtained by integrating the trace from `start + rtt`.
pub fn download_time(trace: &BandwidthTrace, start: f64, size: f64, rtt: f64) -> Result<f64> {
    if !(size > 0.0 && size.is_finite()) {
        return Err(Error::input(format!(
            "download size must be positive, got {size}"
        )));
    }
    if !(start >= 0.0 && start.is_finite()) {
        return Err(Error::input(format!(
            "start time must be non-negative, got {start}"
        )));
    }
    if !(rtt >= 0.0 && rtt.is_finite()) {
        return Err(Error::input(format!("rtt must be non-negative, got {rtt}")));
    }
    let points = trace.breakpoints();
    let begin = start + rtt;
    let mut t = begin;
    let mut remaining = size;
    let mut piece = trace.piece_at(t);
    loop {
        let bw = points[piece].bandwidth;
        match points.get(piece + 1) {
            Some(next) if remaining > bw * (next.start - t) => {
                remaining -= bw * (next.start - t);
                t = next.start;
                piece += 1;
            }
            _ => {
                t += remaining / bw;
                return Ok(rtt + (t - begin));
            }
        }
    }
}

/// One downloaded segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub index: usize,
    pub version: usize,
    pub size_bits: u64,
    pub request_time_s: f64,
    pub completion_time_s: f64,
    /// Instant throughput, RTT included.
    pub throughput_bps: f64,
    pub buffer_before_s: f64,
    pub buffer_after_s: f64,
    /// Rule that selected this segment's version.
    pub case: CaseLabel,
    /// Flexible threshold in force when the version was chosen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_s: Option<f64>,
    pub stall_s: f64,
}

impl SegmentRecord {
    pub fn download_duration(&self) -> f64 {
        self.completion_time_s - self.request_time_s
    }
}

/// Session metadata written as the first line of a JSONL log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub manifest_title: String,
    pub trace_label: String,
    pub policy_label: String,
    pub segment_duration_s: f64,
    pub num_versions: usize,
    /// Media buffered before playback starts.
    pub initial_buffer_s: f64,
    pub config: ClientConfig,
    pub total_stall_s: f64,
}

/// Everything recorded during one simulated session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: SessionHeader,
    pub records: Vec<SegmentRecord>,
}

const CSV_HEADER: &str =
    "index,version,size_bits,request_time_s,completion_time_s,throughput_bps,buffer_before_s,buffer_after_s,case,stall_s";

impl SessionLog {
    pub fn total_stall(&self) -> f64 {
        self.header.total_stall_s
    }

    pub fn versions(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.version)
    }

    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct HeaderLine<'a> {
            header: &'a SessionHeader,
        }
        let mut out = serde_json::to_string(&HeaderLine {
            header: &self.header,
        })
        .expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(reader: impl BufRead, origin: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct HeaderLine {
            header: SessionHeader,
        }
        let mut lines = reader.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, "header", "empty log"))?;
        let first = first.map_err(|e| Error::io(origin, e))?;
        let header: HeaderLine = serde_json::from_str(&first)
            .map_err(|e| Error::parse(origin, "header", e.to_string()))?;
        let mut records = Vec::new();
        for (n, line) in lines {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SegmentRecord = serde_json::from_str(&line)
                .map_err(|e| Error::parse(origin, format!("line {}", n + 1), e.to_string()))?;
            if rec.index != records.len() {
                return Err(Error::parse(
                    origin,
                    format!("line {}", n + 1),
                    format!("record index {} out of sequence", rec.index),
                ));
            }
            records.push(rec);
        }
        Ok(Self {
            header: header.header,
            records,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.index,
                r.version,
                r.size_bits,
                r.request_time_s,
                r.completion_time_s,
                r.throughput_bps,
                r.buffer_before_s,
                r.buffer_after_s,
                r.case,
                r.stall_s
            )
            .expect("write to string");
        }
        out
    }

    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), self.to_jsonl().as_bytes())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), self.to_csv().as_bytes())
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Simulates a full session with `cfg.policy`.
pub fn simulate(
    manifest: &VideoManifest,
    trace: &BandwidthTrace,
    cfg: &ClientConfig,
) -> Result<SessionLog> {
    run_session(manifest, trace, cfg, &cfg.policy)
}

/// Simulates streaming every segment of `manifest` over `trace`, consulting
/// `policy` after each completed download.
pub fn run_session(
    manifest: &VideoManifest,
    trace: &BandwidthTrace,
    cfg: &ClientConfig,
    policy: &dyn AdaptationPolicy,
) -> Result<SessionLog> {
    cfg.validate()?;
    let num_versions = manifest.num_versions();
    if cfg.start_version > num_versions {
        return Err(Error::input(format!(
            "start version {} outside [1, {num_versions}]",
            cfg.start_version
        )));
    }
    let duration = manifest.segment_duration();
    let qps = manifest.qps();
    let mut est = EstimatorState::new(num_versions, cfg.window_n)?;
    let mut view = ClientView {
        buffer_level: 0.0,
        last_segment_index: 0,
        last_version: cfg.start_version,
        received_sizes: BTreeMap::new(),
        qps: qps.clone(),
        segment_duration: duration,
        throughput_history: Vec::with_capacity(manifest.num_segments()),
    };

    let mut records = Vec::with_capacity(manifest.num_segments());
    let mut clock = 0.0;
    let mut buffer = 0.0_f64;
    let mut playing = false;
    let mut total_stall = 0.0;
    let mut version = cfg.start_version;
    let mut case = CaseLabel::Start;
    let mut threshold = None;

    for index in 0..manifest.num_segments() {
        let size = manifest.segment_size(version, index)?;
        let elapsed = download_time(trace, clock, size as f64, cfg.rtt)?;
        let buffer_before = buffer;
        let mut stall = 0.0;
        if playing {
            if buffer >= elapsed {
                buffer -= elapsed;
            } else {
                stall = elapsed - buffer;
                buffer = 0.0;
            }
        }
        buffer += duration;
        playing = true;
        total_stall += stall;
        let request_time = clock;
        clock += elapsed;
        let throughput = size as f64 / elapsed;

        records.push(SegmentRecord {
            index,
            version,
            size_bits: size,
            request_time_s: request_time,
            completion_time_s: clock,
            throughput_bps: throughput,
            buffer_before_s: buffer_before,
            buffer_after_s: buffer,
            case,
            threshold_s: threshold,
            stall_s: stall,
        });

        if index + 1 == manifest.num_segments() {
            break;
        }

        est.ingest_segment(index, version, size as f64 / duration, &qps, cfg.theta)?;
        est.update_smoothed_throughput(throughput, cfg.delta)?;
        view.buffer_level = buffer;
        view.last_segment_index = index;
        view.last_version = version;
        view.received_sizes.insert(index, size);
        view.throughput_history.push(throughput);

        let decision = policy.decide(&view, &est, cfg)?;
        if decision.next_version == 0 || decision.next_version > num_versions {
            return Err(Error::state(format!(
                "policy chose version {} outside [1, {num_versions}]",
                decision.next_version
            )));
        }
        version = decision.next_version;
        case = decision.case_label;
        threshold = decision.flexible_threshold;

        if buffer > cfg.beta_max {
            clock += buffer - cfg.beta_max;
            buffer = cfg.beta_max;
        }
    }

    Ok(SessionLog {
        header: SessionHeader {
            manifest_title: manifest.title().to_string(),
            trace_label: trace.label().to_string(),
            policy_label: cfg.label(),
            segment_duration_s: duration,
            num_versions,
            initial_buffer_s: duration,
            config: cfg.clone(),
            total_stall_s: total_stall,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Breakpoint, VersionInfo};
    use crate::policy::Decision;

    fn bp(start: f64, bandwidth: f64) -> Breakpoint {
        Breakpoint { start, bandwidth }
    }

    #[test]
    fn download_time_constant_bandwidth() {
        let trace = BandwidthTrace::constant(2.5e6).unwrap();
        assert!((download_time(&trace, 0.0, 5e6, 0.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn download_time_spans_pieces() {
        let trace = BandwidthTrace::new("x", vec![bp(0.0, 2e6), bp(1.0, 1e6)]).unwrap();
        assert!((download_time(&trace, 0.0, 3e6, 0.0).unwrap() - 2.0).abs() < 1e-12);
        // Starting inside the second piece only sees the second rate.
        assert!((download_time(&trace, 5.0, 3e6, 0.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn download_time_includes_rtt() {
        let trace = BandwidthTrace::constant(1e6).unwrap();
        let t = download_time(&trace, 0.0, 1e6, 0.04).unwrap();
        assert!((t - 1.04).abs() < 1e-12);
        assert!((1e6 / t - 961_538.461_538).abs() < 1e-3);
    }

    #[test]
    fn rtt_delays_the_start_of_integration() {
        // During the RTT the fast piece ends; the transfer sees only 1e6.
        let trace = BandwidthTrace::new("x", vec![bp(0.0, 1e9), bp(0.5, 1e6)]).unwrap();
        assert!((download_time(&trace, 0.0, 1e6, 0.5).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn download_time_rejects_bad_input() {
        let trace = BandwidthTrace::constant(1e6).unwrap();
        assert!(download_time(&trace, 0.0, 0.0, 0.0).is_err());
        assert!(download_time(&trace, -1.0, 1.0, 0.0).is_err());
    }

    fn cbr(count: usize) -> VideoManifest {
        let rates = [200_000u64, 400_000, 800_000];
        let qps = [40, 34, 28];
        VideoManifest::new(
            "cbr",
            2.0,
            (0..3)
                .map(|k| VersionInfo {
                    index: k + 1,
                    qp: qps[k],
                    segment_sizes: vec![rates[k] * 2; count],
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn stall_accrues_when_buffer_runs_dry() {
        struct Lowest;
        impl AdaptationPolicy for Lowest {
            fn decide(
                &self,
                _: &ClientView,
                _: &EstimatorState,
                _: &ClientConfig,
            ) -> Result<Decision> {
                Ok(Decision {
                    next_version: 3,
                    case_label: CaseLabel::Itb,
                    flexible_threshold: None,
                    target_bitrate: None,
                })
            }
        }
        // Version 3 segments take 1.6e6/4e5 = 4 s each against 2 s of media.
        let trace = BandwidthTrace::constant(400_000.0).unwrap();
        let cfg = ClientConfig {
            rtt: 0.0,
            start_version: 3,
            ..ClientConfig::default()
        };
        let log = run_session(&cbr(4), &trace, &cfg, &Lowest).unwrap();
        assert_eq!(log.records[0].stall_s, 0.0);
        for r in &log.records[1..] {
            assert!((r.stall_s - 2.0).abs() < 1e-12);
            assert!((r.buffer_after_s - 2.0).abs() < 1e-12);
        }
        assert!((log.total_stall() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn buffer_saturates_and_reaches_top_version() {
        let trace = BandwidthTrace::constant(5e6).unwrap();
        let log = simulate(&cbr(200), &trace, &ClientConfig::avg(10)).unwrap();
        assert_eq!(log.records.last().unwrap().version, 3);
        assert_eq!(log.total_stall(), 0.0);
        for r in &log.records {
            assert!(r.buffer_after_s <= 50.0 + 2.0);
        }
        let tail = &log.records[150..];
        assert!(tail.iter().all(|r| r.buffer_after_s > 50.0));
    }

    #[test]
    fn start_version_out_of_range_is_rejected() {
        let trace = BandwidthTrace::constant(5e6).unwrap();
        let cfg = ClientConfig {
            start_version: 4,
            ..ClientConfig::default()
        };
        assert!(simulate(&cbr(5), &trace, &cfg).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_csv_columns() {
        let trace = BandwidthTrace::constant(1e6).unwrap();
        let log = simulate(&cbr(20), &trace, &ClientConfig::itb()).unwrap();
        let text = log.to_jsonl();
        let back = SessionLog::from_jsonl(text.as_bytes(), "mem").unwrap();
        assert_eq!(back, log);
        let csv = log.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 21);
    }
}
