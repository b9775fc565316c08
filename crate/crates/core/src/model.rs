//! Shared data model: version ladders, bandwidth traces, client configuration
//! and the client-visible view handed to adaptation policies.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One encoded version of the video.
///
/// `index` is 1-based and a higher index means higher quality (lower QP).
/// Segment sizes are in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionInfo {
    pub index: usize,
    pub qp: i32,
    pub segment_sizes: Vec<u64>,
}

/// The full version ladder of a video, including ground-truth sizes for every
/// (segment, version) pair. Policies never see this type directly.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoManifest {
    title: String,
    segment_duration: f64,
    versions: Vec<VersionInfo>,
}

impl VideoManifest {
    pub fn new(
        title: impl Into<String>,
        segment_duration: f64,
        versions: Vec<VersionInfo>,
    ) -> Result<Self> {
        if !(segment_duration > 0.0 && segment_duration.is_finite()) {
            return Err(Error::input(format!(
                "segment duration must be positive, got {segment_duration}"
            )));
        }
        if versions.len() < 2 {
            return Err(Error::input(format!(
                "a ladder needs at least 2 versions, got {}",
                versions.len()
            )));
        }
        let count = versions[0].segment_sizes.len();
        if count == 0 {
            return Err(Error::input("versions have no segments"));
        }
        for (pos, v) in versions.iter().enumerate() {
            if v.index != pos + 1 {
                return Err(Error::input(format!(
                    "version at position {pos} has index {}, expected {}",
                    v.index,
                    pos + 1
                )));
            }
            if v.segment_sizes.len() != count {
                return Err(Error::input(format!(
                    "version {} has {} segments, expected {count}",
                    v.index,
                    v.segment_sizes.len()
                )));
            }
            if let Some(seg) = v.segment_sizes.iter().position(|&s| s == 0) {
                return Err(Error::input(format!(
                    "version {} segment {seg} has size 0",
                    v.index
                )));
            }
        }
        for pair in versions.windows(2) {
            if pair[0].qp <= pair[1].qp {
                return Err(Error::input(format!(
                    "QP must strictly decrease with version index: version {} has QP {}, version {} has QP {}",
                    pair[0].index, pair[0].qp, pair[1].index, pair[1].qp
                )));
            }
        }
        Ok(Self {
            title: title.into(),
            segment_duration,
            versions,
        })
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn segment_duration(&self) -> f64 {
        self.segment_duration
    }

    pub fn versions(&self) -> &[VersionInfo] {
        &self.versions
    }

    pub fn num_versions(&self) -> usize {
        self.versions.len()
    }

    pub fn num_segments(&self) -> usize {
        self.versions[0].segment_sizes.len()
    }

    /// QP of every version, ordered by index.
    pub fn qps(&self) -> Vec<i32> {
        self.versions.iter().map(|v| v.qp).collect()
    }

    /// Size in bits of segment `index` (0-based) at `version` (1-based).
    pub fn segment_size(&self, version: usize, index: usize) -> Result<u64> {
        let v = version
            .checked_sub(1)
            .and_then(|pos| self.versions.get(pos))
            .ok_or_else(|| {
                Error::input(format!(
                    "version {version} outside [1, {}]",
                    self.versions.len()
                ))
            })?;
        v.segment_sizes.get(index).copied().ok_or_else(|| {
            Error::input(format!(
                "segment index {index} outside [0, {})",
                v.segment_sizes.len()
            ))
        })
    }

    /// Bitrate of one segment in bits per second.
    pub fn segment_bitrate(&self, version: usize, index: usize) -> Result<f64> {
        let size = self.segment_size(version, index)?;
        segment_bitrate(size, self.segment_duration)
    }

    /// Mean of the per-segment bitrates of `version`.
    pub fn average_bitrate(&self, version: usize) -> Result<f64> {
        let n = self.num_segments();
        let mut sum = 0.0;
        for i in 0..n {
            sum += self.segment_bitrate(version, i)?;
        }
        Ok(sum / n as f64)
    }

    /// Replaces the size of one segment, keeping all other invariants.
    pub fn with_segment_size(mut self, version: usize, index: usize, size: u64) -> Result<Self> {
        self.segment_size(version, index)?;
        if size == 0 {
            return Err(Error::input("segment size must be positive"));
        }
        self.versions[version - 1].segment_sizes[index] = size;
        Ok(self)
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let file: ManifestFile = serde_json::from_str(text).map_err(|e| {
            let field = serde_field_hint(&e.to_string());
            Error::parse(origin, field, e.to_string())
        })?;
        let factor = match file.size_unit.as_str() {
            "bits" => 1,
            "bytes" => 8,
            other => {
                return Err(Error::parse(
                    origin,
                    "size_unit",
                    format!("expected \"bits\" or \"bytes\", got {other:?}"),
                ))
            }
        };
        let mut versions = Vec::with_capacity(file.versions.len());
        for v in file.versions {
            let segment_sizes = v
                .segment_sizes
                .into_iter()
                .map(|s| s.checked_mul(factor))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| {
                    Error::parse(
                        origin,
                        "segment_sizes",
                        "size overflows when converted to bits",
                    )
                })?;
            versions.push(VersionInfo {
                index: v.index,
                qp: v.qp,
                segment_sizes,
            });
        }
        VideoManifest::new(file.title, file.segment_duration_s, versions)
            .map_err(|e| Error::parse(origin, "versions", e.to_string()))
    }

    /// Serializes with `size_unit: "bits"`.
    pub fn to_json_string(&self) -> String {
        let file = ManifestFile {
            title: self.title.clone(),
            segment_duration_s: self.segment_duration,
            size_unit: "bits".into(),
            versions: self
                .versions
                .iter()
                .map(|v| ManifestVersion {
                    index: v.index,
                    qp: v.qp,
                    segment_sizes: v.segment_sizes.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("manifest serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::engine::write_file(path.as_ref(), (self.to_json_string() + "\n").as_bytes())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    title: String,
    segment_duration_s: f64,
    size_unit: String,
    versions: Vec<ManifestVersion>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestVersion {
    index: usize,
    qp: i32,
    segment_sizes: Vec<u64>,
}

fn serde_field_hint(msg: &str) -> String {
    // serde_json reports e.g. "missing field `title`" or "unknown field `x`".
    msg.split('`').nth(1).unwrap_or("<document>").to_string()
}

/// Bitrate of a segment of `size_bits` lasting `duration` seconds.
pub fn segment_bitrate(size_bits: u64, duration: f64) -> Result<f64> {
    if size_bits == 0 {
        return Err(Error::input("segment size must be positive"));
    }
    if !(duration > 0.0) {
        return Err(Error::input("segment duration must be positive"));
    }
    Ok(size_bits as f64 / duration)
}

/// A piece of a [`BandwidthTrace`]: `bandwidth` bit/s from `start` seconds on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub start: f64,
    pub bandwidth: f64,
}

/// Piecewise-constant available bandwidth starting at t = 0. The last piece
/// extends forever.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthTrace {
    label: String,
    breakpoints: Vec<Breakpoint>,
}

impl BandwidthTrace {
    pub fn new(label: impl Into<String>, breakpoints: Vec<Breakpoint>) -> Result<Self> {
        let first = breakpoints
            .first()
            .ok_or_else(|| Error::input("bandwidth trace has no breakpoints"))?;
        if first.start != 0.0 {
            return Err(Error::input(format!(
                "first breakpoint must start at 0, got {}",
                first.start
            )));
        }
        for (i, b) in breakpoints.iter().enumerate() {
            if !(b.bandwidth > 0.0 && b.bandwidth.is_finite()) {
                return Err(Error::input(format!(
                    "breakpoint {i}: bandwidth must be positive, got {}",
                    b.bandwidth
                )));
            }
        }
        for (i, pair) in breakpoints.windows(2).enumerate() {
            if !(pair[1].start > pair[0].start && pair[1].start.is_finite()) {
                return Err(Error::input(format!(
                    "breakpoint {}: start times must strictly increase",
                    i + 1
                )));
            }
        }
        Ok(Self {
            label: label.into(),
            breakpoints,
        })
    }

    /// A single-piece trace.
    pub fn constant(bandwidth: f64) -> Result<Self> {
        Self::new(
            format!("constant-{}kbps", bandwidth / 1000.0),
            vec![Breakpoint {
                start: 0.0,
                bandwidth,
            }],
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    /// Position of the piece active at `t` (the last breakpoint with start <= t).
    pub(crate) fn piece_at(&self, t: f64) -> usize {
        self.breakpoints
            .partition_point(|b| b.start <= t)
            .saturating_sub(1)
    }

    /// Available bandwidth at time `t`, in bit/s.
    pub fn bandwidth_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::input(format!("time must be non-negative, got {t}")));
        }
        Ok(self.breakpoints[self.piece_at(t)].bandwidth)
    }

    /// Parses the `time_s,bandwidth_kbps` CSV format.
    pub fn from_csv_str(text: &str, origin: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(origin, "header", e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "time_s" || &headers[1] != "bandwidth_kbps" {
            return Err(Error::parse(
                origin,
                "header",
                format!(
                    "expected `time_s,bandwidth_kbps`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            ));
        }
        let mut points = Vec::new();
        for (row, rec) in reader.deserialize::<TraceRow>().enumerate() {
            let rec =
                rec.map_err(|e| Error::parse(origin, format!("row {}", row + 1), e.to_string()))?;
            points.push(Breakpoint {
                start: rec.time_s,
                bandwidth: rec.bandwidth_kbps * 1000.0,
            });
        }
        let label = Path::new(origin)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| origin.to_string());
        Self::new(label, points).map_err(|e| Error::parse(origin, "breakpoints", e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["time_s", "bandwidth_kbps"])
            .expect("in-memory csv write");
        for b in &self.breakpoints {
            writer
                .write_record([b.start.to_string(), (b.bandwidth / 1000.0).to_string()])
                .expect("in-memory csv write");
        }
        String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8 csv")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::engine::write_file(path.as_ref(), self.to_csv_string().as_bytes())
    }
}

#[derive(Deserialize)]
struct TraceRow {
    time_s: f64,
    bandwidth_kbps: f64,
}

/// Which adaptation rule the client runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Representative-bitrate, buffer-based adaptation.
    Avg,
    /// Instant throughput against instant bitrate, every segment.
    Itb,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Avg => "avg",
            PolicyKind::Itb => "itb",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" => Ok(PolicyKind::Avg),
            "itb" => Ok(PolicyKind::Itb),
            other => Err(Error::input(format!(
                "unknown policy {other:?} (expected avg or itb)"
            ))),
        }
    }
}

/// Which representative bitrate gates an up-switch in the uptrend case.
///
/// `Prose` compares the next-higher version's representative bitrate with the
/// throughput estimate. `Pseudocode` compares the current version's, as the
/// algorithm listing is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UptrendGate {
    #[default]
    Prose,
    Pseudocode,
}

impl FromStr for UptrendGate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prose" => Ok(UptrendGate::Prose),
            "pseudocode" => Ok(UptrendGate::Pseudocode),
            other => Err(Error::input(format!(
                "unknown uptrend gate {other:?} (expected prose or pseudocode)"
            ))),
        }
    }
}

/// Client parameters. Buffer quantities are in seconds of media.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub beta_min: f64,
    pub beta_max: f64,
    /// Number of segments averaged into a representative bitrate.
    pub window_n: usize,
    /// Weight of the newest sample in the smoothed throughput.
    pub delta: f64,
    /// Compensation factor of the cross-version bitrate estimate.
    pub theta: f64,
    pub rtt: f64,
    pub start_version: usize,
    pub policy: PolicyKind,
    pub uptrend_gate: UptrendGate,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            beta_min: 10.0,
            beta_max: 50.0,
            window_n: 30,
            delta: 0.1,
            theta: 1.05,
            rtt: 0.040,
            start_version: 1,
            policy: PolicyKind::Avg,
            uptrend_gate: UptrendGate::Prose,
        }
    }
}

impl ClientConfig {
    /// AVG-`n` with all other parameters at their defaults.
    pub fn avg(window_n: usize) -> Self {
        Self {
            window_n,
            ..Self::default()
        }
    }

    pub fn itb() -> Self {
        Self {
            policy: PolicyKind::Itb,
            ..Self::default()
        }
    }

    /// Short label such as `AVG-30` or `ITB`.
    pub fn label(&self) -> String {
        match self.policy {
            PolicyKind::Avg => format!("AVG-{}", self.window_n),
            PolicyKind::Itb => "ITB".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_min > 0.0 && self.beta_min < self.beta_max && self.beta_max.is_finite()) {
            return Err(Error::input(format!(
                "need 0 < beta_min < beta_max, got beta_min = {}, beta_max = {}",
                self.beta_min, self.beta_max
            )));
        }
        if self.window_n == 0 {
            return Err(Error::input("window_n must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::input(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::input(format!(
                "theta must be positive, got {}",
                self.theta
            )));
        }
        if !(self.rtt >= 0.0 && self.rtt.is_finite()) {
            return Err(Error::input(format!(
                "rtt must be non-negative, got {}",
                self.rtt
            )));
        }
        if self.start_version == 0 {
            return Err(Error::input("start_version is 1-based"));
        }
        Ok(())
    }
}

/// Everything a policy may observe: only what a real client has after
/// receiving segment `last_segment_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientView {
    pub buffer_level: f64,
    pub last_segment_index: usize,
    pub last_version: usize,
    /// Sizes in bits of the segments received so far, keyed by segment index.
    pub received_sizes: BTreeMap<usize, u64>,
    /// QP of every version, ordered by index.
    pub qps: Vec<i32>,
    pub segment_duration: f64,
    /// Instant throughput of each received segment, in order.
    pub throughput_history: Vec<f64>,
}

impl ClientView {
    pub fn num_versions(&self) -> usize {
        self.qps.len()
    }

    /// Instant throughput of the last received segment.
    pub fn last_throughput(&self) -> Option<f64> {
        self.throughput_history.last().copied()
    }

    /// Actual bitrate of the last received segment.
    pub fn last_bitrate(&self) -> Option<f64> {
        self.received_sizes
            .get(&self.last_segment_index)
            .map(|&size| size as f64 / self.segment_duration)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_piece() -> BandwidthTrace {
        BandwidthTrace::new(
            "rect",
            vec![
                Breakpoint {
                    start: 0.0,
                    bandwidth: 2.5e6,
                },
                Breakpoint {
                    start: 100.0,
                    bandwidth: 0.5e6,
                },
            ],
        )
        .unwrap()
    }

    fn ladder(sizes: [u64; 2]) -> Result<VideoManifest> {
        VideoManifest::new(
            "t",
            2.0,
            vec![
                VersionInfo {
                    index: 1,
                    qp: 48,
                    segment_sizes: vec![sizes[0], 407_540],
                },
                VersionInfo {
                    index: 2,
                    qp: 42,
                    segment_sizes: vec![sizes[1], 800_000],
                },
            ],
        )
    }

    #[test]
    fn segment_bitrate_divides_by_duration() {
        assert_eq!(segment_bitrate(4_000_000, 2.0).unwrap(), 2_000_000.0);
        let m = ladder([100, 200]).unwrap();
        assert_eq!(m.segment_bitrate(1, 1).unwrap(), 203_770.0);
        assert!(segment_bitrate(0, 2.0).is_err());
    }

    #[test]
    fn segment_bitrate_rejects_out_of_range() {
        let m = ladder([100, 200]).unwrap();
        assert!(m.segment_bitrate(0, 0).is_err());
        assert!(m.segment_bitrate(3, 0).is_err());
        assert!(m.segment_bitrate(1, 2).is_err());
    }

    #[test]
    fn manifest_rejects_zero_sizes_and_bad_qp_order() {
        assert!(ladder([0, 200]).is_err());
        let bad_qp = VideoManifest::new(
            "t",
            2.0,
            vec![
                VersionInfo {
                    index: 1,
                    qp: 30,
                    segment_sizes: vec![1],
                },
                VersionInfo {
                    index: 2,
                    qp: 30,
                    segment_sizes: vec![2],
                },
            ],
        );
        assert!(bad_qp.is_err());
        let one = VideoManifest::new(
            "t",
            2.0,
            vec![VersionInfo {
                index: 1,
                qp: 30,
                segment_sizes: vec![1],
            }],
        );
        assert!(one.is_err());
        assert!(VideoManifest::new("t", 0.0, ladder([1, 2]).unwrap().versions().to_vec()).is_err());
    }

    #[test]
    fn bandwidth_lookup_is_right_continuous() {
        let trace = two_piece();
        assert_eq!(trace.bandwidth_at(50.0).unwrap(), 2.5e6);
        assert_eq!(trace.bandwidth_at(100.0).unwrap(), 0.5e6);
        assert_eq!(trace.bandwidth_at(250.0).unwrap(), 0.5e6);
        assert_eq!(trace.bandwidth_at(0.0).unwrap(), 2.5e6);
        assert!(trace.bandwidth_at(-1.0).is_err());
    }

    #[test]
    fn trace_rejects_bad_breakpoints() {
        let bp = |s, b| Breakpoint {
            start: s,
            bandwidth: b,
        };
        assert!(BandwidthTrace::new("x", vec![]).is_err());
        assert!(BandwidthTrace::new("x", vec![bp(1.0, 1.0)]).is_err());
        assert!(BandwidthTrace::new("x", vec![bp(0.0, 0.0)]).is_err());
        assert!(BandwidthTrace::new("x", vec![bp(0.0, 1.0), bp(0.0, 2.0)]).is_err());
    }

    #[test]
    fn trace_csv_uses_kbps() {
        let text = "time_s,bandwidth_kbps\n0,2500\n100,500\n";
        let trace = BandwidthTrace::from_csv_str(text, "rect.csv").unwrap();
        assert_eq!(trace, two_piece().with_label("rect"));
        assert_eq!(trace.to_csv_string(), text);
    }

    #[test]
    fn trace_csv_reports_header_errors() {
        let err = BandwidthTrace::from_csv_str("t,bw\n0,1\n", "x.csv").unwrap_err();
        assert!(err.to_string().contains("x.csv"));
        assert!(err.to_string().contains("header"));
    }

    #[test]
    fn manifest_json_converts_bytes_to_bits() {
        let text = r#"{"title":"x","segment_duration_s":2.0,"size_unit":"bytes",
            "versions":[{"index":1,"qp":40,"segment_sizes":[10,20]},
                        {"index":2,"qp":30,"segment_sizes":[30,40]}]}"#;
        let m = VideoManifest::from_json_str(text, "m.json").unwrap();
        assert_eq!(m.versions()[0].segment_sizes, vec![80, 160]);
        let back = VideoManifest::from_json_str(&m.to_json_string(), "again").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn manifest_json_names_missing_field() {
        let err = VideoManifest::from_json_str(r#"{"title":"x"}"#, "m.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("m.json"), "{msg}");
        assert!(msg.contains("segment_duration_s"), "{msg}");
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = ClientConfig::default();
        assert_eq!(
            (cfg.beta_min, cfg.beta_max, cfg.delta, cfg.theta, cfg.rtt),
            (10.0, 50.0, 0.1, 1.05, 0.040)
        );
        cfg.validate().unwrap();
        let bad = ClientConfig {
            beta_min: 50.0,
            ..ClientConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ClientConfig {
            window_n: 0,
            ..ClientConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ClientConfig {
            delta: 0.0,
            ..ClientConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
