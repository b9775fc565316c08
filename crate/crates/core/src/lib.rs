//! Trace-driven simulation of HTTP adaptive streaming for variable-bitrate
//! video.
//!
//! The crate models a client that downloads fixed-duration segments, each
//! available in several QP-ordered versions, over a piecewise-constant
//! bandwidth trace. Two adaptation policies are provided:
//!
//! * **AVG-N**: buffer-based adaptation driven by per-version
//!   *representative bitrates* (moving averages of the last `N` segment
//!   bitrates, estimated across versions with a QP model) and a smoothed
//!   throughput estimate.
//! * **ITB**: picks, every segment, the highest version whose instant bitrate
//!   is below the instant throughput.
//!
//! Policies only ever see a [`ClientView`], which holds the sizes of received
//! segments and nothing else from the manifest.

pub mod engine;
pub mod error;
pub mod estimators;
pub mod metrics;
pub mod model;
pub mod policy;
pub mod scenario;

pub use engine::{download_time, run_session, simulate, SegmentRecord, SessionHeader, SessionLog};
pub use error::{Error, Result};
pub use estimators::{estimate_cross_version_bitrate, EstimatorState};
pub use metrics::{buffer_cdf, compute_stats, SessionStats};
pub use model::{
    segment_bitrate, BandwidthTrace, Breakpoint, ClientConfig, ClientView, PolicyKind, UptrendGate,
    VersionInfo, VideoManifest,
};
pub use policy::{
    avg_decide, flexible_threshold, itb_decide, select_panic_version, AdaptationPolicy, CaseLabel,
    Decision,
};
pub use scenario::{gen_random_bandwidth, gen_rect_bandwidth, gen_vbr_ladder, LadderSpec};
