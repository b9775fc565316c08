//! Session statistics and buffer-level distributions.
//!
//! Switch-degree spread is the population standard deviation over every
//! consecutive pair of segments, zero-degree pairs included. Buffer
//! statistics use the per-segment `buffer_after` samples, not a time-weighted
//! integral.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::SessionLog;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub average_bitrate: f64,
    pub average_version: f64,
    pub max_version: usize,
    pub min_version: usize,
    pub num_switches: usize,
    pub max_switch_degree: usize,
    pub std_switch_degrees: f64,
    pub min_buffer: f64,
    pub std_buffer: f64,
    pub total_stall: f64,
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    xs.sum::<f64>() / n as f64
}

fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Statistics over the records after the first `warmup_exclude` segments.
pub fn compute_stats(log: &SessionLog, warmup_exclude: usize) -> Result<SessionStats> {
    if log.records.is_empty() {
        return Err(Error::input("session log has no records"));
    }
    if warmup_exclude >= log.records.len() {
        return Err(Error::input(format!(
            "warm-up exclusion {warmup_exclude} leaves no records out of {}",
            log.records.len()
        )));
    }
    let recs = &log.records[warmup_exclude..];
    let duration = log.header.segment_duration_s;
    let versions: Vec<usize> = recs.iter().map(|r| r.version).collect();
    let degrees: Vec<f64> = versions
        .windows(2)
        .map(|w| w[0].abs_diff(w[1]) as f64)
        .collect();
    let buffers: Vec<f64> = recs.iter().map(|r| r.buffer_after_s).collect();

    Ok(SessionStats {
        average_bitrate: mean(recs.iter().map(|r| r.size_bits as f64 / duration)),
        average_version: mean(versions.iter().map(|&v| v as f64)),
        max_version: *versions.iter().max().expect("non-empty"),
        min_version: *versions.iter().min().expect("non-empty"),
        num_switches: degrees.iter().filter(|&&d| d > 0.0).count(),
        max_switch_degree: degrees.iter().fold(0.0_f64, |a, &d| a.max(d)) as usize,
        std_switch_degrees: population_std(&degrees),
        min_buffer: buffers.iter().copied().fold(f64::INFINITY, f64::min),
        std_buffer: population_std(&buffers),
        total_stall: recs.iter().map(|r| r.stall_s).sum(),
    })
}

/// Empirical CDF of the per-segment buffer levels at each grid point.
pub fn buffer_cdf(log: &SessionLog, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if log.records.is_empty() {
        return Err(Error::input("session log has no records"));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::input("CDF grid must be sorted ascending"));
    }
    let mut samples: Vec<f64> = log.records.iter().map(|r| r.buffer_after_s).collect();
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    Ok(grid
        .iter()
        .map(|&level| {
            let count = samples.partition_point(|&s| s <= level);
            (level, count as f64 / n)
        })
        .collect())
}

/// Evenly spaced grid from 0 to `upper` inclusive.
pub fn uniform_grid(upper: f64, step: f64) -> Vec<f64> {
    let steps = (upper / step).round() as usize;
    (0..=steps).map(|i| i as f64 * step).collect()
}

pub fn cdf_to_csv(cdf: &[(f64, f64)]) -> String {
    let mut out = String::from("buffer_s,fraction\n");
    for (level, frac) in cdf {
        writeln!(out, "{level},{frac}").expect("write to string");
    }
    out
}

const ROWS: [&str; 10] = [
    "Average bitrate (kbps)",
    "Average version",
    "Maximum version",
    "Minimum version",
    "Number of switches",
    "Maximum switch degree",
    "STD of switch degrees",
    "Minimum buffer level (s)",
    "STD of buffer levels (s)",
    "Total stall (s)",
];

fn row_values(s: &SessionStats) -> [String; 10] {
    [
        format!("{:.1}", s.average_bitrate / 1000.0),
        format!("{:.2}", s.average_version),
        s.max_version.to_string(),
        s.min_version.to_string(),
        s.num_switches.to_string(),
        s.max_switch_degree.to_string(),
        format!("{:.2}", s.std_switch_degrees),
        format!("{:.1}", s.min_buffer),
        format!("{:.2}", s.std_buffer),
        format!("{:.2}", s.total_stall),
    ]
}

/// Aligned text table with one column per labelled session.
pub fn comparison_table(columns: &[(String, SessionStats)]) -> String {
    let cells: Vec<[String; 10]> = columns.iter().map(|(_, s)| row_values(s)).collect();
    let label_width = ROWS.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = columns
        .iter()
        .zip(&cells)
        .map(|((name, _), vals)| {
            vals.iter()
                .map(String::len)
                .chain([name.len()])
                .max()
                .unwrap_or(0)
        })
        .collect();

    let mut out = String::new();
    write!(out, "{:<label_width$}", "Statistics").unwrap();
    for ((name, _), w) in columns.iter().zip(&widths) {
        write!(out, "  {name:>w$}").unwrap();
    }
    out.push('\n');
    for (row, label) in ROWS.iter().enumerate() {
        write!(out, "{label:<label_width$}").unwrap();
        for (vals, w) in cells.iter().zip(&widths) {
            write!(out, "  {:>w$}", vals[row]).unwrap();
        }
        out.push('\n');
    }
    out
}
