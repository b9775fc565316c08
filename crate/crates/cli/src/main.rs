//! `vbr-abr`: generate inputs, run streaming sessions and summarize logs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vbr_abr::engine::write_file;
use vbr_abr::metrics::{cdf_to_csv, comparison_table, uniform_grid};
use vbr_abr::{
    buffer_cdf, compute_stats, gen_random_bandwidth, gen_rect_bandwidth, gen_vbr_ladder, simulate,
    BandwidthTrace, ClientConfig, LadderSpec, PolicyKind, SessionLog, SessionStats, UptrendGate,
    VideoManifest,
};

#[derive(Parser)]
#[command(
    name = "vbr-abr",
    version,
    about = "Simulate adaptive streaming of VBR video over bandwidth traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more policies over a manifest and a bandwidth trace.
    Run(RunArgs),
    /// Generate a bandwidth trace or a synthetic ladder.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Recompute statistics from an existing JSONL session log.
    Stats(StatsArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Bandwidth trace CSV (`time_s,bandwidth_kbps`).
    #[arg(long)]
    bandwidth: PathBuf,
    /// Policy to run: `avg`, `avg-N` or `itb`. Repeat to compare several.
    #[arg(long = "policy", default_value = "avg")]
    policies: Vec<String>,
    /// Window size for a plain `avg` policy.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    beta_max: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Round-trip time in seconds.
    #[arg(long)]
    rtt: Option<f64>,
    #[arg(long)]
    start_version: Option<usize>,
    #[arg(long, value_parser = ["prose", "pseudocode"])]
    uptrend_gate: Option<String>,
    /// Leading segments left out of the statistics.
    #[arg(long, default_value_t = 0)]
    warmup: usize,
    /// Spacing of the buffer CDF grid, seconds.
    #[arg(long, default_value_t = 0.5)]
    cdf_step: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value_t = 0)]
    warmup: usize,
    #[arg(long, default_value_t = 0.5)]
    cdf_step: f64,
    /// Directory for `stats.json` and `buffer_cdf.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenKind {
    Bandwidth {
        #[command(subcommand)]
        shape: TraceShape,
    },
    Ladder(LadderArgs),
}

#[derive(Subcommand)]
enum TraceShape {
    /// Alternating high/low levels, starting high. Rates in kbps.
    Rect {
        high_kbps: f64,
        low_kbps: f64,
        period_high: f64,
        period_low: f64,
        total: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random log-uniform levels with uniform hold times. Rates in kbps.
    Random {
        low_kbps: f64,
        high_kbps: f64,
        min_hold: f64,
        max_hold: f64,
        total: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct LadderArgs {
    /// Start from a preset: `sony-like` or `t2-like`.
    #[arg(long)]
    preset: Option<String>,
    /// Keep only the lowest N versions.
    #[arg(long)]
    versions: Option<usize>,
    /// QP per version, comma separated, decreasing.
    #[arg(long, value_delimiter = ',')]
    qps: Option<Vec<i32>>,
    /// Mean bitrate per version in kbps, comma separated.
    #[arg(long, value_delimiter = ',')]
    avg_kbps: Option<Vec<f64>>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    segment_duration: Option<f64>,
    #[arg(long)]
    burstiness: Option<f64>,
    #[arg(long)]
    burst_period: Option<usize>,
    #[arg(long)]
    model_error: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    title: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Failure carrying the process exit code: 2 for configuration, 3 for I/O.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<vbr_abr::Error> for Failure {
    fn from(e: vbr_abr::Error) -> Self {
        Self {
            code: if e.is_io() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Gen { kind } => cmd_gen(kind),
        Command::Stats(args) => cmd_stats(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

/// Parses `avg`, `avg-N` or `itb` on top of the shared overrides.
fn policy_config(id: &str, base: &ClientConfig) -> CliResult<ClientConfig> {
    let id = id.trim().to_ascii_lowercase();
    let mut cfg = base.clone();
    if id == "itb" {
        cfg.policy = PolicyKind::Itb;
    } else if id == "avg" {
        cfg.policy = PolicyKind::Avg;
    } else if let Some(n) = id.strip_prefix("avg-") {
        cfg.policy = PolicyKind::Avg;
        cfg.window_n = n
            .parse()
            .map_err(|_| Failure::config(format!("--policy: bad window in {id:?}")))?;
    } else {
        return Err(Failure::config(format!(
            "--policy: unknown policy {id:?} (expected avg, avg-N or itb)"
        )));
    }
    cfg.validate()
        .map_err(|e| Failure::config(format!("policy {id}: {e}")))?;
    Ok(cfg)
}

fn base_config(args: &RunArgs) -> CliResult<ClientConfig> {
    let mut cfg = ClientConfig::default();
    if let Some(v) = args.window {
        cfg.window_n = v;
    }
    if let Some(v) = args.beta_min {
        cfg.beta_min = v;
    }
    if let Some(v) = args.beta_max {
        cfg.beta_max = v;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.theta {
        cfg.theta = v;
    }
    if let Some(v) = args.rtt {
        cfg.rtt = v;
    }
    if let Some(v) = args.start_version {
        cfg.start_version = v;
    }
    if let Some(g) = &args.uptrend_gate {
        cfg.uptrend_gate = g.parse::<UptrendGate>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", dir.display()),
    })
}

fn cdf_grid(upper: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Failure::config(format!(
            "--cdf-step must be positive, got {step}"
        )));
    }
    Ok(uniform_grid(upper, step))
}

fn write_outputs(dir: &Path, log: &SessionLog, stats: &SessionStats, grid: &[f64]) -> CliResult {
    create_dir(dir)?;
    log.save_jsonl(dir.join("session.jsonl"))?;
    log.save_csv(dir.join("session.csv"))?;
    let json = serde_json::to_string_pretty(stats).expect("stats serialize") + "\n";
    write_file(&dir.join("stats.json"), json.as_bytes())?;
    let table = comparison_table(&[(log.header.policy_label.clone(), stats.clone())]);
    write_file(&dir.join("stats.txt"), table.as_bytes())?;
    let cdf = buffer_cdf(log, grid)?;
    write_file(&dir.join("buffer_cdf.csv"), cdf_to_csv(&cdf).as_bytes())?;
    Ok(())
}

fn cmd_run(args: &RunArgs) -> CliResult {
    let base = base_config(args)?;
    let configs = args
        .policies
        .iter()
        .map(|p| policy_config(p, &base))
        .collect::<CliResult<Vec<_>>>()?;
    let mut seen = std::collections::HashSet::new();
    for cfg in &configs {
        if !seen.insert(cfg.label()) {
            return Err(Failure::config(format!(
                "--policy: {} given more than once",
                cfg.label()
            )));
        }
    }
    let manifest = VideoManifest::load(&args.manifest)?;
    let trace = BandwidthTrace::load(&args.bandwidth)?;
    let grid = cdf_grid(base.beta_max + manifest.segment_duration(), args.cdf_step)?;
    create_dir(&args.out)?;

    // Sessions share nothing, so each runs on its own thread.
    let results: Vec<CliResult<(String, SessionStats)>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                let (manifest, trace, grid) = (&manifest, &trace, &grid);
                s.spawn(move || {
                    let log = simulate(manifest, trace, cfg)?;
                    let stats = compute_stats(&log, args.warmup)?;
                    let dir = args.out.join(cfg.label().to_ascii_lowercase());
                    write_outputs(&dir, &log, &stats, grid)?;
                    Ok((cfg.label(), stats))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("session thread panicked"))
            .collect()
    });
    let columns = results.into_iter().collect::<CliResult<Vec<_>>>()?;

    let table = comparison_table(&columns);
    write_file(&args.out.join("comparison.txt"), table.as_bytes())?;
    let merged: BTreeMap<&str, &SessionStats> =
        columns.iter().map(|(l, s)| (l.as_str(), s)).collect();
    let json = serde_json::to_string_pretty(&merged).expect("stats serialize") + "\n";
    write_file(&args.out.join("comparison.json"), json.as_bytes())?;
    print!("{table}");
    Ok(())
}

fn cmd_stats(args: &StatsArgs) -> CliResult {
    let log = SessionLog::load_jsonl(&args.log)?;
    let stats = compute_stats(&log, args.warmup)?;
    print!(
        "{}",
        comparison_table(&[(log.header.policy_label.clone(), stats.clone())])
    );
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        let json = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
        write_file(&dir.join("stats.json"), json.as_bytes())?;
        let upper = log.header.config.beta_max + log.header.segment_duration_s;
        let cdf = buffer_cdf(&log, &cdf_grid(upper, args.cdf_step)?)?;
        write_file(&dir.join("buffer_cdf.csv"), cdf_to_csv(&cdf).as_bytes())?;
    }
    Ok(())
}

fn cmd_gen(kind: GenKind) -> CliResult {
    match kind {
        GenKind::Bandwidth { shape } => {
            let (trace, out) = match shape {
                TraceShape::Rect {
                    high_kbps,
                    low_kbps,
                    period_high,
                    period_low,
                    total,
                    out,
                } => (
                    gen_rect_bandwidth(
                        high_kbps * 1000.0,
                        low_kbps * 1000.0,
                        period_high,
                        period_low,
                        total,
                    )?,
                    out,
                ),
                TraceShape::Random {
                    low_kbps,
                    high_kbps,
                    min_hold,
                    max_hold,
                    total,
                    seed,
                    out,
                } => (
                    gen_random_bandwidth(
                        low_kbps * 1000.0,
                        high_kbps * 1000.0,
                        min_hold,
                        max_hold,
                        total,
                        seed,
                    )?,
                    out,
                ),
            };
            trace.save(&out)?;
            println!(
                "wrote {} breakpoints to {}",
                trace.breakpoints().len(),
                out.display()
            );
        }
        GenKind::Ladder(args) => {
            let spec = ladder_spec(&args)?;
            let manifest = gen_vbr_ladder(&spec)?;
            manifest.save(&args.out)?;
            println!(
                "wrote {} versions x {} segments to {}",
                manifest.num_versions(),
                manifest.num_segments(),
                args.out.display()
            );
        }
    }
    Ok(())
}

fn ladder_spec(args: &LadderArgs) -> CliResult<LadderSpec> {
    let mut spec = match &args.preset {
        Some(name) => LadderSpec::preset(name, args.seed)?,
        None => {
            let (Some(qps), Some(kbps)) = (&args.qps, &args.avg_kbps) else {
                return Err(Failure::config(
                    "gen ladder needs --preset or both --qps and --avg-kbps",
                ));
            };
            LadderSpec {
                title: "custom".into(),
                num_versions: qps.len(),
                qps: qps.clone(),
                target_avg_bitrates: kbps.iter().map(|k| k * 1000.0).collect(),
                ..LadderSpec::sony_like(args.seed)
            }
        }
    };
    if args.preset.is_some() {
        if let Some(qps) = &args.qps {
            spec.qps = qps.clone();
        }
        if let Some(kbps) = &args.avg_kbps {
            spec.target_avg_bitrates = kbps.iter().map(|k| k * 1000.0).collect();
        }
    }
    if let Some(n) = args.versions {
        if n > spec.qps.len() {
            return Err(Failure::config(format!(
                "--versions {n} exceeds the {} available",
                spec.qps.len()
            )));
        }
        spec.qps.truncate(n);
        spec.target_avg_bitrates.truncate(n);
        spec.num_versions = n;
    }
    if let Some(v) = args.segments {
        spec.segment_count = v;
    }
    if let Some(v) = args.segment_duration {
        spec.segment_duration = v;
    }
    if let Some(v) = args.burstiness {
        spec.burstiness = v;
    }
    if let Some(v) = args.burst_period {
        spec.burst_period = v;
    }
    if let Some(v) = args.model_error {
        spec.model_error = v;
    }
    if let Some(v) = args.theta {
        spec.theta = v;
    }
    if let Some(t) = &args.title {
        spec.title = t.clone();
    }
    spec.validate()?;
    Ok(spec)
}
