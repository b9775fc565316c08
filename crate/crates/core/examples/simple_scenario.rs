//! Runs the rectangular-bandwidth scenario for every policy and prints the
//! comparison table. Segments requested before the first bandwidth drop are
//! left out of the statistics.

use vbr_abr::metrics::comparison_table;
use vbr_abr::{
    compute_stats, gen_rect_bandwidth, gen_vbr_ladder, simulate, ClientConfig, LadderSpec,
};

fn main() -> vbr_abr::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);
    let manifest = gen_vbr_ladder(&LadderSpec::sony_like(seed))?;
    let trace = gen_rect_bandwidth(2.5e6, 0.5e6, 100.0, 100.0, 600.0)?;
    let mut columns = Vec::new();
    for cfg in [
        ClientConfig::itb(),
        ClientConfig::avg(10),
        ClientConfig::avg(30),
        ClientConfig::avg(50),
    ] {
        let log = simulate(&manifest, &trace, &cfg)?;
        if std::env::var_os("VERBOSE").is_some() {
            for r in &log.records {
                println!(
                    "{} {} v{} buf {:.1} thr {:.0} {}",
                    cfg.label(),
                    r.index,
                    r.version,
                    r.buffer_after_s,
                    r.throughput_bps / 1e3,
                    r.case
                );
            }
        }
        let warmup = log
            .records
            .iter()
            .position(|r| r.request_time_s >= 100.0)
            .unwrap_or(0);
        columns.push((cfg.label(), compute_stats(&log, warmup)?));
    }
    print!("{}", comparison_table(&columns));
    Ok(())
}
