use proptest::prelude::*;
use vbr_abr::metrics::compute_stats;
use vbr_abr::{
    buffer_cdf, estimate_cross_version_bitrate, flexible_threshold, segment_bitrate,
    select_panic_version, BandwidthTrace, Breakpoint, CaseLabel, ClientConfig, EstimatorState,
    SegmentRecord, SessionHeader, SessionLog, VersionInfo, VideoManifest,
};

const QPS: [i32; 6] = [48, 42, 38, 34, 28, 22];

fn log_from(versions: &[usize], buffers: &[f64]) -> SessionLog {
    let records = versions
        .iter()
        .zip(buffers)
        .enumerate()
        .map(|(index, (&version, &buffer))| SegmentRecord {
            index,
            version,
            size_bits: 500_000 * version as u64,
            request_time_s: index as f64,
            completion_time_s: index as f64 + 0.5,
            throughput_bps: 1e6,
            buffer_before_s: buffer,
            buffer_after_s: buffer,
            case: CaseLabel::Stable,
            threshold_s: None,
            stall_s: 0.0,
        })
        .collect();
    SessionLog {
        header: SessionHeader {
            manifest_title: "prop".into(),
            trace_label: "prop".into(),
            policy_label: "AVG-30".into(),
            segment_duration_s: 2.0,
            num_versions: 6,
            initial_buffer_s: 2.0,
            config: ClientConfig::default(),
            total_stall_s: 0.0,
        },
        records,
    }
}

proptest! {
    #[test]
    fn rep_bitrates_match_window_means(
        n in 1usize..60,
        theta in 0.8f64..1.3,
        seq in prop::collection::vec((1usize..=6, 1e4f64..2e7), 1..150),
    ) {
        let mut est = EstimatorState::new(6, n).unwrap();
        let mut history = vec![Vec::new(); 6];
        for (i, &(version, b)) in seq.iter().enumerate() {
            let reps = est.ingest_segment(i, version, b, &QPS, theta).unwrap().to_vec();
            for k in 0..6 {
                history[k].push(estimate_or_actual(b, version, k + 1, theta));
                let start = history[k].len().saturating_sub(n);
                let tail = &history[k][start..];
                let brute = tail.iter().sum::<f64>() / tail.len() as f64;
                prop_assert!((reps[k] - brute).abs() <= 1e-9 * brute);
            }
        }
    }

    #[test]
    fn smoothed_throughput_stays_within_sample_range(
        delta in 0.01f64..=1.0,
        samples in prop::collection::vec(1e3f64..1e8, 1..80),
    ) {
        let mut est = EstimatorState::new(2, 1).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for t in samples {
            lo = lo.min(t);
            hi = hi.max(t);
            let s = est.update_smoothed_throughput(t, delta).unwrap();
            prop_assert!(s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn raising_a_sample_never_lowers_the_estimate(
        delta in 0.01f64..=1.0,
        samples in prop::collection::vec(1e3f64..1e8, 1..40),
        pick in any::<prop::sample::Index>(),
        bump in 0.0f64..1e7,
    ) {
        let run = |xs: &[f64]| {
            let mut est = EstimatorState::new(2, 1).unwrap();
            xs.iter().map(|&t| est.update_smoothed_throughput(t, delta).unwrap()).last().unwrap()
        };
        let mut raised = samples.clone();
        raised[pick.index(samples.len())] += bump;
        prop_assert!(run(&raised) >= run(&samples));
    }

    #[test]
    fn round_trip_estimate_multiplies_by_theta_squared(
        b in 1e3f64..1e8,
        theta in 0.5f64..2.0,
        qa in 0i32..51,
        qb in 0i32..51,
    ) {
        let there = estimate_cross_version_bitrate(b, qa, qb, theta);
        let back = estimate_cross_version_bitrate(there, qb, qa, theta);
        prop_assert!((back - theta * theta * b).abs() <= 1e-12 * theta * theta * b);
    }

    #[test]
    fn estimate_decreases_with_target_qp(
        b in 1e3f64..1e8,
        theta in 0.5f64..2.0,
        from in 0i32..51,
        to in 0i32..50,
    ) {
        let lower_qp = estimate_cross_version_bitrate(b, from, to, theta);
        let higher_qp = estimate_cross_version_bitrate(b, from, to + 1, theta);
        prop_assert!(higher_qp < lower_qp);
    }

    #[test]
    fn threshold_lies_strictly_inside_buffer_bounds(
        ratio in 0.0f64..20.0,
        b in 1e3f64..1e8,
        beta_min in 1.0f64..30.0,
        span in 1.0f64..60.0,
    ) {
        let beta_max = beta_min + span;
        let th = flexible_threshold(ratio * b, b, beta_min, beta_max).unwrap();
        prop_assert!(beta_min < th && th < beta_max);
    }

    #[test]
    fn threshold_falls_as_throughput_outgrows_bitrate(
        r in 0.0f64..19.0,
        step in 0.01f64..1.0,
        b in 1e3f64..1e8,
    ) {
        let a = flexible_threshold(r * b, b, 10.0, 50.0).unwrap();
        let c = flexible_threshold((r + step) * b, b, 10.0, 50.0).unwrap();
        prop_assert!(c < a);
    }

    #[test]
    fn panic_choice_is_feasible_unless_nothing_is(
        ladder in prop::collection::vec(1e4f64..1e7, 1..10),
        t in 0.0f64..1.2e7,
    ) {
        let v = select_panic_version(&ladder, t);
        prop_assert!((1..=ladder.len()).contains(&v));
        if ladder.iter().any(|&b| b < t) {
            prop_assert!(ladder[v - 1] < t);
            prop_assert!(ladder.iter().all(|&b| b >= t || b <= ladder[v - 1]));
        } else {
            prop_assert_eq!(v, 1);
        }
    }

    #[test]
    fn cdf_is_monotone_bounded_and_right_continuous(
        buffers in prop::collection::vec(0.0f64..60.0, 1..100),
        mut grid in prop::collection::vec(0.0f64..70.0, 1..40),
    ) {
        // Include the samples themselves so right-continuity is exercised.
        grid.extend(buffers.iter().copied());
        grid.sort_by(f64::total_cmp);
        let log = log_from(&vec![3; buffers.len()], &buffers);
        let cdf = buffer_cdf(&log, &grid).unwrap();
        for w in cdf.windows(2) {
            prop_assert!(w[0].1 <= w[1].1);
        }
        for &(level, frac) in &cdf {
            prop_assert!((0.0..=1.0).contains(&frac));
            let at_or_below = buffers.iter().filter(|&&b| b <= level).count();
            prop_assert_eq!(frac, at_or_below as f64 / buffers.len() as f64);
        }
    }

    #[test]
    fn unit_switch_spread_matches_bernoulli_std(moves in prop::collection::vec(any::<bool>(), 1..400)) {
        let mut versions = vec![3usize];
        for &m in &moves {
            let last = *versions.last().unwrap();
            versions.push(if m { 7 - last } else { last });
        }
        let s = compute_stats(&log_from(&versions, &vec![20.0; versions.len()]), 0).unwrap();
        let p = moves.iter().filter(|&&m| m).count() as f64 / moves.len() as f64;
        prop_assert!((s.std_switch_degrees - (p * (1.0 - p)).sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn buffer_stats_ignore_sample_order(
        buffers in prop::collection::vec(0.0f64..60.0, 2..200),
        seed in any::<u64>(),
    ) {
        let mut shuffled = buffers.clone();
        // Deterministic Fisher-Yates driven by a splitmix sequence.
        let mut state = seed;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            shuffled.swap(i, (z % (i as u64 + 1)) as usize);
        }
        let versions = vec![2; buffers.len()];
        let a = compute_stats(&log_from(&versions, &buffers), 0).unwrap();
        let b = compute_stats(&log_from(&versions, &shuffled), 0).unwrap();
        prop_assert_eq!(a.min_buffer, b.min_buffer);
        prop_assert!((a.std_buffer - b.std_buffer).abs() <= 1e-9 * a.std_buffer.max(1.0));
    }

    #[test]
    fn stats_are_internally_consistent(
        versions in prop::collection::vec(1usize..=6, 1..200),
    ) {
        let s = compute_stats(&log_from(&versions, &vec![10.0; versions.len()]), 0).unwrap();
        prop_assert!(s.min_version as f64 <= s.average_version + 1e-12);
        prop_assert!(s.average_version <= s.max_version as f64 + 1e-12);
        prop_assert!(s.num_switches < versions.len());
    }

    #[test]
    fn manifest_survives_json_round_trip(
        base in prop::collection::vec(1u64..10_000_000, 1..40),
        duration in 0.5f64..10.0,
    ) {
        let versions = (1..=4)
            .map(|k| VersionInfo {
                index: k,
                qp: 40 - 5 * k as i32,
                segment_sizes: base.iter().map(|s| s * k as u64).collect(),
            })
            .collect();
        let m = VideoManifest::new("round trip", duration, versions).unwrap();
        let back = VideoManifest::from_json_str(&m.to_json_string(), "memory").unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn bandwidth_at_breakpoints_is_right_continuous(
        holds in prop::collection::vec((0.1f64..50.0, 1e4f64..1e7), 1..30),
    ) {
        let mut start = 0.0;
        let mut points = Vec::new();
        for &(hold, bandwidth) in &holds {
            points.push(Breakpoint { start, bandwidth });
            start += hold;
        }
        let trace = BandwidthTrace::new("prop", points.clone()).unwrap();
        for p in &points {
            prop_assert_eq!(trace.bandwidth_at(p.start).unwrap(), p.bandwidth);
        }
        prop_assert_eq!(trace.bandwidth_at(start + 1e6).unwrap(), points.last().unwrap().bandwidth);
    }

    #[test]
    fn segment_bitrate_is_positive(size in 1u64..u64::MAX / 2, duration in 1e-3f64..100.0) {
        prop_assert!(segment_bitrate(size, duration).unwrap() > 0.0);
    }
}

fn estimate_or_actual(b: f64, from: usize, to: usize, theta: f64) -> f64 {
    if from == to {
        b
    } else {
        theta * b * 2f64.powf((QPS[from - 1] - QPS[to - 1]) as f64 / 6.0)
    }
}
