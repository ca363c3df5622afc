use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ordembed::experiments::{
    bootstrap_ci, excluded_side, mean, read_summary_csv, read_trials_csv, run_sweep,
    run_sweep_resumable, sample_box_exclusion, sample_uniform_cube, wilson_interval,
    write_summary_csv, write_trials_csv, BoxPlacement, ExperimentConfig, SamplingMode, TrialRecord,
};

fn small_config(seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        dims: vec![1, 2],
        ns: vec![6, 8, 10],
        trials_per_cell: 3,
        restarts: 2,
        master_seed: seed,
        ..ExperimentConfig::default()
    };
    c.solver.max_epochs = 2000;
    c
}

fn without_timing(mut r: Vec<TrialRecord>) -> Vec<TrialRecord> {
    for t in &mut r {
        t.wall_ms = 0.0;
    }
    r
}

#[test]
fn sweep_is_reproducible_except_timing() {
    let (a, sa) = run_sweep(&small_config(3)).unwrap();
    let (b, sb) = run_sweep(&small_config(3)).unwrap();
    assert_eq!(without_timing(a.clone()), without_timing(b));
    assert_eq!(sa, sb);
    let (c, _) = run_sweep(&small_config(4)).unwrap();
    assert_ne!(without_timing(a), without_timing(c));
}

#[test]
fn resumed_sweep_matches_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trials.csv");
    let mut partial = small_config(9);
    partial.trials_per_cell = 1;
    run_sweep_resumable(&partial, &path).unwrap();
    let (resumed, rs) = run_sweep_resumable(&small_config(9), &path).unwrap();
    let (direct, ds) = run_sweep(&small_config(9)).unwrap();
    assert_eq!(without_timing(resumed), without_timing(direct));
    assert_eq!(rs, ds);
    let again = read_trials_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(again.len(), 2 * 3 * 3);
}

#[test]
fn csv_round_trips() {
    let (records, summary) = run_sweep(&small_config(1)).unwrap();
    let mut buf = Vec::new();
    write_trials_csv(&records, &mut buf, true).unwrap();
    // Timing is written to microsecond precision; every other column is exact.
    assert_eq!(without_timing(read_trials_csv(buf.as_slice()).unwrap()), without_timing(records));
    let mut buf = Vec::new();
    write_summary_csv(&summary, &mut buf).unwrap();
    assert_eq!(read_summary_csv(buf.as_slice()).unwrap(), summary);
}

#[test]
fn uniform_cube_has_the_right_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = sample_uniform_cube(20_000, 3, &mut rng).unwrap();
    for c in 0..3 {
        let m = mean(&x.points().map(|p| p[c]).collect::<Vec<_>>());
        // Standard error is sqrt(1/12 / 20000) ~ 0.002.
        assert!((m - 0.5).abs() < 0.01, "coordinate {c} mean {m}");
    }
}

#[test]
fn box_exclusion_keeps_points_out_of_the_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for placement in [BoxPlacement::Origin, BoxPlacement::Center] {
        let n = 64;
        let side = excluded_side(n);
        let x = sample_box_exclusion(n, 2, placement, &mut rng).unwrap();
        assert_eq!(x.len(), n);
        let lo = match placement {
            BoxPlacement::Origin => 0.0,
            BoxPlacement::Center => (1.0 - side) / 2.0,
        };
        for p in x.points() {
            assert!(!p.iter().all(|&v| v >= lo && v < lo + side), "{p:?}");
        }
    }
}

#[test]
fn bootstrap_interval_matches_normal_theory() {
    // For a large sample the percentile interval of the mean approaches mean ± 1.96 s/sqrt(n).
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let v: Vec<f64> = (0..2000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    let (lo, hi) = bootstrap_ci(&v, 4000, 0.95, &mut rng).unwrap();
    let m = mean(&v);
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
    let half = 1.959964 * sd / (v.len() as f64).sqrt();
    assert!(((hi - lo) / 2.0 - half).abs() < 0.1 * half);
    assert!(lo < m && m < hi);
}

#[test]
fn config_round_trips_through_json() {
    let c = ExperimentConfig { mode: SamplingMode::BoxExclusion, ..small_config(5) };
    let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back, c);
}

proptest! {
    #[test]
    fn wilson_interval_brackets_the_estimate(trials in 1usize..5000, frac in 0.0..=1.0f64) {
        let s = ((trials as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(s, trials, 0.95).unwrap();
        let p = s as f64 / trials as f64;
        prop_assert!((0.0..=1.0).contains(&lo) || lo.abs() < 1e-15);
        prop_assert!(hi <= 1.0 + 1e-15);
        prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
    }
}
