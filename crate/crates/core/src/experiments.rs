//! Convergence experiments: sweeps over dimension and point count, bootstrap
//! summaries, log-log slopes, perturbation Monte-Carlo and repeated
//! embeddings of one configuration.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geometry::{
    hausdorff_to_cube_with_resolution, pointwise_displacement, procrustes_align, PointConfig,
};
use crate::seeds::derive_seed;
use crate::solver::{solve_embedding, worst_of_restarts, SolverParams};
use crate::triplets::build_table;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    #[default]
    UniformCube,
    BoxExclusion,
}

impl SamplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingMode::UniformCube => "uniform_cube",
            SamplingMode::BoxExclusion => "box_exclusion",
        }
    }

    fn tag(self) -> u64 {
        match self {
            SamplingMode::UniformCube => 1,
            SamplingMode::BoxExclusion => 2,
        }
    }
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_cube" => Ok(SamplingMode::UniformCube),
            "box_exclusion" => Ok(SamplingMode::BoxExclusion),
            _ => Err(Error::Parse(format!("unknown mode {s:?}"))),
        }
    }
}

/// Where the excluded cube of side `n^{-1/3}` sits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxPlacement {
    /// `[0, n^{-1/3}]^d`.
    #[default]
    Origin,
    /// Centered in the unit cube.
    Center,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    pub ns: Vec<usize>,
    pub trials_per_cell: usize,
    /// Overrides `solver.restarts`.
    pub restarts: usize,
    /// `solver.dim` and `solver.rng_seed` are set per trial.
    pub solver: SolverParams,
    pub master_seed: u64,
    pub mode: SamplingMode,
    pub box_placement: BoxPlacement,
    #[serde(rename = "bootstrap_B")]
    pub bootstrap_b: usize,
    pub ci_level: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dims: vec![1, 2, 3, 4, 5],
            ns: vec![10, 15, 20, 25, 30, 35, 40, 45],
            trials_per_cell: 100,
            restarts: 10,
            solver: SolverParams::default(),
            master_seed: 0,
            mode: SamplingMode::UniformCube,
            box_placement: BoxPlacement::Origin,
            bootstrap_b: 1000,
            ci_level: 0.95,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad("dims must be a nonempty list of positive integers");
        }
        if self.ns.is_empty() || self.ns.iter().any(|&n| n < 3) {
            return bad("ns must be a nonempty list of integers >= 3");
        }
        if self.trials_per_cell == 0 || self.restarts == 0 || self.bootstrap_b == 0 {
            return bad("trials_per_cell, restarts and bootstrap_B must be positive");
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad("ci_level must lie in (0, 1)");
        }
        self.solver.validate()
    }

    /// Solver parameters for one trial.
    pub fn trial_params(&self, dim: usize, seed: u64) -> SolverParams {
        SolverParams {
            dim,
            restarts: self.restarts,
            rng_seed: derive_seed(seed, &[SOLVER_STREAM]),
            ..self.solver.clone()
        }
    }

    /// Seed of one trial, derived from the master seed.
    pub fn trial_seed(&self, dim: usize, n: usize, trial: usize) -> u64 {
        derive_seed(
            self.master_seed,
            &[self.mode.tag(), dim as u64, n as u64, trial as u64],
        )
    }
}

const SAMPLE_STREAM: u64 = 0;
const SOLVER_STREAM: u64 = 1;
const BOOTSTRAP_STREAM: u64 = 0xb007;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub mode: SamplingMode,
    pub dim: usize,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    /// NaN when every restart failed.
    pub d_inf: f64,
    pub d_1: f64,
    pub failed_restarts: usize,
    pub hausdorff: f64,
    /// The only column that differs between reruns.
    pub wall_ms: f64,
}

impl TrialRecord {
    pub fn key(&self) -> (SamplingMode, usize, usize, usize) {
        (self.mode, self.dim, self.n, self.trial)
    }

    pub fn succeeded(&self) -> bool {
        self.d_inf.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: SamplingMode,
    pub dim: usize,
    pub n: usize,
    pub mean_d_inf: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_d_1: f64,
    pub ci_lo1: f64,
    pub ci_hi1: f64,
    pub trials: usize,
}

pub fn sample_uniform_cube<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<PointConfig> {
    if n < 3 || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 3 and d >= 1, got n = {n}, d = {d}"
        )));
    }
    PointConfig::new(d, (0..n * d).map(|_| rng.gen::<f64>()).collect())
}

/// Side of the excluded cube for `n` points.
pub fn excluded_side(n: usize) -> f64 {
    (n as f64).powf(-1.0 / 3.0)
}

/// Uniform points of `[0,1]^d` outside a cube of side `n^{-1/3}`, by rejection.
pub fn sample_box_exclusion<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    placement: BoxPlacement,
    rng: &mut R,
) -> Result<PointConfig> {
    if n < 3 || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 3 and d >= 1, got n = {n}, d = {d}"
        )));
    }
    let side = excluded_side(n);
    let lo = match placement {
        BoxPlacement::Origin => 0.0,
        BoxPlacement::Center => 0.5 - side / 2.0,
    };
    let hi = lo + side;
    let mut coords = Vec::with_capacity(n * d);
    let mut p = vec![0.0; d];
    while coords.len() < n * d {
        p.iter_mut().for_each(|v| *v = rng.gen::<f64>());
        if p.iter().any(|&v| v < lo || v > hi) {
            coords.extend_from_slice(&p);
        }
    }
    PointConfig::new(d, coords)
}

/// Grid estimate of the Hausdorff distance with at most about 10^6 grid nodes.
pub fn sweep_hausdorff(x: &PointConfig) -> Result<f64> {
    let per_axis = (1e6f64).powf(1.0 / x.dim() as f64).floor().min(1000.0).max(2.0);
    Ok(hausdorff_to_cube_with_resolution(x, 1.0 / per_axis)?.value)
}

pub fn sample_for_mode<R: Rng + ?Sized>(
    mode: SamplingMode,
    placement: BoxPlacement,
    n: usize,
    d: usize,
    rng: &mut R,
) -> Result<PointConfig> {
    match mode {
        SamplingMode::UniformCube => sample_uniform_cube(n, d, rng),
        SamplingMode::BoxExclusion => sample_box_exclusion(n, d, placement, rng),
    }
}

/// One trial: sample, solve with restarts, keep the worst aligned run.
pub fn run_trial(config: &ExperimentConfig, dim: usize, n: usize, trial: usize) -> Result<TrialRecord> {
    let start = Instant::now();
    let seed = config.trial_seed(dim, n, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[SAMPLE_STREAM]));
    let x = sample_for_mode(config.mode, config.box_placement, n, dim, &mut rng)?;
    let hausdorff = sweep_hausdorff(&x)?;
    let params = config.trial_params(dim, seed);
    let (d_inf, d_1, failed) = match worst_of_restarts(&x, &params) {
        Ok(w) => (w.worst.d_inf, w.worst.d_1, w.failed_restarts),
        Err(Error::AllRestartsFailed(r)) => (f64::NAN, f64::NAN, r),
        Err(e) => return Err(e),
    };
    Ok(TrialRecord {
        mode: config.mode,
        dim,
        n,
        trial,
        seed,
        d_inf,
        d_1,
        failed_restarts: failed,
        hausdorff,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs every `(dim, n, trial)` cell and summarizes; records come back
/// sorted by `(dim, n, trial)` whatever the parallel schedule.
pub fn run_sweep(config: &ExperimentConfig) -> Result<(Vec<TrialRecord>, Vec<SummaryRow>)> {
    run_sweep_with(config, &BTreeSet::new(), |_| Ok(()))
}

type TrialKey = (SamplingMode, usize, usize, usize);

/// [`run_sweep`] that skips trials whose key is in `done` and hands each
/// finished cell's new records to `sink` (for example to append them to a
/// file). The returned records are only the newly computed ones.
pub fn run_sweep_with<F>(
    config: &ExperimentConfig,
    done: &BTreeSet<TrialKey>,
    mut sink: F,
) -> Result<(Vec<TrialRecord>, Vec<SummaryRow>)>
where
    F: FnMut(&[TrialRecord]) -> Result<()>,
{
    config.validate()?;
    let mut records = Vec::new();
    for &dim in &config.dims {
        for &n in &config.ns {
            let todo: Vec<usize> = (0..config.trials_per_cell)
                .filter(|&t| !done.contains(&(config.mode, dim, n, t)))
                .collect();
            let cell: Vec<TrialRecord> = todo
                .par_iter()
                .map(|&t| run_trial(config, dim, n, t))
                .collect::<Result<_>>()?;
            sink(&cell)?;
            records.extend(cell);
        }
    }
    let summary = summarize(config, &records)?;
    Ok((records, summary))
}

/// One row per `(mode, dim, n)` present in `records`, in sorted order.
/// Failed trials are left out of the means.
pub fn summarize(config: &ExperimentConfig, records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    let cells: BTreeSet<(SamplingMode, usize, usize)> =
        records.iter().map(|r| (r.mode, r.dim, r.n)).collect();
    let mut rows = Vec::with_capacity(cells.len());
    for (mode, dim, n) in cells {
        let mut ok: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.mode == mode && r.dim == dim && r.n == n && r.succeeded())
            .collect();
        ok.sort_by_key(|r| r.trial);
        let inf: Vec<f64> = ok.iter().map(|r| r.d_inf).collect();
        let one: Vec<f64> = ok.iter().map(|r| r.d_1).collect();
        let seed = derive_seed(
            config.master_seed,
            &[BOOTSTRAP_STREAM, mode.tag(), dim as u64, n as u64],
        );
        let (mean_d_inf, ci_lo, ci_hi, mean_d_1, ci_lo1, ci_hi1) = if ok.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = bootstrap_ci(&inf, config.bootstrap_b, config.ci_level, &mut rng)?;
            let (c, d) = bootstrap_ci(&one, config.bootstrap_b, config.ci_level, &mut rng)?;
            (mean(&inf), a, b, mean(&one), c, d)
        };
        rows.push(SummaryRow {
            mode,
            dim,
            n,
            mean_d_inf,
            ci_lo,
            ci_hi,
            mean_d_1,
            ci_lo1,
            ci_hi1,
            trials: ok.len(),
        });
    }
    Ok(rows)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Least-squares slope of `log(mean_d_inf)` against `log(n)` over the rows
/// of one dimension.
pub fn loglog_slope(summary: &[SummaryRow], dim: usize) -> Result<f64> {
    let pts: Vec<(f64, f64)> = summary
        .iter()
        .filter(|r| r.dim == dim && r.mean_d_inf > 0.0 && r.mean_d_inf.is_finite())
        .map(|r| ((r.n as f64).ln(), r.mean_d_inf.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 usable rows for dim {dim}, got {}",
            pts.len()
        )));
    }
    Ok(least_squares_slope(&pts))
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    samples: &[f64],
    b: usize,
    level: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    if b == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(
            "bootstrap needs B >= 1 and level in (0, 1)".into(),
        ));
    }
    let n = samples.len();
    let mut means: Vec<f64> = (0..b)
        .map(|_| (0..n).map(|_| samples[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&means, tail), quantile_sorted(&means, 1.0 - tail)))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, level: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials || !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(
            "Wilson interval needs 0 <= successes <= trials, trials > 0, level in (0, 1)".into(),
        ));
    }
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

/// A point uniform in the `d`-ball of radius `r` around the origin.
pub fn sample_ball<R: Rng + ?Sized>(d: usize, r: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let radius = r * rng.gen::<f64>().powf(1.0 / d as f64);
            return g.into_iter().map(|v| v * radius / norm).collect();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationEstimate {
    pub p_hat: f64,
    pub successes: usize,
    pub trials: usize,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Fraction of perturbations `y_i ~ U(ball(x_i, beta))` that are weakly
/// isotonic to `x`, with a 95% Wilson interval.
pub fn perturbation_probability<R: Rng + ?Sized>(
    x: &PointConfig,
    beta: f64,
    trials: usize,
    rng: &mut R,
) -> Result<PerturbationEstimate> {
    if !(beta > 0.0 && beta.is_finite()) || trials == 0 {
        return Err(Error::InvalidParameter(
            "perturbation needs beta > 0 and at least one trial".into(),
        ));
    }
    let table = build_table(x, 0.0)?;
    let d = x.dim();
    let mut successes = 0;
    let mut y = x.clone();
    for _ in 0..trials {
        for i in 0..x.len() {
            let off = sample_ball(d, beta, rng);
            for (c, (o, v)) in y.point_mut(i).iter_mut().zip(off.iter().zip(x.point(i))) {
                *c = v + o;
            }
        }
        if table.first_violation(&y)?.is_none() {
            successes += 1;
        }
    }
    let (ci_low, ci_high) = wilson_interval(successes, trials, 0.95)?;
    Ok(PerturbationEstimate {
        p_hat: successes as f64 / trials as f64,
        successes,
        trials,
        ci_low,
        ci_high,
    })
}

/// Per-run, per-point displacements of repeated reconstructions of one `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatedEmbedding {
    /// `runs_used × n`, after Procrustes alignment.
    pub displacements: Vec<Vec<f64>>,
    /// Seeds of the runs kept, aligned with `displacements`.
    pub seeds: Vec<u64>,
    /// How often each point had the largest displacement of its run.
    pub argmax_counts: Vec<usize>,
    /// Largest displacement of each kept run.
    pub run_max: Vec<f64>,
    pub failed_runs: usize,
}

impl RepeatedEmbedding {
    pub fn runs_used(&self) -> usize {
        self.displacements.len()
    }

    /// Share of runs whose argmax is among the `k` most frequent points.
    pub fn top_share(&self, k: usize) -> f64 {
        let mut c = self.argmax_counts.clone();
        c.sort_unstable_by(|a, b| b.cmp(a));
        let top: usize = c.iter().take(k).sum();
        top as f64 / self.runs_used().max(1) as f64
    }
}

/// Solves the table of `x` `runs` times from different seeds (derived from
/// `params.rng_seed`); failed runs are counted and dropped.
pub fn repeated_embedding_study(
    x: &PointConfig,
    runs: usize,
    params: &SolverParams,
) -> Result<RepeatedEmbedding> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    if x.dim() != params.dim {
        return Err(Error::DimensionMismatch {
            expected: params.dim,
            got: x.dim(),
        });
    }
    let table = build_table(x, 0.0)?;
    let results: Vec<(u64, Option<Vec<f64>>)> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(params.rng_seed, &[r as u64]);
            let p = SolverParams {
                rng_seed: seed,
                ..params.clone()
            };
            let report = solve_embedding(&table, &p)?;
            if !report.success {
                return Ok((seed, None));
            }
            let (sim, _) = procrustes_align(x, &report.y)?;
            let aligned = crate::geometry::apply_similarity(&sim, &report.y)?;
            Ok((seed, Some(pointwise_displacement(x, &aligned)?)))
        })
        .collect::<Result<_>>()?;
    let mut out = RepeatedEmbedding {
        displacements: Vec::new(),
        seeds: Vec::new(),
        argmax_counts: vec![0; x.len()],
        run_max: Vec::new(),
        failed_runs: 0,
    };
    for (seed, disp) in results {
        let Some(disp) = disp else {
            out.failed_runs += 1;
            continue;
        };
        let (arg, max) = disp
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
        out.argmax_counts[arg] += 1;
        out.run_max.push(max);
        out.seeds.push(seed);
        out.displacements.push(disp);
    }
    Ok(out)
}

pub const TRIAL_HEADER: [&str; 10] = [
    "mode",
    "dim",
    "n",
    "trial",
    "seed",
    "d_inf",
    "d_1",
    "failed_restarts",
    "hausdorff",
    "wall_ms",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "mode",
    "dim",
    "n",
    "mean_d_inf",
    "ci_lo",
    "ci_hi",
    "mean_d_1",
    "ci_lo1",
    "ci_hi1",
    "trials",
];

fn num(v: f64) -> String {
    crate::geometry::format_f64(v)
}

fn trial_row(r: &TrialRecord) -> [String; 10] {
    [
        r.mode.as_str().into(),
        r.dim.to_string(),
        r.n.to_string(),
        r.trial.to_string(),
        r.seed.to_string(),
        num(r.d_inf),
        num(r.d_1),
        r.failed_restarts.to_string(),
        num(r.hausdorff),
        format!("{:.3}", r.wall_ms),
    ]
}

pub fn write_trials_csv<W: Write>(records: &[TrialRecord], w: W, header: bool) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    if header {
        wr.write_record(TRIAL_HEADER)?;
    }
    for r in records {
        wr.write_record(trial_row(r))?;
    }
    wr.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad or missing column {i} in {rec:?}")))
}

pub fn read_trials_csv<R: std::io::Read>(r: R) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    if rd.headers()?.iter().ne(TRIAL_HEADER) {
        return Err(Error::Parse("unexpected trial CSV header".into()));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let mode: String = field(&rec, 0)?;
        out.push(TrialRecord {
            mode: mode.parse()?,
            dim: field(&rec, 1)?,
            n: field(&rec, 2)?,
            trial: field(&rec, 3)?,
            seed: field(&rec, 4)?,
            d_inf: field(&rec, 5)?,
            d_1: field(&rec, 6)?,
            failed_restarts: field(&rec, 7)?,
            hausdorff: field(&rec, 8)?,
            wall_ms: field(&rec, 9)?,
        });
    }
    Ok(out)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SUMMARY_HEADER)?;
    for r in rows {
        wr.write_record([
            r.mode.as_str().into(),
            r.dim.to_string(),
            r.n.to_string(),
            num(r.mean_d_inf),
            num(r.ci_lo),
            num(r.ci_hi),
            num(r.mean_d_1),
            num(r.ci_lo1),
            num(r.ci_hi1),
            r.trials.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: std::io::Read>(r: R) -> Result<Vec<SummaryRow>> {
    let mut rd = csv::Reader::from_reader(r);
    if rd.headers()?.iter().ne(SUMMARY_HEADER) {
        return Err(Error::Parse("unexpected summary CSV header".into()));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let mode: String = field(&rec, 0)?;
        out.push(SummaryRow {
            mode: mode.parse()?,
            dim: field(&rec, 1)?,
            n: field(&rec, 2)?,
            mean_d_inf: field(&rec, 3)?,
            ci_lo: field(&rec, 4)?,
            ci_hi: field(&rec, 5)?,
            mean_d_1: field(&rec, 6)?,
            ci_lo1: field(&rec, 7)?,
            ci_hi1: field(&rec, 8)?,
            trials: field(&rec, 9)?,
        });
    }
    Ok(out)
}

/// Resumable sweep backed by an append-only trial CSV at `trials_path`.
/// Trials already in the file are skipped; returns every record in the file
/// afterwards (old and new, sorted) and the summary over them.
pub fn run_sweep_resumable(
    config: &ExperimentConfig,
    trials_path: &Path,
) -> Result<(Vec<TrialRecord>, Vec<SummaryRow>)> {
    let mut existing = if trials_path.exists() {
        read_trials_csv(std::fs::File::open(trials_path)?)?
    } else {
        Vec::new()
    };
    let done: BTreeSet<TrialKey> = existing.iter().map(TrialRecord::key).collect();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(trials_path)?;
    if existing.is_empty() && file.metadata()?.len() == 0 {
        write_trials_csv(&[], &mut file, true)?;
    }
    let (new, _) = run_sweep_with(config, &done, |cell| {
        write_trials_csv(cell, &mut file, false)?;
        file.sync_data()?;
        Ok(())
    })?;
    existing.extend(new);
    existing.sort_by_key(TrialRecord::key);
    let wanted = |r: &TrialRecord| {
        r.mode == config.mode
            && config.dims.contains(&r.dim)
            && config.ns.contains(&r.n)
            && r.trial < config.trials_per_cell
    };
    existing.retain(wanted);
    let summary = summarize(config, &existing)?;
    Ok((existing, summary))
}
