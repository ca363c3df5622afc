//! Ordinal embedding by hinge-loss descent.
//!
//! Each strict table entry `(i; j, k)` becomes an oriented constraint
//! "`y_far` is farther from `y_i` than `y_near`", penalized by
//! `max(0, 1 - (|y_far - y_i|^2 - |y_near - y_i|^2))`. The loss is minimized by
//! minibatch SGD from a random start until every strict sign holds.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{procrustes_align, DisplacementReport, PointConfig};
use crate::seeds::derive_seed;
use crate::triplets::{Sign, TripletTable};

/// Squared-distance gap a constraint must exceed to count as satisfied.
pub const SATISFACTION_TOLERANCE: f64 = 1e-12;

/// Epochs between full passes that rebuild the active constraint set.
const ACTIVE_RESCAN_PERIOD: usize = 5;
/// Constraints with gap below `1 + ACTIVE_SLACK` are kept active.
const ACTIVE_SLACK: f64 = 1.0;
/// When the decayed learning rate falls below `LR_FLOOR` times its initial
/// value it is reset to `LR_RESET` times the initial value.
const LR_FLOOR: f64 = 1e-2;
const LR_RESET: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub dim: usize,
    /// Initial SGD step.
    pub learning_rate: f64,
    /// Multiplicative step decay applied after every epoch. A step that
    /// decays below 1% of the initial one is reset to 10% of it.
    pub lr_decay: f64,
    /// Constraints per step; `None` means 64.
    pub batch_size: Option<usize>,
    pub max_epochs: usize,
    pub restarts: usize,
    pub rng_seed: u64,
    /// Initial coordinates are drawn uniformly from `[lo, hi]^d`.
    pub init_box: (f64, f64),
    /// Penalize tied entries by `(|y_j - y_i|^2 - |y_k - y_i|^2)^2` instead of ignoring them.
    pub strict_ties: bool,
    /// Dilation about the centroid applied after every epoch (1 disables it).
    /// Growing the configuration never raises the loss of a satisfied
    /// constraint, and it lets the fixed unit margin shrink relative to the
    /// spread of the points, which is what frees SGD from the plateaus where
    /// a few tight constraints stay violated.
    pub expansion: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            dim: 2,
            learning_rate: 0.05,
            lr_decay: 0.999,
            batch_size: None,
            max_epochs: 6000,
            restarts: 10,
            rng_seed: 0,
            init_box: (0.0, 1.0),
            strict_ties: false,
            expansion: 1.003,
        }
    }
}

impl SolverParams {
    pub fn with_dim(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.expansion >= 1.0 && self.expansion.is_finite()) {
            return bad("expansion must be at least 1");
        }
        if !(self.init_box.0 < self.init_box.1) {
            return bad("init_box must be a nonempty interval");
        }
        Ok(())
    }
}

/// Output of one solver run.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub y: PointConfig,
    /// Strict table entries whose sign holds in `y`.
    pub satisfied: usize,
    /// Number of strict entries in the table.
    pub constraints: usize,
    pub epochs_used: usize,
    pub final_loss: f64,
    pub success: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Oriented {
    anchor: u32,
    near: u32,
    far: u32,
}

fn oriented_constraints(table: &TripletTable) -> (Vec<Oriented>, Vec<Oriented>) {
    let mut strict = Vec::with_capacity(table.len());
    let mut ties = Vec::new();
    for t in table.iter() {
        let (a, j, k) = (t.anchor as u32, t.j as u32, t.k as u32);
        match t.sign {
            Sign::Lt => strict.push(Oriented { anchor: a, near: j, far: k }),
            Sign::Gt => strict.push(Oriented { anchor: a, near: k, far: j }),
            Sign::Eq => ties.push(Oriented { anchor: a, near: j, far: k }),
        }
    }
    (strict, ties)
}

#[inline]
fn sq(y: &[f64], d: usize, a: u32, b: u32) -> f64 {
    let (a, b) = (a as usize * d, b as usize * d);
    let mut s = 0.0;
    for c in 0..d {
        let v = y[a + c] - y[b + c];
        s += v * v;
    }
    s
}

/// `far - near` squared-distance gap from the anchor.
#[inline]
fn gap(y: &[f64], d: usize, c: Oriented) -> f64 {
    sq(y, d, c.anchor, c.far) - sq(y, d, c.anchor, c.near)
}

fn check_shape(y: &PointConfig, table: &TripletTable) -> Result<()> {
    if y.len() != table.n() {
        return Err(Error::SizeMismatch {
            left: table.n(),
            right: y.len(),
        });
    }
    Ok(())
}

fn loss_of(y: &[f64], d: usize, strict: &[Oriented], ties: &[Oriented], strict_ties: bool) -> f64 {
    let mut total: f64 = strict.iter().map(|&c| (1.0 - gap(y, d, c)).max(0.0)).sum();
    if strict_ties {
        total += ties
            .iter()
            .map(|&c| {
                let g = gap(y, d, c);
                g * g
            })
            .sum::<f64>();
    }
    total
}

/// Hinge loss of `y` against the table; tied entries are ignored.
pub fn hinge_loss(y: &PointConfig, table: &TripletTable) -> Result<f64> {
    hinge_loss_with_ties(y, table, false)
}

pub fn hinge_loss_with_ties(y: &PointConfig, table: &TripletTable, strict_ties: bool) -> Result<f64> {
    check_shape(y, table)?;
    let (strict, ties) = oriented_constraints(table);
    Ok(loss_of(y.as_slice(), y.dim(), &strict, &ties, strict_ties))
}

/// Accumulates `scale * d(loss term)/dy` for one hinge into `grad`. Returns
/// whether the hinge was active.
#[inline]
fn add_hinge_grad(y: &[f64], d: usize, c: Oriented, scale: f64, grad: &mut [f64]) -> bool {
    if 1.0 - gap(y, d, c) <= 0.0 {
        return false;
    }
    // loss = 1 - |y_f - y_a|^2 + |y_n - y_a|^2
    let (a, n, f) = (c.anchor as usize * d, c.near as usize * d, c.far as usize * d);
    for k in 0..d {
        let ya = y[a + k];
        let yn = y[n + k];
        let yf = y[f + k];
        grad[f + k] -= scale * 2.0 * (yf - ya);
        grad[n + k] += scale * 2.0 * (yn - ya);
        grad[a + k] += scale * 2.0 * (yf - yn);
    }
    true
}

#[inline]
fn add_tie_grad(y: &[f64], d: usize, c: Oriented, scale: f64, grad: &mut [f64]) {
    // loss = g^2, g = |y_f - y_a|^2 - |y_n - y_a|^2
    let g = gap(y, d, c);
    let w = scale * 2.0 * g;
    let (a, n, f) = (c.anchor as usize * d, c.near as usize * d, c.far as usize * d);
    for k in 0..d {
        let ya = y[a + k];
        let yn = y[n + k];
        let yf = y[f + k];
        grad[f + k] += w * 2.0 * (yf - ya);
        grad[n + k] -= w * 2.0 * (yn - ya);
        grad[a + k] -= w * 2.0 * (yf - yn);
    }
}

/// Analytic subgradient of [`hinge_loss`] in all `n * d` coordinates
/// (row-major, same layout as the configuration).
pub fn hinge_gradient(y: &PointConfig, table: &TripletTable) -> Result<PointConfig> {
    hinge_gradient_with_ties(y, table, false)
}

pub fn hinge_gradient_with_ties(
    y: &PointConfig,
    table: &TripletTable,
    strict_ties: bool,
) -> Result<PointConfig> {
    check_shape(y, table)?;
    let (strict, ties) = oriented_constraints(table);
    let d = y.dim();
    let mut grad = vec![0.0; y.as_slice().len()];
    for &c in &strict {
        add_hinge_grad(y.as_slice(), d, c, 1.0, &mut grad);
    }
    if strict_ties {
        for &c in &ties {
            add_tie_grad(y.as_slice(), d, c, 1.0, &mut grad);
        }
    }
    PointConfig::new(d, grad)
}

fn count_satisfied(y: &[f64], d: usize, strict: &[Oriented]) -> usize {
    strict
        .iter()
        .filter(|&&c| gap(y, d, c) > SATISFACTION_TOLERANCE)
        .count()
}

/// Runs SGD from a random start drawn with `params.rng_seed`. Never errors on
/// non-convergence; `success` is false instead.
pub fn solve_embedding(table: &TripletTable, params: &SolverParams) -> Result<SolveReport> {
    params.validate()?;
    let n = table.n();
    if n < 3 {
        return Err(Error::TooFewPoints { required: 3, got: n });
    }
    let d = params.dim;
    let (strict, ties) = oriented_constraints(table);
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let (lo, hi) = params.init_box;
    let mut y: Vec<f64> = (0..n * d).map(|_| rng.gen_range(lo..hi)).collect();

    let (epochs_used, _) = match d {
        1 => run_sgd(Fixed::<1>, &mut y, &strict, &ties, params, &mut rng),
        2 => run_sgd(Fixed::<2>, &mut y, &strict, &ties, params, &mut rng),
        3 => run_sgd(Fixed::<3>, &mut y, &strict, &ties, params, &mut rng),
        4 => run_sgd(Fixed::<4>, &mut y, &strict, &ties, params, &mut rng),
        5 => run_sgd(Fixed::<5>, &mut y, &strict, &ties, params, &mut rng),
        _ => run_sgd(Dynamic(d), &mut y, &strict, &ties, params, &mut rng),
    };
    let satisfied = count_satisfied(&y, d, &strict);

    let y = PointConfig::new(d, y)?;
    let final_loss = loss_of(y.as_slice(), d, &strict, &ties, params.strict_ties);
    // The strict-gap count is a proxy; the exact sign re-check decides success.
    let success = satisfied == strict.len() && strict_signs_hold(table, &y)?;
    Ok(SolveReport {
        y,
        satisfied,
        constraints: strict.len(),
        epochs_used,
        final_loss,
        success,
    })
}

/// Coordinate count known at compile time for the common small dimensions.
trait Dim: Copy {
    fn get(self) -> usize;
}

#[derive(Clone, Copy)]
struct Fixed<const D: usize>;

impl<const D: usize> Dim for Fixed<D> {
    #[inline(always)]
    fn get(self) -> usize {
        D
    }
}

#[derive(Clone, Copy)]
struct Dynamic(usize);

impl Dim for Dynamic {
    #[inline(always)]
    fn get(self) -> usize {
        self.0
    }
}

/// The SGD loop proper; returns `(epochs_used, satisfied)`.
#[allow(clippy::needless_range_loop)]
fn run_sgd<D: Dim>(
    dim: D,
    y: &mut [f64],
    strict: &[Oriented],
    ties: &[Oriented],
    params: &SolverParams,
    rng: &mut ChaCha8Rng,
) -> (usize, usize) {
    let d = dim.get();
    let n = y.len() / d;
    let batch = params.batch_size.unwrap_or(64).max(1);
    let scale = 1.0 / batch as f64;
    let mut active: Vec<(Oriented, bool)> = Vec::new();
    let mut batch_order: Vec<u32> = Vec::new();
    let mut grad = vec![0.0; n * d];
    let mut touched: Vec<u32> = Vec::with_capacity(3 * batch);
    let mut lr = params.learning_rate;
    let mut epochs_used = 0;
    let mut rescan = true;
    let mut satisfied;

    loop {
        // Only constraints close to their margin receive gradient; the rest
        // are rechecked every few epochs. Dilation can only widen a gap, so a
        // constraint far above the margin stays there unless a step moves it.
        if rescan || epochs_used % ACTIVE_RESCAN_PERIOD == 0 {
            active.clear();
            satisfied = strict
                .iter()
                .filter(|&&c| gap(y, d, c) > SATISFACTION_TOLERANCE)
                .count();
            if satisfied == strict.len() || epochs_used >= params.max_epochs {
                return (epochs_used, satisfied);
            }
            active.extend(
                strict
                    .iter()
                    .filter(|&&c| gap(y, d, c) < 1.0 + ACTIVE_SLACK)
                    .map(|&c| (c, false)),
            );
            if params.strict_ties {
                active.extend(ties.iter().map(|&c| (c, true)));
            }
            active.shuffle(rng);
            batch_order.clear();
            batch_order.extend(0..active.len().div_ceil(batch) as u32);
            rescan = false;
        }

        batch_order.shuffle(rng);
        let mut violations_seen = 0usize;
        for &b in &batch_order {
            let start = b as usize * batch;
            for &(c, tie) in &active[start..(start + batch).min(active.len())] {
                if tie {
                    add_tie_grad(y, d, c, scale, &mut grad);
                } else {
                    if gap(y, d, c) <= SATISFACTION_TOLERANCE {
                        violations_seen += 1;
                    }
                    if !add_hinge_grad(y, d, c, scale, &mut grad) {
                        continue;
                    }
                }
                touched.extend([c.anchor, c.near, c.far]);
            }
            for &p in &touched {
                let base = p as usize * d;
                for k in base..base + d {
                    y[k] -= lr * grad[k];
                    grad[k] = 0.0;
                }
            }
            touched.clear();
        }
        epochs_used += 1;
        lr *= params.lr_decay;
        // A few tight constraints can remain violated after the step size has
        // decayed to nothing; a smaller fresh step lets them settle.
        if lr < params.learning_rate * LR_FLOOR {
            lr = params.learning_rate * LR_RESET;
        }
        if params.expansion != 1.0 {
            dilate(y, d, params.expansion);
        }
        if violations_seen == 0 || epochs_used >= params.max_epochs {
            rescan = true;
        }
    }
}

fn dilate(y: &mut [f64], d: usize, factor: f64) {
    let n = (y.len() / d) as f64;
    for c in 0..d {
        let mean = y.iter().skip(c).step_by(d).sum::<f64>() / n;
        for v in y.iter_mut().skip(c).step_by(d) {
            *v = mean + factor * (*v - mean);
        }
    }
}

fn strict_signs_hold(table: &TripletTable, y: &PointConfig) -> Result<bool> {
    if table.count_ties() == 0 {
        return Ok(table.first_violation(y)?.is_none());
    }
    Ok(table.iter().filter(|t| t.sign != Sign::Eq).all(|t| {
        let m = crate::triplets::signed_margin(y, t.anchor, t.j, t.k);
        Sign::classify(m, table.tie_tolerance()) == t.sign
    }))
}

/// One restart of [`worst_of_restarts`].
#[derive(Clone, Debug, PartialEq)]
pub struct RestartRun {
    pub seed: u64,
    pub report: SolveReport,
    /// Displacement from the target after Procrustes alignment; `None` for failed runs.
    pub aligned: Option<DisplacementReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstOfRestarts {
    /// The Procrustes-aligned reconstruction with the largest `d_inf`.
    pub y_worst: PointConfig,
    pub worst: DisplacementReport,
    pub runs: Vec<RestartRun>,
    pub failed_restarts: usize,
}

/// Seed for restart `r` derived from the base seed.
pub fn restart_seed(base: u64, restart: usize) -> u64 {
    derive_seed(base, &[restart as u64])
}

/// Solves the table of `x` `params.restarts` times, aligns each successful
/// reconstruction to `x` and keeps the one whose worst point is farthest
/// from its original position.
pub fn worst_of_restarts(x: &PointConfig, params: &SolverParams) -> Result<WorstOfRestarts> {
    params.validate()?;
    if x.dim() != params.dim {
        return Err(Error::DimensionMismatch {
            expected: params.dim,
            got: x.dim(),
        });
    }
    let table = crate::triplets::build_table(x, 0.0)?;
    let mut runs = Vec::with_capacity(params.restarts);
    let mut best: Option<(PointConfig, DisplacementReport)> = None;
    let mut failed = 0;
    for r in 0..params.restarts {
        let seed = restart_seed(params.rng_seed, r);
        let run_params = SolverParams {
            rng_seed: seed,
            ..params.clone()
        };
        let report = solve_embedding(&table, &run_params)?;
        let aligned = if report.success {
            let (sim, rep) = procrustes_align(x, &report.y)?;
            if best.as_ref().map_or(true, |(_, b)| rep.d_inf > b.d_inf) {
                best = Some((crate::geometry::apply_similarity(&sim, &report.y)?, rep));
            }
            Some(rep)
        } else {
            failed += 1;
            None
        };
        runs.push(RestartRun {
            seed,
            report,
            aligned,
        });
    }
    let (y_worst, worst) = best.ok_or(Error::AllRestartsFailed(params.restarts))?;
    Ok(WorstOfRestarts {
        y_worst,
        worst,
        runs,
        failed_restarts: failed,
    })
}
