//! Constructive error bound for weakly isotonic configurations on the line.
//!
//! For `x ⊂ [0,1]` containing both endpoints with one-sided Hausdorff
//! distance `α` to the interval, any weakly isotonic `y` can be mapped by a
//! similarity so that no point moves by `2α(log₂(1/α) + 3/2)` or more. The
//! argument picks a hierarchy of dyadic representatives `x_{m/2^ℓ}`; the
//! [`DyadicWitness`] records that hierarchy and checks its containments.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{cheb_fit_1d, hausdorff_to_cube, ChebFit, PointConfig, Similarity};
use crate::triplets::is_weakly_isotonic;

/// Slack for floating comparisons against exact dyadic interval ends.
const CONTAINMENT_SLACK: f64 = 1e-12;

/// `a_0..=a_k` with `a_0 = 0`, `a_1 = 2`, `a_k = (a_{k-1} + a_{k-2})/2 + 2`,
/// computed exactly.
pub fn gap_sequence(k: usize) -> Vec<BigRational> {
    let two = BigRational::from_integer(BigInt::from(2));
    let mut a = vec![BigRational::zero()];
    if k >= 1 {
        a.push(two.clone());
    }
    for i in 2..=k {
        let next = (&a[i - 1] + &a[i - 2]) / &two + &two;
        a.push(next);
    }
    a
}

/// [`gap_sequence`] rounded to `f64`.
pub fn gap_sequence_f64(k: usize) -> Vec<f64> {
    gap_sequence(k)
        .iter()
        .map(|v| v.to_f64().unwrap_or(f64::INFINITY))
        .collect()
}

/// `2α(log₂(1/α) + 3/2)`.
pub fn bound_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(2.0 * alpha * ((1.0 / alpha).log2() + 1.5))
}

/// Depth used by the bound: `ceil(log₂(1/α))`, never negative.
pub fn default_depth(alpha: f64) -> Result<u32> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok((1.0 / alpha).log2().ceil().max(0.0) as u32)
}

fn endpoint_indices(x: &[f64]) -> Result<(usize, usize)> {
    let lo = x.iter().position(|&v| v == 0.0);
    let hi = x.iter().position(|&v| v == 1.0);
    match (lo, hi) {
        (Some(l), Some(h)) => {
            if let Some(i) = x.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::OutsideUnitCube { index: i });
            }
            Ok((l, h))
        }
        _ => Err(Error::Precondition(
            "x must contain both 0 and 1".into(),
        )),
    }
}

/// Affinely maps the extremes of a 1-D `x` onto 0 and 1. Returns the mapped
/// configuration and its Hausdorff distance to `[0,1]`.
pub fn normalize_target(x: &PointConfig) -> Result<(PointConfig, f64)> {
    let v = x.values_1d()?;
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Degenerate("x has zero diameter".into()));
    }
    let mapped: Vec<f64> = v
        .iter()
        .map(|&t| {
            if t == lo {
                0.0
            } else if t == hi {
                1.0
            } else {
                ((t - lo) / (hi - lo)).clamp(0.0, 1.0)
            }
        })
        .collect();
    let x = PointConfig::from_1d(&mapped);
    let alpha = hausdorff_to_cube(&x)?.value;
    Ok((x, alpha))
}

fn require_isotonic(x: &PointConfig, y: &PointConfig) -> Result<()> {
    let check = is_weakly_isotonic(x, y, 0.0)?;
    match check.first_violation {
        Some(t) => Err(Error::NotIsotonic(t)),
        None => Ok(()),
    }
}

/// Reflects `y` if needed so it is ordered like `x`, then maps it affinely so
/// that the points matching `x = 0` and `x = 1` land on 0 and 1.
pub fn normalize_pair(x: &PointConfig, y: &PointConfig) -> Result<PointConfig> {
    x.check_same_shape(y)?;
    let xs = x.values_1d()?;
    let ys = y.values_1d()?;
    let (lo, hi) = endpoint_indices(xs)?;
    require_isotonic(x, y)?;
    let (y0, y1) = (ys[lo], ys[hi]);
    if y0 == y1 {
        return Err(Error::Degenerate("y maps both endpoints to one point".into()));
    }
    // Dividing by a negative span performs the reflection.
    let mapped: Vec<f64> = ys
        .iter()
        .enumerate()
        .map(|(i, &t)| match i {
            _ if i == lo => 0.0,
            _ if i == hi => 1.0,
            _ => (t - y0) / (y1 - y0),
        })
        .collect();
    Ok(PointConfig::from_1d(&mapped))
}

/// A dyadic rational `m / 2^level` in lowest terms (`0` and `1` have level 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dyadic {
    pub m: u64,
    pub level: u32,
}

impl Dyadic {
    pub fn new(m: u64, level: u32) -> Self {
        let (mut m, mut level) = (m, level);
        while level > 0 && m % 2 == 0 {
            m /= 2;
            level -= 1;
        }
        Self { m, level }
    }

    pub fn value(self) -> f64 {
        self.m as f64 / 2f64.powi(self.level as i32)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.m, self.level)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assignment {
    /// Index into `x` of the representative.
    pub index: usize,
    pub value: f64,
    /// Containment interval `[m/2^ℓ, m/2^ℓ + a_ℓ α]`.
    pub low: f64,
    pub high: f64,
}

/// The dyadic representatives `x_{m/2^ℓ}` for all levels up to `depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicWitness {
    pub depth: u32,
    pub alpha: f64,
    pub assignments: BTreeMap<Dyadic, Assignment>,
}

impl DyadicWitness {
    pub fn get(&self, m: u64, level: u32) -> Option<&Assignment> {
        self.assignments.get(&Dyadic::new(m, level))
    }

    /// JSON object keyed by `"m/2^l"`.
    pub fn to_json(&self) -> Value {
        let mut nodes = Map::new();
        for (k, a) in &self.assignments {
            nodes.insert(
                k.to_string(),
                json!({"index": a.index, "value": a.value, "low": a.low, "high": a.high}),
            );
        }
        json!({"depth": self.depth, "alpha": self.alpha, "assignments": nodes})
    }
}

/// Builds the representative hierarchy and checks every containment.
///
/// `x` must be 1-D, contain 0 and 1, and lie within Hausdorff distance
/// `alpha` of `[0,1]`; `depth` may not exceed `ceil(log₂(1/alpha))`.
pub fn build_dyadic_witness(x: &PointConfig, alpha: f64, depth: u32) -> Result<DyadicWitness> {
    let xs = x.values_1d()?;
    let (lo, hi) = endpoint_indices(xs)?;
    let max_depth = default_depth(alpha)?;
    if depth > max_depth {
        return Err(Error::InvalidParameter(format!(
            "depth {depth} exceeds ceil(log2(1/alpha)) = {max_depth}"
        )));
    }
    let h = hausdorff_to_cube(x)?.value;
    if h > alpha + CONTAINMENT_SLACK {
        return Err(Error::Precondition(format!(
            "Hausdorff distance {h} exceeds alpha {alpha}"
        )));
    }
    let a = gap_sequence_f64(depth as usize);
    let mut sorted: Vec<(f64, usize)> = xs.iter().copied().zip(0..).collect();
    sorted.sort_by(|p, q| p.0.total_cmp(&q.0));

    let mut assignments = BTreeMap::new();
    for (m, idx) in [(0u64, lo), (1, hi)] {
        let v = m as f64;
        assignments.insert(
            Dyadic::new(m, 0),
            Assignment { index: idx, value: v, low: v, high: v },
        );
    }
    for level in 1..=depth {
        let denom = 2f64.powi(level as i32);
        for m in (1..(1u64 << level)).step_by(2) {
            let left = assignments[&Dyadic::new(m - 1, level)].value;
            let right = assignments[&Dyadic::new(m + 1, level)].value;
            let mean = 0.5 * (left + right);
            // When both neighbors are already the right endpoint nothing lies
            // above their mean; the endpoint itself is then the representative.
            let pos = sorted.partition_point(|p| p.0 <= mean);
            let saturated = pos == sorted.len();
            let (value, index) = if saturated { (1.0, hi) } else { sorted[pos] };
            let low = m as f64 / denom;
            let high = low + a[level as usize] * alpha;
            let key = Dyadic::new(m, level);
            if (value <= mean && !saturated) || value < low - CONTAINMENT_SLACK || value > high + CONTAINMENT_SLACK {
                return Err(Error::ContainmentViolated {
                    label: key.to_string(),
                    value,
                    low,
                    high,
                });
            }
            assignments.insert(key, Assignment { index, value, low, high });
        }
    }
    Ok(DyadicWitness {
        depth,
        alpha,
        assignments,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalBoundCheck {
    /// Exact `min_A max_i |x_i - A y_i|` over similarities of the line.
    pub achieved: f64,
    pub bound: f64,
    /// Hausdorff distance of `x` to `[0,1]`.
    pub alpha: f64,
    pub ok: bool,
    pub fit: ChebFit,
}

impl IntervalBoundCheck {
    pub fn similarity(&self) -> Option<Similarity> {
        self.fit.similarity()
    }
}

/// Compares the best alignment of `y` onto `x` against the bound for `x`'s
/// Hausdorff distance. `x` must contain 0 and 1 and the pair must be weakly
/// isotonic.
pub fn verify_interval_bound(x: &PointConfig, y: &PointConfig) -> Result<IntervalBoundCheck> {
    x.check_same_shape(y)?;
    endpoint_indices(x.values_1d()?)?;
    y.values_1d()?;
    require_isotonic(x, y)?;
    let alpha = hausdorff_to_cube(x)?.value;
    let bound = bound_value(alpha)?;
    let fit = cheb_fit_1d(x, y)?;
    Ok(IntervalBoundCheck {
        achieved: fit.residual,
        bound,
        alpha,
        ok: fit.residual < bound,
        fit,
    })
}

/// Like [`verify_interval_bound`] but first maps the extremes of `x` onto
/// 0 and 1, so `x` may be any 1-D configuration with positive diameter.
/// Distances are then measured in the normalized frame.
pub fn verify_interval_bound_normalized(
    x: &PointConfig,
    y: &PointConfig,
) -> Result<IntervalBoundCheck> {
    let (xn, _) = normalize_target(x)?;
    verify_interval_bound(&xn, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn gap_sequence_start() {
        let a = gap_sequence(3);
        assert_eq!(a, vec![rat(0, 1), rat(2, 1), rat(3, 1), rat(9, 2)]);
        assert_eq!(gap_sequence(0).len(), 1);
    }

    #[test]
    fn gap_sequence_growth() {
        let a = gap_sequence(200);
        for (k, v) in a.iter().enumerate() {
            assert!(*v <= BigRational::from_integer(BigInt::from(2 * k)));
        }
        for w in a[1..].windows(2) {
            assert!(w[0] <= w[1]);
        }
        let r = a[200].to_f64().unwrap() / 200.0;
        assert!((r - 4.0 / 3.0).abs() < 0.014, "{r}");
    }

    #[test]
    fn bound_examples() {
        let b = bound_value(2f64.powi(-10)).unwrap();
        assert!((b - 23.0 / 1024.0).abs() < 1e-15);
        assert!((bound_value(0.5).unwrap() - 2.5).abs() < 1e-15);
        assert!(bound_value(0.0).is_err());
        assert!(bound_value(-1.0).is_err());
    }

    #[test]
    fn normalize_examples() {
        let x = PointConfig::from_1d(&[0.0, 0.5, 1.0]);
        // Exactly representable so the tie at the middle anchor survives.
        let y = PointConfig::from_1d(&[0.25, 0.5, 0.75]);
        let z = normalize_pair(&x, &y).unwrap();
        for (a, b) in z.as_slice().iter().zip([0.0, 0.5, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let x2 = PointConfig::from_1d(&[0.0, 0.3, 1.0]);
        let rev = PointConfig::from_1d(&[0.9, 0.6, 0.1]);
        let z = normalize_pair(&x2, &rev).unwrap();
        assert_eq!(z.as_slice()[0], 0.0);
        assert_eq!(z.as_slice()[2], 1.0);
        assert!((z.as_slice()[1] - 0.375).abs() < 1e-15);
        assert_eq!(normalize_pair(&x, &x).unwrap(), x);
        let missing = PointConfig::from_1d(&[0.1, 0.5, 1.0]);
        assert!(matches!(
            normalize_pair(&missing, &y),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn grid_witness() {
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let x = PointConfig::from_1d(&grid);
        let w = build_dyadic_witness(&x, 1.0 / 16.0, 3).unwrap();
        assert_eq!(w.get(1, 1).unwrap().value, 0.625);
        assert_eq!(w.assignments.len(), 9);
        let w0 = build_dyadic_witness(&x, 1.0 / 16.0, 0).unwrap();
        assert_eq!(w0.assignments.len(), 2);
        let json = w.to_json();
        assert!(json["assignments"]["1/2^1"]["value"].as_f64().is_some());
        assert!(json["assignments"]["0/2^0"].is_object());
    }

    #[test]
    fn witness_saturates_at_right_endpoint() {
        // x_{1/2} is already 1, so nothing lies above the mean of x_{1/2} and 1.
        let x = PointConfig::from_1d(&[0.0, 0.3, 1.0]);
        let w = build_dyadic_witness(&x, 0.35, 2).unwrap();
        assert_eq!(w.get(1, 1).unwrap().value, 1.0);
        assert_eq!(w.get(3, 2).unwrap().value, 1.0);
        assert_eq!(w.get(3, 2).unwrap().index, 2);
        assert_eq!(w.get(1, 2).unwrap().value, 1.0);
    }

    #[test]
    fn witness_rejects_understated_alpha() {
        let x = PointConfig::from_1d(&[0.0, 0.1, 1.0]);
        assert!(build_dyadic_witness(&x, 0.1, 1).is_err());
        assert!(build_dyadic_witness(&x, 0.45, 1).is_ok());
    }

    #[test]
    fn identity_is_within_bound() {
        let x = PointConfig::from_1d(&[0.0, 0.3, 0.55, 1.0]);
        let c = verify_interval_bound(&x, &x).unwrap();
        assert!(c.achieved < 1e-12);
        assert!(c.ok);
    }

    #[test]
    fn non_isotonic_rejected() {
        let x = PointConfig::from_1d(&[0.0, 0.3, 1.0]);
        let y = PointConfig::from_1d(&[0.0, 0.7, 1.0]);
        assert!(matches!(
            verify_interval_bound(&x, &y),
            Err(Error::NotIsotonic(_))
        ));
    }
}
