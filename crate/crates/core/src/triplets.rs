//! Triplet-comparison tables: for every anchor `i` and pair `j < k` (both
//! distinct from `i`), the sign of `d(x_i, x_j) - d(x_i, x_k)`.
//!
//! Indices are 0-based everywhere. Entries are stored densely in canonical
//! order, lexicographic in `(i, j, k)`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(i8)]
pub enum Sign {
    /// `x_j` is strictly closer to the anchor.
    Lt = -1,
    Eq = 0,
    /// `x_k` is strictly closer to the anchor.
    Gt = 1,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        self as i8
    }

    pub fn from_i8(v: i8) -> Option<Sign> {
        match v {
            -1 => Some(Sign::Lt),
            0 => Some(Sign::Eq),
            1 => Some(Sign::Gt),
            _ => None,
        }
    }

    pub fn classify(diff: f64, tie_tolerance: f64) -> Sign {
        if diff.abs() <= tie_tolerance {
            Sign::Eq
        } else if diff < 0.0 {
            Sign::Lt
        } else {
            Sign::Gt
        }
    }
}

/// One canonical triplet comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripletSign {
    pub anchor: usize,
    pub j: usize,
    pub k: usize,
    pub sign: Sign,
}

/// Number of canonical triples on `n` points: `n * C(n-1, 2)`.
pub fn triple_count(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 2
    }
}

/// `d(x_i, x_j) - d(x_i, x_k)`, evaluated as a ratio of the squared-distance
/// difference so that its sign is exactly the sign of that difference.
#[inline]
pub fn signed_margin(x: &PointConfig, i: usize, j: usize, k: usize) -> f64 {
    let sj = x.sq_dist(i, j);
    let sk = x.sq_dist(i, k);
    let denom = sj.sqrt() + sk.sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (sj - sk) / denom
    }
}

/// Iterates canonical `(i, j, k)` triples in lexicographic order.
pub fn canonical_triples(n: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..n).flat_map(move |i| {
        (0..n).filter(move |&j| j != i).flat_map(move |j| {
            (j + 1..n).filter(move |&k| k != i).map(move |k| (i, j, k))
        })
    })
}

/// All canonical triplet signs of a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct TripletTable {
    n: usize,
    tie_tolerance: f64,
    signs: Vec<Sign>,
}

impl TripletTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tie_tolerance(&self) -> f64 {
        self.tie_tolerance
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    /// Position of `(i; j, k)` in canonical order; `j` and `k` may come in either order.
    pub fn rank(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        let n = self.n;
        if i >= n || j >= n || k >= n || i == j || i == k || j == k {
            return None;
        }
        let (j, k) = if j < k { (j, k) } else { (k, j) };
        // Drop the anchor from the index set and rank (j', k') among pairs of m = n - 1.
        let jr = j - usize::from(j > i);
        let kr = k - usize::from(k > i);
        let m = n - 1;
        let pair_rank = jr * (2 * m - jr - 1) / 2 + (kr - jr - 1);
        Some(i * (m * (m - 1) / 2) + pair_rank)
    }

    /// Sign of `d(x_i, x_j) - d(x_i, x_k)`, with `j`/`k` in either order.
    pub fn sign(&self, i: usize, j: usize, k: usize) -> Option<Sign> {
        let s = self.signs[self.rank(i, j, k)?];
        Some(if j < k {
            s
        } else {
            match s {
                Sign::Lt => Sign::Gt,
                Sign::Gt => Sign::Lt,
                Sign::Eq => Sign::Eq,
            }
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = TripletSign> + '_ {
        canonical_triples(self.n)
            .zip(self.signs.iter())
            .map(|((anchor, j, k), &sign)| TripletSign { anchor, j, k, sign })
    }

    pub fn count_ties(&self) -> usize {
        self.signs.iter().filter(|s| **s == Sign::Eq).count()
    }

    /// First canonical triple on which the two tables disagree.
    pub fn first_difference(&self, other: &TripletTable) -> Result<Option<TripletSign>> {
        if self.n != other.n {
            return Err(Error::SizeMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(self
            .iter()
            .zip(other.signs.iter())
            .find(|(a, b)| a.sign != **b)
            .map(|(a, _)| a))
    }

    /// Checks a candidate configuration against the table without building a
    /// second one; returns the first disagreeing entry.
    pub fn first_violation(&self, y: &PointConfig) -> Result<Option<TripletSign>> {
        if y.len() != self.n {
            return Err(Error::SizeMismatch {
                left: self.n,
                right: y.len(),
            });
        }
        Ok(self
            .iter()
            .find(|t| Sign::classify(signed_margin(y, t.anchor, t.j, t.k), self.tie_tolerance) != t.sign))
    }

    /// CSV with columns `i,j,k,sign`, sign in {-1, 0, 1}, canonical order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "k", "sign"])?;
        for t in self.iter() {
            w.write_record([
                t.anchor.to_string(),
                t.j.to_string(),
                t.k.to_string(),
                t.sign.as_i8().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`TripletTable::write_csv`]. Rows must be in
    /// canonical order and complete.
    pub fn read_csv<R: Read>(reader: R, tie_tolerance: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows: Vec<(usize, usize, usize, Sign)> = Vec::new();
        for record in r.records() {
            let record = record?;
            if record.len() != 4 {
                return Err(Error::Parse(format!("expected 4 columns, got {}", record.len())));
            }
            let field = |c: usize| -> Result<i64> {
                record[c]
                    .trim()
                    .parse::<i64>()
                    .map_err(|e| Error::Parse(format!("{:?}: {e}", &record[c])))
            };
            let (i, j, k, s) = (field(0)?, field(1)?, field(2)?, field(3)?);
            let sign = i8::try_from(s)
                .ok()
                .and_then(Sign::from_i8)
                .ok_or_else(|| Error::Parse(format!("bad sign {s}")))?;
            if i < 0 || j < 0 || k < 0 {
                return Err(Error::Parse("negative index".into()));
            }
            rows.push((i as usize, j as usize, k as usize, sign));
        }
        let n = rows
            .iter()
            .map(|r| r.0.max(r.1).max(r.2) + 1)
            .max()
            .unwrap_or(0);
        if rows.len() != triple_count(n) || n < 3 {
            return Err(Error::Parse(format!(
                "table has {} rows, expected {} for n = {n}",
                rows.len(),
                triple_count(n)
            )));
        }
        for (row, expected) in rows.iter().zip(canonical_triples(n)) {
            if (row.0, row.1, row.2) != expected {
                return Err(Error::Parse(format!(
                    "row {:?} out of canonical order (expected {expected:?})",
                    (row.0, row.1, row.2)
                )));
            }
        }
        Ok(Self {
            n,
            tie_tolerance,
            signs: rows.into_iter().map(|r| r.3).collect(),
        })
    }
}

/// Records every canonical triplet sign of `x`. Differences within
/// `tie_tolerance` are recorded as ties.
pub fn build_table(x: &PointConfig, tie_tolerance: f64) -> Result<TripletTable> {
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewPoints { required: 3, got: n });
    }
    if !(tie_tolerance >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tie tolerance must be nonnegative, got {tie_tolerance}"
        )));
    }
    let signs = canonical_triples(n)
        .map(|(i, j, k)| Sign::classify(signed_margin(x, i, j, k), tie_tolerance))
        .collect();
    Ok(TripletTable {
        n,
        tie_tolerance,
        signs,
    })
}

/// Outcome of a weak-isotonicity check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotonicityCheck {
    pub isotonic: bool,
    /// Lexicographically first triple whose sign differs, carrying `x`'s sign.
    pub first_violation: Option<TripletSign>,
}

/// True iff `x` and `y` agree on every three-valued triplet sign, ties included.
pub fn is_weakly_isotonic(
    x: &PointConfig,
    y: &PointConfig,
    tie_tolerance: f64,
) -> Result<IsotonicityCheck> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::TooFewPoints {
            required: 3,
            got: x.len(),
        });
    }
    let violation = canonical_triples(x.len()).find_map(|(i, j, k)| {
        let sx = Sign::classify(signed_margin(x, i, j, k), tie_tolerance);
        let sy = Sign::classify(signed_margin(y, i, j, k), tie_tolerance);
        (sx != sy).then_some(TripletSign {
            anchor: i,
            j,
            k,
            sign: sx,
        })
    });
    Ok(IsotonicityCheck {
        isotonic: violation.is_none(),
        first_violation: violation,
    })
}

/// `|d(x_i, x_j) - d(x_i, x_k)|` for distinct indices.
pub fn triplet_margin(x: &PointConfig, i: usize, j: usize, k: usize) -> Result<f64> {
    let n = x.len();
    if i >= n || j >= n || k >= n {
        return Err(Error::InvalidParameter(format!(
            "index out of range for {n} points"
        )));
    }
    if i == j || i == k || j == k {
        return Err(Error::InvalidParameter("triplet indices must be distinct".into()));
    }
    Ok(signed_margin(x, i, j, k).abs())
}

/// Half the smallest margin over all canonical triples involving `i` in any
/// role. Moving `x_i` by less than this changes no comparison: each anchored
/// distance moves by less than the radius, so each margin by less than twice
/// it. Returns 0 when `i` takes part in an exact tie.
pub fn free_motion_radius(x: &PointConfig, i: usize) -> Result<f64> {
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewPoints { required: 3, got: n });
    }
    if i >= n {
        return Err(Error::InvalidParameter(format!(
            "index {i} out of range for {n} points"
        )));
    }
    let mut min_margin = f64::INFINITY;
    for a in 0..n {
        for b in 0..n {
            if b == a {
                continue;
            }
            for c in b + 1..n {
                if c == a || (a != i && b != i && c != i) {
                    continue;
                }
                min_margin = min_margin.min(signed_margin(x, a, b, c).abs());
            }
        }
    }
    Ok(min_margin / 2.0)
}

/// For each anchor, the smallest margin over its pairs `j < k`.
pub fn min_margin_per_point(x: &PointConfig) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewPoints { required: 3, got: n });
    }
    Ok((0..n)
        .map(|i| {
            let mut m = f64::INFINITY;
            for j in 0..n {
                if j == i {
                    continue;
                }
                for k in j + 1..n {
                    if k != i {
                        m = m.min(signed_margin(x, i, j, k).abs());
                    }
                }
            }
            m
        })
        .collect())
}
