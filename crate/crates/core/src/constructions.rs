//! Lower-bound instances on the line and isosceles-free planar sets.
//!
//! An [`APFreeInstance`] is a set `S ⊂ {1..M}` with no three-term arithmetic
//! progression, containing 1 and `M`, with consecutive gaps at most `k_gap`.
//! Its embedding `x = S/M` has every anchored difference
//! `|2x_c - x_a - x_b|` at least `1/M`, which makes it rigid against small
//! perturbations, while pushing two consecutive pairs apart gives a pair
//! that no similarity aligns better than the push.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cheb_fit_1d, hausdorff_to_cube, PointConfig};
use crate::triplets::{is_weakly_isotonic, TripletSign};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct APFreeInstance {
    #[serde(rename = "M")]
    pub m: u64,
    pub k_gap: u64,
    #[serde(rename = "S")]
    pub s: Vec<u64>,
}

impl APFreeInstance {
    /// Builds and verifies an instance.
    pub fn new(m: u64, k_gap: u64, s: Vec<u64>) -> Result<Self> {
        let inst = Self { m, k_gap, s };
        inst.verify()?;
        Ok(inst)
    }

    /// Integer-exact check of every invariant: strictly increasing elements
    /// in `[1, M]` with both ends present, gaps at most `k_gap`, no 3-AP.
    pub fn verify(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Certificate(m));
        if self.s.first() != Some(&1) || self.s.last() != Some(&self.m) {
            return fail(format!("S must start at 1 and end at M = {}", self.m));
        }
        for w in self.s.windows(2) {
            if w[1] <= w[0] {
                return fail(format!("S not strictly increasing at {} -> {}", w[0], w[1]));
            }
            if w[1] - w[0] > self.k_gap {
                return fail(format!(
                    "gap {} -> {} exceeds k_gap {}",
                    w[0], w[1], self.k_gap
                ));
            }
        }
        if let Some((a, b, c)) = find_progression(&self.s) {
            return fail(format!("{a}, {b}, {c} is an arithmetic progression"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// `x = {s/M}`.
    pub fn x(&self) -> PointConfig {
        let m = self.m as f64;
        PointConfig::from_1d(&self.s.iter().map(|&v| v as f64 / m).collect::<Vec<_>>())
    }

    /// `1/M`, the smallest anchored difference `|2x_c - x_a - x_b|`.
    pub fn margin(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// `k_gap / (2M)`.
    pub fn alpha(&self) -> f64 {
        self.k_gap as f64 / (2.0 * self.m as f64)
    }

    /// `log(1/M) / log(alpha)`; tends to 1 when the margin is close to alpha.
    pub fn exponent(&self) -> f64 {
        (1.0 / self.m as f64).ln() / self.alpha().ln()
    }

    pub fn max_gap(&self) -> u64 {
        self.s.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }
}

/// First `(a, b, c)` in `s` with `a + c = 2b`, if any. `s` must be sorted.
pub fn find_progression(s: &[u64]) -> Option<(u64, u64, u64)> {
    let set: HashSet<u64> = s.iter().copied().collect();
    for (i, &a) in s.iter().enumerate() {
        for &c in &s[i + 1..] {
            if (a + c) % 2 == 0 {
                let b = (a + c) / 2;
                if b != a && set.contains(&b) {
                    return Some((a, b, c));
                }
            }
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApStrategy {
    /// Largest set for `M = m_max` by branch and bound; practical for `M` up to about 60.
    Exhaustive,
    /// Smallest admissible next element, backtracking on dead ends.
    Greedy,
    /// Largest admissible next element within the gap limit, backtracking on
    /// dead ends. Sparse early choices forbid fewer later ones, so this
    /// reaches much larger `M` for a given `k_gap`.
    GreedyWidest,
    /// Sphere-restricted digit vectors, unioned over shifted copies and filtered.
    BehrendDigits,
}

/// Node limit for the greedy backtracking search.
pub const GREEDY_NODE_BUDGET: u64 = 2_000_000;

/// Produces a verified instance with `M ≤ m_max` (exactly `m_max` for the
/// exhaustive strategy) and gaps at most `k_gap`.
pub fn apfree_set(m_max: u64, k_gap: u64, strategy: ApStrategy) -> Result<APFreeInstance> {
    if k_gap < 2 {
        return Err(Error::InvalidParameter("k_gap must be at least 2".into()));
    }
    if m_max < 2 {
        return Err(Error::InvalidParameter("M must be at least 2".into()));
    }
    let s = match strategy {
        ApStrategy::Exhaustive => exhaustive(m_max, k_gap)?,
        ApStrategy::Greedy => greedy(m_max, k_gap, GREEDY_NODE_BUDGET, false)?,
        ApStrategy::GreedyWidest => greedy(m_max, k_gap, GREEDY_NODE_BUDGET, true)?,
        ApStrategy::BehrendDigits => behrend(m_max, k_gap)?,
    };
    let m = *s.last().expect("strategies return nonempty sets");
    APFreeInstance::new(m, k_gap, s)
}

/// Incremental 3-AP bookkeeping for sets grown in increasing order: adding
/// `v` forbids `2v - u` for every earlier `u`.
struct ApState {
    members: Vec<u64>,
    forbidden: Vec<u32>,
}

impl ApState {
    fn new(limit: u64) -> Self {
        Self {
            members: Vec::new(),
            forbidden: vec![0; limit as usize + 1],
        }
    }

    fn allowed(&self, v: u64) -> bool {
        self.forbidden[v as usize] == 0
    }

    fn push(&mut self, v: u64) {
        for &u in &self.members {
            let t = 2 * v - u;
            if let Some(f) = self.forbidden.get_mut(t as usize) {
                *f += 1;
            }
        }
        self.members.push(v);
    }

    fn pop(&mut self) {
        let v = self.members.pop().expect("pop on empty state");
        for &u in &self.members {
            let t = 2 * v - u;
            if let Some(f) = self.forbidden.get_mut(t as usize) {
                *f -= 1;
            }
        }
    }
}

/// `r[L]` = largest 3-AP-free subset of `{1..L}`, for `L ≤ limit`.
fn r3_table(limit: u64) -> Vec<usize> {
    let mut r = vec![0usize, 1];
    for l in 2..=limit {
        // A maximum set either avoids L (r[L-1]) or, after shifting, uses both 1 and L.
        let with_ends = best_with_ends(l, u64::MAX, &r, r[l as usize - 1] + 1);
        r.push(with_ends.map_or(r[l as usize - 1], |s| s.len()));
    }
    r
}

/// Largest AP-free set containing 1 and `m` with gaps ≤ `k_gap`, of size at
/// least `target`, or `None`. `r` bounds the size of AP-free subsets of
/// shorter intervals.
fn best_with_ends(m: u64, k_gap: u64, r: &[usize], target: usize) -> Option<Vec<u64>> {
    struct Search<'a> {
        m: u64,
        k_gap: u64,
        r: &'a [usize],
        state: ApState,
        best: Option<Vec<u64>>,
        need: usize,
    }
    impl Search<'_> {
        fn dfs(&mut self) {
            let last = *self.state.members.last().unwrap();
            if last == self.m {
                if self.state.members.len() >= self.need {
                    self.need = self.state.members.len() + 1;
                    self.best = Some(self.state.members.clone());
                }
                return;
            }
            // Elements in (last, m] form an AP-free set in an interval of length m - last.
            let rest = (self.m - last) as usize;
            let cap = self.r.get(rest).copied().unwrap_or(rest);
            if self.state.members.len() + cap < self.need {
                return;
            }
            let hi = self.m.min(last.saturating_add(self.k_gap));
            for v in last + 1..=hi {
                if self.state.allowed(v) {
                    self.state.push(v);
                    self.dfs();
                    self.state.pop();
                }
            }
        }
    }
    let mut search = Search {
        m,
        k_gap,
        r,
        state: ApState::new(m),
        best: None,
        need: target,
    };
    search.state.push(1);
    search.dfs();
    search.best
}

fn exhaustive(m: u64, k_gap: u64) -> Result<Vec<u64>> {
    if m > 200 {
        return Err(Error::InvalidParameter(format!(
            "exhaustive search is limited to M <= 200, got {m}"
        )));
    }
    let r = r3_table(m - 1);
    best_with_ends(m, k_gap, &r, 2).ok_or_else(|| {
        Error::NoSetFound(format!("no AP-free set spans [1, {m}] with gaps <= {k_gap}"))
    })
}

fn greedy(m_max: u64, k_gap: u64, budget: u64, widest: bool) -> Result<Vec<u64>> {
    // Backtrack until the set reaches the last window (m_max - k_gap, m_max],
    // then keep extending greedily while an admissible element fits.
    let stop = m_max.saturating_sub(k_gap).max(1);
    let mut state = ApState::new(m_max);
    state.push(1);
    let window = |state: &ApState, last: u64| -> Vec<u64> {
        let hi = (last + k_gap).min(m_max);
        let mut c: Vec<u64> = (last + 1..=hi).filter(|&v| state.allowed(v)).collect();
        // Candidates are popped from the back.
        if !widest {
            c.reverse();
        }
        c
    };
    let mut pending: Vec<Vec<u64>> = vec![window(&state, 1)];
    let mut nodes = 0u64;
    loop {
        let last = *state.members.last().unwrap();
        if last > stop || last == m_max {
            break;
        }
        match pending.last_mut().unwrap().pop() {
            Some(v) => {
                state.push(v);
                pending.push(window(&state, v));
                nodes += 1;
                if nodes > budget {
                    return Err(Error::NoSetFound(format!(
                        "greedy search exceeded its budget of {budget} nodes"
                    )));
                }
            }
            None => {
                pending.pop();
                if state.members.len() == 1 {
                    return Err(Error::NoSetFound(format!(
                        "no AP-free set with gaps <= {k_gap} reaches past {stop}"
                    )));
                }
                state.pop();
            }
        }
    }
    while let Some(v) = window(&state, *state.members.last().unwrap()).pop() {
        state.push(v);
    }
    if state.members.len() < 2 {
        return Err(Error::NoSetFound("greedy search produced a single point".into()));
    }
    Ok(state.members)
}

/// Digit vectors of length `len` with entries below `d`, grouped by squared
/// norm and read in base `2d - 1`. Two such numbers add without carries, so
/// each group (a sphere) is free of 3-APs.
fn behrend_spheres(len: u32, d: u64) -> Vec<Vec<u64>> {
    let base = 2 * d - 1;
    let mut spheres = vec![Vec::new(); (len as u64 * (d - 1) * (d - 1)) as usize + 1];
    let mut digits = vec![0u64; len as usize];
    loop {
        let r = digits.iter().map(|v| v * v).sum::<u64>() as usize;
        spheres[r].push(digits.iter().rev().fold(0, |acc, &v| acc * base + v));
        let mut i = 0;
        loop {
            if i == digits.len() {
                for s in &mut spheres {
                    s.sort_unstable();
                }
                return spheres;
            }
            digits[i] += 1;
            if digits[i] < d {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Tiles `block` (shifted to start at 1) across `[1, m_max]` and drops, left
/// to right, every element that would complete a progression.
fn tile_and_filter(block: &[u64], m_max: u64) -> Vec<u64> {
    let lo = block[0];
    let width = block[block.len() - 1] - lo + 1;
    let mut state = ApState::new(m_max);
    let mut shift = 1;
    while shift + width - 1 <= m_max {
        for &v in block {
            let c = v - lo + shift;
            if state.allowed(c) {
                state.push(c);
            }
        }
        shift += width;
    }
    state.members
}

fn behrend(m_max: u64, k_gap: u64) -> Result<Vec<u64>> {
    // Among sphere blocks that fit, keep the tiled set with the fewest
    // oversized gaps, then the most elements.
    let mut best: Option<(u64, usize, Vec<u64>)> = None;
    let mut smallest_gap = u64::MAX;
    for len in 1..=6u32 {
        for d in 2..=64u64 {
            let Some(span) = (2 * d - 1).checked_pow(len) else { break };
            if span > m_max {
                break;
            }
            for block in behrend_spheres(len, d) {
                if block.len() < 3 {
                    continue;
                }
                let s = tile_and_filter(&block, m_max);
                if s.len() < 2 {
                    continue;
                }
                let gap = s.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
                smallest_gap = smallest_gap.min(gap);
                if gap > k_gap {
                    continue;
                }
                let key = (s.last().copied().unwrap_or(0), s.len());
                if best.as_ref().map_or(true, |b| (b.0, b.1) < key) {
                    best = Some((key.0, key.1, s));
                }
            }
        }
    }
    best.map(|b| b.2).ok_or_else(|| {
        Error::NoSetFound(format!(
            "smallest gap over Behrend tilings is {smallest_gap} > k_gap {k_gap}"
        ))
    })
}

/// Which two disjoint consecutive pairs `(i, i+1)`, `(j, j+1)` to push apart.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSelector {
    /// The largest gap and the largest gap disjoint from it.
    #[default]
    LargestGaps,
    /// Explicit left indices.
    Indices(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdversarialPair {
    pub base: APFreeInstance,
    pub beta: f64,
    pub y: PointConfig,
    /// Left indices of the two pushed pairs, ascending.
    pub moved_pairs: [(usize, usize); 2],
}

impl AdversarialPair {
    pub fn x(&self) -> PointConfig {
        self.base.x()
    }
}

fn select_pairs(inst: &APFreeInstance, sel: PairSelector) -> Result<(usize, usize)> {
    let n = inst.len();
    let (i, j) = match sel {
        PairSelector::Indices(i, j) => (i.min(j), i.max(j)),
        PairSelector::LargestGaps => {
            if n < 4 {
                return Err(Error::TooFewPoints { required: 4, got: n });
            }
            let gaps: Vec<u64> = inst.s.windows(2).map(|w| w[1] - w[0]).collect();
            let first = (0..gaps.len()).max_by_key(|&g| (gaps[g], std::cmp::Reverse(g))).unwrap();
            let second = (0..gaps.len())
                .filter(|&g| g + 1 < first || g > first + 1)
                .max_by_key(|&g| (gaps[g], std::cmp::Reverse(g)))
                .ok_or_else(|| Error::Precondition("no disjoint second pair".into()))?;
            (first.min(second), first.max(second))
        }
    };
    if j + 1 >= n || j < i + 2 {
        return Err(Error::InvalidParameter(format!(
            "pairs ({i}, {}) and ({j}, {}) must be disjoint and inside 0..{n}",
            i + 1,
            j + 1
        )));
    }
    Ok((i, j))
}

/// Pushes both selected pairs apart by `beta` without checking isotonicity
/// or the range of `beta`.
pub fn push_pairs_apart(
    inst: &APFreeInstance,
    beta: f64,
    selector: PairSelector,
) -> Result<AdversarialPair> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {beta}")));
    }
    let (i, j) = select_pairs(inst, selector)?;
    let mut y = inst.x();
    for p in [i, j] {
        y.point_mut(p)[0] -= beta;
        y.point_mut(p + 1)[0] += beta;
    }
    Ok(AdversarialPair {
        base: inst.clone(),
        beta,
        y,
        moved_pairs: [(i, i + 1), (j, j + 1)],
    })
}

/// [`push_pairs_apart`] with `0 ≤ beta < 1/(2M)` enforced and the result
/// required to be weakly isotonic to `x`.
pub fn adversarial_pair(
    inst: &APFreeInstance,
    beta: f64,
    selector: PairSelector,
) -> Result<AdversarialPair> {
    let limit = inst.margin() / 2.0;
    if !(0.0..limit).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "beta {beta} outside [0, 1/(2M)) = [0, {limit})"
        )));
    }
    let pair = push_pairs_apart(inst, beta, selector)?;
    if let Some(t) = first_violation(&pair)? {
        return Err(Error::NotIsotonic(t));
    }
    Ok(pair)
}

fn first_violation(pair: &AdversarialPair) -> Result<Option<TripletSign>> {
    Ok(is_weakly_isotonic(&pair.x(), &pair.y, 0.0)?.first_violation)
}

/// Certified lower bound on `min_A max_i |x_i - A y_i|` over similarities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResistanceCertificate {
    pub certified_lower: f64,
    /// Exact minimax residual, both orientations.
    pub exact: f64,
}

/// Checks the case analysis showing no similarity `t ↦ a t + b` brings `y`
/// within `beta` of `x`, then confirms it against the exact minimax fit.
///
/// * `a ≤ 0`: the extremes swap sides, so some point moves by half the
///   diameter of `x`.
/// * `a ≥ 1`: a pushed pair of width `g + 2β` maps to width at least
///   `g + 2β`, so one of its ends moves by `β`.
/// * `0 < a < 1`: residuals of unmoved points are increasing in `x`; both
///   pairs staying within `β` would force the gap between them below `2β`.
pub fn verify_similarity_resistance(pair: &AdversarialPair) -> Result<ResistanceCertificate> {
    let x = pair.x();
    let xs = x.values_1d()?;
    let ys = pair.y.values_1d()?;
    let beta = pair.beta;
    let [(i, i1), (j, j1)] = pair.moved_pairs;
    let fail = |m: &str| Err(Error::Certificate(m.into()));
    if !(i1 == i + 1 && j1 == j + 1 && j >= i + 2 && j1 < xs.len()) {
        return fail("moved pairs must be disjoint consecutive pairs");
    }
    for (k, (&a, &b)) in xs.iter().zip(ys).enumerate() {
        let expected = match k {
            _ if k == i || k == j => a - beta,
            _ if k == i1 || k == j1 => a + beta,
            _ => a,
        };
        if b != expected {
            return fail("y is not x with the two pairs pushed apart");
        }
    }
    let diameter = xs[xs.len() - 1] - xs[0];
    if diameter / 2.0 < beta {
        return fail("half the diameter is below beta");
    }
    if xs[j] - xs[i1] < 2.0 * beta {
        return fail("pairs are closer than 2 beta");
    }
    let exact = cheb_fit_1d(&x, &pair.y)?.residual;
    // The exact residual is computed in floating point; allow rounding.
    if exact < beta * (1.0 - 1e-9) - 1e-15 {
        return Err(Error::Certificate(format!(
            "exact minimax residual {exact} is below beta {beta}"
        )));
    }
    Ok(ResistanceCertificate {
        certified_lower: beta,
        exact,
    })
}

/// Two clusters of `n/2` points in `[-0.1, 0.1]` and `[0.9, 1.1]`; `y` moves
/// the second cluster right by `shift`.
pub fn clusters_example(n: usize, shift: f64) -> Result<(PointConfig, PointConfig)> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "n must be even and at least 4, got {n}"
        )));
    }
    let h = n / 2;
    // Square-root spacing keeps distances within a cluster distinct, so no
    // comparison is a tie that rounding could break after the shift.
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            let (k, base) = if i < h { (i, 0.0) } else { (i - h, 1.0) };
            base - 0.1 + 0.2 * ((k + 1) as f64 / h as f64).sqrt()
        })
        .collect();
    let ys: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(i, &v)| if i < h { v } else { v + shift })
        .collect();
    Ok((PointConfig::from_1d(&xs), PointConfig::from_1d(&ys)))
}

/// Distance from `v` to the perpendicular bisector of `a` and `b`.
pub fn bisector_distance(v: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    let ab = crate::geometry::distance(a, b)?;
    if ab == 0.0 {
        return Err(Error::Degenerate("coincident points".into()));
    }
    let va = crate::geometry::sq_dist(v, a);
    let vb = crate::geometry::sq_dist(v, b);
    Ok((va - vb).abs() / (2.0 * ab))
}

/// True iff some vertex is within `beta` of the bisector of the other two.
pub fn is_beta_isosceles(p: &[f64], q: &[f64], r: &[f64], beta: f64) -> Result<bool> {
    Ok(isosceles_defect(p, q, r)? <= beta)
}

/// Smallest vertex-to-opposite-bisector distance of the triangle.
pub fn isosceles_defect(p: &[f64], q: &[f64], r: &[f64]) -> Result<f64> {
    let d1 = bisector_distance(p, q, r)?;
    let d2 = bisector_distance(q, p, r)?;
    let d3 = bisector_distance(r, p, q)?;
    Ok(d1.min(d2).min(d3))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsoscelesSearch {
    /// Selected grid nodes as integer coordinates in `0..N`.
    pub nodes: Vec<(u32, u32)>,
    /// The same points scaled into `[0,1]^2`.
    pub points: PointConfig,
    pub hausdorff: f64,
    pub restarts_used: usize,
}

/// Lattice test of the β-isosceles condition. Coordinates are in units of
/// the grid step `1/(N-1)`, so with `beta = 0` the test is exact.
fn lattice_isosceles(p: (u32, u32), q: (u32, u32), r: (u32, u32), beta_units: f64) -> bool {
    let sq = |a: (u32, u32), b: (u32, u32)| {
        let dx = a.0 as i64 - b.0 as i64;
        let dy = a.1 as i64 - b.1 as i64;
        dx * dx + dy * dy
    };
    let check = |v, a, b| {
        let diff = (sq(v, a) - sq(v, b)).abs() as f64;
        let ab = (sq(a, b) as f64).sqrt();
        if beta_units == 0.0 {
            diff == 0.0
        } else {
            diff <= 2.0 * beta_units * ab
        }
    };
    check(p, q, r) || check(q, p, r) || check(r, p, q)
}

/// Every triple of `nodes` is checked; returns the first β-isosceles one.
pub fn find_isosceles(
    nodes: &[(u32, u32)],
    grid_side: u32,
    beta: f64,
) -> Option<[(u32, u32); 3]> {
    let units = beta * (grid_side.max(2) - 1) as f64;
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            for c in b + 1..nodes.len() {
                if lattice_isosceles(nodes[a], nodes[b], nodes[c], units) {
                    return Some([nodes[a], nodes[b], nodes[c]]);
                }
            }
        }
    }
    None
}

/// Randomized greedy search for a large subset of the `N × N` grid in
/// `[0,1]^2` with no β-isosceles triangle. Each restart adds nodes in a
/// random order whenever they keep the set admissible; the largest set is
/// returned after a full brute-force check.
pub fn isosceles_free_search(
    grid_side: u32,
    beta: f64,
    restarts: usize,
    seed: u64,
) -> Result<IsoscelesSearch> {
    if grid_side < 2 {
        return Err(Error::InvalidParameter("grid side must be at least 2".into()));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter("beta must be nonnegative".into()));
    }
    let units = beta * (grid_side - 1) as f64;
    let all: Vec<(u32, u32)> = (0..grid_side)
        .flat_map(|i| (0..grid_side).map(move |j| (i, j)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Vec<(u32, u32)> = Vec::new();
    for _ in 0..restarts.max(1) {
        let mut order = all.clone();
        order.shuffle(&mut rng);
        let mut chosen: Vec<(u32, u32)> = Vec::new();
        for &c in &order {
            let ok = (0..chosen.len()).all(|a| {
                (a + 1..chosen.len()).all(|b| !lattice_isosceles(chosen[a], chosen[b], c, units))
            });
            if ok {
                chosen.push(c);
            }
        }
        if chosen.len() > best.len() {
            best = chosen;
        }
    }
    if let Some(t) = find_isosceles(&best, grid_side, beta) {
        return Err(Error::Certificate(format!("search output contains {t:?}")));
    }
    let step = 1.0 / (grid_side - 1) as f64;
    let coords: Vec<f64> = best
        .iter()
        .flat_map(|&(i, j)| [i as f64 * step, j as f64 * step])
        .collect();
    let points = PointConfig::new(2, coords)?;
    let hausdorff = hausdorff_to_cube(&points)?.value;
    Ok(IsoscelesSearch {
        nodes: best,
        points,
        hausdorff,
        restarts_used: restarts.max(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_ap_free(s: &[u64]) -> bool {
        for a in s {
            for b in s {
                for c in s {
                    if a != b && b != c && a != c && a + c == 2 * b {
                        return false;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn exhaustive_nine() {
        let inst = apfree_set(9, 4, ApStrategy::Exhaustive).unwrap();
        assert_eq!(inst.s, vec![1, 2, 4, 8, 9]);
        assert!(brute_ap_free(&inst.s));
        // No AP-free subset of 1..=9 has six elements.
        let r = r3_table(9);
        assert_eq!(r[9], 5);
    }

    #[test]
    fn r3_small_values() {
        let r = r3_table(20);
        assert_eq!(&r[1..=12], &[1, 2, 2, 3, 4, 4, 4, 4, 5, 5, 6, 6]);
        // Oracle: brute force over subsets of {1..L}.
        for l in 1..=14u64 {
            let mut best = 0;
            for mask in 0u32..(1 << l) {
                let s: Vec<u64> = (0..l).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
                if s.len() > best && brute_ap_free(&s) {
                    best = s.len();
                }
            }
            assert_eq!(r[l as usize], best, "L = {l}");
        }
    }

    #[test]
    fn greedy_is_stanley_without_gap_limit() {
        let inst = apfree_set(40, 1000, ApStrategy::Greedy).unwrap();
        assert_eq!(
            inst.s,
            vec![1, 2, 4, 5, 10, 11, 13, 14, 28, 29, 31, 32, 37, 38, 40]
        );
        assert!(brute_ap_free(&inst.s));
    }

    #[test]
    fn greedy_with_gap_limit() {
        let inst = apfree_set(500, 16, ApStrategy::Greedy).unwrap();
        assert!(inst.max_gap() <= 16);
        assert!(inst.m > 500 - 16);
        assert!(brute_ap_free(&inst.s));
        let wide = apfree_set(3000, 40, ApStrategy::GreedyWidest).unwrap();
        assert!(wide.max_gap() <= 40);
        assert!(wide.m > 3000 - 40);
        assert!(brute_ap_free(&wide.s));
    }

    #[test]
    fn behrend_spheres_are_ap_free() {
        for b in behrend_spheres(3, 4) {
            assert!(brute_ap_free(&b));
        }
        let inst = apfree_set(500, 60, ApStrategy::BehrendDigits).unwrap();
        assert!(brute_ap_free(&inst.s));
    }

    #[test]
    fn verifier_rejects() {
        assert!(APFreeInstance::new(9, 4, vec![1, 2, 3, 9]).is_err());
        assert!(APFreeInstance::new(9, 3, vec![1, 2, 4, 8, 9]).is_err());
        assert!(APFreeInstance::new(9, 4, vec![2, 4, 8, 9]).is_err());
        let json = r#"{"M":9,"k_gap":4,"S":[1,2,4,8,9]}"#;
        let inst: APFreeInstance = serde_json::from_str(json).unwrap();
        inst.verify().unwrap();
        assert_eq!(serde_json::to_string(&inst).unwrap(), json);
    }

    #[test]
    fn adversarial_range_checks() {
        let inst = APFreeInstance::new(9, 4, vec![1, 2, 4, 8, 9]).unwrap();
        let p = adversarial_pair(&inst, 0.0, PairSelector::default()).unwrap();
        assert_eq!(p.y, inst.x());
        assert!(matches!(
            adversarial_pair(&inst, 0.6 / 9.0, PairSelector::default()),
            Err(Error::InvalidParameter(_))
        ));
        assert_eq!(p.moved_pairs, [(0, 1), (2, 3)]);
    }

    #[test]
    fn half_margin_push_breaks_isotonicity_on_nine() {
        // The anchor 2/9 sits between 1/9 and 4/9 with |2*2 - 1 - 4| = 1; moving
        // all three by 0.49/9 in opposite directions flips that comparison.
        let inst = APFreeInstance::new(9, 4, vec![1, 2, 4, 8, 9]).unwrap();
        let r = adversarial_pair(&inst, 0.49 / 9.0, PairSelector::default());
        assert!(matches!(r, Err(Error::NotIsotonic(_))));
        let quarter = adversarial_pair(&inst, 0.24 / 9.0, PairSelector::default()).unwrap();
        let cert = verify_similarity_resistance(&quarter).unwrap();
        assert!(cert.exact >= quarter.beta);
    }

    #[test]
    fn resistance_at_half_margin() {
        let inst = APFreeInstance::new(9, 4, vec![1, 2, 4, 8, 9]).unwrap();
        let pair = push_pairs_apart(&inst, 0.49 / 9.0, PairSelector::default()).unwrap();
        let cert = verify_similarity_resistance(&pair).unwrap();
        assert_eq!(cert.certified_lower, pair.beta);
        assert!(cert.exact >= pair.beta);
        let zero = push_pairs_apart(&inst, 0.0, PairSelector::default()).unwrap();
        assert_eq!(verify_similarity_resistance(&zero).unwrap().certified_lower, 0.0);
    }

    #[test]
    fn clusters() {
        let (x, y) = clusters_example(10, 0.0).unwrap();
        assert_eq!(x, y);
        let (x, y) = clusters_example(10, 1000.0).unwrap();
        assert!(is_weakly_isotonic(&x, &y, 0.0).unwrap().isotonic);
        let d = crate::geometry::displacement(&x, &y).unwrap();
        assert!(d.d_inf >= 999.0);
        assert!(clusters_example(5, 1.0).is_err());
    }

    #[test]
    fn isosceles_examples() {
        let o = [0.0, 0.0];
        assert!(is_beta_isosceles(&o, &[1.0, 0.0], &[0.0, 1.0], 0.0).unwrap());
        assert_eq!(bisector_distance(&o, &[1.0, 0.0], &[2.0, 0.0]).unwrap(), 1.5);
        assert!(is_beta_isosceles(&o, &[1.0, 0.0], &[0.0, 1.0], 0.0).is_ok());
        assert!(bisector_distance(&o, &[1.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn isosceles_search_outputs_verify() {
        let r = isosceles_free_search(6, 0.0, 5, 1).unwrap();
        assert!(r.nodes.len() >= 3);
        assert!(find_isosceles(&r.nodes, 6, 0.0).is_none());
        let big = isosceles_free_search(4, 1.5, 3, 2).unwrap();
        assert!(big.nodes.len() <= 2);
    }
}
