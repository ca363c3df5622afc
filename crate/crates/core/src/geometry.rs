//! Point configurations in R^d, displacement measures, Hausdorff distance to
//! the unit cube, similarity transforms and the two alignment solvers
//! (least-squares Procrustes and the exact 1-D minimax line fit).

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An ordered n-tuple of points in R^d, stored row-major.
///
/// Index `i` of one configuration corresponds to index `i` of any
/// reconstruction of it, so order is significant.
#[derive(Clone, Debug, PartialEq)]
pub struct PointConfig {
    dim: usize,
    coords: Vec<f64>,
}

impl PointConfig {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coords.len() % dim,
            });
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).ok_or(Error::Empty)?;
        let mut coords = Vec::with_capacity(dim * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::new(dim, coords)
    }

    /// A configuration on the real line.
    pub fn from_1d(values: &[f64]) -> Self {
        Self {
            dim: 1,
            coords: values.to_vec(),
        }
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            dim,
            coords: vec![0.0; n * dim],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    /// Coordinates of a 1-D configuration.
    pub fn values_1d(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: self.dim,
            });
        }
        Ok(&self.coords)
    }

    #[inline]
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.point(i), self.point(j))
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.sq_dist(i, j).sqrt()
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        let mut c = vec![0.0; self.dim];
        for p in self.points() {
            for (acc, v) in c.iter_mut().zip(p) {
                *acc += v;
            }
        }
        c.iter_mut().for_each(|v| *v /= n);
        c
    }

    pub(crate) fn check_same_shape(&self, other: &PointConfig) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if self.len() != other.len() {
            return Err(Error::SizeMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.coords)
    }

    /// Writes one row per point under a `x0,x1,...` header, 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((0..self.dim).map(|c| format!("x{c}")))?;
        for p in self.points() {
            w.write_record(p.iter().map(|v| format_f64(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let dim = headers.len();
        for (c, h) in headers.iter().enumerate() {
            if h.trim() != format!("x{c}") {
                return Err(Error::Parse(format!("unexpected column header {h:?}")));
            }
        }
        let mut coords = Vec::new();
        for record in r.records() {
            let record = record?;
            if record.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: record.len(),
                });
            }
            for field in record.iter() {
                coords.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("{field:?}: {e}")))?,
                );
            }
        }
        Self::new(dim, coords)
    }
}

pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[inline]
pub(crate) fn sq_dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Euclidean distance between two points of equal dimension.
pub fn distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    Ok(sq_dist(p, q).sqrt())
}

/// A map `p -> scale * Q p + translation` with `scale > 0` and `Q` orthogonal.
///
/// In one dimension `Q` is `[+1]` or `[-1]`, so the family is exactly the
/// affine maps `a p + b` with `a != 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Similarity {
    scale: f64,
    orthogonal: DMatrix<f64>,
    translation: DVector<f64>,
}

impl Similarity {
    pub fn new(scale: f64, orthogonal: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        let d = translation.len();
        if orthogonal.nrows() != d || orthogonal.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: orthogonal.nrows(),
            });
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "similarity scale must be positive, got {scale}"
            )));
        }
        let defect = (orthogonal.transpose() * &orthogonal - DMatrix::identity(d, d)).amax();
        if defect > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "matrix is not orthogonal (|QtQ - I| = {defect:e})"
            )));
        }
        Ok(Self {
            scale,
            orthogonal,
            translation,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            scale: 1.0,
            orthogonal: DMatrix::identity(dim, dim),
            translation: DVector::zeros(dim),
        }
    }

    /// The 1-D map `p -> a p + b`; `a` must be nonzero.
    pub fn affine_1d(a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "1-D similarity needs a nonzero finite slope, got {a}"
            )));
        }
        Ok(Self {
            scale: a.abs(),
            orthogonal: DMatrix::from_element(1, 1, a.signum()),
            translation: DVector::from_element(1, b),
        })
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    /// Factor by which all distances are multiplied.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn orthogonal(&self) -> &DMatrix<f64> {
        &self.orthogonal
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    /// `(a, b)` for a 1-D similarity.
    pub fn as_affine_1d(&self) -> Option<(f64, f64)> {
        (self.dim() == 1).then(|| (self.scale * self.orthogonal[(0, 0)], self.translation[0]))
    }

    pub fn apply_point(&self, p: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(p);
        let out = &self.orthogonal * v * self.scale + &self.translation;
        out.as_slice().to_vec()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Similarity) -> Result<Similarity> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Similarity {
            scale: self.scale * other.scale,
            orthogonal: &self.orthogonal * &other.orthogonal,
            translation: &self.orthogonal * &other.translation * self.scale + &self.translation,
        })
    }
}

/// Pointwise image of `x` under `sim`.
pub fn apply_similarity(sim: &Similarity, x: &PointConfig) -> Result<PointConfig> {
    if sim.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: sim.dim(),
            got: x.dim(),
        });
    }
    let mut coords = Vec::with_capacity(x.as_slice().len());
    for p in x.points() {
        coords.extend(sim.apply_point(p));
    }
    PointConfig::new(x.dim(), coords)
}

/// Displacement between corresponding points of two configurations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisplacementReport {
    /// Largest per-index Euclidean displacement.
    pub d_inf: f64,
    /// Mean per-index displacement.
    pub d_1: f64,
    /// Root of the summed squared displacements.
    pub d_2: f64,
}

pub fn pointwise_displacement(x: &PointConfig, y: &PointConfig) -> Result<Vec<f64>> {
    x.check_same_shape(y)?;
    Ok(x.points().zip(y.points()).map(|(p, q)| sq_dist(p, q).sqrt()).collect())
}

pub fn displacement(x: &PointConfig, y: &PointConfig) -> Result<DisplacementReport> {
    let per_point = pointwise_displacement(x, y)?;
    if per_point.is_empty() {
        return Err(Error::Empty);
    }
    let d_inf = per_point.iter().copied().fold(0.0, f64::max);
    let d_1 = per_point.iter().sum::<f64>() / per_point.len() as f64;
    let d_2 = per_point.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(DisplacementReport { d_inf, d_1, d_2 })
}

/// One-sided Hausdorff distance from a configuration to `[0,1]^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HausdorffEstimate {
    pub value: f64,
    /// Upper bound on `|value - true distance|`; zero when exact.
    pub error_bound: f64,
    /// Grid spacing used, or `None` for the exact 1-D formula.
    pub resolution: Option<f64>,
}

pub const DEFAULT_HAUSDORFF_RESOLUTION: f64 = 1e-3;

/// Exact in 1-D; grid estimate at the default resolution otherwise.
pub fn hausdorff_to_cube(x: &PointConfig) -> Result<HausdorffEstimate> {
    hausdorff_to_cube_with_resolution(x, DEFAULT_HAUSDORFF_RESOLUTION)
}

pub fn hausdorff_to_cube_with_resolution(
    x: &PointConfig,
    resolution: f64,
) -> Result<HausdorffEstimate> {
    if x.is_empty() {
        return Err(Error::Empty);
    }
    for (i, p) in x.points().enumerate() {
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutsideUnitCube { index: i });
        }
    }
    if x.dim() == 1 {
        let mut v = x.as_slice().to_vec();
        v.sort_by(f64::total_cmp);
        let half_gap = v
            .windows(2)
            .map(|w| (w[1] - w[0]) / 2.0)
            .fold(0.0, f64::max);
        let value = v[0].max(1.0 - v[v.len() - 1]).max(half_gap);
        return Ok(HausdorffEstimate {
            value,
            error_bound: 0.0,
            resolution: None,
        });
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "grid resolution must lie in (0, 1], got {resolution}"
        )));
    }
    let per_axis = (1.0 / resolution).ceil() as usize;
    let h = 1.0 / per_axis as f64;
    let d = x.dim();
    let mut idx = vec![0usize; d];
    let mut node = vec![0.0; d];
    let mut worst = 0.0f64;
    // Odometer over the (per_axis + 1)^d grid nodes.
    loop {
        for (c, &k) in node.iter_mut().zip(&idx) {
            *c = k as f64 * h;
        }
        let nearest = x
            .points()
            .map(|p| sq_dist(p, &node))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
        let mut axis = 0;
        loop {
            if axis == d {
                return Ok(HausdorffEstimate {
                    value: worst.sqrt(),
                    error_bound: h * (d as f64).sqrt() / 2.0,
                    resolution: Some(h),
                });
            }
            idx[axis] += 1;
            if idx[axis] <= per_axis {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Least-squares similarity taking `y` onto `x`: minimizes
/// `sum_i |x_i - A y_i|^2` over scale, orthogonal part (reflections allowed)
/// and translation. Returns the transform and the displacement of `A y` from `x`.
pub fn procrustes_align(
    x: &PointConfig,
    y: &PointConfig,
) -> Result<(Similarity, DisplacementReport)> {
    x.check_same_shape(y)?;
    if x.len() < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            got: x.len(),
        });
    }
    let d = x.dim();
    let mx = DVector::from_vec(x.centroid());
    let my = DVector::from_vec(y.centroid());
    let mut xc = x.to_matrix();
    let mut yc = y.to_matrix();
    for mut row in xc.row_iter_mut() {
        row -= mx.transpose();
    }
    for mut row in yc.row_iter_mut() {
        row -= my.transpose();
    }
    let y_norm = yc.norm_squared();
    if y_norm <= f64::MIN_POSITIVE {
        return Err(Error::Degenerate(
            "all points of the configuration to align coincide".into(),
        ));
    }
    // H = Yc^T Xc; with H = U S V^T the optimal Q is V U^T.
    let h = yc.transpose() * &xc;
    let svd = h.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Degenerate("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD did not return V^T".into()))?;
    let q = v_t.transpose() * u.transpose();
    let scale = svd.singular_values.sum() / y_norm;
    if !(scale > 0.0) {
        return Err(Error::Degenerate(
            "configurations are uncorrelated; optimal scale is zero".into(),
        ));
    }
    let translation = &mx - &q * &my * scale;
    let sim = Similarity {
        scale,
        orthogonal: q,
        translation,
    };
    debug_assert_eq!(sim.dim(), d);
    let aligned = apply_similarity(&sim, y)?;
    let report = displacement(x, &aligned)?;
    Ok((sim, report))
}

/// Result of the 1-D minimax line fit `x_i ≈ a y_i + b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChebFit {
    pub a: f64,
    pub b: f64,
    /// `max_i |x_i - (a y_i + b)|` at the optimum.
    pub residual: f64,
}

impl ChebFit {
    /// The fit as a similarity; `None` when the optimal slope is zero (the
    /// residual is then an infimum over similarities, not a minimum).
    pub fn similarity(&self) -> Option<Similarity> {
        Similarity::affine_1d(self.a, self.b).ok()
    }
}

fn strip_width(x: &[f64], y: &[f64], a: f64) -> (f64, f64) {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (xi, yi) in x.iter().zip(y) {
        let r = xi - a * yi;
        hi = hi.max(r);
        lo = lo.min(r);
    }
    (hi, lo)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Exact minimizer of `max_i |x_i - (a y_i + b)|` over all real `(a, b)`.
///
/// For fixed `a` the best `b` centers the residual range, leaving half of
/// `max_i r_i(a) - min_i r_i(a)` with `r_i(a) = x_i - a y_i`. That width is
/// convex and piecewise linear in `a` and only bends at slopes of convex-hull
/// edges of the points `(y_i, x_i)`, so evaluating every hull-edge slope
/// finds the global optimum.
pub fn cheb_fit_1d(x: &PointConfig, y: &PointConfig) -> Result<ChebFit> {
    x.check_same_shape(y)?;
    let xs = x.values_1d()?;
    let ys = y.values_1d()?;
    if xs.len() < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            got: xs.len(),
        });
    }
    let mut pts: Vec<(f64, f64)> = ys.iter().copied().zip(xs.iter().copied()).collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    // Monotone chain; collinear points are kept since extra candidates are harmless.
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) < 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) < 0.0 {
            upper.pop();
        }
        upper.push(p);
    }

    let mut candidates: Vec<f64> = lower
        .windows(2)
        .chain(upper.windows(2))
        .filter(|w| w[1].0 != w[0].0)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    if candidates.is_empty() {
        // All y coincide: only the intercept matters.
        candidates.push(0.0);
    }

    let mut best: Option<ChebFit> = None;
    for a in candidates {
        let (hi, lo) = strip_width(xs, ys, a);
        let fit = ChebFit {
            a,
            b: (hi + lo) / 2.0,
            residual: (hi - lo) / 2.0,
        };
        if best.map_or(true, |b| fit.residual < b.residual) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one candidate slope"))
}

/// Bracket on `min_A d_inf(x, A y)` over similarities `A`.
#[derive(Clone, Debug)]
pub struct MinDinf {
    pub lower: f64,
    pub upper: f64,
    /// The similarity achieving `upper`, when one exists (see [`ChebFit::similarity`]).
    pub similarity: Option<Similarity>,
}

/// Number of coordinate-descent sweeps used to refine the Procrustes fit in d >= 2.
pub const DEFAULT_REFINE_ITERATIONS: usize = 200;

/// In 1-D the value is exact (`lower == upper`), taking the better of the fits
/// to `y` and to its reflection. In higher dimensions `upper` comes from
/// Procrustes followed by a heuristic coordinate descent over scale and
/// translation with the orthogonal part held fixed, and `lower` is 0.
pub fn min_dinf_over_similarities(x: &PointConfig, y: &PointConfig) -> Result<MinDinf> {
    min_dinf_with_refinement(x, y, DEFAULT_REFINE_ITERATIONS)
}

pub fn min_dinf_with_refinement(
    x: &PointConfig,
    y: &PointConfig,
    refine_iterations: usize,
) -> Result<MinDinf> {
    x.check_same_shape(y)?;
    if x.dim() == 1 {
        let direct = cheb_fit_1d(x, y)?;
        let reflected_y = PointConfig::from_1d(&y.as_slice().iter().map(|v| -v).collect::<Vec<_>>());
        let flipped = cheb_fit_1d(x, &reflected_y)?;
        // Fit to -y with slope a is the fit to y with slope -a.
        let best = if flipped.residual < direct.residual {
            ChebFit {
                a: -flipped.a,
                b: flipped.b,
                residual: flipped.residual,
            }
        } else {
            direct
        };
        return Ok(MinDinf {
            lower: best.residual,
            upper: best.residual,
            similarity: best.similarity(),
        });
    }

    let (sim, report) = procrustes_align(x, y)?;
    let q_y = {
        let rot = Similarity {
            scale: 1.0,
            orthogonal: sim.orthogonal.clone(),
            translation: DVector::zeros(x.dim()),
        };
        apply_similarity(&rot, y)?
    };
    let max_residual = |s: f64, t: &[f64]| -> f64 {
        x.points()
            .zip(q_y.points())
            .map(|(p, q)| {
                p.iter()
                    .zip(q)
                    .zip(t)
                    .map(|((pi, qi), ti)| {
                        let r = pi - (s * qi + ti);
                        r * r
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
            .sqrt()
    };

    let mut s = sim.scale;
    let mut t = sim.translation.as_slice().to_vec();
    let mut best = max_residual(s, &t);
    let mut step_s = s * 0.05;
    let mut step_t = report.d_inf.max(1e-12) * 0.5;
    for _ in 0..refine_iterations {
        let mut improved = false;
        for cand in [s + step_s, s - step_s] {
            if cand > 0.0 {
                let v = max_residual(cand, &t);
                if v < best {
                    best = v;
                    s = cand;
                    improved = true;
                }
            }
        }
        for axis in 0..t.len() {
            for delta in [step_t, -step_t] {
                let mut cand = t.clone();
                cand[axis] += delta;
                let v = max_residual(s, &cand);
                if v < best {
                    best = v;
                    t = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step_s *= 0.5;
            step_t *= 0.5;
        }
    }
    let refined = Similarity {
        scale: s,
        orthogonal: sim.orthogonal,
        translation: DVector::from_vec(t),
    };
    Ok(MinDinf {
        lower: 0.0,
        upper: best.min(report.d_inf),
        similarity: Some(refined),
    })
}
