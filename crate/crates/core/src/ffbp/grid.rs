//! Compressed sampling grids: uniform in `(u, v, n)`, curvilinear in space.
//!
//! The image of a box under `(x, y, z) ↦ (u, v, n)` is strongly curved, so a
//! full `(u, v, n)` bounding box would be mostly empty. Each `(u, v)` line
//! instead stores one `n` interval: the span reached by the region for
//! [`build_subimage_grid`], or the span of interpolation stencils a parent
//! grid will read for [`build_demand_grid`].

use std::ops::Range;

use rayon::prelude::*;

use super::merge::Kernel;
use crate::error::{Error, Result};
use crate::model::{FrequencyGrid, ImagingRegion, Point3, SyntheticAperture};
use crate::spectrum::{Inversion, SubarrayExtents, SubarrayField};

/// Lattice steps of padding around the region's image.
const PADDING_STEPS: i64 = 2;
/// Face sampling is fine enough that neighbouring samples differ by at most
/// this many lattice steps in `u` and `v`.
const FACE_SAMPLE_STEPS: f64 = 0.5;
/// Rounds of re-seeding failed inversions from converged neighbours.
const REPAIR_PASSES: usize = 3;
/// Points of the probe lattice used to bound Jacobian norms.
const PROBE_LATTICE: usize = 5;

/// A set of contiguous aperture elements with the planar extents used by
/// the spectrum formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct Subarray {
    pub elements: Range<usize>,
    pub extents: SubarrayExtents,
}

impl Subarray {
    /// Extents come from the elements' actual positions, widened to at least
    /// one aperture pitch so that a single scan column still has a
    /// non-degenerate transform.
    pub fn new(aperture: &SyntheticAperture, elements: Range<usize>) -> Self {
        let extents = SubarrayExtents::of_elements(aperture, elements.clone())
            .with_min_width(aperture.pitch());
        Self { elements, extents }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Stored `n` interval of one `(u, v)` line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Line {
    start: usize,
    len: usize,
    offset: usize,
}

/// Sampling grid `G_{m,n}` of one subimage.
#[derive(Debug, Clone)]
pub struct SubimageGrid {
    subarray: Subarray,
    field: SubarrayField,
    /// `(u, v, n)` of lattice index `(0, 0, 0)`.
    pub origin: Point3,
    /// Lattice step along `(u, v, n)`; at most `1/γ` on every axis.
    pub step: Point3,
    /// Lattice extent along `(u, v, n)`. Only part of each `n` line is stored.
    pub dims: [usize; 3],
    lines: Vec<Line>,
    positions: Vec<Point3>,
    valid: Vec<bool>,
    valid_count: usize,
    inside_count: usize,
    unconverged: usize,
    /// Requested points dropped when clipping lines to their valid span.
    trimmed: usize,
    median_iterations: usize,
}

impl SubimageGrid {
    pub fn subarray(&self) -> &Subarray {
        &self.subarray
    }

    pub fn field(&self) -> &SubarrayField {
        &self.field
    }

    /// Stored lattice points.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Storage index of lattice point `(iu, iv, in)`, if it is stored.
    #[inline]
    pub fn index(&self, iu: usize, iv: usize, in_: usize) -> Option<usize> {
        if iu >= self.dims[0] || iv >= self.dims[1] {
            return None;
        }
        let line = self.lines[iu * self.dims[1] + iv];
        (in_ >= line.start && in_ < line.start + line.len).then(|| line.offset + in_ - line.start)
    }

    /// `(u, v, n)` of a lattice index.
    pub fn lattice_point(&self, iu: usize, iv: usize, in_: usize) -> Point3 {
        self.origin + Point3::new(iu as f64, iv as f64, in_ as f64).component_mul(&self.step)
    }

    /// Lattice indices of every stored point, in storage order.
    pub fn lattice_indices(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(self.len());
        for (l, line) in self.lines.iter().enumerate() {
            let (iu, iv) = (l / self.dims[1], l % self.dims[1]);
            for in_ in line.start..line.start + line.len {
                out.push([iu, iv, in_]);
            }
        }
        out
    }

    /// Spatial positions; entries for masked points are meaningless.
    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid_count
    }

    /// Lattice points whose position lies inside the imaging region proper:
    /// the compressed sample count `N_{s,f}` of this subimage.
    pub fn inside_count(&self) -> usize {
        self.inside_count
    }

    /// Mark a stored point invalid.
    pub fn mask(&mut self, index: usize) {
        if std::mem::replace(&mut self.valid[index], false) {
            self.valid_count -= 1;
        }
    }

    pub fn masked_fraction(&self) -> f64 {
        1.0 - self.valid_count as f64 / self.len().max(1) as f64
    }

    pub fn unconverged(&self) -> usize {
        self.unconverged
    }

    pub fn median_iterations(&self) -> usize {
        self.median_iterations
    }

    /// Positions of the valid points, in storage order.
    pub fn valid_positions(&self) -> Vec<Point3> {
        self.positions
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .map(|(p, _)| *p)
            .collect()
    }
}

/// Samples on the six faces of `b`, no further apart than `spacing`.
fn face_samples(b: &ImagingRegion, spacing: f64) -> Vec<Point3> {
    let count = |len: f64| ((len / spacing).ceil() as usize).max(1) + 1;
    let axis = |lo: f64, hi: f64| {
        let n = count(hi - lo);
        (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
    };
    let mut out = Vec::new();
    for x in axis(b.x_min, b.x_max) {
        for y in axis(b.y_min, b.y_max) {
            out.push(Point3::new(x, y, b.z_min));
            out.push(Point3::new(x, y, b.z_max));
        }
    }
    for x in axis(b.x_min, b.x_max) {
        for z in axis(b.z_min, b.z_max) {
            out.push(Point3::new(x, b.y_min, z));
            out.push(Point3::new(x, b.y_max, z));
        }
    }
    for y in axis(b.y_min, b.y_max) {
        for z in axis(b.z_min, b.z_max) {
            out.push(Point3::new(b.x_min, y, z));
            out.push(Point3::new(b.x_max, y, z));
        }
    }
    out
}

/// Build the compressed grid of `subarray` over `region`.
///
/// Lattice step is `1/γ` on every axis. The `(u, v, n)` bounds come from the
/// image of the region's faces with two steps of padding. Points whose
/// inverse fails to converge or leaves the region grown by one extent
/// laterally and above are masked; lines are clipped to their valid span.
pub fn build_subimage_grid(
    subarray: &Subarray,
    region: &ImagingRegion,
    kgrid: &FrequencyGrid,
    oversampling: f64,
) -> Result<SubimageGrid> {
    check_oversampling(oversampling)?;
    region.validate()?;
    let field = SubarrayField::new(subarray.extents, kgrid);
    let step = 1.0 / oversampling;
    let mut bounds = region.expanded_by(&region.extents());
    bounds.z_min = 0.0;

    // Face spacing from the steepest (u, v) gradient over the region.
    let mut steepest: f64 = 0.0;
    for p in region.lattice(PROBE_LATTICE) {
        let j = field.forward_jacobian(&p)?;
        steepest = steepest.max(j.row(0).norm()).max(j.row(1).norm());
    }
    let spacing = FACE_SAMPLE_STEPS * step / steepest;
    let faces: Vec<(Point3, Point3)> = face_samples(region, spacing)
        .into_par_iter()
        .map(|p| field.forward(&p).map(|q| (q / step, p)))
        .collect::<Result<_>>()?;

    let mut lo = Point3::repeat(f64::INFINITY);
    let mut hi = Point3::repeat(f64::NEG_INFINITY);
    for (q, _) in &faces {
        lo = lo.inf(q);
        hi = hi.sup(q);
    }
    let first: [i64; 3] = std::array::from_fn(|a| lo[a].floor() as i64 - PADDING_STEPS);
    let dims: [usize; 3] =
        std::array::from_fn(|a| (hi[a].ceil() as i64 + PADDING_STEPS - first[a] + 1) as usize);
    let mut plan = LinePlan::new(dims);
    for (q, p) in &faces {
        let cu = q.x.round() as i64 - first[0];
        let cv = q.y.round() as i64 - first[1];
        let n_lo = q.z.floor() as i64 - PADDING_STEPS - first[2];
        let n_hi = q.z.ceil() as i64 + PADDING_STEPS - first[2];
        for iu in cu - 1..=cu + 1 {
            for iv in cv - 1..=cv + 1 {
                plan.include(iu, iv, n_lo, n_hi, p);
            }
        }
    }
    let origin = Point3::new(first[0] as f64, first[1] as f64, first[2] as f64) * step;
    let grid = plan.solve(
        subarray,
        field,
        origin,
        Point3::repeat(step),
        region,
        Some(&bounds),
    )?;
    let total = grid.len() + grid.trimmed;
    if 2 * grid.valid_count <= total {
        return Err(Error::GridMostlyMasked {
            masked: total - grid.valid_count,
            total,
        });
    }
    Ok(grid)
}

/// Build the compressed grid of `subarray` holding exactly the lattice cells
/// that `kernel` reads when the subimage is interpolated at each point of
/// `demand` (the parent grid's valid positions, or the final voxels).
///
/// Per axis, the lattice spans exactly the demanded coordinates with the
/// largest step not above `1/γ`: a step of `1/γ` anchored elsewhere would
/// put lattice points beyond `|u| < k_max·w/π`, which has no preimage for
/// narrow subarrays. Points whose inverse fails to converge are masked.
/// `region` only decides which points count towards `N_{s,f}`.
pub fn build_demand_grid(
    subarray: &Subarray,
    region: &ImagingRegion,
    kgrid: &FrequencyGrid,
    oversampling: f64,
    demand: &[Point3],
    kernel: Kernel,
) -> Result<SubimageGrid> {
    check_oversampling(oversampling)?;
    if demand.is_empty() {
        return Err(Error::invalid("demand point set is empty"));
    }
    let field = SubarrayField::new(subarray.extents, kgrid);
    let coords: Vec<Point3> = demand
        .par_iter()
        .map(|p| field.forward(p))
        .collect::<Result<_>>()?;
    let mut lo = Point3::repeat(f64::INFINITY);
    let mut hi = Point3::repeat(f64::NEG_INFINITY);
    for q in &coords {
        lo = lo.inf(q);
        hi = hi.sup(q);
    }

    // Fit the lattice to the demanded span so that its outermost points are
    // the extreme demanded coordinates. Cubic stencils that would reach past
    // them fall back to linear at interpolation time.
    let mut step = Point3::repeat(1.0 / oversampling);
    let mut dims = [0usize; 3];
    for a in 0..3 {
        let span = hi[a] - lo[a];
        let cells = ((span * oversampling).ceil() as usize).max(1);
        if span > 0.0 {
            step[a] = span / cells as f64;
        }
        dims[a] = cells + 1;
    }
    let origin = lo;
    let taps: (i64, i64) = match kernel {
        Kernel::Linear => (0, 1),
        Kernel::Cubic => (-1, 2),
    };
    let mut plan = LinePlan::new(dims);
    for (q, p) in coords.iter().zip(demand) {
        let c: [i64; 3] = std::array::from_fn(|a| {
            let x = ((q[a] - origin[a]) / step[a]).floor() as i64;
            x.clamp(0, dims[a] as i64 - 2)
        });
        for iu in c[0] + taps.0..=c[0] + taps.1 {
            for iv in c[1] + taps.0..=c[1] + taps.1 {
                plan.include(iu, iv, c[2] + taps.0, c[2] + taps.1, p);
            }
        }
    }
    let grid = plan.solve(subarray, field, origin, step, region, None)?;
    if 2 * grid.valid_count <= grid.len() {
        return Err(Error::GridMostlyMasked {
            masked: grid.len() - grid.valid_count,
            total: grid.len(),
        });
    }
    Ok(grid)
}

fn check_oversampling(oversampling: f64) -> Result<()> {
    if oversampling >= 1.0 && oversampling.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "oversampling factor must be >= 1, got {oversampling}"
        )))
    }
}

/// Requested `n` span and Newton seed of every `(u, v)` line.
struct LinePlan {
    dims: [usize; 3],
    lines: Vec<(i64, i64, Point3)>,
}

impl LinePlan {
    fn new(dims: [usize; 3]) -> Self {
        let dims = dims.map(|d| d.max(2));
        Self {
            dims,
            lines: vec![(i64::MAX, i64::MIN, Point3::zeros()); dims[0] * dims[1]],
        }
    }

    /// Request `n ∈ [n_lo, n_hi]` on line `(iu, iv)`; `seed` maps near it.
    fn include(&mut self, iu: i64, iv: i64, n_lo: i64, n_hi: i64, seed: &Point3) {
        if iu < 0 || iv < 0 || iu >= self.dims[0] as i64 || iv >= self.dims[1] as i64 {
            return;
        }
        let (n_lo, n_hi) = (n_lo.max(0), n_hi.min(self.dims[2] as i64 - 1));
        let line = &mut self.lines[iu as usize * self.dims[1] + iv as usize];
        if n_lo < line.0 {
            line.0 = n_lo;
            line.2 = *seed;
        }
        line.1 = line.1.max(n_hi);
    }

    /// Invert every requested point, walking each line with warm starts.
    fn solve(
        self,
        subarray: &Subarray,
        field: SubarrayField,
        origin: Point3,
        step: Point3,
        region: &ImagingRegion,
        bounds: Option<&ImagingRegion>,
    ) -> Result<SubimageGrid> {
        let [nu, nv, _] = self.dims;
        let target_of = |iu: usize, iv: usize, in_: usize| {
            origin + Point3::new(iu as f64, iv as f64, in_ as f64).component_mul(&step)
        };

        // Walk each line with warm starts.
        let mut raw: Vec<Vec<Option<Inversion>>> = self
            .lines
            .par_iter()
            .enumerate()
            .map(|(l, &(n_lo, n_hi, seed))| {
                if n_lo > n_hi {
                    return Vec::new();
                }
                let (iu, iv) = (l / nv, l % nv);
                let mut guess = seed;
                (n_lo as usize..=n_hi as usize)
                    .map(|in_| {
                        let target = target_of(iu, iv, in_);
                        let inv = field
                            .solve(&target, &guess)
                            .or_else(|_| field.solve(&target, &seed))
                            .ok()?;
                        guess = inv.position;
                        Some(inv)
                    })
                    .collect()
            })
            .collect();

        // Retry failures from converged neighbours on adjacent lines.
        let starts: Vec<i64> = self.lines.iter().map(|l| l.0).collect();
        for _ in 0..REPAIR_PASSES {
            let snapshot = &raw;
            let neighbour = |iu: usize, iv: usize, in_: usize| -> Option<Point3> {
                let l = iu * nv + iv;
                let i = in_.checked_sub(starts[l].max(0) as usize)?;
                snapshot[l]
                    .get(i)
                    .copied()
                    .flatten()
                    .map(|inv| inv.position)
            };
            let repaired: Vec<Vec<(usize, Inversion)>> = (0..raw.len())
                .into_par_iter()
                .map(|l| {
                    let (iu, iv) = (l / nv, l % nv);
                    let mut fixed = Vec::new();
                    for (i, slot) in snapshot[l].iter().enumerate() {
                        if slot.is_some() {
                            continue;
                        }
                        let in_ = starts[l] as usize + i;
                        let mut seeds = Vec::with_capacity(6);
                        if iu > 0 {
                            seeds.push(neighbour(iu - 1, iv, in_));
                        }
                        if iu + 1 < nu {
                            seeds.push(neighbour(iu + 1, iv, in_));
                        }
                        if iv > 0 {
                            seeds.push(neighbour(iu, iv - 1, in_));
                        }
                        if iv + 1 < nv {
                            seeds.push(neighbour(iu, iv + 1, in_));
                        }
                        let target = target_of(iu, iv, in_);
                        if let Some(inv) = seeds
                            .into_iter()
                            .flatten()
                            .find_map(|g| field.solve(&target, &g).ok())
                        {
                            fixed.push((i, inv));
                        }
                    }
                    fixed
                })
                .collect();
            let mut changed = false;
            for (line, fixes) in raw.iter_mut().zip(repaired) {
                for (i, inv) in fixes {
                    line[i] = Some(inv);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        struct Solved {
            line: Line,
            positions: Vec<Point3>,
            valid: Vec<bool>,
            inside: usize,
            unconverged: usize,
            trimmed: usize,
            iterations: Vec<usize>,
        }
        let solved: Vec<Solved> = raw
            .into_par_iter()
            .zip(starts.par_iter())
            .map(|(slots, &n_lo)| {
                let mut out = Solved {
                    line: Line::default(),
                    positions: Vec::with_capacity(slots.len()),
                    valid: Vec::with_capacity(slots.len()),
                    inside: 0,
                    unconverged: 0,
                    trimmed: 0,
                    iterations: Vec::new(),
                };
                for slot in slots {
                    match slot {
                        Some(inv) => {
                            let p = inv.position;
                            let ok = bounds.is_none_or(|b| b.contains(&p, 0.0));
                            out.positions.push(p);
                            out.valid.push(ok);
                            if ok {
                                out.iterations.push(inv.iterations);
                                out.inside += usize::from(region.contains(&p, 0.0));
                            }
                        }
                        None => {
                            out.positions.push(Point3::repeat(f64::NAN));
                            out.valid.push(false);
                        }
                    }
                }
                // Clip to the valid span.
                let (Some(a), Some(b)) = (
                    out.valid.iter().position(|&v| v),
                    out.valid.iter().rposition(|&v| v),
                ) else {
                    out.trimmed = out.valid.len();
                    out.positions.clear();
                    out.valid.clear();
                    return out;
                };
                out.trimmed = out.valid.len() - (b - a + 1);
                out.positions.truncate(b + 1);
                out.positions.drain(..a);
                out.valid.truncate(b + 1);
                out.valid.drain(..a);
                out.unconverged = out.positions.iter().filter(|p| p.x.is_nan()).count();
                out.line = Line {
                    start: n_lo as usize + a,
                    len: b - a + 1,
                    offset: 0,
                };
                out
            })
            .collect();

        let mut lines = Vec::with_capacity(solved.len());
        let mut positions = Vec::new();
        let mut valid = Vec::new();
        let mut iterations = Vec::new();
        let (mut inside_count, mut unconverged, mut trimmed) = (0, 0, 0);
        for mut s in solved {
            s.line.offset = positions.len();
            lines.push(s.line);
            positions.extend(s.positions);
            valid.extend(s.valid);
            iterations.extend(s.iterations);
            inside_count += s.inside;
            unconverged += s.unconverged;
            trimmed += s.trimmed;
        }
        iterations.sort_unstable();
        Ok(SubimageGrid {
            subarray: subarray.clone(),
            field,
            origin,
            step,
            dims: self.dims,
            lines,
            valid_count: valid.iter().filter(|&&v| v).count(),
            positions,
            valid,
            inside_count,
            unconverged,
            trimmed,
            median_iterations: iterations.get(iterations.len() / 2).copied().unwrap_or(0),
        })
    }
}
