//! Geometry and configuration types: frequency sweeps, synthetic apertures,
//! imaging regions, scenes, and the binary subarray partition tree.
//!
//! Coordinates are metres in a right-handed frame whose nominal aperture
//! plane is `z = 0`; targets sit at `z > 0`.

use std::ops::Range;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Point3 = Vector3<f64>;

/// Equidistant stepped-frequency sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    f_min: f64,
    f_max: f64,
    count: usize,
}

impl FrequencyGrid {
    pub fn new(f_min: f64, f_max: f64, count: usize) -> Result<Self> {
        if !(f_min.is_finite() && f_max.is_finite()) || f_min <= 0.0 {
            return Err(Error::invalid(
                "frequency bounds must be finite and positive",
            ));
        }
        if f_min >= f_max {
            return Err(Error::invalid(format!(
                "f_min ({f_min}) must be below f_max ({f_max})"
            )));
        }
        if count < 2 {
            return Err(Error::invalid("frequency count must be at least 2"));
        }
        Ok(Self {
            f_min,
            f_max,
            count,
        })
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.f_min + (self.f_max - self.f_min) * i as f64 / (self.count - 1) as f64
    }

    pub fn k_min(&self) -> f64 {
        wavenumber(self.f_min)
    }

    pub fn k_max(&self) -> f64 {
        wavenumber(self.f_max)
    }

    /// Wavenumber spacing between adjacent samples.
    pub fn k_step(&self) -> f64 {
        (self.k_max() - self.k_min()) / (self.count - 1) as f64
    }

    pub fn k_center(&self) -> f64 {
        0.5 * (self.k_min() + self.k_max())
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        wavenumber(self.frequency(i))
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.wavenumber(i)).collect()
    }
}

/// `k = 2πf/c`.
pub fn wavenumber(frequency_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * frequency_hz / SPEED_OF_LIGHT
}

/// Axis-aligned rectangle in the aperture plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl PlanarBounds {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }
}

/// Ordered antenna phase centres of a scanned aperture.
///
/// Elements are stored in scan order: scan position major, array element
/// minor. When the aperture came from a regular raster, `scan_shape` holds
/// `(scan positions, elements per position)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticAperture {
    elements: Vec<Point3>,
    scan_shape: Option<(usize, usize)>,
}

impl SyntheticAperture {
    pub fn new(elements: Vec<Point3>, scan_shape: Option<(usize, usize)>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::invalid("aperture must contain at least one element"));
        }
        if elements.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(
                "aperture element coordinates must be finite",
            ));
        }
        if let Some((a, b)) = scan_shape {
            if a * b != elements.len() {
                return Err(Error::invalid(format!(
                    "scan shape {a}x{b} does not match {} elements",
                    elements.len()
                )));
            }
        }
        Ok(Self {
            elements,
            scan_shape,
        })
    }

    pub fn elements(&self) -> &[Point3] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn scan_shape(&self) -> Option<(usize, usize)> {
        self.scan_shape
    }

    pub fn bounds(&self) -> PlanarBounds {
        planar_bounds(&self.elements)
    }

    pub fn bounds_of(&self, range: Range<usize>) -> PlanarBounds {
        planar_bounds(&self.elements[range])
    }

    /// Largest lateral extent `L` of the aperture.
    pub fn size(&self) -> f64 {
        let b = self.bounds();
        b.width().max(b.height())
    }

    pub fn center(&self) -> Point3 {
        let sum: Point3 = self.elements.iter().sum();
        sum / self.elements.len() as f64
    }

    pub fn max_z(&self) -> f64 {
        self.elements
            .iter()
            .map(|p| p.z)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Typical element spacing, estimated from the covered area.
    pub fn pitch(&self) -> f64 {
        let b = self.bounds();
        let n = self.elements.len() as f64;
        match self.scan_shape {
            Some((nx, ny)) if nx > 1 && ny > 1 => {
                0.5 * (b.width() / (nx - 1) as f64 + b.height() / (ny - 1) as f64)
            }
            _ => {
                let area = b.width() * b.height();
                if area > 0.0 {
                    (area / n).sqrt()
                } else {
                    b.width().max(b.height()) / (n - 1.0).max(1.0)
                }
            }
        }
    }
}

fn planar_bounds(points: &[Point3]) -> PlanarBounds {
    let mut b = PlanarBounds {
        x_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_min: f64::INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for p in points {
        b.x_min = b.x_min.min(p.x);
        b.x_max = b.x_max.max(p.x);
        b.y_min = b.y_min.min(p.y);
        b.y_max = b.y_max.max(p.y);
    }
    b
}

/// Trajectory uncertainty of a handheld scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterSpec {
    /// Peak-to-peak bound on the depth (`z′`) fluctuation, metres.
    pub depth: f64,
    /// Bound on the lateral (`x′`, `y′`) position noise, metres.
    #[serde(default)]
    pub lateral: f64,
}

impl JitterSpec {
    pub const NONE: JitterSpec = JitterSpec {
        depth: 0.0,
        lateral: 0.0,
    };
}

/// Simulate a linear array of `ny` elements (along y) swept over `nx` scan
/// positions (along x), covering a nominal `extent × extent` square.
///
/// Depth follows a smooth random walk over scan positions plus a smooth
/// random tilt of the array; lateral positions get bounded uniform noise.
pub fn generate_handheld_aperture(
    nx: usize,
    ny: usize,
    extent: f64,
    jitter: JitterSpec,
    seed: u64,
) -> Result<SyntheticAperture> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(
            "aperture needs at least one scan position and one element",
        ));
    }
    if !(extent.is_finite() && extent > 0.0) {
        return Err(Error::invalid(format!(
            "aperture extent must be positive, got {extent}"
        )));
    }
    if !(jitter.depth >= 0.0 && jitter.lateral >= 0.0) {
        return Err(Error::invalid("jitter amplitudes must be non-negative"));
    }

    let nominal = |i: usize, n: usize| {
        if n == 1 {
            0.0
        } else {
            -0.5 * extent + extent * i as f64 / (n - 1) as f64
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heave = smooth_walk(&mut rng, nx);
    let tilt = smooth_walk(&mut rng, nx);

    let mut raw = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            let across = if ny == 1 {
                0.0
            } else {
                nominal(iy, ny) / (0.5 * extent)
            };
            raw.push(heave[ix] + 0.5 * tilt[ix] * across);
        }
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let peak = raw.iter().map(|z| (z - mean).abs()).fold(0.0, f64::max);
    let depth_scale = if peak > 0.0 {
        0.5 * jitter.depth / peak
    } else {
        0.0
    };

    let mut elements = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            let (dx, dy) = if jitter.lateral > 0.0 {
                (
                    rng.gen_range(-jitter.lateral..=jitter.lateral),
                    rng.gen_range(-jitter.lateral..=jitter.lateral),
                )
            } else {
                (0.0, 0.0)
            };
            let z = (raw[ix * ny + iy] - mean) * depth_scale;
            elements.push(Point3::new(nominal(ix, nx) + dx, nominal(iy, ny) + dy, z));
        }
    }
    SyntheticAperture::new(elements, Some((nx, ny)))
}

/// Low-frequency random walk: integrated uniform steps, box-smoothed.
fn smooth_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut walk = Vec::with_capacity(n);
    let mut acc = 0.0;
    for _ in 0..n {
        acc += rng.gen_range(-1.0..=1.0);
        walk.push(acc);
    }
    let half = (n / 8).max(1);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            walk[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Box-shaped imaging region `D` in front of the aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagingRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl ImagingRegion {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        let r = Self {
            x_min: min.x,
            x_max: max.x,
            y_min: min.y,
            y_max: max.y,
            z_min: min.z,
            z_max: max.z,
        };
        r.validate()?;
        Ok(r)
    }

    /// Cube of side `size` centred at `(0, 0, depth)`.
    pub fn centered_cube(size: f64, depth: f64) -> Result<Self> {
        let h = 0.5 * size;
        Self::new(Point3::new(-h, -h, depth - h), Point3::new(h, h, depth + h))
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.x_min, self.x_max, self.y_min, self.y_max, self.z_min, self.z_max,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("region bounds must be finite"));
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max && self.z_min < self.z_max) {
            return Err(Error::invalid(
                "region extents must be positive along every axis",
            ));
        }
        if self.z_min <= 0.0 {
            return Err(Error::invalid(
                "region must lie in front of the aperture (z_min > 0)",
            ));
        }
        Ok(())
    }

    /// Checks that the region is strictly in front of every element.
    pub fn validate_against(&self, aperture: &SyntheticAperture) -> Result<()> {
        self.validate()?;
        let zmax = aperture.max_z();
        if self.z_min <= zmax {
            return Err(Error::invalid(format!(
                "region z_min {} is not in front of the deepest element (z' = {zmax})",
                self.z_min
            )));
        }
        Ok(())
    }

    pub fn min(&self) -> Point3 {
        Point3::new(self.x_min, self.y_min, self.z_min)
    }

    pub fn max(&self) -> Point3 {
        Point3::new(self.x_max, self.y_max, self.z_max)
    }

    pub fn extents(&self) -> Point3 {
        self.max() - self.min()
    }

    pub fn center(&self) -> Point3 {
        0.5 * (self.min() + self.max())
    }

    /// `V(D)`.
    pub fn volume(&self) -> f64 {
        let e = self.extents();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        p.x >= self.x_min - tol
            && p.x <= self.x_max + tol
            && p.y >= self.y_min - tol
            && p.y <= self.y_max + tol
            && p.z >= self.z_min - tol
            && p.z <= self.z_max + tol
    }

    /// Region grown by `margin` on every side (z_min kept positive).
    pub fn expanded(&self, margin: f64) -> Self {
        self.expanded_by(&Point3::repeat(margin))
    }

    /// Region grown by a per-axis margin (z_min kept at least half its value).
    pub fn expanded_by(&self, margin: &Point3) -> Self {
        Self {
            x_min: self.x_min - margin.x,
            x_max: self.x_max + margin.x,
            y_min: self.y_min - margin.y,
            y_max: self.y_max + margin.y,
            z_min: (self.z_min - margin.z).max(0.5 * self.z_min),
            z_max: self.z_max + margin.z,
        }
    }

    /// Uniform `n × n × n` sample lattice spanning the region, boundary included.
    pub fn lattice(&self, n: usize) -> Vec<Point3> {
        CartesianGrid::spanning(self, [n, n, n]).points()
    }

    /// Point of the region closest to `p`.
    pub fn clamp(&self, p: &Point3) -> Point3 {
        Point3::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
            p.z.clamp(self.z_min, self.z_max),
        )
    }

    /// Scale all coordinates about the origin.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            x_min: self.x_min * s,
            x_max: self.x_max * s,
            y_min: self.y_min * s,
            y_max: self.y_max * s,
            z_min: self.z_min * s,
            z_max: self.z_max * s,
        }
    }
}

/// Uniform Cartesian sampling grid; x varies fastest in linear indexing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianGrid {
    pub origin: Point3,
    pub step: [f64; 3],
    pub dims: [usize; 3],
}

impl CartesianGrid {
    /// Grid with `dims` samples spanning the region edge to edge. A single
    /// sample along an axis sits on the region centre.
    pub fn spanning(region: &ImagingRegion, dims: [usize; 3]) -> Self {
        let min = region.min();
        let ext = region.extents();
        let c = region.center();
        let mut origin = Point3::zeros();
        let mut step = [0.0; 3];
        for a in 0..3 {
            if dims[a] <= 1 {
                origin[a] = c[a];
            } else {
                origin[a] = min[a];
                step[a] = ext[a] / (dims[a] - 1) as f64;
            }
        }
        Self { origin, step, dims }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.dims[1] + iy) * self.dims[0] + ix
    }

    pub fn point(&self, ix: usize, iy: usize, iz: usize) -> Point3 {
        Point3::new(
            self.origin.x + ix as f64 * self.step[0],
            self.origin.y + iy as f64 * self.step[1],
            self.origin.z + iz as f64 * self.step[2],
        )
    }

    pub fn points(&self) -> Vec<Point3> {
        let mut out = Vec::with_capacity(self.len());
        for iz in 0..self.dims[2] {
            for iy in 0..self.dims[1] {
                for ix in 0..self.dims[0] {
                    out.push(self.point(ix, iy, iz));
                }
            }
        }
        out
    }

    /// Nearest grid index to `p` along each axis, clamped to the grid.
    pub fn nearest(&self, p: &Point3) -> [usize; 3] {
        let mut idx = [0; 3];
        for a in 0..3 {
            if self.dims[a] > 1 && self.step[a] > 0.0 {
                let f = ((p[a] - self.origin[a]) / self.step[a]).round();
                idx[a] = f.clamp(0.0, (self.dims[a] - 1) as f64) as usize;
            }
        }
        idx
    }
}

/// A point reflector with complex reflectivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub position: Point3,
    pub reflectivity: Complex64,
}

/// Ground-truth reflectivity `f(p)` as a set of point scatterers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    scatterers: Vec<Scatterer>,
}

impl Scene {
    pub fn new(scatterers: Vec<Scatterer>, region: &ImagingRegion) -> Result<Self> {
        for s in &scatterers {
            let p = s.position;
            if !region.contains(&p, 1e-12) {
                return Err(Error::ScattererOutsideRegion {
                    x: p.x,
                    y: p.y,
                    z: p.z,
                });
            }
        }
        Ok(Self { scatterers })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn scatterers(&self) -> &[Scatterer] {
        &self.scatterers
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }
}

/// Binary merge tree of contiguous subarrays.
///
/// `level(1)` holds `2^(M-1)` subarrays; subarray `n` of level `m` is the
/// union of subarrays `2n` and `2n+1` of level `m-1` (zero-based `n`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubarrayTree {
    levels: Vec<Vec<Range<usize>>>,
}

impl SubarrayTree {
    /// Number of factorization levels `M`.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Subarrays of level `m` (one-based).
    pub fn level(&self, m: usize) -> &[Range<usize>] {
        &self.levels[m - 1]
    }

    /// Children `(2n, 2n+1)` at level `m-1` of subarray `n` at level `m >= 2`.
    pub fn children(&self, m: usize, n: usize) -> (Range<usize>, Range<usize>) {
        let below = self.level(m - 1);
        (below[2 * n].clone(), below[2 * n + 1].clone())
    }
}

/// Split the aperture, in scan order, into `2^(M-1)` balanced contiguous
/// subarrays and build the merge tree above them.
pub fn partition_subarrays(aperture: &SyntheticAperture, levels: usize) -> Result<SubarrayTree> {
    let n = aperture.len();
    if levels == 0 {
        return Err(Error::invalid("factorization depth must be at least 1"));
    }
    let leaves = 1usize
        .checked_shl((levels - 1) as u32)
        .filter(|&l| l <= n)
        .ok_or_else(|| {
            Error::invalid(format!(
                "{levels} levels need at least 2^{} elements, aperture has {n}",
                levels - 1
            ))
        })?;

    let base = n / leaves;
    let extra = n % leaves;
    let mut first = Vec::with_capacity(leaves);
    let mut start = 0;
    for i in 0..leaves {
        let size = base + usize::from(i < extra);
        first.push(start..start + size);
        start += size;
    }

    let mut all = vec![first];
    while all.last().map_or(0, Vec::len) > 1 {
        let prev = all.last().unwrap();
        let next = prev
            .chunks(2)
            .map(|pair| pair[0].start..pair[1].end)
            .collect();
        all.push(next);
    }
    Ok(SubarrayTree { levels: all })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice_aperture(n: usize) -> SyntheticAperture {
        generate_handheld_aperture(n, 1, 1.0, JitterSpec::NONE, 0).unwrap()
    }

    #[test]
    fn frequency_grid_wavenumbers() {
        let g = FrequencyGrid::new(12e9, 15e9, 16).unwrap();
        assert!((g.k_min() - 2.0 * std::f64::consts::PI * 12e9 / SPEED_OF_LIGHT).abs() < 1e-12);
        assert!((g.wavenumber(15) - g.k_max()).abs() < 1e-9);
        assert!((g.frequency(1) - g.frequency(0) - 200e6).abs() < 1e-3);
        assert!(FrequencyGrid::new(15e9, 12e9, 16).is_err());
        assert!(FrequencyGrid::new(12e9, 15e9, 1).is_err());
    }

    #[test]
    fn zero_jitter_is_planar_lattice() {
        let a = generate_handheld_aperture(3, 3, 0.1, JitterSpec::NONE, 99).unwrap();
        assert_eq!(a.len(), 9);
        assert!(a.elements().iter().all(|p| p.z == 0.0));
        assert_eq!(a.elements()[0], Point3::new(-0.05, -0.05, 0.0));
        assert_eq!(a.elements()[1], Point3::new(-0.05, 0.0, 0.0));
        assert_eq!(a.elements()[8], Point3::new(0.05, 0.05, 0.0));
    }

    #[test]
    fn jitter_is_bounded_and_deterministic() {
        let j = JitterSpec {
            depth: 0.08,
            lateral: 0.001,
        };
        let a = generate_handheld_aperture(101, 101, 0.45, j, 7).unwrap();
        let b = generate_handheld_aperture(101, 101, 0.45, j, 7).unwrap();
        assert_eq!(a, b);
        let zs: Vec<f64> = a.elements().iter().map(|p| p.z).collect();
        let spread = zs.iter().cloned().fold(f64::MIN, f64::max)
            - zs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 0.08 + 1e-12 && spread > 0.02, "spread {spread}");
        let c = generate_handheld_aperture(101, 101, 0.45, j, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_extent() {
        assert!(generate_handheld_aperture(3, 3, 0.0, JitterSpec::NONE, 0).is_err());
        assert!(generate_handheld_aperture(3, 3, -1.0, JitterSpec::NONE, 0).is_err());
    }

    #[test]
    fn even_partition() {
        let t = partition_subarrays(&lattice_aperture(8), 3).unwrap();
        let sizes: Vec<usize> = t.level(1).iter().map(|r| r.len()).collect();
        assert_eq!(sizes, vec![2, 2, 2, 2]);
        assert_eq!(t.level(3).len(), 1);
        assert_eq!(t.level(3)[0], 0..8);
        assert_eq!(t.children(2, 1), (4..6, 6..8));
    }

    #[test]
    fn uneven_partition_is_balanced() {
        // Enumerated by hand: 10 = 3 + 3 + 2 + 2.
        let t = partition_subarrays(&lattice_aperture(10), 3).unwrap();
        let sizes: Vec<usize> = t.level(1).iter().map(|r| r.len()).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        assert_eq!(t.level(2), &[0..6, 6..10]);
    }

    #[test]
    fn degenerate_partition() {
        let a = generate_handheld_aperture(101, 101, 0.45, JitterSpec::NONE, 0).unwrap();
        let t = partition_subarrays(&a, 1).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.level(1).len(), 1);
        assert_eq!(t.level(1)[0], 0..101 * 101);
    }

    #[test]
    fn too_many_levels() {
        assert!(partition_subarrays(&lattice_aperture(8), 4).is_ok());
        assert!(partition_subarrays(&lattice_aperture(8), 5).is_err());
        assert!(partition_subarrays(&lattice_aperture(8), 0).is_err());
    }

    #[test]
    fn region_checks() {
        assert!(ImagingRegion::centered_cube(0.5, 0.4).is_ok());
        assert!(ImagingRegion::centered_cube(0.5, 0.2).is_err());
        let r = ImagingRegion::centered_cube(0.5, 0.4).unwrap();
        assert!((r.volume() - 0.125).abs() < 1e-15);
        let j = JitterSpec {
            depth: 0.4,
            lateral: 0.0,
        };
        let a = generate_handheld_aperture(11, 11, 0.45, j, 1).unwrap();
        assert!(r.validate_against(&a).is_err());
    }

    #[test]
    fn cartesian_grid_layout() {
        let r = ImagingRegion::centered_cube(1.0, 1.0).unwrap();
        let g = CartesianGrid::spanning(&r, [3, 2, 1]);
        let pts = g.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], Point3::new(0.0, -0.5, 1.0));
        assert_eq!(pts[3], Point3::new(-0.5, 0.5, 1.0));
        assert_eq!(g.nearest(&Point3::new(0.4, 0.1, 7.0)), [2, 1, 0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_covers_each_level(n in 1usize..300, m in 1usize..8) {
                let a = lattice_aperture(n.max(1));
                match partition_subarrays(&a, m) {
                    Ok(t) => {
                        for level in 1..=t.depth() {
                            let ranges = t.level(level);
                            prop_assert_eq!(ranges.len(), 1 << (m - level));
                            prop_assert_eq!(ranges[0].start, 0);
                            prop_assert_eq!(ranges.last().unwrap().end, n);
                            for w in ranges.windows(2) {
                                prop_assert_eq!(w[0].end, w[1].start);
                            }
                        }
                        let sizes: Vec<usize> = t.level(1).iter().map(|r| r.len()).collect();
                        let mx = *sizes.iter().max().unwrap();
                        let mn = *sizes.iter().min().unwrap();
                        prop_assert!(mx - mn <= 1 && mn >= 1);
                        prop_assert_eq!(t.clone(), partition_subarrays(&a, m).unwrap());
                    }
                    Err(_) => prop_assert!((1usize << (m - 1)) > n),
                }
            }
        }
    }
}
