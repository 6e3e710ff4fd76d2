//! Analytic local spectrum of subimages.
//!
//! For a subarray with planar extents `[x′min, x′max] × [y′min, y′max]`
//! (element depth ignored), the local spectrum at an image point is bounded
//! by a parallelepiped spanned by key-point differences. The same key points
//! define a downconversion phase `Φ` and curvilinear coordinates `(u, v, n)`
//! in which the subimage is band limited to a unit box.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FrequencyGrid, ImagingRegion, PlanarBounds, Point3, SyntheticAperture};

/// Sign applied to each row of `T_s` to obtain the Jacobian of
/// [`llt_forward`]. With `k1..k4` ordered as in [`keypoints`], `∇u = −v1/2π`
/// and `∇v = −v2/2π`, while `∇n = +v3/2π`. The orientation only flips lattice
/// axes; sampling density is unaffected.
pub const LLT_ORIENTATION: [f64; 3] = [-1.0, -1.0, 1.0];

/// Newton stopping threshold on `‖llt_forward(p) − target‖∞`.
pub const INVERT_TOLERANCE: f64 = 1e-9;
pub const INVERT_MAX_ITERATIONS: usize = 50;

/// Planar bounds of a subarray as seen by the spectrum formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubarrayExtents {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl SubarrayExtents {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let e = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        if ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("subarray extents must be finite"));
        }
        if x_min > x_max || y_min > y_max {
            return Err(Error::invalid("subarray extents need min <= max"));
        }
        Ok(e)
    }

    /// Bounds of the given elements' actual `(x′, y′)`.
    pub fn of_elements(aperture: &SyntheticAperture, range: std::ops::Range<usize>) -> Self {
        aperture.bounds_of(range).into()
    }

    /// Symmetrically widen any axis narrower than `width`.
    pub fn with_min_width(self, width: f64) -> Self {
        let widen = |lo: f64, hi: f64| {
            if hi - lo >= width {
                (lo, hi)
            } else {
                let c = 0.5 * (lo + hi);
                (c - 0.5 * width, c + 0.5 * width)
            }
        };
        let (x_min, x_max) = widen(self.x_min, self.x_max);
        let (y_min, y_max) = widen(self.y_min, self.y_max);
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point3 {
        Point3::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
            0.0,
        )
    }

    /// Four corners at `z′ = 0`.
    pub fn vertices(&self) -> [Point3; 4] {
        [
            Point3::new(self.x_min, self.y_min, 0.0),
            Point3::new(self.x_min, self.y_max, 0.0),
            Point3::new(self.x_max, self.y_min, 0.0),
            Point3::new(self.x_max, self.y_max, 0.0),
        ]
    }

    /// `(x′₀, y′₀)`: the subarray coordinates nearest to `(x, y)`.
    pub fn nearest(&self, x: f64, y: f64) -> (f64, f64) {
        (
            x.clamp(self.x_min, self.x_max),
            y.clamp(self.y_min, self.y_max),
        )
    }
}

impl From<PlanarBounds> for SubarrayExtents {
    fn from(b: PlanarBounds) -> Self {
        Self {
            x_min: b.x_min,
            x_max: b.x_max,
            y_min: b.y_min,
            y_max: b.y_max,
        }
    }
}

/// `k₀ = 2k ∇_p ‖p − p′‖`.
pub fn local_wavenumber(p_prime: &Point3, p: &Point3, k: f64) -> Result<Point3> {
    let d = p - p_prime;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(d * (2.0 * k / r))
}

/// Wavenumber-domain key points of one (subarray, point) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyPointSet {
    pub k1: Point3,
    pub k2: Point3,
    pub k3: Point3,
    pub k4: Point3,
    pub k5: Point3,
    pub k6: Point3,
    pub k7: Point3,
}

impl KeyPointSet {
    pub fn v1(&self) -> Point3 {
        self.k2 - self.k1
    }

    pub fn v2(&self) -> Point3 {
        self.k4 - self.k3
    }

    pub fn v3(&self) -> Point3 {
        self.k7 - self.k5
    }

    /// Spectrum centre `k_c = (k5 + k7)/2`.
    pub fn center(&self) -> Point3 {
        0.5 * (self.k5 + self.k7)
    }

    /// `T_s = (1/2π)[v1ᵀ; v2ᵀ; v3ᵀ]`.
    pub fn spatial_transform(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[
            self.v1().transpose(),
            self.v2().transpose(),
            self.v3().transpose(),
        ]) / (2.0 * PI)
    }

    /// `T_k = 2π[v1 v2 v3]⁻¹`, if the generating vectors are independent.
    pub fn wavenumber_transform(&self) -> Option<Matrix3<f64>> {
        Matrix3::from_columns(&[self.v1(), self.v2(), self.v3()])
            .try_inverse()
            .map(|m| m * (2.0 * PI))
    }

    /// Whether `k` lies in `{k_c + a·v1/2 + b·v2/2 + c·v3/2 : |a|,|b|,|c| ≤ 1+ε}`.
    pub fn contains(&self, k: &Point3, slack: f64) -> bool {
        let basis = Matrix3::from_columns(&[self.v1(), self.v2(), self.v3()]) * 0.5;
        match basis.try_inverse() {
            Some(inv) => {
                let c = inv * (k - self.center());
                c.iter().all(|a| a.abs() <= 1.0 + slack)
            }
            None => false,
        }
    }
}

/// Precomputed spectrum geometry for one subarray and frequency band.
///
/// All the free functions in this module delegate here; use it directly
/// when evaluating many points for the same subarray.
#[derive(Debug, Clone, Copy)]
pub struct SubarrayField {
    ext: SubarrayExtents,
    k_min: f64,
    k_max: f64,
    /// `4(Δx′)² + 4(Δy′)²`.
    diag4: f64,
}

/// Quantities shared by the phase, coordinates and Jacobian at one point.
struct VertexSums {
    r: f64,
    grad_r: Point3,
    root: f64,
}

impl SubarrayField {
    pub fn new(ext: SubarrayExtents, kgrid: &FrequencyGrid) -> Self {
        let (w, h) = (ext.width(), ext.height());
        Self {
            ext,
            k_min: kgrid.k_min(),
            k_max: kgrid.k_max(),
            diag4: 4.0 * (w * w + h * h),
        }
    }

    pub fn extents(&self) -> &SubarrayExtents {
        &self.ext
    }

    fn vertex_sums(&self, p: &Point3) -> Result<VertexSums> {
        if !(p.z > 0.0) {
            return Err(Error::invalid(format!(
                "point z = {} is not in front of the array plane",
                p.z
            )));
        }
        let mut r = 0.0;
        let mut grad_r = Point3::zeros();
        for v in self.ext.vertices() {
            let d = p - v;
            let n = d.norm();
            r += n;
            grad_r += d / n;
        }
        let radicand = r * r - self.diag4;
        if !(radicand > 0.0) {
            return Err(Error::BetaDomain { radicand });
        }
        Ok(VertexSums {
            r,
            grad_r,
            root: radicand.sqrt(),
        })
    }

    pub fn keypoints(&self, p: &Point3) -> Result<KeyPointSet> {
        let e = &self.ext;
        let (x0, y0) = e.nearest(p.x, p.y);
        let k0 = |x: f64, y: f64, k: f64| local_wavenumber(&Point3::new(x, y, 0.0), p, k);
        let k1 = k0(e.x_min, y0, self.k_max)?;
        let k2 = k0(e.x_max, y0, self.k_max)?;
        let k3 = k0(x0, e.y_min, self.k_max)?;
        let k4 = k0(x0, e.y_max, self.k_max)?;
        let s = self.vertex_sums(p)?;
        let k5 = s.grad_r * (0.5 * self.k_min);
        let k6 = k5 * (2.0 * self.k_max / k5.norm());
        let beta = self.k_max * s.r / (self.k_min * s.root);
        let k7 = k5 * beta;
        Ok(KeyPointSet {
            k1,
            k2,
            k3,
            k4,
            k5,
            k6,
            k7,
        })
    }

    /// Downconversion phase `Φ` with `∇Φ = k_c`.
    pub fn phase(&self, p: &Point3) -> Result<f64> {
        let s = self.vertex_sums(p)?;
        Ok(0.25 * self.k_max * s.root + 0.25 * self.k_min * s.r)
    }

    /// `(u, v, n)` of point `p`.
    pub fn forward(&self, p: &Point3) -> Result<Point3> {
        let s = self.vertex_sums(p)?;
        Ok(self.forward_with(p, &s))
    }

    fn forward_with(&self, p: &Point3, s: &VertexSums) -> Point3 {
        let e = &self.ext;
        let (x0, y0) = e.nearest(p.x, p.y);
        let z2 = p.z * p.z;
        let dist = |x: f64, y: f64| ((p.x - x).powi(2) + (p.y - y).powi(2) + z2).sqrt();
        let u = self.k_max / PI * (dist(e.x_min, y0) - dist(e.x_max, y0));
        let v = self.k_max / PI * (dist(x0, e.y_min) - dist(x0, e.y_max));
        let n = self.k_max / (4.0 * PI) * s.root - self.k_min / (4.0 * PI) * s.r;
        Point3::new(u, v, n)
    }

    /// Phase and coordinates in one pass.
    pub fn phase_and_forward(&self, p: &Point3) -> Result<(f64, Point3)> {
        let s = self.vertex_sums(p)?;
        let phase = 0.25 * self.k_max * s.root + 0.25 * self.k_min * s.r;
        Ok((phase, self.forward_with(p, &s)))
    }

    /// `T_s` at `p`; errors if it is singular.
    pub fn jacobian(&self, p: &Point3) -> Result<Matrix3<f64>> {
        let ts = self.keypoints(p)?.spatial_transform();
        let det = ts.determinant();
        if !(det.abs() > 1e-300) || !det.is_finite() {
            return Err(Error::SingularTransform { det });
        }
        Ok(ts)
    }

    /// Jacobian of [`SubarrayField::forward`]: `T_s` with rows signed by
    /// [`LLT_ORIENTATION`].
    pub fn forward_jacobian(&self, p: &Point3) -> Result<Matrix3<f64>> {
        let mut j = self.jacobian(p)?;
        for (i, s) in LLT_ORIENTATION.iter().enumerate() {
            j.row_mut(i).scale_mut(*s);
        }
        Ok(j)
    }

    /// Solve `forward(p) = target` from `guess` and require the result to
    /// lie inside `limits`.
    pub fn invert(
        &self,
        target: &Point3,
        guess: &Point3,
        limits: &ImagingRegion,
    ) -> Result<Inversion> {
        let inv = self.solve(target, guess)?;
        let p = inv.position;
        if !limits.contains(&p, 0.0) {
            return Err(Error::OutsideRegion {
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
        Ok(inv)
    }

    /// Damped Newton iteration for `forward(p) = target`, unconstrained
    /// apart from staying in front of the array.
    pub fn solve(&self, target: &Point3, guess: &Point3) -> Result<Inversion> {
        let mut p = *guess;
        let mut f = self.forward(&p)? - target;
        let mut res = f.amax();
        let mut iterations = 0;
        while res > INVERT_TOLERANCE {
            if iterations == INVERT_MAX_ITERATIONS {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: res,
                });
            }
            iterations += 1;
            let j = self.forward_jacobian(&p)?;
            let step = j
                .lu()
                .solve(&f)
                .ok_or(Error::SingularTransform { det: 0.0 })?;
            // Backtrack until the residual drops; also keeps z positive.
            let mut t = 1.0;
            loop {
                let trial = p - step * t;
                if trial.z > 0.0 {
                    if let Ok(ft) = self.forward(&trial) {
                        let rt = (ft - target).amax();
                        if rt < res || t < 1e-3 {
                            p = trial;
                            f = ft - target;
                            res = rt;
                            break;
                        }
                    }
                }
                t *= 0.5;
                if t < 1e-6 {
                    return Err(Error::NoConvergence {
                        iterations,
                        residual: res,
                    });
                }
            }
        }
        Ok(Inversion {
            position: p,
            iterations,
        })
    }
}

/// Result of [`llt_invert`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub position: Point3,
    pub iterations: usize,
}

pub fn keypoints(ext: &SubarrayExtents, p: &Point3, kgrid: &FrequencyGrid) -> Result<KeyPointSet> {
    SubarrayField::new(*ext, kgrid).keypoints(p)
}

pub fn sdc_phase(ext: &SubarrayExtents, p: &Point3, kgrid: &FrequencyGrid) -> Result<f64> {
    SubarrayField::new(*ext, kgrid).phase(p)
}

pub fn llt_forward(ext: &SubarrayExtents, p: &Point3, kgrid: &FrequencyGrid) -> Result<Point3> {
    SubarrayField::new(*ext, kgrid).forward(p)
}

pub fn llt_jacobian(
    ext: &SubarrayExtents,
    p: &Point3,
    kgrid: &FrequencyGrid,
) -> Result<Matrix3<f64>> {
    SubarrayField::new(*ext, kgrid).jacobian(p)
}

/// Numerical inverse of [`llt_forward`]; the result must lie in `limits`.
pub fn llt_invert(
    ext: &SubarrayExtents,
    target: &Point3,
    guess: &Point3,
    kgrid: &FrequencyGrid,
    limits: &ImagingRegion,
) -> Result<Inversion> {
    SubarrayField::new(*ext, kgrid).invert(target, guess, limits)
}

/// Spatial Nyquist steps for an aperture (or subarray) imaging a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NyquistRates {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl NyquistRates {
    /// Samples per axis needed to cover `region` at these steps.
    pub fn dims(&self, region: &ImagingRegion) -> [usize; 3] {
        let e = region.extents();
        let n = |len: f64, step: f64| (len / step - 1e-9).ceil() as usize + 1;
        [n(e.x, self.dx), n(e.y, self.dy), n(e.z, self.dz)]
    }

    /// `N_s = V(D)/(ΔxΔyΔz)`.
    pub fn sample_count(&self, region: &ImagingRegion) -> f64 {
        region.volume() / (self.dx * self.dy * self.dz)
    }
}

/// Closed-form Nyquist steps from the extreme look angles.
///
/// The y line uses `y_max − y′min` in its first numerator, mirroring the x
/// line.
pub fn nyquist_rates(
    ext: &SubarrayExtents,
    region: &ImagingRegion,
    kgrid: &FrequencyGrid,
) -> Result<NyquistRates> {
    region.validate()?;
    let z = region.z_min;
    let k_max = kgrid.k_max();
    let k_min = kgrid.k_min();
    let cosine = |a: f64| a / (a * a + z * z).sqrt();
    let span = |lo: f64, hi: f64, lo_p: f64, hi_p: f64| cosine(hi - lo_p) - cosine(lo - hi_p);
    let sx = span(region.x_min, region.x_max, ext.x_min, ext.x_max);
    let sy = span(region.y_min, region.y_max, ext.y_min, ext.y_max);
    let xd = (region.x_min - ext.x_max)
        .abs()
        .max((region.x_max - ext.x_min).abs());
    let yd = (region.y_min - ext.y_max)
        .abs()
        .max((region.y_max - ext.y_min).abs());
    let kz_span = k_max - k_min * z / (xd * xd + yd * yd + z * z).sqrt();
    if !(sx > 0.0 && sy > 0.0 && kz_span > 0.0) {
        return Err(Error::invalid("degenerate region for Nyquist rates"));
    }
    Ok(NyquistRates {
        dx: PI / (k_max * sx),
        dy: PI / (k_max * sy),
        dz: PI / kz_span,
    })
}

/// Default final-grid dimensions for imaging `region` with the whole aperture.
pub fn nyquist_dims(
    aperture: &SyntheticAperture,
    region: &ImagingRegion,
    kgrid: &FrequencyGrid,
) -> Result<[usize; 3]> {
    let ext = SubarrayExtents::from(aperture.bounds());
    Ok(nyquist_rates(&ext, region, kgrid)?.dims(region))
}
