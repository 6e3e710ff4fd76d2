//! Image-quality metrics: point-spread-function cuts, PSNR against a
//! reference volume and maximum-intensity projections.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bpa::ImageVolume;
use crate::error::{Error, Result};
use crate::model::{CartesianGrid, Point3};

/// Value reported when a test image matches its reference exactly.
pub const PSNR_SENTINEL_DB: f64 = 200.0;

/// Default dB floor of [`max_intensity_projection`].
pub const DEFAULT_FLOOR_DB: f64 = -40.0;

/// Mainlobe width, sidelobe ratios and peak location of a 1-D profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsfReport {
    /// Distance between the −3 dB crossings, in millimetres.
    pub mainlobe_width_mm: f64,
    pub pslr_db: f64,
    pub islr_db: f64,
    /// Peak location in metres, parabolically refined.
    pub peak_position: f64,
}

/// Measure a 1-D profile sampled every `spacing` metres; positions are
/// measured from the first sample.
///
/// The mainlobe spans the first local minima on either side of the global
/// magnitude peak; everything outside it is sidelobe.
pub fn psf_metrics(profile: &[Complex64], spacing: f64) -> Result<PsfReport> {
    if !(spacing > 0.0) {
        return Err(Error::invalid("profile spacing must be positive"));
    }
    let mag: Vec<f64> = profile.iter().map(|v| v.norm()).collect();
    let (peak, &top) = mag
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Unmeasurable("empty profile".into()))?;
    if !(top > 0.0) {
        return Err(Error::Unmeasurable("profile is identically zero".into()));
    }

    // Ties are only crossed near the top, so a flat peak is one mainlobe.
    let descends = |from: usize, to: usize| {
        mag[to] < mag[from] || (mag[to] == mag[from] && mag[from] > 0.5 * top)
    };
    let mut left = peak;
    while left > 0 && descends(left, left - 1) {
        left -= 1;
    }
    let mut right = peak;
    while right + 1 < mag.len() && descends(right, right + 1) {
        right += 1;
    }
    if left == 0 || right + 1 == mag.len() {
        return Err(Error::Unmeasurable(
            "no null on one side of the mainlobe".into(),
        ));
    }

    let db = |v: f64| 20.0 * (v / top).log10();
    let half = -3.0;
    let crossing = |from: usize, step: isize| -> Option<f64> {
        let mut i = from;
        loop {
            let j = i.checked_add_signed(step)?;
            let (a, b) = (db(mag[i]), db(*mag.get(j)?));
            if b < half {
                let t = (a - half) / (a - b);
                return Some(i as f64 + step as f64 * t);
            }
            i = j;
        }
    };
    let (lo, hi) = match (crossing(peak, -1), crossing(peak, 1)) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(Error::Unmeasurable("no −3 dB crossing".into())),
    };

    let (mut main, mut side, mut side_peak) = (0.0, 0.0, 0.0f64);
    for (i, &m) in mag.iter().enumerate() {
        if i > left && i < right {
            main += m * m;
        } else {
            side += m * m;
            side_peak = side_peak.max(m);
        }
    }

    Ok(PsfReport {
        mainlobe_width_mm: (hi - lo) * spacing * 1e3,
        pslr_db: 20.0 * (side_peak / top).log10(),
        islr_db: 10.0 * (side / main).log10(),
        peak_position: (peak as f64 + parabolic_offset(&mag, peak)) * spacing,
    })
}

fn parabolic_offset(mag: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= mag.len() {
        return 0.0;
    }
    let (a, b, c) = (mag[i - 1], mag[i], mag[i + 1]);
    let d = a - 2.0 * b + c;
    if d == 0.0 {
        0.0
    } else {
        (0.5 * (a - c) / d).clamp(-0.5, 0.5)
    }
}

/// A line of voxels along one axis of a Cartesian volume.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfCut {
    pub axis: usize,
    pub values: Vec<Complex64>,
    /// Coordinate of the first sample along `axis`.
    pub origin: f64,
    pub spacing: f64,
}

impl PsfCut {
    /// Cut along `axis` through the voxel nearest `through`.
    pub fn extract(volume: &ImageVolume, axis: usize, through: &Point3) -> Result<Self> {
        let g = cartesian(volume)?;
        if axis > 2 {
            return Err(Error::invalid(format!("axis {axis} is not 0, 1 or 2")));
        }
        let mut idx = g.nearest(through);
        let values = (0..g.dims[axis])
            .map(|i| {
                idx[axis] = i;
                volume.values()[g.index(idx[0], idx[1], idx[2])]
            })
            .collect();
        Ok(Self {
            axis,
            values,
            origin: g.origin[axis],
            spacing: g.step[axis],
        })
    }

    /// The samples within `half_width` of coordinate `center`, so that
    /// neighbouring targets do not count as sidelobes.
    pub fn window(&self, center: f64, half_width: f64) -> Self {
        let n = self.values.len();
        let idx = |c: f64| {
            ((c - self.origin) / self.spacing)
                .round()
                .clamp(0.0, n as f64 - 1.0) as usize
        };
        let (lo, hi) = (idx(center - half_width), idx(center + half_width));
        Self {
            axis: self.axis,
            values: self.values[lo..=hi].to_vec(),
            origin: self.origin + lo as f64 * self.spacing,
            spacing: self.spacing,
        }
    }

    /// [`psf_metrics`] with the peak position in volume coordinates.
    pub fn metrics(&self) -> Result<PsfReport> {
        let mut r = psf_metrics(&self.values, self.spacing)?;
        r.peak_position += self.origin;
        Ok(r)
    }
}

fn cartesian(volume: &ImageVolume) -> Result<&CartesianGrid> {
    volume
        .cartesian()
        .ok_or_else(|| Error::GridMismatch("operation needs a Cartesian volume".into()))
}

/// `s⋆ = argmin_s ‖s·test − reference‖²`.
pub fn ls_scale(reference: &[Complex64], test: &[Complex64]) -> Complex64 {
    let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
    for (r, t) in reference.iter().zip(test) {
        num += t.conj() * r;
        den += t.norm_sqr();
    }
    if den > 0.0 {
        num / den
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// PSNR of `test` against `reference` after complex least-squares scale
/// calibration, capped at [`PSNR_SENTINEL_DB`].
pub fn psnr_values(reference: &[Complex64], test: &[Complex64]) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::GridMismatch(format!(
            "{} reference values vs {} test values",
            reference.len(),
            test.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::GridMismatch("empty volumes".into()));
    }
    let s = ls_scale(reference, test);
    let peak = reference.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mse = reference
        .iter()
        .zip(test)
        .map(|(r, t)| (s * t - r).norm_sqr())
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_SENTINEL_DB);
    }
    Ok((20.0 * (peak / mse.sqrt()).log10()).min(PSNR_SENTINEL_DB))
}

/// [`psnr_values`] on two volumes sampled on the same grid.
pub fn psnr(reference: &ImageVolume, test: &ImageVolume) -> Result<f64> {
    if reference.grid() != test.grid() {
        return Err(Error::GridMismatch(
            "reference and test volumes are sampled on different grids".into(),
        ));
    }
    psnr_values(reference.values(), test.values())
}

/// `‖test − reference‖ / ‖reference‖` without scale calibration.
pub fn relative_rms(reference: &[Complex64], test: &[Complex64]) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::GridMismatch(format!(
            "{} reference values vs {} test values",
            reference.len(),
            test.len()
        )));
    }
    let num: f64 = reference
        .iter()
        .zip(test)
        .map(|(r, t)| (t - r).norm_sqr())
        .sum();
    let den: f64 = reference.iter().map(|r| r.norm_sqr()).sum();
    Ok((num / den.max(f64::MIN_POSITIVE)).sqrt())
}

/// A 2-D real image in `[0, 1]`, row-major, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Projection {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "{} pixels for a {width}×{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.pixels[row * self.width + col]
    }
}

/// Maximum of `|f|` along `axis`, normalized to the volume peak and mapped
/// from `[floor_db, 0] dB` onto `[0, 1]`.
///
/// Image axes: projecting along z gives columns = x, rows = y; along y,
/// columns = x, rows = z; along x, columns = y, rows = z. Row 0 holds the
/// largest coordinate of the row axis.
pub fn max_intensity_projection(
    volume: &ImageVolume,
    axis: usize,
    floor_db: f64,
) -> Result<Projection> {
    let g = cartesian(volume)?;
    if !(floor_db < 0.0) {
        return Err(Error::invalid("projection floor must be negative dB"));
    }
    let (col_axis, row_axis) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        2 => (0, 1),
        _ => return Err(Error::invalid(format!("axis {axis} is not 0, 1 or 2"))),
    };
    let (w, h) = (g.dims[col_axis], g.dims[row_axis]);
    let mut peak = vec![0.0f64; w * h];
    let values = volume.values();
    let mut idx = [0usize; 3];
    for iz in 0..g.dims[2] {
        for iy in 0..g.dims[1] {
            for ix in 0..g.dims[0] {
                idx[0] = ix;
                idx[1] = iy;
                idx[2] = iz;
                let row = h - 1 - idx[row_axis];
                let p = &mut peak[row * w + idx[col_axis]];
                *p = p.max(values[g.index(ix, iy, iz)].norm());
            }
        }
    }
    let top = peak.iter().copied().fold(0.0, f64::max);
    let pixels = peak
        .into_iter()
        .map(|m| {
            if top == 0.0 || m == 0.0 {
                return 0.0;
            }
            let db = 20.0 * (m / top).log10();
            ((db - floor_db) / -floor_db).clamp(0.0, 1.0)
        })
        .collect();
    Projection::new(w, h, pixels)
}

/// Key-value metrics document written by the command-line tool.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_rms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_psf: Option<PsfReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_psf: Option<PsfReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpa::{Provenance, VolumeGrid};
    use crate::model::ImagingRegion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sinc_profile(n: usize, width: f64, shift: f64) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let x = (i as f64 - 0.5 * n as f64 - shift) / width;
                let s = if x == 0.0 {
                    1.0
                } else {
                    (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
                };
                Complex64::new(s, 0.0)
            })
            .collect()
    }

    fn volume(dims: [usize; 3], values: Vec<Complex64>) -> ImageVolume {
        let region = ImagingRegion::centered_cube(1.0, 1.0).unwrap();
        let grid = CartesianGrid::spanning(&region, dims);
        ImageVolume::new(values, VolumeGrid::Cartesian(grid), Provenance::new("test")).unwrap()
    }

    #[test]
    fn sinc_first_sidelobe() {
        let r = psf_metrics(&sinc_profile(4001, 100.0, 0.0), 0.01).unwrap();
        assert!((r.pslr_db + 13.26).abs() < 0.1, "{}", r.pslr_db);
        // sinc(x) = 10^(−3/20) at x = 0.44220, in units of the null distance.
        assert!(
            (r.mainlobe_width_mm - 884.40).abs() < 0.5,
            "{}",
            r.mainlobe_width_mm
        );
        assert!(r.islr_db < 0.0);
    }

    #[test]
    fn circular_shift_and_scale_invariance() {
        let p = sinc_profile(801, 20.0, 0.3);
        let base = psf_metrics(&p, 1e-3).unwrap();
        let mut shifted = p.clone();
        shifted.rotate_right(37);
        let r = psf_metrics(&shifted, 1e-3).unwrap();
        assert!((r.mainlobe_width_mm - base.mainlobe_width_mm).abs() < 1e-9);
        assert!((r.pslr_db - base.pslr_db).abs() < 1e-9);
        assert!((r.islr_db - base.islr_db).abs() < 1e-9);
        assert!((r.peak_position - base.peak_position - 0.037).abs() < 1e-9);

        let scaled: Vec<_> = p.iter().map(|v| v * Complex64::new(0.0, 7.5)).collect();
        let r = psf_metrics(&scaled, 1e-3).unwrap();
        assert_eq!(r.pslr_db, base.pslr_db);
        assert!((r.islr_db - base.islr_db).abs() < 1e-12);
    }

    #[test]
    fn window_keeps_coordinates() {
        let cut = PsfCut {
            axis: 0,
            values: sinc_profile(201, 10.0, 0.0),
            origin: -1.0,
            spacing: 0.01,
        };
        let w = cut.window(0.0, 0.3);
        assert_eq!(w.values.len(), 61);
        assert!((w.origin + 0.3).abs() < 1e-12);
        let (a, b) = (cut.metrics().unwrap(), w.metrics().unwrap());
        assert!((a.peak_position - b.peak_position).abs() < 1e-12);
        assert!((a.mainlobe_width_mm - b.mainlobe_width_mm).abs() < 1e-9);
    }

    #[test]
    fn monotone_profile_is_unmeasurable() {
        let p: Vec<_> = (0..10).map(|i| Complex64::new(i as f64, 0.0)).collect();
        assert!(matches!(psf_metrics(&p, 1.0), Err(Error::Unmeasurable(_))));
        let zero = vec![Complex64::new(0.0, 0.0); 5];
        assert!(matches!(
            psf_metrics(&zero, 1.0),
            Err(Error::Unmeasurable(_))
        ));
    }

    #[test]
    fn psnr_sentinel_and_scale_calibration() {
        let v: Vec<_> = (0..100)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let a = volume([10, 10, 1], v.clone());
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_SENTINEL_DB);
        let c = Complex64::from_polar(3.7, 1.1);
        let b = volume([10, 10, 1], v.iter().map(|x| x * c).collect());
        assert_eq!(psnr(&a, &b).unwrap(), PSNR_SENTINEL_DB);
        let other = volume([100, 1, 1], v);
        assert!(matches!(psnr(&a, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn psnr_symmetric_under_joint_scaling() {
        let r: Vec<_> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.7).sin(), 0.2))
            .collect();
        let t: Vec<_> = r
            .iter()
            .enumerate()
            .map(|(i, v)| v + Complex64::new(0.01 * (i as f64).cos(), 0.0))
            .collect();
        let c = Complex64::from_polar(0.01, -2.0);
        let scale = |x: &[Complex64]| x.iter().map(|v| v * c).collect::<Vec<_>>();
        let a = psnr_values(&r, &t).unwrap();
        let b = psnr_values(&scale(&r), &scale(&t)).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn psnr_of_white_noise_at_one_percent() {
        // E|n|² = σ² per sample, so PSNR = 20·log10(max/σ) = 40 dB.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let sigma = 0.01;
        let normal = Normal::new(0.0, sigma / 2f64.sqrt()).unwrap();
        let r: Vec<_> = (0..n)
            .map(|i| Complex64::from_polar(if i == 0 { 1.0 } else { 0.5 }, i as f64))
            .collect();
        let t: Vec<_> = r
            .iter()
            .map(|v| v + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        let p = psnr_values(&r, &t).unwrap();
        assert!((p - 40.0).abs() < 0.5, "{p}");
    }

    #[test]
    fn projection_of_zero_volume_is_floor() {
        let v = volume([4, 3, 2], vec![Complex64::new(0.0, 0.0); 24]);
        let p = max_intensity_projection(&v, 2, DEFAULT_FLOOR_DB).unwrap();
        assert_eq!((p.width, p.height), (4, 3));
        assert!(p.pixels.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn projection_of_single_voxel() {
        let dims = [5, 4, 3];
        let mut values = vec![Complex64::new(0.0, 0.0); 60];
        let g = CartesianGrid::spanning(&ImagingRegion::centered_cube(1.0, 1.0).unwrap(), dims);
        values[g.index(3, 1, 2)] = Complex64::new(0.0, -2.0);
        let v = volume(dims, values);
        let p = max_intensity_projection(&v, 2, DEFAULT_FLOOR_DB).unwrap();
        for row in 0..p.height {
            for col in 0..p.width {
                let expect = if (col, row) == (3, 4 - 1 - 1) {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(p.get(col, row), expect);
            }
        }
        let p = max_intensity_projection(&v, 0, DEFAULT_FLOOR_DB).unwrap();
        assert_eq!((p.width, p.height), (4, 3));
        assert_eq!(p.get(1, 0), 1.0);
    }

    #[test]
    fn projection_maps_floor_linearly_in_db() {
        let mut values = vec![Complex64::new(0.0, 0.0); 3];
        values[0] = Complex64::new(1.0, 0.0);
        values[1] = Complex64::new(0.1, 0.0);
        values[2] = Complex64::new(1e-3, 0.0);
        let v = volume([3, 1, 1], values);
        let p = max_intensity_projection(&v, 2, -40.0).unwrap();
        assert!((p.pixels[0] - 1.0).abs() < 1e-12);
        assert!((p.pixels[1] - 0.5).abs() < 1e-12);
        assert_eq!(p.pixels[2], 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn profile() -> impl Strategy<Value = Vec<Complex64>> {
            prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 8..64)
                .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
        }

        proptest! {
            #[test]
            fn psnr_ignores_complex_scaling_of_the_test(
                reference in profile(),
                amp in 0.01..100.0f64,
                phase in -3.0..3.0f64,
            ) {
                let noisy: Vec<Complex64> = reference
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c + Complex64::new(1e-2 * (i as f64).sin(), 0.0))
                    .collect();
                let scaled: Vec<Complex64> =
                    noisy.iter().map(|c| c * Complex64::from_polar(amp, phase)).collect();
                let a = psnr_values(&reference, &noisy).unwrap();
                let b = psnr_values(&reference, &scaled).unwrap();
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
            }

            #[test]
            fn relative_rms_is_zero_only_for_equal_inputs(reference in profile()) {
                prop_assume!(reference.iter().any(|c| c.norm() > 0.0));
                prop_assert_eq!(relative_rms(&reference, &reference).unwrap(), 0.0);
            }

            #[test]
            fn projection_pixels_stay_in_unit_range(values in profile(), floor in -80.0..-1.0f64) {
                prop_assume!(values.iter().any(|c| c.norm() > 0.0));
                let n = values.len();
                let v = volume([n, 1, 1], values);
                let p = max_intensity_projection(&v, 1, floor).unwrap();
                prop_assert!(p.pixels.iter().all(|x| (0.0..=1.0).contains(x)));
                prop_assert!(p.pixels.contains(&1.0));
            }
        }
    }
}
