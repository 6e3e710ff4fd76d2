//! Range compression: frequency samples to delay-domain profiles, and
//! phase-preserving evaluation of those profiles at arbitrary delays.
//!
//! Profiles are stored as complex envelopes demodulated by the carrier
//! `k_ref = (k_min + k_max)/2`. The envelope is smooth at the upsampled
//! rate, so linear interpolation followed by explicit re-modulation
//! reproduces `∫ s(p′,k) e^{jkcτ} dk` closely.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{Point3, SPEED_OF_LIGHT};
use crate::simulator::DataCube;

pub const DEFAULT_UPSAMPLE: usize = 8;

/// Delay-domain profiles `s(p′, t)` for every element.
#[derive(Debug, Clone)]
pub struct RangeProfileSet {
    envelopes: Vec<Complex64>,
    positions: Vec<Point3>,
    elements: usize,
    len: usize,
    dt: f64,
    upsample: usize,
    k_ref: f64,
    /// `2/(c·dt)`: converts a one-way range to a fractional sample index.
    range_to_index: f64,
}

pub fn range_compress(cube: &DataCube, upsample: usize) -> Result<RangeProfileSet> {
    if upsample < 1 {
        return Err(Error::invalid("upsample factor must be at least 1"));
    }
    let freqs = cube.freqs();
    let nf = freqs.count();
    let len = (upsample * nf).next_power_of_two();
    let dk = freqs.k_step();
    let k_min = freqs.k_min();
    let k_ref = freqs.k_center();
    let dt = 2.0 * std::f64::consts::PI / (len as f64 * dk * SPEED_OF_LIGHT);

    // e^{-j(k_ref - k_min) c t_n}: strips the carrier left over from the
    // inverse transform so the stored envelope is baseband.
    let demod: Vec<Complex64> = (0..len)
        .map(|n| {
            let phase = -(k_ref - k_min) * SPEED_OF_LIGHT * n as f64 * dt;
            Complex64::from_polar(1.0, phase)
        })
        .collect();

    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(len);
    let mut envelopes = vec![Complex64::new(0.0, 0.0); cube.element_count() * len];
    envelopes.par_chunks_mut(len).enumerate().for_each_init(
        || vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()],
        |scratch, (e, out)| {
            out[..nf].copy_from_slice(cube.row(e));
            ifft.process_with_scratch(out, scratch);
            for (v, d) in out.iter_mut().zip(&demod) {
                *v *= d;
            }
        },
    );

    Ok(RangeProfileSet {
        envelopes,
        positions: cube.aperture().elements().to_vec(),
        elements: cube.element_count(),
        len,
        dt,
        upsample,
        k_ref,
        range_to_index: 2.0 / (SPEED_OF_LIGHT * dt),
    })
}

impl RangeProfileSet {
    pub fn element_count(&self) -> usize {
        self.elements
    }

    /// Phase centre of each element, in the same order as the profiles.
    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    /// Samples per profile.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn time_step(&self) -> f64 {
        self.dt
    }

    pub fn time_origin(&self) -> f64 {
        0.0
    }

    pub fn upsample(&self) -> usize {
        self.upsample
    }

    pub fn carrier(&self) -> f64 {
        self.k_ref
    }

    /// Largest delay that can be evaluated.
    pub fn window(&self) -> f64 {
        (self.len - 1) as f64 * self.dt
    }

    /// Stored baseband envelope of one element.
    pub fn envelope(&self, element: usize) -> &[Complex64] {
        &self.envelopes[element * self.len..(element + 1) * self.len]
    }

    /// On-grid profile sample `s(p′, t_n)` including the carrier.
    pub fn profile_sample(&self, element: usize, n: usize) -> Complex64 {
        let t = n as f64 * self.dt;
        self.envelope(element)[n] * Complex64::from_polar(1.0, self.k_ref * SPEED_OF_LIGHT * t)
    }

    /// `s(p′, τ)` at an arbitrary round-trip delay.
    pub fn sample_delay(&self, element: usize, tau: f64) -> Result<Complex64> {
        self.sample_range(element, 0.5 * SPEED_OF_LIGHT * tau)
    }

    /// `s(p′, τ)` with `τ = 2·range/c`.
    #[inline]
    pub fn sample_range(&self, element: usize, range: f64) -> Result<Complex64> {
        let x = range * self.range_to_index;
        if !(x >= 0.0 && x <= (self.len - 1) as f64 + 1e-9) {
            return Err(Error::OutOfWindow {
                tau: 2.0 * range / SPEED_OF_LIGHT,
                window: self.window(),
            });
        }
        let i = (x as usize).min(self.len - 2);
        let frac = x - i as f64;
        let env = self.envelope(element);
        let v = env[i] + (env[i + 1] - env[i]) * frac;
        let (sin, cos) = (2.0 * self.k_ref * range).sin_cos();
        Ok(v * Complex64::new(cos, sin))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ImagingRegion;
    use crate::model::{FrequencyGrid, Point3, Scatterer, Scene, SyntheticAperture};
    use crate::simulator::simulate_measurement;

    fn freqs() -> FrequencyGrid {
        FrequencyGrid::new(12e9, 15e9, 16).unwrap()
    }

    /// Brute-force Riemann sum `Σ_k s(p′,k) e^{jkcτ}`, independent of the FFT path.
    fn direct(cube: &DataCube, e: usize, tau: f64) -> Complex64 {
        cube.row(e)
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s * Complex64::from_polar(1.0, cube.freqs().wavenumber(i) * SPEED_OF_LIGHT * tau)
            })
            .sum()
    }

    fn point_cube(elements: Vec<Point3>, target: Point3) -> DataCube {
        let ap = SyntheticAperture::new(elements, None).unwrap();
        let region = ImagingRegion::centered_cube(0.6, 0.4).unwrap();
        let scene = Scene::new(
            vec![Scatterer {
                position: target,
                reflectivity: 1.0.into(),
            }],
            &region,
        )
        .unwrap();
        simulate_measurement(&scene, &ap, &freqs()).unwrap()
    }

    #[test]
    fn dc_input_peaks_at_zero_delay() {
        let ap = SyntheticAperture::new(vec![Point3::zeros()], None).unwrap();
        let cube = DataCube::new(vec![Complex64::new(1.0, 0.0); 16], ap, freqs()).unwrap();
        let rp = range_compress(&cube, 8).unwrap();
        assert_eq!(rp.len(), 128);
        let peak = rp.sample_delay(0, 0.0).unwrap();
        assert!((peak.norm() - 16.0).abs() < 1e-12);
        let env = rp.envelope(0);
        let argmax = (0..rp.len())
            .max_by(|&a, &b| env[a].norm().total_cmp(&env[b].norm()))
            .unwrap();
        assert_eq!(argmax, 0);
    }

    #[test]
    fn peak_at_round_trip_delay() {
        let r = 0.4;
        let cube = point_cube(vec![Point3::zeros()], Point3::new(0.0, 0.0, r));
        let rp = range_compress(&cube, 8).unwrap();
        let env = rp.envelope(0);
        let argmax = (0..rp.len())
            .max_by(|&a, &b| env[a].norm().total_cmp(&env[b].norm()))
            .unwrap();
        let expected = 2.0 * r / SPEED_OF_LIGHT / rp.time_step();
        assert!(
            (argmax as f64 - expected).abs() <= 1.0,
            "{argmax} vs {expected}"
        );
    }

    #[test]
    fn parseval() {
        let cube = point_cube(
            vec![Point3::zeros(), Point3::new(0.03, -0.02, 0.01)],
            Point3::new(0.1, 0.05, 0.35),
        );
        let rp = range_compress(&cube, 8).unwrap();
        for e in 0..2 {
            let freq_energy: f64 = cube.row(e).iter().map(|v| v.norm_sqr()).sum();
            let time_energy: f64 = rp.envelope(e).iter().map(|v| v.norm_sqr()).sum();
            let ratio = time_energy / (rp.upsample() * 16) as f64;
            assert!((ratio - freq_energy).abs() <= 1e-9 * freq_energy);
        }
    }

    #[test]
    fn on_grid_sample_is_stored_value_with_carrier() {
        let cube = point_cube(vec![Point3::zeros()], Point3::new(0.0, 0.1, 0.3));
        let rp = range_compress(&cube, 4).unwrap();
        for n in [0, 5, 17, rp.len() - 1] {
            let tau = n as f64 * rp.time_step();
            let got = rp.sample_delay(0, tau).unwrap();
            let want = rp.profile_sample(0, n);
            assert!((got - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn on_grid_sample_matches_direct_sum() {
        let cube = point_cube(vec![Point3::zeros()], Point3::new(0.0, 0.1, 0.3));
        let rp = range_compress(&cube, 8).unwrap();
        for n in [0, 3, 40, 100] {
            let tau = n as f64 * rp.time_step();
            let want = direct(&cube, 0, tau);
            assert!((rp.profile_sample(0, n) - want).norm() < 1e-10);
        }
    }

    #[test]
    fn true_delay_matches_direct_sum_within_one_percent() {
        let target = Point3::new(0.05, -0.08, 0.42);
        let pe = Point3::new(-0.1, 0.02, 0.01);
        let cube = point_cube(vec![pe], target);
        let rp = range_compress(&cube, 8).unwrap();
        let tau = 2.0 * (target - pe).norm() / SPEED_OF_LIGHT;
        let got = rp.sample_delay(0, tau).unwrap();
        let want = direct(&cube, 0, tau);
        assert!((got.norm() - want.norm()).abs() <= 0.01 * want.norm());
    }

    #[test]
    fn out_of_window_and_bad_upsample() {
        let cube = point_cube(vec![Point3::zeros()], Point3::new(0.0, 0.0, 0.3));
        assert!(range_compress(&cube, 0).is_err());
        let rp = range_compress(&cube, 8).unwrap();
        assert!(matches!(
            rp.sample_delay(0, -1e-12),
            Err(Error::OutOfWindow { .. })
        ));
        assert!(matches!(
            rp.sample_delay(0, rp.window() * 1.001),
            Err(Error::OutOfWindow { .. })
        ));
        assert!(rp.sample_delay(0, rp.window()).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn interpolation_error_bounded(
                tx in -0.2f64..0.2, ty in -0.2f64..0.2, tz in 0.15f64..0.6,
                ex in -0.2f64..0.2, ey in -0.2f64..0.2,
                frac in 0.0f64..1.0,
            ) {
                let cube = point_cube(vec![Point3::new(ex, ey, 0.0)], Point3::new(tx, ty, tz));
                let rp = range_compress(&cube, 8).unwrap();
                let peak = (0..rp.len()).map(|n| rp.envelope(0)[n].norm()).fold(0.0, f64::max);
                let tau = frac * rp.window();
                let err = (rp.sample_delay(0, tau).unwrap() - direct(&cube, 0, tau)).norm();
                prop_assert!(err <= 1e-2 * peak, "err {err} peak {peak}");
            }

            #[test]
            fn linear_in_input(
                re_a in -2.0f64..2.0, im_a in -2.0f64..2.0,
                re_b in -2.0f64..2.0, im_b in -2.0f64..2.0,
                frac in 0.0f64..1.0,
            ) {
                let x = point_cube(vec![Point3::zeros()], Point3::new(0.02, 0.0, 0.3));
                let y = point_cube(vec![Point3::zeros()], Point3::new(-0.1, 0.1, 0.5));
                let (a, b) = (Complex64::new(re_a, im_a), Complex64::new(re_b, im_b));
                let z = x.combine(a, &y, b).unwrap();
                let (rx, ry, rz) = (
                    range_compress(&x, 8).unwrap(),
                    range_compress(&y, 8).unwrap(),
                    range_compress(&z, 8).unwrap(),
                );
                let tau = frac * rx.window();
                let lhs = rz.sample_delay(0, tau).unwrap();
                let rhs = a * rx.sample_delay(0, tau).unwrap() + b * ry.sample_delay(0, tau).unwrap();
                prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()) * 16.0);
            }
        }
    }
}
