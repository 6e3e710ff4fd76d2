//! Operation-count model of the factorized reconstruction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{FfbpParams, FfbpReport};
use crate::error::Result;
use crate::model::{partition_subarrays, FrequencyGrid, ImagingRegion, SyntheticAperture};

/// Implementation-dependent cost per basic operation of each stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpConstants {
    /// Per `N_f log2 N_f` of range compression.
    pub c1: f64,
    /// Per (element, sample) backprojection.
    pub c2: f64,
    /// Per interpolated sample, per child.
    pub c3: f64,
}

impl Default for OpConstants {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
        }
    }
}

/// Wall-clock seconds of a reconstruction, split by stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasuredTimes {
    pub range_compression: f64,
    pub backprojection: f64,
    pub interpolation: f64,
    /// Building and inverting the compressed grids.
    pub grids: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpCountReport {
    pub elements: usize,
    pub frequencies: usize,
    pub levels: usize,
    pub constants: OpConstants,
    /// `N_{s,f_{m,n}}` used for each level (outer) and subimage (inner).
    pub samples: Vec<Vec<f64>>,
    /// Whether `samples` came from built grids rather than the closed form.
    pub measured_grids: bool,
    pub range_compression: f64,
    pub backprojection: f64,
    pub interpolation: f64,
    pub total: f64,
    /// Same three terms with the level ratio taken as exactly 2.
    pub approx_backprojection: f64,
    pub approx_interpolation: f64,
    pub approx_total: f64,
    pub measured: Option<MeasuredTimes>,
}

/// Closed-form `N_{s,f_{m,0}} ≈ V(D)·|det T_s|` at the region centre for the
/// level-`m` subarray nearest the centre of an `M`-level factorization.
pub fn analytic_sample_count(
    level: usize,
    levels: usize,
    aperture_size: f64,
    z_mid: f64,
    volume: f64,
    kgrid: &FrequencyGrid,
) -> f64 {
    let (k_min, k_max) = (kgrid.k_min(), kgrid.k_max());
    let l2 = aperture_size * aperture_size;
    let z2 = 4.0 * z_mid * z_mid;
    let e = level as f64 - levels as f64;
    let range = k_max - 2.0 * k_min * z_mid / (2f64.powf(e + 1.0) * l2 + z2).sqrt();
    volume * l2 * k_max * k_max * range
        / (2f64.powf(-e - 2.0) * PI.powi(3) * (2f64.powf(e) * l2 + z2))
}

/// Closed-form ratio `N_{s,f_{m+1,0}} / N_{s,f_{m,0}}`.
pub fn analytic_level_ratio(
    level: usize,
    levels: usize,
    aperture_size: f64,
    z_mid: f64,
    kgrid: &FrequencyGrid,
) -> f64 {
    let (k_min, k_max) = (kgrid.k_min(), kgrid.k_max());
    let l2 = aperture_size * aperture_size;
    let z2 = 4.0 * z_mid * z_mid;
    let e = level as f64 - levels as f64;
    let range = |p: f64| k_max - 2.0 * k_min * z_mid / (l2 * 2f64.powf(e + p) + z2).sqrt();
    2.0 * (l2 * 2f64.powf(e) + z2) / (l2 * 2f64.powf(e + 1.0) + z2) * range(2.0) / range(1.0)
}

/// Predict the operation count of a reconstruction with `params` onto a
/// final grid of `final_samples` points. If `measured` is given, its grid
/// sample counts and timings are used instead of the closed form.
pub fn predict_op_count(
    aperture: &SyntheticAperture,
    region: &ImagingRegion,
    kgrid: &FrequencyGrid,
    params: &FfbpParams,
    final_samples: usize,
    measured: Option<&FfbpReport>,
) -> Result<OpCountReport> {
    params.validate()?;
    let c = OpConstants::default();
    let m_total = params.levels;
    let n_a = aperture.len();
    let n_f = kgrid.count();
    let tree = partition_subarrays(aperture, m_total)?;
    let final_samples = final_samples as f64;

    let z_mid = (region.center() - aperture.center()).norm();
    let size = aperture.size();
    let samples: Vec<Vec<f64>> = (1..=m_total)
        .map(|m| {
            let count = tree.level(m).len();
            if m == m_total {
                return vec![final_samples];
            }
            match measured.and_then(|r| r.levels.get(m - 1)) {
                Some(stats) => stats
                    .samples_per_subimage
                    .iter()
                    .map(|&s| s as f64)
                    .collect(),
                None => {
                    let s = analytic_sample_count(m, m_total, size, z_mid, region.volume(), kgrid);
                    vec![s; count]
                }
            }
        })
        .collect();

    let nf = n_f as f64;
    let rc = c.c1 * n_a as f64 * nf * nf.log2().max(1.0);
    let bpa: f64 = tree
        .level(1)
        .iter()
        .zip(&samples[0])
        .map(|(sub, s)| c.c2 * sub.len() as f64 * s)
        .sum();
    let interp: f64 = samples[1..]
        .iter()
        .flat_map(|level| level.iter())
        .map(|s| 2.0 * c.c3 * s)
        .sum();

    let scale = 2f64.powi(m_total as i32 - 1);
    let approx_bpa = c.c2 * n_a as f64 * final_samples / scale;
    let approx_interp = 2.0 * c.c3 * (m_total - 1) as f64 * final_samples;

    Ok(OpCountReport {
        elements: n_a,
        frequencies: n_f,
        levels: m_total,
        constants: c,
        samples,
        measured_grids: measured.is_some(),
        range_compression: rc,
        backprojection: bpa,
        interpolation: interp,
        total: rc + bpa + interp,
        approx_backprojection: approx_bpa,
        approx_interpolation: approx_interp,
        approx_total: rc + approx_bpa + approx_interp,
        measured: measured.map(|r| r.times),
    })
}

/// Direct backprojection cost `C2·N_A·N_s` plus range compression.
pub fn bpa_op_count(elements: usize, frequencies: usize, samples: usize) -> f64 {
    let nf = frequencies as f64;
    elements as f64 * nf * nf.log2().max(1.0) + elements as f64 * samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffbp::Kernel;
    use crate::model::{generate_handheld_aperture, JitterSpec};

    fn setup() -> (SyntheticAperture, ImagingRegion, FrequencyGrid) {
        (
            generate_handheld_aperture(33, 33, 0.15, JitterSpec::NONE, 0).unwrap(),
            ImagingRegion::centered_cube(0.5 / 3.0, 0.4 / 3.0).unwrap(),
            FrequencyGrid::new(12e9, 15e9, 16).unwrap(),
        )
    }

    fn params(levels: usize) -> FfbpParams {
        FfbpParams {
            levels,
            oversampling: 1.4,
            kernel: Kernel::Linear,
        }
    }

    #[test]
    fn single_level_is_plain_backprojection() {
        let (ap, region, g) = setup();
        let r = predict_op_count(&ap, &region, &g, &params(1), 1000, None).unwrap();
        assert_eq!(r.interpolation, 0.0);
        assert_eq!(r.backprojection, ap.len() as f64 * 1000.0);
        assert_eq!(
            r.total,
            r.range_compression + r.backprojection + r.interpolation
        );
    }

    #[test]
    fn deeper_factorization_trades_backprojection_for_interpolation() {
        let (ap, region, g) = setup();
        let a = predict_op_count(&ap, &region, &g, &params(3), 100_000, None).unwrap();
        let b = predict_op_count(&ap, &region, &g, &params(4), 100_000, None).unwrap();
        assert!((a.approx_backprojection / b.approx_backprojection - 2.0).abs() < 1e-12);
        let per_level = 2.0 * 100_000.0;
        assert!((b.approx_interpolation - a.approx_interpolation - per_level).abs() < 1e-6);
    }

    #[test]
    fn ratio_matches_count_formula() {
        let g = FrequencyGrid::new(12e9, 15e9, 16).unwrap();
        for m in 1..4 {
            let a = analytic_sample_count(m, 5, 0.15, 0.133, 1.0, &g);
            let b = analytic_sample_count(m + 1, 5, 0.15, 0.133, 1.0, &g);
            let r = analytic_level_ratio(m, 5, 0.15, 0.133, &g);
            assert!((b / a - r).abs() < 1e-12 * r, "{} vs {r}", b / a);
        }
        // Small subarrays against a comparatively deep scene: ratio → 2.
        assert!((analytic_level_ratio(1, 12, 0.15, 0.4, &g) - 2.0).abs() < 1e-3);
    }
}
