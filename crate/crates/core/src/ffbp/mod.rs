//! Factorized backprojection with analytic spectrum compression.
//!
//! The aperture is split into `2^(M−1)` subarrays. Each gets a coarse
//! subimage by direct backprojection on its compressed grid; pairs of
//! subimages are then downconverted, interpolated onto their parent's grid
//! and upconverted, level by level, until the last pair is merged onto the
//! caller's Cartesian grid.

mod complexity;
mod grid;
mod merge;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use complexity::{
    analytic_level_ratio, analytic_sample_count, bpa_op_count, predict_op_count, MeasuredTimes,
    OpConstants, OpCountReport,
};
pub use grid::{build_demand_grid, build_subimage_grid, Subarray, SubimageGrid};
pub use merge::{level1_reconstruct, merge_onto, merge_pair, Kernel, Subimage};

use crate::bpa::{backproject, ImageVolume, Provenance, VolumeGrid};
use crate::error::{Error, Result};
use crate::model::{partition_subarrays, CartesianGrid, ImagingRegion, Point3};
use crate::rangecomp::{range_compress, DEFAULT_UPSAMPLE};
use crate::simulator::DataCube;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FfbpParams {
    /// Factorization depth `M`; 1 is plain backprojection.
    pub levels: usize,
    /// Oversampling factor `γ` of the compressed grids.
    pub oversampling: f64,
    #[serde(default)]
    pub kernel: Kernel,
}

impl Default for FfbpParams {
    fn default() -> Self {
        Self {
            levels: 3,
            oversampling: 1.4,
            kernel: Kernel::Linear,
        }
    }
}

impl FfbpParams {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 {
            return Err(Error::Config {
                field: "levels".into(),
                message: "must be at least 1".into(),
            });
        }
        if !(self.oversampling >= 1.0 && self.oversampling.is_finite()) {
            return Err(Error::Config {
                field: "oversampling".into(),
                message: format!("must be >= 1, got {}", self.oversampling),
            });
        }
        Ok(())
    }
}

/// Default depth for an aperture with `side` elements along its longer
/// axis: `floor(log2 side) − 2`, at least 1.
pub fn default_levels(side: usize) -> usize {
    let log = usize::BITS - 1 - side.max(1).leading_zeros();
    (log as usize).saturating_sub(2).max(1)
}

/// Grid and merge statistics of one factorization level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub subimages: usize,
    pub lattice_points: usize,
    pub valid_points: usize,
    /// `N_{s,f}` of each subimage: grid points inside the region proper.
    pub samples_per_subimage: Vec<usize>,
    /// Points where a child could not be interpolated and its term was
    /// backprojected directly instead.
    pub flagged: usize,
    pub unconverged: usize,
    pub max_masked_fraction: f64,
    pub median_newton_iterations: usize,
    pub seconds: f64,
}

impl LevelStats {
    pub fn samples(&self) -> usize {
        self.samples_per_subimage.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfbpReport {
    pub params: FfbpParams,
    pub levels: Vec<LevelStats>,
    pub times: MeasuredTimes,
}

impl FfbpReport {
    pub fn flagged(&self) -> usize {
        self.levels.iter().map(|l| l.flagged).sum()
    }

    /// Largest per-level fraction of flagged points.
    pub fn max_flagged_fraction(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| l.flagged as f64 / l.valid_points.max(1) as f64)
            .fold(0.0, f64::max)
    }

    /// For each subimage level `m ≥ 2`, the median over subimages of
    /// `N_{s,f}(parent) / mean N_{s,f}(children)`. The final Cartesian
    /// level is excluded.
    pub fn level_ratios(&self) -> Vec<f64> {
        let subimage_levels = &self.levels[..self.levels.len().saturating_sub(1)];
        subimage_levels
            .windows(2)
            .map(|w| {
                let (child, parent) = (&w[0].samples_per_subimage, &w[1].samples_per_subimage);
                let mut r: Vec<f64> = parent
                    .iter()
                    .enumerate()
                    .filter_map(|(n, &p)| {
                        let kids = child.get(2 * n..2 * n + 2)?;
                        let mean = 0.5 * (kids[0] + kids[1]) as f64;
                        (mean > 0.0).then(|| p as f64 / mean)
                    })
                    .collect();
                r.sort_by(f64::total_cmp);
                match r.len() {
                    0 => f64::NAN,
                    n if n % 2 == 1 => r[n / 2],
                    n => 0.5 * (r[n / 2 - 1] + r[n / 2]),
                }
            })
            .collect()
    }
}

/// Fast factorized reconstruction onto a `final_dims` grid spanning `region`.
pub fn hhffbpa_reconstruct(
    cube: &DataCube,
    region: &ImagingRegion,
    final_dims: [usize; 3],
    params: &FfbpParams,
) -> Result<(ImageVolume, FfbpReport)> {
    params.validate()?;
    if final_dims.contains(&0) {
        return Err(Error::invalid("grid dimensions must be at least 1"));
    }
    let aperture = cube.aperture();
    region.validate_against(aperture)?;
    let kgrid = cube.freqs();
    let start = Instant::now();
    let mut times = MeasuredTimes::default();

    let profiles = range_compress(cube, DEFAULT_UPSAMPLE)?;
    times.range_compression = start.elapsed().as_secs_f64();

    let levels = params.levels;
    let tree = partition_subarrays(aperture, levels)?;
    let final_grid = CartesianGrid::spanning(region, final_dims);
    let final_points = final_grid.points();
    let mut stats = Vec::with_capacity(levels);

    let values = if levels == 1 {
        let t = Instant::now();
        let v = backproject(&profiles, 0..aperture.len(), &final_points)?;
        times.backprojection = t.elapsed().as_secs_f64();
        stats.push(cartesian_stats(
            1,
            final_points.len(),
            0,
            t.elapsed().as_secs_f64(),
        ));
        v
    } else {
        let subarrays: Vec<Vec<Subarray>> = (1..levels)
            .map(|m| {
                tree.level(m)
                    .iter()
                    .map(|r| Subarray::new(aperture, r.clone()))
                    .collect()
            })
            .collect();

        // Grids from the top down: each child stores the cells its parent's
        // valid points (or the final voxels) will interpolate from.
        let mut grids: Vec<Vec<SubimageGrid>> = vec![Vec::new(); levels - 1];
        let mut grid_seconds = vec![0.0; levels - 1];
        for m in (1..levels).rev() {
            let t = Instant::now();
            let parent_demand: Vec<Vec<Point3>> = if m + 1 == levels {
                vec![final_points.clone()]
            } else {
                grids[m].iter().map(SubimageGrid::valid_positions).collect()
            };
            grids[m - 1] = subarrays[m - 1]
                .par_iter()
                .enumerate()
                .map(|(n, sub)| {
                    build_demand_grid(
                        sub,
                        region,
                        kgrid,
                        params.oversampling,
                        &parent_demand[n / 2],
                        params.kernel,
                    )
                })
                .collect::<Result<_>>()?;
            grid_seconds[m - 1] = t.elapsed().as_secs_f64();
        }
        times.grids = grid_seconds.iter().sum();

        let mut grids = grids.into_iter();
        let t = Instant::now();
        let mut current: Vec<Subimage> = grids
            .next()
            .expect("at least one subimage level")
            .into_par_iter()
            .map(|grid| level1_reconstruct(&profiles, grid))
            .collect::<Result<_>>()?;
        let secs = t.elapsed().as_secs_f64();
        times.backprojection = secs;
        stats.push(subimage_stats(1, &current, 0, grid_seconds[0] + secs));

        for (m, level_grids) in (2..levels).zip(grids) {
            let t = Instant::now();
            let mut children = current.into_iter();
            let pairs: Vec<(Subimage, Subimage, SubimageGrid)> = level_grids
                .into_iter()
                .map(|grid| {
                    let a = children.next().expect("two children per parent");
                    let b = children.next().expect("two children per parent");
                    (a, b, grid)
                })
                .collect();
            let merged: Vec<(Subimage, usize)> = pairs
                .into_par_iter()
                .map(|(a, b, grid)| merge_pair(a, b, grid, params.kernel, Some(&profiles)))
                .collect::<Result<_>>()?;
            let flagged = merged.iter().map(|(_, f)| f).sum();
            current = merged.into_iter().map(|(s, _)| s).collect();
            let secs = t.elapsed().as_secs_f64();
            times.interpolation += secs;
            stats.push(subimage_stats(
                m,
                &current,
                flagged,
                grid_seconds[m - 1] + secs,
            ));
        }

        let t = Instant::now();
        let children: Vec<Subimage> = current
            .into_iter()
            .map(Subimage::downconvert)
            .collect::<Result<_>>()?;
        let refs: Vec<&Subimage> = children.iter().collect();
        let active = vec![true; final_points.len()];
        let (v, flagged) = merge_onto(
            &refs,
            &final_points,
            &active,
            params.kernel,
            Some(&profiles),
        )?;
        let secs = t.elapsed().as_secs_f64();
        times.interpolation += secs;
        stats.push(cartesian_stats(levels, final_points.len(), flagged, secs));
        v
    };
    times.total = start.elapsed().as_secs_f64();

    let report = FfbpReport {
        params: *params,
        levels: stats,
        times,
    };
    let provenance = Provenance::new("hhffbpa")
        .with("dims", final_dims)
        .with("levels", params.levels)
        .with("oversampling", params.oversampling)
        .with("kernel", params.kernel)
        .with("upsample", DEFAULT_UPSAMPLE)
        .with("flagged", report.flagged());
    let volume = ImageVolume::new(values, VolumeGrid::Cartesian(final_grid), provenance)?;
    Ok((volume, report))
}

fn subimage_stats(
    level: usize,
    subimages: &[Subimage],
    flagged: usize,
    seconds: f64,
) -> LevelStats {
    let grids = subimages.iter().map(|s| &s.grid);
    let mut iters: Vec<usize> = grids.clone().map(|g| g.median_iterations()).collect();
    iters.sort_unstable();
    LevelStats {
        level,
        subimages: subimages.len(),
        lattice_points: grids.clone().map(|g| g.len()).sum(),
        valid_points: grids.clone().map(|g| g.valid_count()).sum(),
        samples_per_subimage: grids.clone().map(|g| g.inside_count()).collect(),
        flagged,
        unconverged: grids.clone().map(|g| g.unconverged()).sum(),
        max_masked_fraction: grids.map(|g| g.masked_fraction()).fold(0.0, f64::max),
        median_newton_iterations: iters.get(iters.len() / 2).copied().unwrap_or(0),
        seconds,
    }
}

fn cartesian_stats(level: usize, points: usize, flagged: usize, seconds: f64) -> LevelStats {
    LevelStats {
        level,
        subimages: 1,
        lattice_points: points,
        valid_points: points,
        samples_per_subimage: vec![points],
        flagged,
        unconverged: 0,
        max_masked_fraction: 0.0,
        median_newton_iterations: 0,
        seconds,
    }
}
