//! Direct time-domain backprojection. Slow but exact up to profile
//! interpolation; every fast path is checked against it.

use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CartesianGrid, ImagingRegion, Point3};
use crate::rangecomp::{range_compress, RangeProfileSet, DEFAULT_UPSAMPLE};
use crate::simulator::DataCube;

/// Where each value of an [`ImageVolume`] lives.
#[derive(Debug, Clone, PartialEq)]
pub enum VolumeGrid {
    Cartesian(CartesianGrid),
    Points(Vec<Point3>),
}

impl VolumeGrid {
    pub fn len(&self) -> usize {
        match self {
            VolumeGrid::Cartesian(g) => g.len(),
            VolumeGrid::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Point3> {
        match self {
            VolumeGrid::Cartesian(g) => g.points(),
            VolumeGrid::Points(p) => p.clone(),
        }
    }
}

/// Algorithm name plus free-form parameters, carried into output metadata.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl Provenance {
    pub fn new(algorithm: impl Into<String>) -> Self {
        Self {
            algorithm: algorithm.into(),
            params: serde_json::Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.params.insert(key.to_owned(), v);
        self
    }
}

/// Reconstructed complex reflectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVolume {
    values: Vec<Complex64>,
    grid: VolumeGrid,
    pub provenance: Provenance,
}

impl ImageVolume {
    pub fn new(values: Vec<Complex64>, grid: VolumeGrid, provenance: Provenance) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::invalid("image contains non-finite values"));
        }
        Ok(Self {
            values,
            grid,
            provenance,
        })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn grid(&self) -> &VolumeGrid {
        &self.grid
    }

    /// The Cartesian grid, if this volume has one.
    pub fn cartesian(&self) -> Option<&CartesianGrid> {
        match &self.grid {
            VolumeGrid::Cartesian(g) => Some(g),
            VolumeGrid::Points(_) => None,
        }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

/// `Σ_{e ∈ elements} s(p′_e, 2‖p − p′_e‖/c)` for every point.
pub fn backproject(
    profiles: &RangeProfileSet,
    elements: Range<usize>,
    points: &[Point3],
) -> Result<Vec<Complex64>> {
    check_elements(profiles, elements.clone().max())?;
    points
        .par_iter()
        .map(|p| backproject_point(profiles, elements.clone(), p))
        .collect()
}

/// [`backproject`] over an arbitrary element index set.
pub fn backproject_set(
    profiles: &RangeProfileSet,
    elements: &[usize],
    points: &[Point3],
) -> Result<Vec<Complex64>> {
    check_elements(profiles, elements.iter().copied().max())?;
    points
        .par_iter()
        .map(|p| backproject_point(profiles, elements.iter().copied(), p))
        .collect()
}

fn check_elements(profiles: &RangeProfileSet, max: Option<usize>) -> Result<()> {
    match max {
        Some(m) if m >= profiles.element_count() => Err(Error::invalid(format!(
            "element index {m} out of range ({} profiles)",
            profiles.element_count()
        ))),
        _ => Ok(()),
    }
}

#[inline]
pub(crate) fn backproject_point(
    profiles: &RangeProfileSet,
    elements: impl Iterator<Item = usize>,
    p: &Point3,
) -> Result<Complex64> {
    let positions = profiles.positions();
    let mut acc = Complex64::new(0.0, 0.0);
    for e in elements {
        let r = (p - positions[e]).norm();
        acc += profiles.sample_range(e, r)?;
    }
    Ok(acc)
}

/// Range-compress `cube` and backproject the full aperture onto a uniform
/// grid of `dims` samples spanning `region`.
pub fn bpa_reconstruct(
    cube: &DataCube,
    region: &ImagingRegion,
    dims: [usize; 3],
) -> Result<ImageVolume> {
    if dims.contains(&0) {
        return Err(Error::invalid("grid dimensions must be at least 1"));
    }
    region.validate_against(cube.aperture())?;
    let profiles = range_compress(cube, DEFAULT_UPSAMPLE)?;
    let grid = CartesianGrid::spanning(region, dims);
    let values = backproject(&profiles, 0..cube.element_count(), &grid.points())?;
    let provenance = Provenance::new("bpa")
        .with("dims", dims)
        .with("upsample", DEFAULT_UPSAMPLE);
    ImageVolume::new(values, VolumeGrid::Cartesian(grid), provenance)
}
