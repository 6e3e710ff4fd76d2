#![allow(dead_code)]

use hhsar::model::{FrequencyGrid, ImagingRegion, Point3};
use hhsar::spectrum::SubarrayExtents;
use rand::Rng;

/// Desk-scale aperture side (m) used across the integration tests.
pub const APERTURE: f64 = 0.15;

pub fn kgrid() -> FrequencyGrid {
    FrequencyGrid::new(12e9, 15e9, 16).unwrap()
}

pub fn desk_region() -> ImagingRegion {
    ImagingRegion::centered_cube(0.5 / 3.0, 0.4 / 3.0).unwrap()
}

/// Random sub-rectangle of the desk aperture.
pub fn random_extents(rng: &mut impl Rng) -> SubarrayExtents {
    let h = 0.5 * APERTURE;
    let mut axis = || {
        let a: f64 = rng.gen_range(-h..h);
        let b: f64 = rng.gen_range(-h..h);
        (a.min(b), a.max(b))
    };
    let (x0, x1) = axis();
    let (y0, y1) = axis();
    SubarrayExtents::new(x0, x1, y0, y1).unwrap()
}

pub fn random_point(rng: &mut impl Rng, region: &ImagingRegion) -> Point3 {
    Point3::new(
        rng.gen_range(region.x_min..region.x_max),
        rng.gen_range(region.y_min..region.y_max),
        rng.gen_range(region.z_min..region.z_max),
    )
}

/// Central-difference gradient.
pub fn gradient(f: impl Fn(&Point3) -> f64, p: &Point3, h: f64) -> Point3 {
    let mut g = Point3::zeros();
    for i in 0..3 {
        let mut e = Point3::zeros();
        e[i] = h;
        g[i] = (f(&(p + e)) - f(&(p - e))) / (2.0 * h);
    }
    g
}

/// Central-difference curl of a vector field.
pub fn curl(f: impl Fn(&Point3) -> Point3, p: &Point3, h: f64) -> Point3 {
    let d = |axis: usize, comp: usize| {
        let mut e = Point3::zeros();
        e[axis] = h;
        (f(&(p + e))[comp] - f(&(p - e))[comp]) / (2.0 * h)
    };
    Point3::new(d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0))
}

pub fn relative_error(a: &Point3, b: &Point3) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Criterion geometry: 33×33 handheld aperture over 0.15 m with 8/3 cm
/// peak-to-peak depth wobble.
pub fn desk_aperture() -> hhsar::model::SyntheticAperture {
    let jitter = hhsar::model::JitterSpec {
        depth: 0.08 / 3.0,
        lateral: 0.001,
    };
    hhsar::model::generate_handheld_aperture(33, 33, APERTURE, jitter, 7).unwrap()
}

/// Extents of every subarray in an `levels`-deep partition of `aperture`.
pub fn tree_extents(
    aperture: &hhsar::model::SyntheticAperture,
    levels: usize,
) -> Vec<SubarrayExtents> {
    let tree = hhsar::model::partition_subarrays(aperture, levels).unwrap();
    (1..=levels)
        .flat_map(|m| tree.level(m).to_vec())
        .map(|r| SubarrayExtents::of_elements(aperture, r))
        .collect()
}

pub fn desk_scene_spec() -> hhsar::simulator::SceneSpec {
    hhsar::simulator::SceneSpec::Grid {
        counts: [3, 3, 3],
        spacing: 0.175 / 3.0,
        center: [0.0, 0.0, 0.4 / 3.0],
        amplitude: 1.0,
    }
}

pub fn desk_cube() -> hhsar::simulator::DataCube {
    let region = desk_region();
    let scene = hhsar::simulator::scene_from_spec(&desk_scene_spec(), &region).unwrap();
    hhsar::simulator::simulate_measurement(&scene, &desk_aperture(), &kgrid()).unwrap()
}

pub const DESK_DIMS: [usize; 3] = [65, 65, 33];
