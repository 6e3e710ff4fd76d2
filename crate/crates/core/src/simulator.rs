//! First-order Born forward model and synthetic scene generators.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FrequencyGrid, ImagingRegion, Point3, Scatterer, Scene, SyntheticAperture};

/// Measured signal `s(p′, k)`: one row per element, frequency fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DataCube {
    values: Vec<Complex64>,
    aperture: SyntheticAperture,
    freqs: FrequencyGrid,
}

impl DataCube {
    pub fn new(
        values: Vec<Complex64>,
        aperture: SyntheticAperture,
        freqs: FrequencyGrid,
    ) -> Result<Self> {
        let expected = aperture.len() * freqs.count();
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "cube holds {} samples, expected {} elements x {} frequencies",
                values.len(),
                aperture.len(),
                freqs.count()
            )));
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::invalid("cube samples must be finite"));
        }
        Ok(Self {
            values,
            aperture,
            freqs,
        })
    }

    pub fn zeros(aperture: SyntheticAperture, freqs: FrequencyGrid) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); aperture.len() * freqs.count()];
        Self {
            values,
            aperture,
            freqs,
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn aperture(&self) -> &SyntheticAperture {
        &self.aperture
    }

    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }

    pub fn element_count(&self) -> usize {
        self.aperture.len()
    }

    /// Frequency samples of one element.
    pub fn row(&self, element: usize) -> &[Complex64] {
        let nf = self.freqs.count();
        &self.values[element * nf..(element + 1) * nf]
    }

    /// Elementwise `a·self + b·other`; both cubes must share geometry.
    pub fn combine(&self, a: Complex64, other: &DataCube, b: Complex64) -> Result<DataCube> {
        if self.aperture != other.aperture || self.freqs != other.freqs {
            return Err(Error::invalid("cubes differ in aperture or frequency grid"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(DataCube {
            values,
            aperture: self.aperture.clone(),
            freqs: self.freqs.clone(),
        })
    }

    pub fn scaled(&self, c: Complex64) -> DataCube {
        DataCube {
            values: self.values.iter().map(|v| c * v).collect(),
            aperture: self.aperture.clone(),
            freqs: self.freqs.clone(),
        }
    }
}

/// `s(p′,k) = Σ f(p) exp(−j2k‖p − p′‖)` over the scene's scatterers.
/// Propagation loss and antenna patterns are not modelled.
pub fn simulate_measurement(
    scene: &Scene,
    aperture: &SyntheticAperture,
    freqs: &FrequencyGrid,
) -> Result<DataCube> {
    let nf = freqs.count();
    let ks = freqs.wavenumbers();
    let rows: Vec<Result<Vec<Complex64>>> = aperture
        .elements()
        .par_iter()
        .map(|pe| {
            let mut row = vec![Complex64::new(0.0, 0.0); nf];
            for s in scene.scatterers() {
                let r = (s.position - pe).norm();
                if r == 0.0 {
                    return Err(Error::CoincidentPoints);
                }
                for (acc, &k) in row.iter_mut().zip(&ks) {
                    let (sin, cos) = (-2.0 * k * r).sin_cos();
                    *acc += s.reflectivity * Complex64::new(cos, sin);
                }
            }
            Ok(row)
        })
        .collect();
    let mut values = Vec::with_capacity(aperture.len() * nf);
    for row in rows {
        values.extend(row?);
    }
    DataCube::new(values, aperture.clone(), freqs.clone())
}

/// Declarative target description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneSpec {
    /// Regular lattice of identical point scatterers.
    Grid {
        counts: [usize; 3],
        spacing: f64,
        center: [f64; 3],
        #[serde(default = "unit_amplitude")]
        amplitude: f64,
    },
    /// Siemens star in the plane `z = center[2]`, facing the aperture, with
    /// its metal wedges filled by uniformly spread point scatterers.
    Star {
        diameter: f64,
        spokes: usize,
        /// Points per square metre of metal area.
        density: f64,
        center: [f64; 3],
    },
    /// Explicit scatterer list.
    Points {
        scatterers: Vec<PointSpec>,
    },
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub position: [f64; 3],
    #[serde(default = "unit_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

fn unit_amplitude() -> f64 {
    1.0
}

impl SceneSpec {
    /// Scale every length (positions, spacing, diameter) by `s`; density is
    /// adjusted so the point count is unchanged.
    pub fn scaled(&self, s: f64) -> SceneSpec {
        let sc = |c: [f64; 3]| [c[0] * s, c[1] * s, c[2] * s];
        match self {
            SceneSpec::Grid {
                counts,
                spacing,
                center,
                amplitude,
            } => SceneSpec::Grid {
                counts: *counts,
                spacing: spacing * s,
                center: sc(*center),
                amplitude: *amplitude,
            },
            SceneSpec::Star {
                diameter,
                spokes,
                density,
                center,
            } => SceneSpec::Star {
                diameter: diameter * s,
                spokes: *spokes,
                density: density / (s * s),
                center: sc(*center),
            },
            SceneSpec::Points { scatterers } => SceneSpec::Points {
                scatterers: scatterers
                    .iter()
                    .map(|p| PointSpec {
                        position: sc(p.position),
                        ..p.clone()
                    })
                    .collect(),
            },
            SceneSpec::Empty => SceneSpec::Empty,
        }
    }
}

/// Points per wedge of a Siemens star: metal area `πR²/2` shared by the spokes.
pub fn star_points_per_spoke(diameter: f64, spokes: usize, density: f64) -> usize {
    let r = 0.5 * diameter;
    let wedge_area = std::f64::consts::PI * r * r / (2.0 * spokes as f64);
    ((density * wedge_area).round() as usize).max(1)
}

pub fn scene_from_spec(spec: &SceneSpec, region: &ImagingRegion) -> Result<Scene> {
    let unit = |a: f64, phase: f64| Complex64::from_polar(a, phase);
    let scatterers = match spec {
        SceneSpec::Grid {
            counts,
            spacing,
            center,
            amplitude,
        } => {
            if counts.contains(&0) {
                return Err(Error::invalid("grid scene counts must be positive"));
            }
            if !(*spacing > 0.0) && counts.iter().any(|&c| c > 1) {
                return Err(Error::invalid("grid scene spacing must be positive"));
            }
            let offset = |i: usize, n: usize| (i as f64 - 0.5 * (n - 1) as f64) * spacing;
            let mut out = Vec::with_capacity(counts.iter().product());
            for iz in 0..counts[2] {
                for iy in 0..counts[1] {
                    for ix in 0..counts[0] {
                        out.push(Scatterer {
                            position: Point3::new(
                                center[0] + offset(ix, counts[0]),
                                center[1] + offset(iy, counts[1]),
                                center[2] + offset(iz, counts[2]),
                            ),
                            reflectivity: unit(*amplitude, 0.0),
                        });
                    }
                }
            }
            out
        }
        SceneSpec::Star {
            diameter,
            spokes,
            density,
            center,
        } => {
            if !(*diameter > 0.0) || *spokes == 0 || !(*density > 0.0) {
                return Err(Error::invalid(
                    "star scene needs positive diameter, spokes and density",
                ));
            }
            let per_spoke = star_points_per_spoke(*diameter, *spokes, *density);
            let radius = 0.5 * diameter;
            let wedge = std::f64::consts::PI / *spokes as f64;
            let golden = 0.5 * (5f64.sqrt() - 1.0);
            let mut out = Vec::with_capacity(per_spoke * spokes);
            for s in 0..*spokes {
                let start = 2.0 * wedge * s as f64;
                for i in 0..per_spoke {
                    // Area-uniform radius, golden-ratio angular fill.
                    let r = radius * ((i as f64 + 0.5) / per_spoke as f64).sqrt();
                    let theta = start + wedge * (i as f64 * golden).fract();
                    out.push(Scatterer {
                        position: Point3::new(
                            center[0] + r * theta.cos(),
                            center[1] + r * theta.sin(),
                            center[2],
                        ),
                        reflectivity: unit(1.0, 0.0),
                    });
                }
            }
            out
        }
        SceneSpec::Points { scatterers } => scatterers
            .iter()
            .map(|p| Scatterer {
                position: Point3::new(p.position[0], p.position[1], p.position[2]),
                reflectivity: unit(p.amplitude, p.phase),
            })
            .collect(),
        SceneSpec::Empty => Vec::new(),
    };
    Scene::new(scatterers, region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_handheld_aperture, JitterSpec};

    fn freqs() -> FrequencyGrid {
        FrequencyGrid::new(12e9, 15e9, 16).unwrap()
    }

    fn region() -> ImagingRegion {
        ImagingRegion::centered_cube(0.5, 0.4).unwrap()
    }

    fn single(p: Point3, f: Complex64) -> Scene {
        Scene::new(
            vec![Scatterer {
                position: p,
                reflectivity: f,
            }],
            &region(),
        )
        .unwrap()
    }

    #[test]
    fn single_scatterer_broadside() {
        let ap = SyntheticAperture::new(vec![Point3::zeros()], None).unwrap();
        let r = 0.4;
        let cube =
            simulate_measurement(&single(Point3::new(0.0, 0.0, r), 1.0.into()), &ap, &freqs())
                .unwrap();
        for (i, v) in cube.row(0).iter().enumerate() {
            let k = freqs().wavenumber(i);
            let want = Complex64::from_polar(1.0, -2.0 * k * r);
            assert!((v - want).norm() < 1e-12);
        }
    }

    #[test]
    fn empty_scene_gives_zero_cube() {
        let ap = generate_handheld_aperture(4, 4, 0.1, JitterSpec::NONE, 0).unwrap();
        let cube = simulate_measurement(&Scene::empty(), &ap, &freqs()).unwrap();
        assert!(cube.values().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn superposition() {
        let ap = generate_handheld_aperture(5, 5, 0.2, JitterSpec::NONE, 0).unwrap();
        let a = Scatterer {
            position: Point3::new(0.05, -0.02, 0.3),
            reflectivity: Complex64::new(0.3, -1.0),
        };
        let b = Scatterer {
            position: Point3::new(-0.1, 0.07, 0.5),
            reflectivity: Complex64::new(2.0, 0.5),
        };
        let both = Scene::new(vec![a, b], &region()).unwrap();
        let ca =
            simulate_measurement(&Scene::new(vec![a], &region()).unwrap(), &ap, &freqs()).unwrap();
        let cb =
            simulate_measurement(&Scene::new(vec![b], &region()).unwrap(), &ap, &freqs()).unwrap();
        let cab = simulate_measurement(&both, &ap, &freqs()).unwrap();
        for ((x, y), z) in ca.values().iter().zip(cb.values()).zip(cab.values()) {
            assert!((x + y - z).norm() < 1e-12);
        }
    }

    #[test]
    fn coincident_scatterer_rejected() {
        let ap = SyntheticAperture::new(vec![Point3::new(0.0, 0.0, 0.3)], None).unwrap();
        let s = single(Point3::new(0.0, 0.0, 0.3), 1.0.into());
        assert!(matches!(
            simulate_measurement(&s, &ap, &freqs()),
            Err(Error::CoincidentPoints)
        ));
    }

    #[test]
    fn grid_scene_matches_layout() {
        let spec = SceneSpec::Grid {
            counts: [3, 3, 3],
            spacing: 0.175,
            center: [0.0, 0.0, 0.4],
            amplitude: 1.0,
        };
        let scene = scene_from_spec(&spec, &region()).unwrap();
        assert_eq!(scene.len(), 27);
        let zs: Vec<f64> = scene.scatterers().iter().map(|s| s.position.z).collect();
        assert!((zs[0] - 0.225).abs() < 1e-12 && (zs[26] - 0.575).abs() < 1e-12);
        assert!(scene
            .scatterers()
            .iter()
            .any(|s| (s.position - Point3::new(0.0, 0.0, 0.4)).norm() < 1e-12));
    }

    #[test]
    fn single_cell_grid() {
        let spec = SceneSpec::Grid {
            counts: [1, 1, 1],
            spacing: 0.1,
            center: [0.01, 0.02, 0.4],
            amplitude: 1.0,
        };
        let scene = scene_from_spec(&spec, &region()).unwrap();
        assert_eq!(scene.len(), 1);
        assert_eq!(scene.scatterers()[0].position, Point3::new(0.01, 0.02, 0.4));
    }

    #[test]
    fn star_point_count() {
        let density = 4000.0;
        let spec = SceneSpec::Star {
            diameter: 0.4,
            spokes: 8,
            density,
            center: [0.0, 0.0, 0.4],
        };
        let scene = scene_from_spec(&spec, &region()).unwrap();
        // Wedge area = π·0.2²/16 = 0.0078540 m² → 31.4 points → 31 per spoke.
        let per_spoke = (density * std::f64::consts::PI * 0.04 / 16.0).round() as usize;
        assert_eq!(per_spoke, 31);
        assert_eq!(scene.len(), 8 * per_spoke);
        assert!(scene
            .scatterers()
            .iter()
            .all(|s| (s.position.xy().norm() <= 0.2) && s.position.z == 0.4));
    }

    #[test]
    fn scene_outside_region_rejected() {
        let spec = SceneSpec::Grid {
            counts: [3, 1, 1],
            spacing: 0.3,
            center: [0.0, 0.0, 0.4],
            amplitude: 1.0,
        };
        assert!(matches!(
            scene_from_spec(&spec, &region()),
            Err(Error::ScattererOutsideRegion { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn magnitude_bounded_and_phase_exact(
                x in -0.2f64..0.2, y in -0.2f64..0.2, z in 0.2f64..0.6,
                amp in 0.1f64..3.0, seed in 0u64..1000,
            ) {
                let ap = generate_handheld_aperture(
                    4, 4, 0.3, JitterSpec { depth: 0.05, lateral: 0.002 }, seed,
                ).unwrap();
                let p = Point3::new(x, y, z);
                let scene = single(p, Complex64::new(amp, 0.0));
                let cube = simulate_measurement(&scene, &ap, &freqs()).unwrap();
                for (e, pe) in ap.elements().iter().enumerate() {
                    let r = (p - pe).norm();
                    for (i, v) in cube.row(e).iter().enumerate() {
                        prop_assert!(v.norm() <= amp * (1.0 + 1e-12));
                        let want = -2.0 * freqs().wavenumber(i) * r;
                        let diff = (v.arg() - want).rem_euclid(2.0 * std::f64::consts::PI);
                        let diff = diff.min(2.0 * std::f64::consts::PI - diff);
                        prop_assert!(diff <= 1e-12, "phase err {diff}");
                    }
                }
            }
        }
    }
}
