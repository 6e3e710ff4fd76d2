//! Run configuration and the workflows behind the `hhsar` command: simulate
//! a cube, reconstruct it, compare volumes, export projections and sweep
//! aperture sizes for timing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bpa::{bpa_reconstruct, ImageVolume};
use crate::error::{Error, ErrorClass, Result};
use crate::ffbp::{
    bpa_op_count, hhffbpa_reconstruct, predict_op_count, FfbpParams, FfbpReport, Kernel,
};
use crate::metrics::{psnr, relative_rms, MetricsReport, PsfCut};
use crate::model::{
    generate_handheld_aperture, FrequencyGrid, ImagingRegion, JitterSpec, Point3, SyntheticAperture,
};
use crate::simulator::{scene_from_spec, simulate_measurement, DataCube, SceneSpec};
use crate::spectrum::nyquist_dims;

/// Environment variable read when `--threads` is not given.
pub const THREADS_ENV: &str = "HHSAR_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub aperture: ApertureConfig,
    pub frequencies: FrequencyConfig,
    pub region: RegionConfig,
    #[serde(default = "empty_scene")]
    pub scene: SceneSpec,
    #[serde(default)]
    pub algorithm: Algorithm,
    /// Final grid `[nx, ny, nz]`; Nyquist-rate dims if absent.
    #[serde(default)]
    pub dims: Option<[usize; 3]>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn empty_scene() -> SceneSpec {
    SceneSpec::Empty
}

/// `nx` scan positions of an `ny`-element linear array over `size × size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureConfig {
    pub nx: usize,
    pub ny: usize,
    pub size: f64,
    #[serde(default = "no_jitter")]
    pub jitter: JitterSpec,
}

fn no_jitter() -> JitterSpec {
    JitterSpec::NONE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub count: usize,
}

/// Either a cube of side `size` centred on the boresight at `depth`, or
/// explicit corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum RegionConfig {
    Cube { size: f64, depth: f64 },
    Box { min: [f64; 3], max: [f64; 3] },
}

impl RegionConfig {
    pub fn build(&self) -> Result<ImagingRegion> {
        match self {
            RegionConfig::Cube { size, depth } => ImagingRegion::centered_cube(*size, *depth),
            RegionConfig::Box { min, max } => ImagingRegion::new((*min).into(), (*max).into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Algorithm {
    Bpa,
    Hhffbpa {
        levels: usize,
        oversampling: f64,
        #[serde(default)]
        kernel: Kernel,
    },
}

impl Default for Algorithm {
    fn default() -> Self {
        Algorithm::from(FfbpParams::default())
    }
}

impl From<FfbpParams> for Algorithm {
    fn from(p: FfbpParams) -> Self {
        Algorithm::Hhffbpa {
            levels: p.levels,
            oversampling: p.oversampling,
            kernel: p.kernel,
        }
    }
}

impl Algorithm {
    pub fn ffbp_params(&self) -> Option<FfbpParams> {
        match *self {
            Algorithm::Bpa => None,
            Algorithm::Hhffbpa {
                levels,
                oversampling,
                kernel,
            } => Some(FfbpParams {
                levels,
                oversampling,
                kernel,
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Bpa => "bpa",
            Algorithm::Hhffbpa { .. } => "hhffbpa",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub cube: Option<PathBuf>,
    #[serde(default)]
    pub volume: Option<PathBuf>,
}

impl RunConfig {
    /// The desk-scale reference setup: 33×33 elements over 0.15 m, a
    /// 3×3×3 point lattice in a 0.167 m cube at 0.133 m, 16 frequencies over
    /// 12–15 GHz, 65×65×33 voxels.
    pub fn desk() -> Self {
        Self {
            aperture: ApertureConfig {
                nx: 33,
                ny: 33,
                size: 0.15,
                jitter: JitterSpec {
                    depth: 0.08 / 3.0,
                    lateral: 0.001,
                },
            },
            frequencies: FrequencyConfig {
                f_min: 12e9,
                f_max: 15e9,
                count: 16,
            },
            region: RegionConfig::Cube {
                size: 0.5 / 3.0,
                depth: 0.4 / 3.0,
            },
            scene: SceneSpec::Grid {
                counts: [3, 3, 3],
                spacing: 0.175 / 3.0,
                center: [0.0, 0.0, 0.4 / 3.0],
                amplitude: 1.0,
            },
            algorithm: Algorithm::Hhffbpa {
                levels: 4,
                oversampling: 1.4,
                kernel: Kernel::Linear,
            },
            dims: Some([65, 65, 33]),
            output: OutputConfig::default(),
            seed: 7,
        }
    }

    /// Parse and validate a JSON config file.
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = crate::io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check every section, naming the offending field on failure.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| {
            let name = name.to_owned();
            move |e: Error| match e {
                Error::Config { .. } => e,
                other => Error::Config {
                    field: name.clone(),
                    message: other.to_string(),
                },
            }
        };
        let aperture = self.build_aperture().map_err(field("aperture"))?;
        self.build_freqs().map_err(field("frequencies"))?;
        let region = self.region.build().map_err(field("region"))?;
        region
            .validate_against(&aperture)
            .map_err(field("region"))?;
        scene_from_spec(&self.scene, &region).map_err(field("scene"))?;
        if let Some(p) = self.algorithm.ffbp_params() {
            p.validate().map_err(|e| match e {
                Error::Config { field, message } => Error::Config {
                    field: format!("algorithm.{field}"),
                    message,
                },
                other => field("algorithm")(other),
            })?;
        }
        if let Some(d) = self.dims {
            if d.contains(&0) {
                return Err(Error::Config {
                    field: "dims".into(),
                    message: "every dimension must be at least 1".into(),
                });
            }
        }
        Ok(())
    }

    pub fn build_aperture(&self) -> Result<SyntheticAperture> {
        let a = &self.aperture;
        generate_handheld_aperture(a.nx, a.ny, a.size, a.jitter, self.seed)
    }

    pub fn build_freqs(&self) -> Result<FrequencyGrid> {
        let f = &self.frequencies;
        FrequencyGrid::new(f.f_min, f.f_max, f.count)
    }

    /// The configured dims, or Nyquist-rate dims for the full aperture.
    pub fn final_dims(&self) -> Result<[usize; 3]> {
        match self.dims {
            Some(d) => Ok(d),
            None => nyquist_dims(
                &self.build_aperture()?,
                &self.region.build()?,
                &self.build_freqs()?,
            ),
        }
    }

    /// The same setup with every length scaled by `s` and `side × side`
    /// elements.
    pub fn resized(&self, side: usize, s: f64) -> Self {
        let mut c = self.clone();
        c.aperture.nx = side;
        c.aperture.ny = side;
        c.aperture.size *= s;
        c.aperture.jitter.depth *= s;
        c.aperture.jitter.lateral *= s;
        c.region = match &self.region {
            RegionConfig::Cube { size, depth } => RegionConfig::Cube {
                size: size * s,
                depth: depth * s,
            },
            RegionConfig::Box { min, max } => RegionConfig::Box {
                min: min.map(|v| v * s),
                max: max.map(|v| v * s),
            },
        };
        c.scene = self.scene.scaled(s);
        c
    }
}

/// Build the scene and aperture and simulate the measurement.
pub fn simulate(cfg: &RunConfig) -> Result<DataCube> {
    let region = cfg.region.build()?;
    let scene = scene_from_spec(&cfg.scene, &region)?;
    simulate_measurement(&scene, &cfg.build_aperture()?, &cfg.build_freqs()?)
}

pub struct Reconstruction {
    pub volume: ImageVolume,
    pub report: Option<FfbpReport>,
    pub seconds: f64,
}

pub fn reconstruct(
    cube: &DataCube,
    region: &ImagingRegion,
    algorithm: &Algorithm,
    dims: [usize; 3],
) -> Result<Reconstruction> {
    let start = Instant::now();
    let (volume, report) = match algorithm.ffbp_params() {
        None => (bpa_reconstruct(cube, region, dims)?, None),
        Some(p) => {
            let (v, r) = hhffbpa_reconstruct(cube, region, dims, &p)?;
            (v, Some(r))
        }
    };
    Ok(Reconstruction {
        volume,
        report,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Where to take a PSF cut: along `axis`, through `through` or, if absent,
/// through the reference volume's peak, keeping `half_width` metres either
/// side of that point (the whole line if absent).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutSpec {
    pub axis: usize,
    pub through: Option<Point3>,
    pub half_width: Option<f64>,
}

impl std::str::FromStr for CutSpec {
    type Err = String;

    /// `x`, `y` or `z`, optionally followed by `,px,py,pz` and then
    /// `,half_width`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut parts = s.split(',').map(str::trim);
        let axis = match parts.next() {
            Some("x") => 0,
            Some("y") => 1,
            Some("z") => 2,
            other => return Err(format!("axis must be x, y or z, got {other:?}")),
        };
        let coords: Vec<f64> = parts
            .map(|p| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        let through = (coords.len() >= 3).then(|| Point3::new(coords[0], coords[1], coords[2]));
        let half_width = match coords.len() {
            0 | 3 => None,
            4 if coords[3] > 0.0 => Some(coords[3]),
            4 => return Err("half width must be positive".into()),
            n => return Err(format!("expected 0, 3 or 4 numbers, got {n}")),
        };
        Ok(CutSpec {
            axis,
            through,
            half_width,
        })
    }
}

/// PSNR and relative error of `test` against `reference`, plus PSF reports
/// of both along `cut`.
pub fn compare(
    reference: &ImageVolume,
    test: &ImageVolume,
    cut: Option<CutSpec>,
) -> Result<MetricsReport> {
    let mut report = MetricsReport {
        psnr_db: Some(psnr(reference, test)?),
        relative_rms: Some(relative_rms(reference.values(), test.values())?),
        ..MetricsReport::default()
    };
    if let Some(cut) = cut {
        let through = match cut.through {
            Some(p) => p,
            None => peak_position(reference)?,
        };
        let measure = |v: &ImageVolume| -> Result<_> {
            let mut c = PsfCut::extract(v, cut.axis, &through)?;
            if let Some(h) = cut.half_width {
                c = c.window(through[cut.axis], h);
            }
            c.metrics()
        };
        report.reference_psf = Some(measure(reference)?);
        report.test_psf = Some(measure(test)?);
    }
    Ok(report)
}

/// Position of the largest-magnitude voxel.
pub fn peak_position(volume: &ImageVolume) -> Result<Point3> {
    let g = volume
        .cartesian()
        .ok_or_else(|| Error::GridMismatch("operation needs a Cartesian volume".into()))?;
    let (i, _) = volume
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .ok_or_else(|| Error::invalid("empty volume"))?;
    let nxy = g.dims[0] * g.dims[1];
    Ok(g.point(i % g.dims[0], (i % nxy) / g.dims[0], i / nxy))
}

/// One timed reconstruction of a bench sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub size: usize,
    pub algo: &'static str,
    pub levels: usize,
    pub seconds: f64,
    pub predicted_ops: f64,
    pub error: Option<String>,
}

/// Factorization depth used for an aperture of `side × side` elements in a
/// sweep: level-1 subarrays keep roughly the same element count.
pub fn bench_levels(side: usize) -> usize {
    let m = (2.0 * (side.max(2) as f64).log2()).round() as i64 - 3;
    m.max(1) as usize
}

/// Time BPA and HHFFBPA on `base` resized to each side length. Geometry
/// scales by `(side − 1)/(base side − 1)` and the final grid is
/// `(2·side − 1, 2·side − 1, side)`. Failures are recorded and the sweep
/// continues.
pub fn bench(
    base: &RunConfig,
    sizes: &[usize],
    oversampling: f64,
    kernel: Kernel,
) -> Vec<BenchRow> {
    let base_side = base.aperture.nx.max(2);
    let mut rows = Vec::new();
    for &side in sizes {
        let s = (side as f64 - 1.0) / (base_side as f64 - 1.0);
        let cfg = base.resized(side, s);
        let dims = [2 * side - 1, 2 * side - 1, side];
        let levels = bench_levels(side);
        let setup = (|| -> Result<_> {
            let cube = simulate(&cfg)?;
            let region = cfg.region.build()?;
            Ok((cube, region))
        })();
        let (cube, region) = match setup {
            Ok(v) => v,
            Err(e) => {
                for algo in ["bpa", "hhffbpa"] {
                    rows.push(failed_row(side, algo, levels, &e));
                }
                continue;
            }
        };
        let samples = dims.iter().product::<usize>();
        let nf = cube.freqs().count();

        let row = match reconstruct(&cube, &region, &Algorithm::Bpa, dims) {
            Ok(r) => BenchRow {
                size: side,
                algo: "bpa",
                levels: 1,
                seconds: r.seconds,
                predicted_ops: bpa_op_count(cube.element_count(), nf, samples),
                error: None,
            },
            Err(e) => failed_row(side, "bpa", 1, &e),
        };
        rows.push(row);

        let params = FfbpParams {
            levels,
            oversampling,
            kernel,
        };
        let row = reconstruct(&cube, &region, &Algorithm::from(params), dims).and_then(|r| {
            let ops = predict_op_count(
                cube.aperture(),
                &region,
                cube.freqs(),
                &params,
                samples,
                None,
            )?;
            Ok(BenchRow {
                size: side,
                algo: "hhffbpa",
                levels,
                seconds: r.seconds,
                predicted_ops: ops.total,
                error: None,
            })
        });
        rows.push(row.unwrap_or_else(|e| failed_row(side, "hhffbpa", levels, &e)));
    }
    rows
}

fn failed_row(size: usize, algo: &'static str, levels: usize, e: &Error) -> BenchRow {
    BenchRow {
        size,
        algo,
        levels,
        seconds: f64::NAN,
        predicted_ops: f64::NAN,
        error: Some(e.to_string()),
    }
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("size,algo,levels,seconds,predicted_ops,error\n");
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6e},{}\n",
            r.size, r.algo, r.levels, r.seconds, r.predicted_ops, err
        ));
    }
    out
}

/// Least-squares slope of `log(seconds)` against `log(size)` over the
/// successful rows of `algo`; `None` with fewer than two sizes.
pub fn fit_slope(rows: &[BenchRow], algo: &str) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.algo == algo && r.error.is_none() && r.seconds > 0.0)
        .map(|r| ((r.size as f64).ln(), r.seconds.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// BPA/HHFFBPA time ratio per size, for sizes where both succeeded.
pub fn speedups(rows: &[BenchRow]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for r in rows.iter().filter(|r| r.algo == "bpa" && r.error.is_none()) {
        if let Some(f) = rows
            .iter()
            .find(|f| f.algo == "hhffbpa" && f.size == r.size && f.error.is_none())
        {
            out.push((r.size, r.seconds / f.seconds));
        }
    }
    out
}

/// Process exit status: 0 success, 2 usage (reported by the argument
/// parser), 3 configuration, 4 I/O, 5 numeric-domain failure.
pub fn exit_code(err: &Error) -> u8 {
    match err.class() {
        ErrorClass::Config => 3,
        ErrorClass::Io => 4,
        ErrorClass::Numeric => 5,
    }
}

/// Worker count from the flag, else [`THREADS_ENV`], else rayon's default.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return positive_threads(n).map(Some);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n = v.trim().parse::<usize>().map_err(|_| Error::Config {
                field: THREADS_ENV.into(),
                message: format!("not a thread count: {v:?}"),
            })?;
            positive_threads(n).map(Some)
        }
        Err(_) => Ok(None),
    }
}

fn positive_threads(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Config {
            field: "threads".into(),
            message: "must be at least 1".into(),
        });
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_config_validates() {
        let cfg = RunConfig::desk();
        cfg.validate().unwrap();
        assert_eq!(cfg.final_dims().unwrap(), [65, 65, 33]);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = RunConfig::desk();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut doc = serde_json::to_value(RunConfig::desk()).unwrap();
        doc["colour"] = serde_json::json!("blue");
        assert!(serde_json::from_value::<RunConfig>(doc).is_err());
        let mut doc = serde_json::to_value(RunConfig::desk()).unwrap();
        doc["algorithm"]["margin"] = serde_json::json!(2);
        assert!(serde_json::from_value::<RunConfig>(doc).is_err());
    }

    #[test]
    fn invalid_sections_name_their_field() {
        let mut cfg = RunConfig::desk();
        cfg.frequencies.count = 0;
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "frequencies"),
            other => panic!("{other:?}"),
        }
        let mut cfg = RunConfig::desk();
        cfg.algorithm = Algorithm::Hhffbpa {
            levels: 3,
            oversampling: 0.5,
            kernel: Kernel::Linear,
        };
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "algorithm.oversampling"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cut_spec_parsing() {
        let c: CutSpec = "x".parse().unwrap();
        assert_eq!((c.axis, c.through, c.half_width), (0, None, None));
        let c: CutSpec = "z, 0.1, 0, 0.2".parse().unwrap();
        assert_eq!(c.through, Some(Point3::new(0.1, 0.0, 0.2)));
        assert!("w".parse::<CutSpec>().is_err());
        assert!("y,1".parse::<CutSpec>().is_err());
        let c: CutSpec = "y,0,0,0.1,0.02".parse().unwrap();
        assert_eq!(c.half_width, Some(0.02));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let rows: Vec<BenchRow> = [10usize, 20, 40]
            .iter()
            .map(|&n| BenchRow {
                size: n,
                algo: "bpa",
                levels: 1,
                seconds: 1e-6 * (n as f64).powi(5),
                predicted_ops: 0.0,
                error: None,
            })
            .collect();
        assert!((fit_slope(&rows, "bpa").unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(fit_slope(&rows[..1], "bpa"), None);
        assert_eq!(fit_slope(&rows, "hhffbpa"), None);
    }

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let codes = [
            exit_code(&Error::invalid("x")),
            exit_code(&Error::io("p", std::io::Error::other("x"))),
            exit_code(&Error::CoincidentPoints),
        ];
        assert_eq!(codes, [3, 4, 5]);
    }

    #[test]
    fn bench_levels_track_element_count() {
        assert_eq!(bench_levels(17), 5);
        assert_eq!(bench_levels(33), 7);
        assert_eq!(bench_levels(49), 8);
        assert_eq!(bench_levels(2), 1);
    }
}
