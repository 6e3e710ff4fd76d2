//! On-disk formats: a JSON sidecar plus a raw little-endian `f32` payload
//! for cubes and volumes, binary PGM for projections, JSON for reports.
//!
//! `write_cube(path, ..)` writes `path.json` and `path.bin` (any extension
//! on `path` is replaced). Payloads hold interleaved real/imaginary pairs,
//! frequency fastest for cubes and x fastest for volumes.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bpa::{ImageVolume, Provenance, VolumeGrid};
use crate::error::{Error, Result};
use crate::metrics::Projection;
use crate::model::{CartesianGrid, FrequencyGrid, ImagingRegion, Point3, SyntheticAperture};
use crate::simulator::DataCube;

pub const CUBE_SCHEMA: &str = "hhsar.cube";
pub const VOLUME_SCHEMA: &str = "hhsar.volume";
pub const SCHEMA_VERSION: u32 = 1;

const BYTES_PER_SAMPLE: u64 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CubeSidecar {
    schema: String,
    version: u32,
    /// `[elements, frequencies]`.
    dims: [usize; 2],
    layout: String,
    units: Units,
    aperture: ApertureMeta,
    frequencies: FrequencyMeta,
    /// Region the cube was simulated for, used as the default image extent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    region: Option<RegionMeta>,
    payload: String,
    payload_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VolumeSidecar {
    schema: String,
    version: u32,
    /// `[nx, ny, nz]`.
    dims: [usize; 3],
    layout: String,
    units: Units,
    origin: [f64; 3],
    step: [f64; 3],
    provenance: Provenance,
    payload: String,
    payload_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Units {
    length: String,
    frequency: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: "m".into(),
            frequency: "Hz".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApertureMeta {
    elements: Vec<[f64; 3]>,
    scan_shape: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrequencyMeta {
    f_min: f64,
    f_max: f64,
    count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionMeta {
    min: [f64; 3],
    max: [f64; 3],
}

/// Sidecar and payload paths for a base path.
pub fn file_pair(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("bin"))
}

pub fn write_cube(path: &Path, cube: &DataCube) -> Result<()> {
    write_cube_with_region(path, cube, None)
}

pub fn read_cube(path: &Path) -> Result<DataCube> {
    Ok(read_cube_with_region(path)?.0)
}

/// [`write_cube`], recording the imaging region in the sidecar.
pub fn write_cube_with_region(
    path: &Path,
    cube: &DataCube,
    region: Option<&ImagingRegion>,
) -> Result<()> {
    let (meta_path, bin_path) = file_pair(path);
    let aperture = cube.aperture();
    let freqs = cube.freqs();
    let sidecar = CubeSidecar {
        schema: CUBE_SCHEMA.into(),
        version: SCHEMA_VERSION,
        dims: [aperture.len(), freqs.count()],
        layout: "element-major, frequency fastest, interleaved re/im f32 LE".into(),
        units: Units::default(),
        aperture: ApertureMeta {
            elements: aperture
                .elements()
                .iter()
                .map(|p| [p.x, p.y, p.z])
                .collect(),
            scan_shape: aperture.scan_shape(),
        },
        frequencies: FrequencyMeta {
            f_min: freqs.f_min(),
            f_max: freqs.f_max(),
            count: freqs.count(),
        },
        region: region.map(|r| RegionMeta {
            min: r.min().into(),
            max: r.max().into(),
        }),
        payload: payload_name(&bin_path),
        payload_bytes: BYTES_PER_SAMPLE * cube.values().len() as u64,
    };
    write_payload(&bin_path, cube.values())?;
    write_json(&meta_path, &sidecar)
}

/// [`read_cube`] plus the recorded imaging region, if any.
pub fn read_cube_with_region(path: &Path) -> Result<(DataCube, Option<ImagingRegion>)> {
    let (meta_path, _) = file_pair(path);
    let meta: CubeSidecar = read_sidecar(&meta_path)?;
    check_schema(&meta_path, &meta.schema, CUBE_SCHEMA, meta.version)?;
    let [ne, nf] = meta.dims;
    if meta.aperture.elements.len() != ne || meta.frequencies.count != nf {
        return Err(Error::DimensionMismatch {
            path: meta_path,
            message: format!(
                "dims {:?} disagree with {} elements and {} frequencies",
                meta.dims,
                meta.aperture.elements.len(),
                meta.frequencies.count
            ),
        });
    }
    let values = read_payload(&meta_path, &meta.payload, meta.payload_bytes, ne * nf)?;
    let elements = meta
        .aperture
        .elements
        .iter()
        .map(|p| Point3::new(p[0], p[1], p[2]))
        .collect();
    let aperture = SyntheticAperture::new(elements, meta.aperture.scan_shape)?;
    let f = &meta.frequencies;
    let freqs = FrequencyGrid::new(f.f_min, f.f_max, f.count)?;
    let region = meta
        .region
        .map(|r| ImagingRegion::new(r.min.into(), r.max.into()))
        .transpose()?;
    Ok((DataCube::new(values, aperture, freqs)?, region))
}

/// Write a Cartesian volume; point-list volumes have no file format.
pub fn write_volume(path: &Path, volume: &ImageVolume) -> Result<()> {
    let grid = volume.cartesian().ok_or_else(|| {
        Error::GridMismatch("only Cartesian volumes can be written to disk".into())
    })?;
    let (meta_path, bin_path) = file_pair(path);
    let sidecar = VolumeSidecar {
        schema: VOLUME_SCHEMA.into(),
        version: SCHEMA_VERSION,
        dims: grid.dims,
        layout: "x fastest, then y, then z, interleaved re/im f32 LE".into(),
        units: Units::default(),
        origin: [grid.origin.x, grid.origin.y, grid.origin.z],
        step: grid.step,
        provenance: volume.provenance.clone(),
        payload: payload_name(&bin_path),
        payload_bytes: BYTES_PER_SAMPLE * volume.values().len() as u64,
    };
    write_payload(&bin_path, volume.values())?;
    write_json(&meta_path, &sidecar)
}

pub fn read_volume(path: &Path) -> Result<ImageVolume> {
    let (meta_path, _) = file_pair(path);
    let meta: VolumeSidecar = read_sidecar(&meta_path)?;
    check_schema(&meta_path, &meta.schema, VOLUME_SCHEMA, meta.version)?;
    let count = meta.dims.iter().product();
    let values = read_payload(&meta_path, &meta.payload, meta.payload_bytes, count)?;
    let grid = CartesianGrid {
        origin: Point3::new(meta.origin[0], meta.origin[1], meta.origin[2]),
        step: meta.step,
        dims: meta.dims,
    };
    ImageVolume::new(values, VolumeGrid::Cartesian(grid), meta.provenance)
}

fn payload_name(bin_path: &Path) -> String {
    bin_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn check_schema(path: &Path, schema: &str, expected: &str, version: u32) -> Result<()> {
    if schema != expected || version != SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            path: path.to_owned(),
            message: format!("found {schema} v{version}, expected {expected} v{SCHEMA_VERSION}"),
        });
    }
    Ok(())
}

fn read_sidecar<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    serde_path_to_error::deserialize(value).map_err(|e| Error::SchemaMismatch {
        path: path.to_owned(),
        message: format!("`{}`: {}", e.path(), e.inner()),
    })
}

fn write_payload(path: &Path, values: &[Complex64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * BYTES_PER_SAMPLE as usize);
    for v in values {
        let (re, im) = (v.re as f32, v.im as f32);
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::invalid("sample not representable as finite f32"));
        }
        bytes.extend_from_slice(&re.to_le_bytes());
        bytes.extend_from_slice(&im.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_payload(
    meta_path: &Path,
    name: &str,
    declared: u64,
    count: usize,
) -> Result<Vec<Complex64>> {
    let expected = BYTES_PER_SAMPLE * count as u64;
    if declared != expected {
        return Err(Error::DimensionMismatch {
            path: meta_path.to_owned(),
            message: format!("dims imply {expected} payload bytes, sidecar declares {declared}"),
        });
    }
    let bin_path = meta_path.with_file_name(name);
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::TruncatedPayload {
            path: bin_path,
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(Error::DimensionMismatch {
            path: bin_path,
            message: format!("payload has {actual} bytes, dims imply {expected}"),
        });
    }
    Ok(bytes
        .chunks_exact(BYTES_PER_SAMPLE as usize)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect())
}

/// Pretty-printed JSON document.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parse a JSON document, naming the offending field on failure.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            Error::Json {
                path: path.to_owned(),
                source: inner,
            }
        } else {
            Error::Config {
                field,
                message: inner.to_string(),
            }
        }
    })
}

/// Sample depth of an exported graymap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PgmDepth {
    #[default]
    Eight,
    Sixteen,
}

impl PgmDepth {
    fn max_value(self) -> u32 {
        match self {
            PgmDepth::Eight => 255,
            PgmDepth::Sixteen => 65535,
        }
    }
}

/// Quantize `image` (values in `[0, 1]`, round half up) into a binary PGM.
pub fn export_projection(image: &Projection, path: &Path, depth: PgmDepth) -> Result<()> {
    if let Some(bad) = image.pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!(
            "projection value {bad} outside [0, 1]"
        )));
    }
    let max = depth.max_value();
    let mut out = format!("P5\n{} {}\n{}\n", image.width, image.height, max).into_bytes();
    for &v in &image.pixels {
        let q = (v * max as f64 + 0.5).floor() as u32;
        match depth {
            PgmDepth::Eight => out.push(q as u8),
            PgmDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a binary PGM back into `[0, 1]` values.
pub fn read_pgm(path: &Path) -> Result<Projection> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let bad = |message: &str| Error::SchemaMismatch {
        path: path.to_owned(),
        message: message.into(),
    };
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        let token = pgm_token(&mut reader).map_err(|e| Error::io(path, e))?;
        match token {
            Some(t) => header.push(t),
            None => return Err(bad("incomplete PGM header")),
        }
    }
    if header[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("malformed PGM header"));
    let (w, h, max) = (num(&header[1])?, num(&header[2])?, num(&header[3])?);
    if max == 0 || max > 65535 {
        return Err(bad("PGM maxval out of range"));
    }
    let bytes_per = if max < 256 { 1 } else { 2 };
    let expected = (w * h * bytes_per) as u64;
    let mut data = Vec::new();
    reader
        .read_to_end(&mut data)
        .map_err(|e| Error::io(path, e))?;
    if (data.len() as u64) < expected {
        return Err(Error::TruncatedPayload {
            path: path.to_owned(),
            expected,
            actual: data.len() as u64,
        });
    }
    let pixels = data[..expected as usize]
        .chunks_exact(bytes_per)
        .map(|c| {
            let q = if bytes_per == 1 {
                c[0] as u32
            } else {
                u16::from_be_bytes([c[0], c[1]]) as u32
            };
            q as f64 / max as f64
        })
        .collect();
    Projection::new(w, h, pixels)
}

/// Next whitespace-separated header token, skipping `#` comments. Consumes
/// exactly one whitespace byte after the token.
fn pgm_token(reader: &mut impl BufRead) -> std::io::Result<Option<String>> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte)? == 0 {
            return Ok((!token.is_empty()).then(|| String::from_utf8_lossy(&token).into()));
        }
        match byte[0] {
            b'#' if token.is_empty() => {
                let mut skip = Vec::new();
                reader.read_until(b'\n', &mut skip)?;
            }
            c if c.is_ascii_whitespace() => {
                if !token.is_empty() {
                    return Ok(Some(String::from_utf8_lossy(&token).into()));
                }
            }
            c => token.push(c),
        }
    }
}

/// Write a small text file, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
