//! Write a cube and a volume to sidecar + binary pairs and read them back.
//!
//!     cargo run --release --example io_roundtrip

use hhsar::bpa::bpa_reconstruct;
use hhsar::cli::{simulate, RunConfig};
use hhsar::io;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::desk().resized(13, 0.5);
    cfg.dims = Some([17, 17, 9]);
    let cube = simulate(&cfg)?;
    let region = cfg.region.build()?;
    let volume = bpa_reconstruct(&cube, &region, cfg.final_dims()?)?;

    let dir = tempfile::tempdir()?;
    let (cube_path, vol_path) = (dir.path().join("cube"), dir.path().join("volume"));
    io::write_cube_with_region(&cube_path, &cube, Some(&region))?;
    io::write_volume(&vol_path, &volume)?;

    let (back, stored) = io::read_cube_with_region(&cube_path)?;
    let worst = cube
        .values()
        .iter()
        .zip(back.values())
        .map(|(a, b)| (a - b).norm() / a.norm().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    println!(
        "cube: {} x {} samples, worst relative error {worst:.1e}, region kept: {}",
        back.element_count(),
        back.freqs().count(),
        stored == Some(region)
    );
    let vol = io::read_volume(&vol_path)?;
    println!(
        "volume: {} voxels, grid kept: {}",
        vol.values().len(),
        vol.grid() == volume.grid()
    );
    println!("{}", std::fs::read_to_string(io::file_pair(&vol_path).0)?);
    Ok(())
}
