//! Maximum-intensity projections of a backprojected volume along each axis,
//! exported as 8-bit PGM images.
//!
//!     cargo run --release --example mip_export -- out

use std::path::PathBuf;

use hhsar::bpa::bpa_reconstruct;
use hhsar::cli::{simulate, RunConfig};
use hhsar::io::{export_projection, PgmDepth};
use hhsar::metrics::{max_intensity_projection, DEFAULT_FLOOR_DB};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "out".into())
        .into();
    std::fs::create_dir_all(&dir)?;
    let cfg = RunConfig::desk();
    let cube = simulate(&cfg)?;
    let volume = bpa_reconstruct(&cube, &cfg.region.build()?, cfg.final_dims()?)?;
    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
        let image = max_intensity_projection(&volume, axis, DEFAULT_FLOOR_DB)?;
        let path = dir.join(format!("mip_{name}.pgm"));
        export_projection(&image, &path, PgmDepth::Eight)?;
        println!("{}: {} x {}", path.display(), image.width, image.height);
    }
    Ok(())
}
