//! Simulate a handheld scan of a point lattice and save the measurement cube.
//!
//!     cargo run --release --example simulate_scene -- out/desk_cube

use std::path::PathBuf;

use hhsar::cli::{simulate, RunConfig};
use hhsar::io;

fn main() -> hhsar::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "out/desk_cube".into())
        .into();
    let cfg = RunConfig::desk();
    let cube = simulate(&cfg)?;
    let ap = cube.aperture();
    let z: Vec<f64> = ap.elements().iter().map(|p| p.z).collect();
    let (lo, hi) = z
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    println!(
        "{} elements over {:.3} m, depth wobble {:.1} mm peak to peak",
        ap.len(),
        ap.size(),
        1e3 * (hi - lo)
    );
    println!(
        "{} frequencies {:.1}-{:.1} GHz",
        cube.freqs().count(),
        cube.freqs().f_min() * 1e-9,
        cube.freqs().f_max() * 1e-9
    );
    let energy: f64 = cube.values().iter().map(|v| v.norm_sqr()).sum();
    println!("cube energy {energy:.3e}");
    io::write_cube_with_region(&out, &cube, Some(&cfg.region.build()?))?;
    println!("wrote {}.{{json,bin}}", out.display());
    Ok(())
}
