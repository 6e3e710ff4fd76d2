//! Backproject a single point target and report where the image peaks.
//!
//!     cargo run --release --example bpa_point_target

use hhsar::bpa::bpa_reconstruct;
use hhsar::cli::peak_position;
use hhsar::model::{generate_handheld_aperture, FrequencyGrid, ImagingRegion, JitterSpec};
use hhsar::simulator::{scene_from_spec, simulate_measurement, PointSpec, SceneSpec};

fn main() -> hhsar::Result<()> {
    let jitter = JitterSpec {
        depth: 0.01,
        lateral: 0.0005,
    };
    let ap = generate_handheld_aperture(25, 25, 0.12, jitter, 1)?;
    let freqs = FrequencyGrid::new(12e9, 15e9, 16)?;
    let region = ImagingRegion::centered_cube(0.1, 0.12)?;
    let spec = SceneSpec::Points {
        scatterers: vec![PointSpec {
            position: [0.012, -0.008, 0.125],
            amplitude: 1.0,
            phase: 0.3,
        }],
    };
    let cube = simulate_measurement(&scene_from_spec(&spec, &region)?, &ap, &freqs)?;
    let volume = bpa_reconstruct(&cube, &region, [41, 41, 21])?;
    let g = volume.cartesian().expect("bpa returns a Cartesian volume");
    let peak = peak_position(&volume)?;
    println!("target  [0.0120, -0.0080, 0.1250]");
    println!(
        "peak    [{:.4}, {:.4}, {:.4}]  (voxel {:.2} x {:.2} x {:.2} mm)",
        peak.x,
        peak.y,
        peak.z,
        1e3 * g.step[0],
        1e3 * g.step[1],
        1e3 * g.step[2]
    );
    Ok(())
}
