//! Range-compress the echo of a single scatterer and locate its delay peak
//! for a few elements.
//!
//!     cargo run --release --example range_profiles

use hhsar::model::{generate_handheld_aperture, FrequencyGrid, ImagingRegion, JitterSpec, Point3};
use hhsar::rangecomp::{range_compress, DEFAULT_UPSAMPLE};
use hhsar::simulator::{scene_from_spec, simulate_measurement, PointSpec, SceneSpec};

const C: f64 = 299_792_458.0;

fn main() -> hhsar::Result<()> {
    let ap = generate_handheld_aperture(9, 9, 0.1, JitterSpec::NONE, 0)?;
    let freqs = FrequencyGrid::new(12e9, 15e9, 64)?;
    let region = ImagingRegion::centered_cube(0.1, 0.2)?;
    let target = Point3::new(0.01, -0.02, 0.2);
    let spec = SceneSpec::Points {
        scatterers: vec![PointSpec {
            position: [target.x, target.y, target.z],
            amplitude: 1.0,
            phase: 0.0,
        }],
    };
    let cube = simulate_measurement(&scene_from_spec(&spec, &region)?, &ap, &freqs)?;
    let profiles = range_compress(&cube, DEFAULT_UPSAMPLE)?;
    println!("element   true range   peak range   error");
    for e in [0, 40, 80] {
        let env = profiles.envelope(e);
        let (n, _) = env
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .expect("non-empty profile");
        let tau = profiles.time_origin() + n as f64 * profiles.time_step();
        let peak = 0.5 * C * tau;
        let truth = (target - ap.elements()[e]).norm();
        println!(
            "{e:7}   {:8.4} m   {:8.4} m   {:+.2} mm",
            truth,
            peak,
            1e3 * (peak - truth)
        );
    }
    println!("bin spacing {:.2} mm", 1e3 * 0.5 * C * profiles.time_step());
    Ok(())
}
