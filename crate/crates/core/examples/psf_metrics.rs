//! Mainlobe width, PSLR and ISLR of the centre scatterer along x, for both
//! reconstructors.
//!
//!     cargo run --release --example psf_metrics

use hhsar::cli::{reconstruct, simulate, Algorithm, RunConfig};
use hhsar::metrics::PsfCut;
use hhsar::model::Point3;

fn main() -> hhsar::Result<()> {
    let cfg = RunConfig::desk();
    let cube = simulate(&cfg)?;
    let region = cfg.region.build()?;
    let dims = cfg.final_dims()?;
    let centre = Point3::new(0.0, 0.0, 0.4 / 3.0);
    let spacing = 0.175 / 3.0;
    println!("algo      width (mm)  PSLR (dB)  ISLR (dB)");
    for algo in [Algorithm::Bpa, cfg.algorithm] {
        let r = reconstruct(&cube, &region, &algo, dims)?;
        let psf = PsfCut::extract(&r.volume, 0, &centre)?
            .window(centre.x, 0.5 * spacing)
            .metrics()?;
        println!(
            "{:8}  {:10.3}  {:9.2}  {:9.2}",
            algo.name(),
            psf.mainlobe_width_mm,
            psf.pslr_db,
            psf.islr_db
        );
    }
    Ok(())
}
