//! Reconstruct the desk scene with backprojection and the fast factorized
//! algorithm, then compare speed and image agreement.
//!
//!     cargo run --release --example ffbp_reconstruct

use hhsar::cli::{reconstruct, simulate, Algorithm, RunConfig};
use hhsar::metrics::psnr;

fn main() -> hhsar::Result<()> {
    let cfg = RunConfig::desk();
    let cube = simulate(&cfg)?;
    let region = cfg.region.build()?;
    let dims = cfg.final_dims()?;
    let bpa = reconstruct(&cube, &region, &Algorithm::Bpa, dims)?;
    let fast = reconstruct(&cube, &region, &cfg.algorithm, dims)?;
    println!("bpa      {:7.2} s", bpa.seconds);
    println!("hhffbpa  {:7.2} s", fast.seconds);
    if let Some(report) = &fast.report {
        for l in &report.levels {
            println!(
                "  level {}: {:3} subimages, {:7} grid points, {} flagged",
                l.level, l.subimages, l.valid_points, l.flagged
            );
        }
        println!("  level ratios {:.2?}", report.level_ratios());
    }
    println!("speedup  {:.1}x", bpa.seconds / fast.seconds);
    println!("PSNR     {:.2} dB", psnr(&bpa.volume, &fast.volume)?);
    Ok(())
}
