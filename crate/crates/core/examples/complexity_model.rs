//! Predicted operation counts of backprojection and the factorized
//! algorithm as the aperture grows.
//!
//!     cargo run --release --example complexity_model

use hhsar::cli::{bench_levels, RunConfig};
use hhsar::ffbp::{bpa_op_count, predict_op_count, FfbpParams, Kernel};

fn main() -> hhsar::Result<()> {
    let base = RunConfig::desk();
    println!("side  levels  bpa ops     hhffbpa ops  ratio");
    for side in [17, 33, 65, 101] {
        let cfg = base.resized(side, (side as f64 - 1.0) / 32.0);
        let aperture = cfg.build_aperture()?;
        let freqs = cfg.build_freqs()?;
        let region = cfg.region.build()?;
        let samples = (2 * side - 1) * (2 * side - 1) * side;
        let params = FfbpParams {
            levels: bench_levels(side),
            oversampling: 1.4,
            kernel: Kernel::Linear,
        };
        let fast = predict_op_count(&aperture, &region, &freqs, &params, samples, None)?;
        let slow = bpa_op_count(aperture.len(), freqs.count(), samples);
        println!(
            "{side:4}  {:6}  {slow:10.3e}  {:11.3e}  {:5.1}",
            params.levels,
            fast.total,
            slow / fast.total
        );
    }
    Ok(())
}
