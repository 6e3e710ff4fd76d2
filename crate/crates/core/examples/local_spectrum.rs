//! Key points, spectrum centre and compressed coordinates of one subarray
//! seen from a few points, plus the forward/inverse coordinate round trip.
//!
//!     cargo run --release --example local_spectrum

use hhsar::model::{FrequencyGrid, ImagingRegion, Point3};
use hhsar::spectrum::{SubarrayExtents, SubarrayField};

fn main() -> hhsar::Result<()> {
    let freqs = FrequencyGrid::new(12e9, 15e9, 16)?;
    let ext = SubarrayExtents::new(-0.075, 0.0, -0.0375, 0.0)?;
    let field = SubarrayField::new(ext, &freqs);
    let limits = ImagingRegion::centered_cube(0.3, 0.16)?;
    for p in [
        Point3::new(0.0, 0.0, 0.13),
        Point3::new(0.05, 0.05, 0.08),
        Point3::new(-0.06, 0.02, 0.19),
    ] {
        let kp = field.keypoints(&p)?;
        let kc = kp.center();
        let uvn = field.forward(&p)?;
        let inv = field.invert(&uvn, &(p + Point3::new(0.003, -0.002, 0.004)), &limits)?;
        println!("p = [{:.3}, {:.3}, {:.3}]", p.x, p.y, p.z);
        println!(
            "  k_c    = [{:8.1}, {:8.1}, {:8.1}] rad/m",
            kc.x, kc.y, kc.z
        );
        println!(
            "  |v1|, |v2|, |v3| = {:.1}, {:.1}, {:.1} rad/m",
            kp.v1().norm(),
            kp.v2().norm(),
            kp.v3().norm()
        );
        println!("  phase  = {:.3} rad", field.phase(&p)?);
        println!("  (u,v,n) = [{:.3}, {:.3}, {:.3}]", uvn.x, uvn.y, uvn.z);
        println!(
            "  inverse error {:.1e} m after {} Newton steps",
            (inv.position - p).norm(),
            inv.iterations
        );
    }
    Ok(())
}
