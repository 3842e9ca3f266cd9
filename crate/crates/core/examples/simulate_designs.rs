//! The four simulation designs: draw, write CSV, read it back and check
//! the share of responses below the true conditional quantile.
//!
//!     cargo run --example simulate_designs

use qrisk::dgp::{sample, true_cqf, Dgp, DgpId, DgpSpec};
use qrisk::num::RngStream;
use qrisk::Dataset;

fn main() -> qrisk::Result<()> {
    for id in [DgpId::Dgp1, DgpId::Dgp2, DgpId::Dgp3, DgpId::Dgp4] {
        // DgpSpec uses the stream (seed, 0), so designs 1 to 3 share their noise draws.
        let data = sample(&DgpSpec::new(id, 20_000, 9))?;
        let mut below = [0usize; 3];
        for i in 0..data.n() {
            for (b, tau) in below.iter_mut().zip([0.25, 0.5, 0.8]) {
                *b += usize::from(data.y()[i] <= true_cqf(id, data.z().row(i), tau)?);
            }
        }
        let share: Vec<String> = below.iter().map(|b| format!("{:.3}", *b as f64 / data.n() as f64)).collect();
        println!("{id}: share below Q(0.25), Q(0.5), Q(0.8) = {}", share.join(", "));
    }

    let small = Dgp::new(DgpId::Dgp3, 4)?.sample(3, &RngStream::new(1, 0))?;
    let mut csv = Vec::new();
    small.write_csv(&mut csv)?;
    print!("\n{}", String::from_utf8_lossy(&csv));
    assert_eq!(Dataset::read_csv(csv.as_slice())?, small);
    Ok(())
}
