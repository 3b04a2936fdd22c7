//! Recovery sweep on the unit sphere with an equatorial phase cap.
//!
//!     cargo run --release --example sphere_sweep

use std::f64::consts::FRAC_PI_2;

use phasemem::grid::DEFAULT_MEMORY_CAP;
use phasemem::recovery::{sweep, RecoveryConfig};
use phasemem::{DoubleWell, Geometry, Modulus, PhaseSplit, Surface};

fn main() -> phasemem::Result<()> {
    let cfg = RecoveryConfig {
        geometry: Geometry::new(
            Surface::Sphere {
                radius: 1.0,
                center: [0.0; 3],
            },
            PhaseSplit::Cap { theta0: FRAC_PI_2 },
        )?,
        epsilons: vec![0.15, 0.1, 0.075],
        q: 4.0,
        box_lo: vec![-1.75; 3],
        box_hi: vec![1.75; 3],
        well: DoubleWell::quartic(),
        modulus: Modulus::new(1.0, 2.0)?,
        memory_cap: DEFAULT_MEMORY_CAP,
    };
    let result = sweep(&cfg)?;
    println!("limits: {:?}", result.limits);
    print!("{}", result.to_csv());
    Ok(())
}
