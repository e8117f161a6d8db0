//! Convergence study for the Marchenko reconstruction of a square barrier.
//!
//! Prints the relative L1 error on [-1, 3] for a range of k-grids and
//! Nystrom steps. Run with `cargo run --release --example convergence`.

use std::time::Instant;

use phaseless_core::inversion::{reconstruct_potential, roundtrip_error};
use phaseless_core::{
    ForwardSolver, InversionOptions, KGrid, PotentialSpec, ReflectionTable, XGrid,
};

fn main() -> phaseless_core::Result<()> {
    let v = PotentialSpec::square_barrier(1.0, 1.0);
    let solver = ForwardSolver::default();
    println!(
        "{:>8} {:>6} {:>8} {:>8} {:>10} {:>8}",
        "k_max", "N", "h_nys", "h_x", "rel_L1", "secs"
    );
    for (kmax, count) in [(20.0, 1000), (40.0, 2000), (80.0, 4000)] {
        let kgrid = KGrid::new(0.05, kmax, count)?;
        let table = ReflectionTable::from_coefficients(kgrid, &solver.sweep(&v, &kgrid)?, true)?;
        for (h_nys, h_x) in [(0.02, 0.02), (0.01, 0.01), (0.005, 0.01)] {
            let start = Instant::now();
            let xgrid = XGrid::with_step(-1.0, 3.0, h_x)?;
            let opts = InversionOptions {
                nystrom_step: h_nys,
                ..Default::default()
            };
            let rec = reconstruct_potential(&table, &xgrid, &opts)?;
            println!(
                "{kmax:>8} {count:>6} {h_nys:>8} {h_x:>8} {:>10.5} {:>8.2}",
                roundtrip_error(&v, &rec),
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
