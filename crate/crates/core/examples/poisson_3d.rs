//! The full verification pipeline on the bent box in 3D, with the progress
//! listing and the final report.
//!
//! ```text
//! cargo run --release --example poisson_3d -- [nel]
//! ```

use iga_surrogate::run::{run_logged, RunConfig};

fn main() -> iga_surrogate::Result<()> {
    let mut config = RunConfig::defaults(3);
    if let Some(nel) = std::env::args().nth(1).and_then(|s| s.parse().ok()) {
        config.nel = nel;
    }
    let report = run_logged(&config, &mut std::io::stdout())?;
    println!("{report}");
    println!("dofs {}, CG iterations {} / {}", report.num_dofs, report.iterations_std, report.iterations_surr);
    Ok(())
}
