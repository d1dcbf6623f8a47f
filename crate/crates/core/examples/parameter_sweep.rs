//! A parameter sweep over the skip M written as CSV to standard output.
//!
//! ```text
//! cargo run --release --example parameter_sweep
//! ```

use iga_surrogate::run::{parse_sweep, sweep, write_csv};

const SWEEP: &str = "\
# skip study on a 60-element mesh
nel=60
skip=2

nel=60
skip=5

nel=60
skip=10

# too coarse for the surrogate; recorded as a failed row
nel=6
";

fn main() -> iga_surrogate::Result<()> {
    let rows = sweep(&parse_sweep(SWEEP)?);
    write_csv(std::io::stdout().lock(), &rows)
}
