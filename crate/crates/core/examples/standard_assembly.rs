//! Full Gauss quadrature assembly of the stiffness matrix and its structural
//! properties: symmetry and constants in the kernel.
//!
//! ```text
//! cargo run --release --example standard_assembly -- [nel] [degree] [geometry]
//! ```

use iga_surrogate::assembly::{assemble_stiffness, local_stiffness};
use iga_surrogate::geometry::builtin_geometry;
use iga_surrogate::quadrature::gauss_rule;
use iga_surrogate::splines::TensorSpace;
use std::time::Instant;

fn main() -> iga_surrogate::Result<()> {
    let mut args = std::env::args().skip(1);
    let nel: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(40);
    let p: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let name = args.next().unwrap_or_else(|| "quarter_annulus".into());

    let space = TensorSpace::uniform(2, p, nel)?;
    let g = builtin_geometry(&name, 2)?;
    let rule = gauss_rule(p + 1)?;

    let (local, dofs) = local_stiffness(&space, &g, &rule, &[0, 0])?;
    let n = dofs.len();
    println!("local matrix of element (0, 0): {n}x{n}, dofs {dofs:?}");
    println!("first row {:.4?}", &local[..n]);

    let t = Instant::now();
    let a = assemble_stiffness(&space, &g, &rule, None)?;
    println!("\nassembled {} dofs, {} stored entries in {:.3} s", a.nrows(), a.nnz(), t.elapsed().as_secs_f64());
    println!("bitwise symmetric: {}", a.is_symmetric_bitwise());
    let max_row_sum = a.row_sums().iter().fold(0.0f64, |m, s| m.max(s.abs()));
    println!("max |row sum| = {max_row_sum:.2e} (max |A| = {:.4})", a.max_abs());
    Ok(())
}
