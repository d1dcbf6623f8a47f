//! Writes the standard and surrogate matrices as Matrix Market files and reads
//! them back.
//!
//! ```text
//! cargo run --release --example matrix_market -- [output-dir]
//! ```

use iga_surrogate::assembly::assemble_stiffness;
use iga_surrogate::geometry::builtin_geometry;
use iga_surrogate::quadrature::gauss_rule;
use iga_surrogate::run::dump_matrices;
use iga_surrogate::sparse::CsrMatrix;
use iga_surrogate::splines::TensorSpace;
use iga_surrogate::surrogate::{assemble_surrogate, SurrogateConfig};
use std::path::PathBuf;

fn main() -> iga_surrogate::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("iga-matrices"));
    let space = TensorSpace::uniform(2, 2, 30)?;
    let g = builtin_geometry("quarter_annulus", 2)?;
    let rule = gauss_rule(3)?;
    let a = assemble_stiffness(&space, &g, &rule, None)?;
    let s = assemble_surrogate(&space, &g, &rule, &SurrogateConfig::new(5, 3)?)?;
    dump_matrices(&dir, &a, &s)?;

    let a_back = CsrMatrix::load_matrix_market(dir.join("A.mtx"))?;
    let s_back = CsrMatrix::load_matrix_market(dir.join("A_surrogate.mtx"))?;
    println!("wrote {} ({} x {}, {} entries)", dir.join("A.mtx").display(), a.nrows(), a.ncols(), a.nnz());
    println!("round trip exact: {} / {}", a_back.max_abs_diff(&a)? == 0.0, s_back.max_abs_diff(&s)? == 0.0);
    print!("{}", a.to_matrix_market(true).lines().take(5).map(|l| format!("{l}\n")).collect::<String>());
    Ok(())
}
