//! Poisson problem on the bumpy quarter annulus solved with the standard and
//! the surrogate stiffness matrix, step by step through the library API.
//!
//! ```text
//! cargo run --release --example poisson_2d -- [nel] [skip]
//! ```

use iga_surrogate::assembly::assemble_stiffness;
use iga_surrogate::geometry::builtin_geometry;
use iga_surrogate::quadrature::gauss_rule;
use iga_surrogate::solve::{apply_dirichlet, assemble_load, compute_errors, solve, ManufacturedCase};
use iga_surrogate::splines::TensorSpace;
use iga_surrogate::surrogate::{assemble_surrogate, SurrogateConfig};

fn main() -> iga_surrogate::Result<()> {
    let mut args = std::env::args().skip(1);
    let nel: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(159);
    let skip: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let p = 2;

    let space = TensorSpace::uniform(2, p, nel)?;
    let g = builtin_geometry("quarter_annulus_bumps", 2)?;
    let rule = gauss_rule(p + 1)?;
    let case = ManufacturedCase::oscillatory(2);
    let b = assemble_load(&space, &g, &rule, &|x| case.f(x))?;

    let standard = assemble_stiffness(&space, &g, &rule, None)?;
    let surrogate = assemble_surrogate(&space, &g, &rule, &SurrogateConfig::new(skip, 3)?)?;
    for (label, a) in [("standard", &standard), ("surrogate", &surrogate)] {
        let system = apply_dirichlet(a, &b, &space, &g, &rule, &|x| case.u(x))?;
        let sol = solve(&system, 1e-12)?;
        let err = compute_errors(&space, &g, &sol.coeffs, &case, &gauss_rule(p + 2)?)?;
        println!("{label:9}  CG iterations {:4}  L2 {:.6e}  H1 {:.6e}", sol.iterations, err.l2, err.h1);
    }
    println!("||A - A_surr||_max = {:.6e}", standard.max_abs_diff(&surrogate)?);
    Ok(())
}
