//! Assembles the standard and the surrogate stiffness matrix on the bumpy
//! quarter annulus and compares them.
//!
//! ```text
//! cargo run --release --example surrogate_assembly -- [nel] [skip]
//! ```

use iga_surrogate::assembly::assemble_stiffness;
use iga_surrogate::geometry::builtin_geometry;
use iga_surrogate::quadrature::gauss_rule;
use iga_surrogate::splines::TensorSpace;
use iga_surrogate::surrogate::{assemble_surrogate, element_mask, SurrogateConfig};
use std::time::Instant;

fn main() -> iga_surrogate::Result<()> {
    let mut args = std::env::args().skip(1);
    let nel: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(159);
    let skip: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let p = 2;
    let name = args.next().unwrap_or_else(|| "quarter_annulus_bumps".to_string());

    let space = TensorSpace::uniform(2, p, nel)?;
    let geometry = builtin_geometry(&name, 2)?;
    let rule = gauss_rule(p + 1)?;
    let cfg = SurrogateConfig::new(skip, 3)?;

    let t = Instant::now();
    let a = assemble_stiffness(&space, &geometry, &rule, None)?;
    let t_std = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let s = assemble_surrogate(&space, &geometry, &rule, &cfg)?;
    let t_surr = t.elapsed().as_secs_f64();

    let mask = element_mask(&space, skip)?;
    println!("dofs                 {}", space.num_dofs());
    println!("active elements      {} of {}", mask.num_active(), space.num_elements());
    println!("standard assembly    {t_std:.4} s");
    println!("surrogate assembly   {t_surr:.4} s");
    println!("speed-up             {:.2}", t_std / t_surr);
    println!("||A||_max            {:e}", a.max_abs());
    println!("||A - A_surr||_max   {:e}", a.max_abs_diff(&s)?);
    Ok(())
}
