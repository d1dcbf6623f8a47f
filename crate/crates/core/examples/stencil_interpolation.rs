//! One stencil function of the surrogate method: sample it from a masked
//! assembly, interpolate it over the interior lattice and compare with the
//! exact stencil from full assembly.
//!
//! ```text
//! cargo run --release --example stencil_interpolation -- [nel] [skip]
//! ```

use iga_surrogate::assembly::assemble_stiffness;
use iga_surrogate::geometry::builtin_geometry;
use iga_surrogate::quadrature::gauss_rule;
use iga_surrogate::splines::TensorSpace;
use iga_surrogate::surrogate::{
    all_shifts, count_interpolated_stencils, element_mask, extract_stencil_samples, interpolate_stencil, sample_indices,
};

fn main() -> iga_surrogate::Result<()> {
    let mut args = std::env::args().skip(1);
    let nel: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(80);
    let skip: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let p = 2;

    let space = TensorSpace::uniform(2, p, nel)?;
    let g = builtin_geometry("quarter_annulus_bumps", 2)?;
    let rule = gauss_rule(p + 1)?;
    let lattice = space.interior_lattice()?;
    let samples = sample_indices(lattice.len(), skip, 3)?;
    println!("lattice {} per direction, samples {samples:?}", lattice.len());
    println!("{} of {} stencils are interpolated", count_interpolated_stencils(p, 2), all_shifts(&space).len());

    let partial = assemble_stiffness(&space, &g, &rule, Some(&element_mask(&space, skip)?))?;
    let full = assemble_stiffness(&space, &g, &rule, None)?;
    for shift in all_shifts(&space).into_iter().filter(|s| s.flat > 0).take(4) {
        let grid = extract_stencil_samples(&partial, &shift, &lattice, &samples);
        let values = interpolate_stencil(&grid, 3, &lattice)?;
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for (k, v) in values.iter().enumerate() {
            let row = lattice.dof_of(&[k % lattice.len(), k / lattice.len()]);
            let exact = full.get(row, (row as isize + shift.flat) as usize);
            err = err.max((v - exact).abs());
            scale = scale.max(exact.abs());
        }
        println!("shift {:?}: max |stencil| {scale:.4}, max interpolation error {err:.3e}", shift.offset);
    }
    Ok(())
}
