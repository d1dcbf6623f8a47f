//! Built-in geometries: evaluation, Jacobians, pull-back coefficients and a
//! round trip through the plain-text geometry format.
//!
//! ```text
//! cargo run --example geometry_io -- [name] [output-file]
//! ```

use iga_surrogate::geometry::{builtin_geometry, pullback_coefficient, PatchMap, BUILTIN_GEOMETRIES};

fn main() -> iga_surrogate::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "quarter_annulus_bumps".into());
    let out = args.next();
    println!("available: {BUILTIN_GEOMETRIES:?}");

    let dim = if name == "bent_box" { 3 } else { 2 };
    let g = builtin_geometry(&name, dim)?;
    println!("{name}: degrees {:?}, control net {:?}, rational {}", g.degrees(), g.counts(), g.is_rational());
    let centre = vec![0.5; dim];
    for xhat in [vec![0.0; dim], centre.clone(), vec![1.0; dim]] {
        let ev = g.eval(&xhat)?;
        println!("phi({xhat:?}) = {:.6?}  det J = {:.6}", ev.point, ev.det);
    }
    println!("K(centre) = {:.6?}", pullback_coefficient(&g, &centre)?);

    let text = g.to_text();
    let back = PatchMap::from_text(&text)?;
    let same = back.eval(&centre)?.point == g.eval(&centre)?.point;
    println!("text round trip reproduces the map: {same}");
    match out {
        Some(path) => {
            g.save(&path)?;
            println!("written to {path}");
        }
        None => print!("\n{text}"),
    }
    Ok(())
}
