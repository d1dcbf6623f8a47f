//! Evaluates an open uniform B-spline basis and its derivatives at a few
//! points and checks the partition of unity.
//!
//! ```text
//! cargo run --example basis_evaluation -- [degree] [nel]
//! ```

use iga_surrogate::splines::{KnotVector, TensorSpace};

fn main() -> iga_surrogate::Result<()> {
    let mut args = std::env::args().skip(1);
    let p: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let nel: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);

    let kv = KnotVector::open_uniform(p, nel)?;
    println!("degree {p}, {nel} elements, {} basis functions", kv.dim());
    println!("knots {:?}", kv.knots());
    for x in [0.0, 0.1, 0.375, 0.5, 0.9, 1.0] {
        let ev = kv.eval(x)?;
        let sum: f64 = ev.values.iter().sum();
        let dsum: f64 = ev.derivs.iter().sum();
        println!(
            "x = {x:5.3}  element {}  first {}  N = {:?}  N' = {:?}  sum N = {sum:.15}  sum N' = {dsum:.1e}",
            kv.element_of(x),
            ev.span,
            ev.values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            ev.derivs.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
        );
    }

    let space = TensorSpace::uniform(2, p, nel)?;
    println!("\n2D tensor space: {} dofs, {} elements", space.num_dofs(), space.num_elements());
    println!("element (1, 2) couples dofs {:?}", space.element_dofs(&[1, 2]));
    Ok(())
}
