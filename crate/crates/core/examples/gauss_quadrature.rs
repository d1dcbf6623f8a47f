//! Gauss-Legendre rules on [0, 1]: nodes, weights and polynomial exactness.
//!
//! ```text
//! cargo run --example gauss_quadrature
//! ```

use iga_surrogate::quadrature::gauss_rule;

fn main() -> iga_surrogate::Result<()> {
    for m in 1..=5 {
        let rule = gauss_rule(m)?;
        println!("m = {m}: nodes {:.6?}", rule.nodes());
        println!("        weights {:.6?}", rule.weights());
        // exact up to degree 2m - 1
        for k in [2 * m - 1, 2 * m] {
            let q: f64 = rule.nodes().iter().zip(rule.weights()).map(|(x, w)| w * x.powi(k as i32)).sum();
            let exact = 1.0 / (k as f64 + 1.0);
            println!("        int x^{k} = {q:.15}  error {:.1e}", (q - exact).abs());
        }
    }
    let rule = gauss_rule(3)?;
    let (xs, ws) = rule.mapped(0.25, 0.5);
    println!("\nm = 3 mapped to [0.25, 0.5]: {xs:.6?} {ws:.6?}");
    Ok(())
}
