//! H1 and L2 convergence of the standard and surrogate solutions for a smooth
//! solution on the bumpy quarter annulus at fixed skip.
//!
//! ```text
//! cargo run --release --example convergence_study -- [degree] [skip]
//! ```

use iga_surrogate::run::{run, RunConfig, Solution};

fn main() -> iga_surrogate::Result<()> {
    let mut args = std::env::args().skip(1);
    let degree: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let skip: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let mut prev: Option<(f64, f64)> = None;
    println!("  nel      H1 standard     H1 surrogate   order   L2 surrogate");
    for nel in [40, 80, 160] {
        let config = RunConfig { nel, degree, skip, solution: Solution::Smooth, ..RunConfig::defaults(2) };
        let r = run(&config)?;
        let order = prev.map(|(h1, _)| format!("{:.2}", (h1 / r.h1_surr).log2())).unwrap_or_default();
        println!("{nel:5}  {:14.6e}  {:14.6e}  {order:>6}  {:14.6e}", r.h1_std, r.h1_surr, r.l2_surr);
        prev = Some((r.h1_surr, r.l2_surr));
    }
    Ok(())
}
