//! Tensor-product interpolation on a grid: multilinear and not-a-knot cubic,
//! with the observed convergence order.
//!
//! ```text
//! cargo run --release --example grid_interpolation
//! ```

use iga_surrogate::interpolation::GridInterpolant;

fn main() -> iga_surrogate::Result<()> {
    let f = |x: f64, y: f64| (3.0 * x).sin() * (2.0 * y).cos() + x * y;
    let fine: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
    for degree in [1, 3] {
        let mut prev: Option<f64> = None;
        for n in [9, 17, 33, 65] {
            let coords: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let values: Vec<f64> = (0..n * n).map(|k| f(coords[k % n], coords[k / n])).collect();
            let interp = GridInterpolant::new(vec![coords.clone(); 2], values, degree)?;
            let approx = interp.evaluate_grid(&[fine.clone(), fine.clone()])?;
            let err = (0..fine.len() * fine.len())
                .map(|k| (approx[k] - f(fine[k % fine.len()], fine[k / fine.len()])).abs())
                .fold(0.0, f64::max);
            let order = prev.map(|e| format!("{:.2}", (e / err).log2())).unwrap_or_default();
            println!("q = {degree}  {n:3} samples/dir  max error {err:.3e}  order {order}");
            prev = Some(err);
        }
    }
    let coords = vec![vec![0.0, 0.5, 1.0], vec![0.0, 1.0]];
    let interp = GridInterpolant::new(coords, vec![0.0, 1.0, 4.0, 1.0, 2.0, 5.0], 1)?;
    println!("\noutside the sample box: {}", interp.eval_point(&[1.5, 0.5]).unwrap_err());
    Ok(())
}
