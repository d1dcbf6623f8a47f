//! Element masks of the surrogate method: which elements are integrated.
//!
//! ```text
//! cargo run --example element_masks -- [degree] [skip] [nel]
//! ```

use iga_surrogate::splines::TensorSpace;
use iga_surrogate::surrogate::{boundary_mask, element_mask, interior_mask, to_one_based};

fn main() -> iga_surrogate::Result<()> {
    let mut args = std::env::args().skip(1);
    let p: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let skip: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let nel: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(39);

    println!("boundary elements (1-based): {:?}", to_one_based(&boundary_mask(p, nel)?));
    println!("interior elements (1-based): {:?}", to_one_based(&interior_mask(p, skip, nel)?));

    let space = TensorSpace::uniform(2, p, nel)?;
    let mask = element_mask(&space, skip)?;
    println!("\nactive elements in 2D: {} of {}", mask.num_active(), space.num_elements());
    for e1 in (0..nel).rev() {
        let row: String = (0..nel).map(|e0| if mask.is_active(&[e0, e1]) { '#' } else { '.' }).collect();
        println!("{row}");
    }
    Ok(())
}
