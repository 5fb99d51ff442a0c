//! `Λ₀ = ‖∇U‖² + ‖U‖^{2*}` per dimension, with its quadrature error bound.

use bubble_lab::concentration::BubbleConstant;

fn main() -> bubble_lab::Result<()> {
    for n in 3..=8 {
        let c = BubbleConstant::compute(n)?;
        println!("n={n}: Lambda0 = {:.15} +/- {:.1e}", c.value, c.error_bound);
    }
    Ok(())
}
