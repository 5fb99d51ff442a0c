//! The bubble solves `−Δu = u|u|^{4/(n−2)}` exactly; finite differences
//! approach that at second order.

use bubble_lab::fields::{aubin_talenti, pde_residual, FnField, ScalarField, Step};

fn main() -> bubble_lab::Result<()> {
    for n in 3..=6 {
        let u = aubin_talenti(n, 0.7, &vec![0.0; n])?;
        let worst = (0..50)
            .map(|i| {
                let x: Vec<f64> = (0..n).map(|j| ((i * 7 + j * 3) % 11) as f64 * 0.3 - 1.5).collect();
                pde_residual(&u, &x, Step::default()).abs()
            })
            .fold(0.0, f64::max);
        println!("n={n}: max |residual| with closed-form derivatives = {worst:.2e}");
    }

    let exact = aubin_talenti(3, 1.0, &[0.0; 3])?;
    let numeric = FnField::new(3, move |x| exact.value(x))?;
    let x = [0.4, -0.3, 0.2];
    println!("\n  h        |residual|");
    for h in [0.04, 0.02, 0.01, 0.005] {
        println!("  {h:<8} {:.3e}", pde_residual(&numeric, &x, Step::Absolute(h)).abs());
    }
    Ok(())
}
