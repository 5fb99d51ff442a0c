//! Pointwise decay `|∇u| ≲ |x|^{−n/2}` on an annulus bounds the weak-L² norm
//! of the gradient there.

use bubble_lab::fields::{aubin_talenti, Step};
use bubble_lab::lorentz::tail_decay_check;

fn main() -> bubble_lab::Result<()> {
    for n in [3, 4] {
        for delta in [1e-2, 1e-3] {
            let u = aubin_talenti(n, delta, &vec![0.0; n])?;
            let t = tail_decay_check(&u, &vec![0.0; n], 10.0 * delta, 1.0, Step::default())?;
            println!(
                "n={n} delta={delta:e}: weak norm {:.5}, decay bound {:.5}, ratio {:.3}",
                t.weak_norm,
                t.decay_bound,
                t.weak_norm / t.decay_bound
            );
        }
    }
    Ok(())
}
