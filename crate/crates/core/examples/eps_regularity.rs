//! Small energy on a ball bounds `sup |u|` on the half ball; concentrated
//! energy makes the check inapplicable.

use bubble_lab::fields::aubin_talenti;
use bubble_lab::monotonicity::{eps_regularity_check, MonotonicityConfig};

fn main() -> bubble_lab::Result<()> {
    let cfg = MonotonicityConfig::default();
    let eps = 1.0;
    for (x0, delta) in [([3.0, 0.0, 0.0], 1.0), ([0.0, 0.0, 0.0], 0.01)] {
        let u = aubin_talenti(3, delta, &[0.0; 3])?;
        for r in [0.5, 0.25, 0.125] {
            let rep = eps_regularity_check(&u, &x0, 1.0, r, eps, &cfg)?;
            println!(
                "x0={x0:?} delta={delta} r={r}: energy {:.4}, applicable {}, sup|u|={:?}, c={:?}",
                rep.energy, rep.applicable, rep.sup_abs, rep.c_meas
            );
        }
    }
    Ok(())
}
