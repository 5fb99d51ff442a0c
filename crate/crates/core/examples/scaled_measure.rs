//! The blown-up energy `η_{y,λ}(B_r)` depends only on `λr`.

use std::sync::Arc;

use bubble_lab::concentration::{scaled_measure, EnergyConfig};
use bubble_lab::fields::{aubin_talenti, FieldRef};

fn main() -> bubble_lab::Result<()> {
    let delta = 1e-3;
    let u: FieldRef = Arc::new(aubin_talenti(4, delta, &[0.0; 4])?);
    let cfg = EnergyConfig::default();
    let product = 5.0 * delta;
    for r in [1.0, 2.0, 4.0] {
        let v = scaled_measure(&u, &[0.0; 4], product / r, r, &cfg)?;
        println!("r={r}  lambda={:.2e}  measure={v:.14}", product / r);
    }
    Ok(())
}
