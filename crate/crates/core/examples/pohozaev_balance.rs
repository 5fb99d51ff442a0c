//! Term-by-term Pohozaev identity for a bubble, next to the variant whose
//! boundary potential term lacks the factor `r`.

use bubble_lab::fields::{aubin_talenti, pohozaev_residual};
use bubble_lab::grid::QuadConfig;

fn main() -> bubble_lab::Result<()> {
    for n in [3, 4] {
        let u = aubin_talenti(n, 1.0, &vec![0.0; n])?;
        for r in [0.5, 1.0, 2.0] {
            let rep = pohozaev_residual(&u, &vec![0.0; n], r, &QuadConfig::default())?;
            println!(
                "n={n} r={r}: relative imbalance {:.2e}, variant imbalance {:.4}",
                rep.relative, rep.variant_residual
            );
            for t in &rep.terms {
                println!("    {:<40} {:>14.8} {:>14.8}", t.label, t.derived, t.variant);
            }
        }
    }
    Ok(())
}
