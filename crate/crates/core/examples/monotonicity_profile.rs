//! `r ↦ E_u(x, r)` for a bubble at several centers, in every formulation.

use bubble_lab::fields::aubin_talenti;
use bubble_lab::grid::RadialGrid;
use bubble_lab::monotonicity::{check_monotone, check_positive, formulation_agreement, profile, MonotonicityConfig};

fn main() -> bubble_lab::Result<()> {
    let u = aubin_talenti(3, 0.5, &[0.0; 3])?;
    let grid = RadialGrid::log_spaced(0.05, 5.0, 40)?;
    let cfg = MonotonicityConfig::default();
    for center in [[0.0, 0.0, 0.0], [0.3, 0.0, 0.0], [1.0, -1.0, 0.5]] {
        let p = profile(&u, &center, &grid, &cfg)?;
        let mono = check_monotone(&p, None);
        let pos = check_positive(&p, None);
        println!(
            "center {center:?}: E from {:.4} to {:.4}, nondecreasing: {}, nonnegative: {}",
            p.values[0],
            p.values[p.values.len() - 1],
            mono.passed(),
            pos.passed()
        );
    }
    let p = profile(&u, &[0.0; 3], &grid, &cfg)?;
    for pair in formulation_agreement(&p, 1e-4).pairs {
        println!(
            "  {:>12?} vs {:<12?} max deviation {:.3e}",
            pair.left, pair.right, pair.max_deviation
        );
    }
    p.write_csv(std::io::stdout().lock())?;
    Ok(())
}
