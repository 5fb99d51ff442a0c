//! Lorentz norms from decreasing rearrangements: the weak-L² norm of
//! `|x|^{−n/2}`, the nesting constant, the power rule and the duality bound.

use bubble_lab::grid::unit_ball_volume;
use bubble_lab::lorentz::{
    duality_product_check, lorentz_norm, nesting_constant, power_rule_check, rearrange, LorentzIndex, QIndex,
    SampledFunction,
};

fn main() -> bubble_lab::Result<()> {
    for n in 3..=5 {
        let f = SampledFunction::radial_power(n, n as f64 / 2.0, 1e-6, 1.0, 100_000)?;
        let weak = lorentz_norm(&rearrange(&f), LorentzIndex::weak(2.0)?);
        println!(
            "n={n}: ||x|^(-n/2)|_(2,inf) = {weak:.6}, sqrt(omega_n) = {:.6}",
            unit_ball_volume(n).sqrt()
        );
    }

    let f = SampledFunction::new(vec![3.0, -1.0, 0.5, 2.0], vec![0.2, 0.5, 1.0, 0.3])?;
    let t = rearrange(&f);
    let n1 = lorentz_norm(&t, LorentzIndex::finite(2.0, 1.0)?);
    let n2 = lorentz_norm(&t, LorentzIndex::weak(2.0)?);
    println!(
        "\n|f|_(2,1) = {n1:.6} >= |f|_(2,inf) / C = {:.6}",
        n2 / nesting_constant(2.0, 1.0, QIndex::Infinite)
    );

    let pr = power_rule_check(&f, 3.0, LorentzIndex::finite(2.0, 1.0)?)?;
    println!(
        "|f^3|_(2/3,1/3) = {:.6}, |f|_(2,1)^3 = {:.6}",
        pr.power_norm, pr.norm_power
    );

    let g = SampledFunction::new(vec![0.1, 4.0, -2.0, 1.0], vec![0.2, 0.5, 1.0, 0.3])?;
    let d = duality_product_check(&f, &g)?;
    println!(
        "|fg|_1 = {:.6} <= |f|_(2,1) |g|_(2,inf) = {:.6}",
        d.product_l1,
        d.f_norm_21 * d.g_norm_2inf
    );
    Ok(())
}
