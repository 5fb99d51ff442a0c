//! Energy left between a bubble and the unit scale: it vanishes as `R` grows.

use bubble_lab::concentration::{
    bubble_energy_table, bubble_tail_energy, make_sequence, neck_energy, BubbleConstant, BubbleSpec, EnergyConfig,
};

fn main() -> bubble_lab::Result<()> {
    let n = 3;
    let seq = make_sequence(n, vec![BubbleSpec::geometric(&[0.0; 3], 10.0)], None, "delta_k = 10^-k")?;
    let cfg = EnergyConfig::default();
    let lambda0 = BubbleConstant::compute(n)?.value;
    for r in [10.0, 30.0, 100.0] {
        let neck = neck_energy(&seq, 3, r, 0.5, &cfg)?;
        println!(
            "R={r:>5}: neck {:.5} ({:.3}% of Lambda0), largest dyadic shell {:.5}, tail beyond R {:.5}",
            neck.total,
            100.0 * neck.total / lambda0,
            neck.max_shell(),
            bubble_tail_energy(n, r)?
        );
    }
    println!("\n  k   R      energy in B(y_k, R delta_k)");
    for row in bubble_energy_table(&seq, &[10.0, 100.0], &[2, 3, 4], &cfg)? {
        println!("  {}  {:<6} {:.10}", row.k, row.r_factor, row.energy);
    }
    Ok(())
}
