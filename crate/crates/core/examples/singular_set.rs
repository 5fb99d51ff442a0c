//! Two bubbles concentrating at different points: both are found and
//! nothing else on the lattice fires.

use bubble_lab::concentration::{detect_sigma, make_sequence, BubbleConstant, BubbleSpec, DetectConfig};

fn main() -> bubble_lab::Result<()> {
    let specs = vec![
        BubbleSpec::geometric(&[0.5, 0.0, 0.0], 4.0),
        BubbleSpec::geometric(&[-0.5, 0.0, 0.0], 4.0),
    ];
    let seq = make_sequence(3, specs, None, "two points")?;
    let lambda0 = BubbleConstant::compute(3)?.value;
    for divisor in [5.0, 10.0, 20.0] {
        let cfg = DetectConfig {
            eps0: lambda0 / divisor,
            ..DetectConfig::default()
        };
        let d = detect_sigma(&seq, &cfg)?;
        println!(
            "eps0 = Lambda0/{divisor}: {} candidates, detected {:?}",
            d.candidates, d.points
        );
    }
    Ok(())
}
