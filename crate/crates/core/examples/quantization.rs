//! Detect concentration points, peel off bubbles one scale at a time and
//! compare the concentrated energy with multiples of `Λ₀`.

use bubble_lab::concentration::{make_sequence, quantization_report, BubbleSpec, QuantizeConfig};

fn main() -> bubble_lab::Result<()> {
    let origin = [0.0; 3];
    let tower = vec![
        BubbleSpec::geometric(&origin, 4.0),
        BubbleSpec::geometric(&origin, 16.0),
        BubbleSpec::geometric(&origin, 64.0),
    ];
    let seq = make_sequence(3, tower, None, "three scales at the origin")?;
    let report = quantization_report(&seq, &QuantizeConfig::default())?;
    for p in &report.points {
        println!("point {:?}: N = {}, Theta/Lambda0 = {:?}", p.center, p.n_hat, p.ratio);
        for b in &p.inventory {
            println!("    scale {:.3e}  energy {:.6}", b.scale, b.energy);
        }
        println!("    cross term {:.4}, necks {:?}", p.cross_term, p.necks);
    }
    println!("{}", report.to_json()?);
    Ok(())
}
