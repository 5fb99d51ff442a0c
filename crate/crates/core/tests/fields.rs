use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use bubble_lab::concentration::{energy_in, Density, EnergyConfig, Region};
use bubble_lab::fields::{
    aubin_talenti, gradient, laplacian, pde_residual, stationarity_residual, weak_residual, Bubble, Combination,
    FieldRef, Rescaled, SampledField, ScalarField, Step, TestFunction, VectorTestFunction,
};
use bubble_lab::grid::{build_ball_rule, QuadOrder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn blow_up_of_standard_bubble_is_a_bubble() {
    // λ^{(n−2)/2} U(λx + y) = U_{1/λ, −y/λ}
    for n in 3..=5 {
        let standard: FieldRef = Arc::new(Bubble::standard(n).unwrap());
        let y: Vec<f64> = (0..n).map(|i| 0.3 * i as f64 - 0.2).collect();
        let lambda = 7.5;
        let blown = Rescaled::new(standard, &y, lambda).unwrap();
        let center: Vec<f64> = y.iter().map(|v| -v / lambda).collect();
        let direct = aubin_talenti(n, 1.0 / lambda, &center).unwrap();
        for x in [vec![0.0; n], vec![0.05; n], vec![-0.2; n]] {
            assert_relative_eq!(blown.value(&x), direct.value(&x), max_relative = 1e-12);
            let (g1, g2) = (
                gradient(&blown, &x, Step::default()),
                gradient(&direct, &x, Step::default()),
            );
            for (a, b) in g1.iter().zip(&g2) {
                assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-12);
            }
            assert!(
                pde_residual(&blown, &x, Step::default()).abs()
                    < 1e-8 * laplacian(&direct, &x, Step::default()).abs().max(1.0)
            );
        }
    }
}

#[test]
fn bubble_energy_matches_closed_forms() {
    // Λ₀ = 3^{3/2}π²/2 for n = 3 and 64π²/3 for n = 4
    let cases = [(3, 3f64.powf(1.5) * PI * PI / 2.0), (4, 64.0 * PI * PI / 3.0)];
    for (n, exact) in cases {
        let u = aubin_talenti(n, 0.01, &vec![0.0; n]).unwrap();
        let region = Region::Whole {
            center: vec![0.0; n],
            truncation: 50.0,
        };
        let e = energy_in(&u, &region, Density::Full, &EnergyConfig::default()).unwrap();
        assert_relative_eq!(e.value + e.tail_estimate, exact, max_relative = 1e-6);
    }
}

#[test]
fn weak_and_stationarity_residuals_vanish_for_a_bubble() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = aubin_talenti(3, 0.8, &[0.1, 0.0, 0.0]).unwrap();
    let rule = build_ball_rule(3, &[0.0; 3], 1.0, QuadOrder::new(96, 16)).unwrap();
    for _ in 0..5 {
        let phi = TestFunction::random(&mut rng, &[0.0; 3], 1.0).unwrap();
        assert!(weak_residual(&u, &phi, &rule).unwrap().abs() < 1e-6);
        let vphi = VectorTestFunction::random(&mut rng, &[0.0; 3], 1.0).unwrap();
        assert!(stationarity_residual(&u, &vphi, &rule).unwrap().abs() < 1e-5);
    }
}

#[test]
fn difference_of_a_field_with_itself_is_zero() {
    let b: FieldRef = Arc::new(aubin_talenti(4, 0.3, &[0.0; 4]).unwrap());
    let d = Combination::difference(b.clone(), b).unwrap();
    assert_eq!(d.value(&[0.1, 0.2, 0.0, -0.4]), 0.0);
}

#[test]
fn sampled_field_round_trips_through_files() {
    let u = aubin_talenti(3, 1.0, &[0.0; 3]).unwrap();
    let axis: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64).collect();
    let s = SampledField::from_field(&u, vec![axis.clone(), axis.clone(), axis]).unwrap();
    for (x, v) in s.rows().iter().take(50) {
        assert_eq!(s.value(x), *v);
        assert_eq!(*v, u.value(x));
    }
    let dir = tempfile::tempdir().unwrap();
    let (csv, bin) = (dir.path().join("u.csv"), dir.path().join("u.bin"));
    s.write_csv(&csv).unwrap();
    s.write_binary(&bin).unwrap();
    let (a, b) = (
        SampledField::read_csv(&csv).unwrap(),
        SampledField::read_binary(&bin).unwrap(),
    );
    for x in [[0.1, -0.3, 0.55], [0.9, 0.9, -0.99]] {
        assert_eq!(a.value(&x), s.value(&x));
        assert_eq!(b.value(&x), s.value(&x));
    }
}
