//! One-dimensional Gauss rules built with the Golub–Welsch eigenvalue method.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights on `[-1, 1]` for the weight `(1 - t²)^((m - 1) / 2)`.
///
/// With `t = cos φ` this integrates `∫₀^π f(cos φ) sin^m φ dφ`, which is
/// exactly the measure carried by a polar angle of a hyperspherical
/// coordinate system. `m = 1` is plain Gauss–Legendre.
pub fn gauss_gegenbauer(count: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(count >= 1, "a Gauss rule needs at least one node");
    assert!(m >= 1, "polar weight exponent must be at least 1");
    let a = (m as f64 - 1.0) / 2.0;
    let mu0 = wallis(m);
    if count == 1 {
        return (vec![0.0], vec![mu0]);
    }
    let mut jacobi = DMatrix::<f64>::zeros(count, count);
    for k in 1..count {
        let kf = k as f64;
        let b2 = kf * (kf + 2.0 * a) / ((2.0 * kf + 2.0 * a + 1.0) * (2.0 * kf + 2.0 * a - 1.0));
        let b = b2.sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..count)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
    // The rule is symmetric; enforce it so odd moments cancel to rounding.
    for i in 0..count / 2 {
        let j = count - 1 - i;
        let node = 0.5 * (pairs[j].0 - pairs[i].0);
        let weight = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-node, weight);
        pairs[j] = (node, weight);
    }
    if count % 2 == 1 {
        pairs[count / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// Gauss–Legendre nodes and weights mapped to `[lo, hi]`.
pub fn gauss_legendre(count: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let (t, w) = gauss_gegenbauer(count, 1);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    t.iter().zip(&w).map(|(&t, &w)| (mid + half * t, half * w)).collect()
}

/// `∫₀^π sin^m φ dφ`.
pub fn wallis(m: usize) -> f64 {
    let (mut value, start) = if m.is_multiple_of(2) {
        (std::f64::consts::PI, 2)
    } else {
        (2.0, 3)
    };
    let mut k = start;
    while k <= m {
        value *= (k as f64 - 1.0) / k as f64;
        k += 2;
    }
    value
}
