use serde::{Deserialize, Serialize};

use super::{critical_exponent, gradient_into, nonlinearity, ScalarField, Step, TestFunction, VectorTestFunction};
use crate::error::{ensure_positive, Error, Result};
use crate::grid::{distance, integrate, QuadConfig, QuadratureRule, RegionKind, MAX_DIM};

fn check_support(rule: &QuadratureRule, center: &[f64], radius: f64) -> Result<()> {
    let (inner, outer) = rule.radii();
    let d = distance(center, rule.center());
    let slack = 1e-12 * outer;
    let inside = rule.kind() != RegionKind::Sphere
        && d + radius <= outer + slack
        && (inner == 0.0 || d - radius >= inner - slack);
    if inside {
        Ok(())
    } else {
        Err(Error::SupportOutsideRegion {
            center: center.to_vec(),
            radius,
        })
    }
}

/// `−∫ ΔΦ u − ∫ Φ u|u|^{4/(n−2)}` over the rule; zero for weak solutions.
pub fn weak_residual<F: ScalarField + ?Sized>(u: &F, phi: &TestFunction, rule: &QuadratureRule) -> Result<f64> {
    check_support(rule, phi.center(), phi.radius())?;
    let n = u.dimension();
    integrate(rule, |x| {
        let phi_v = phi.value(x);
        let lap = phi.laplacian(x);
        if phi_v == 0.0 && lap == 0.0 {
            return 0.0;
        }
        let v = u.value(x);
        -lap * v - phi_v * nonlinearity(v, n)
    })
}

/// `∫ ∂ᵢu ∂ⱼu ∂ᵢΦʲ − ½|∇u|² div Φ + (n−2)/(2n) |u|^{2n/(n−2)} div Φ`;
/// zero for stationary solutions.
pub fn stationarity_residual<F: ScalarField + ?Sized>(
    u: &F,
    phi: &VectorTestFunction,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_support(rule, phi.center(), phi.radius())?;
    let n = u.dimension();
    let p = critical_exponent(n);
    let c = (n as f64 - 2.0) / (2.0 * n as f64);
    integrate(rule, |x| {
        if distance(x, phi.center()) >= phi.radius() {
            return 0.0;
        }
        let mut jac = [0.0; MAX_DIM * MAX_DIM];
        let div = phi.jacobian_into(x, &mut jac[..n * n]);
        let mut g = [0.0; MAX_DIM];
        gradient_into(u, x, Step::default(), &mut g[..n]);
        let mut quad = 0.0;
        let mut g2 = 0.0;
        for i in 0..n {
            g2 += g[i] * g[i];
            for j in 0..n {
                quad += g[i] * g[j] * jac[j * n + i];
            }
        }
        quad - 0.5 * g2 * div + c * u.value(x).abs().powf(p) * div
    })
}

/// One term of the centered Pohozaev identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PohozaevTerm {
    pub label: String,
    /// Value in the derived identity.
    pub derived: f64,
    /// Value in the variant display whose boundary potential term is not
    /// multiplied by `r`; equal to `derived` for every other term.
    pub variant: f64,
}

/// Term-by-term evaluation of
/// `(n−2)/2 ∫_B |u|^{2*} − (n−2)/2 ∫_B |∇u|² − r(n−2)/(2n) ∫_∂B |u|^{2*}
///  + r/2 ∫_∂B |∇u|² = r ∫_∂B u_r²` on `B = B(x, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Four left-hand terms followed by the right-hand side.
    pub terms: Vec<PohozaevTerm>,
    /// Left minus right in the derived identity.
    pub residual: f64,
    /// `|residual|` over the largest term magnitude (0 when all terms vanish).
    pub relative: f64,
    /// Left minus right in the variant display.
    pub variant_residual: f64,
}

pub fn pohozaev_residual<F: ScalarField + ?Sized>(
    u: &F,
    x: &[f64],
    r: f64,
    quad: &QuadConfig,
) -> Result<PohozaevReport> {
    ensure_positive("radius", r)?;
    let n = u.dimension();
    let nf = n as f64;
    let p = critical_exponent(n);
    let hints = u.concentrations();
    let step = Step::default();
    let grad2 = |y: &[f64]| {
        let mut g = [0.0; MAX_DIM];
        gradient_into(u, y, step, &mut g[..n]);
        g[..n].iter().map(|v| v * v).sum::<f64>()
    };
    let vol = quad.integrate_ball(n, x, r, &hints, |y| u.value(y).abs().powf(p))?;
    let dir = quad.integrate_ball(n, x, r, &hints, grad2)?;
    let s_pot = quad.integrate_sphere(n, x, r, |y| u.value(y).abs().powf(p))?;
    let s_grad = quad.integrate_sphere(n, x, r, grad2)?;
    let s_rad = quad.integrate_sphere(n, x, r, |y| {
        let mut g = [0.0; MAX_DIM];
        gradient_into(u, y, step, &mut g[..n]);
        let ur: f64 = (0..n).map(|i| g[i] * (y[i] - x[i])).sum::<f64>() / r;
        ur * ur
    })?;
    let half = (nf - 2.0) / 2.0;
    let t3 = -(nf - 2.0) / (2.0 * nf) * s_pot;
    let derived = [half * vol, -half * dir, r * t3, 0.5 * r * s_grad, r * s_rad];
    let labels = [
        "(n-2)/2 int_B |u|^(2n/(n-2))",
        "-(n-2)/2 int_B |grad u|^2",
        "-r (n-2)/(2n) int_dB |u|^(2n/(n-2))",
        "r/2 int_dB |grad u|^2",
        "r int_dB (du/dr)^2",
    ];
    let terms: Vec<PohozaevTerm> = labels
        .iter()
        .zip(derived)
        .enumerate()
        .map(|(i, (label, v))| PohozaevTerm {
            label: (*label).to_string(),
            derived: v,
            variant: if i == 2 { t3 } else { v },
        })
        .collect();
    let residual = derived[..4].iter().sum::<f64>() - derived[4];
    let variant_residual = terms[..4].iter().map(|t| t.variant).sum::<f64>() - terms[4].variant;
    let scale = derived.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let relative = if scale == 0.0 { 0.0 } else { residual.abs() / scale };
    Ok(PohozaevReport {
        center: x.to_vec(),
        radius: r,
        terms,
        residual,
        relative,
        variant_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{aubin_talenti, Constant};
    use crate::grid::{build_ball_rule, build_sphere_rule, sphere_area, unit_ball_volume, QuadOrder};
    use approx::assert_relative_eq;

    #[test]
    fn pohozaev_for_constants_has_closed_form_variant_imbalance() {
        let n = 3;
        let one = Constant::new(n, 1.0).unwrap();
        let r = 1.7;
        let rep = pohozaev_residual(&one, &[0.0; 3], r, &QuadConfig::default()).unwrap();
        // derived: (n-2)/2 ω rⁿ − r (n−2)/(2n) n ω r^{n−1} = 0
        assert!(rep.residual.abs() < 1e-12);
        let w = unit_ball_volume(n);
        let expected = 0.5 * w * r.powi(2) * (r - 1.0);
        assert_relative_eq!(rep.variant_residual, expected, max_relative = 1e-10);
        let zero = Constant::zero(n).unwrap();
        let rep0 = pohozaev_residual(&zero, &[0.0; 3], r, &QuadConfig::default()).unwrap();
        assert_eq!(rep0.residual, 0.0);
        assert_eq!(rep0.relative, 0.0);
    }

    #[test]
    fn pohozaev_balances_for_a_bubble() {
        for n in [3, 4] {
            let u = aubin_talenti(n, 1.0, &vec![0.0; n]).unwrap();
            for r in [0.5, 1.0, 2.0] {
                let rep = pohozaev_residual(&u, &vec![0.0; n], r, &QuadConfig::default()).unwrap();
                assert!(rep.relative < 1e-6, "n={n} r={r} {rep:?}");
            }
        }
    }

    #[test]
    fn weak_residual_of_constant_one_is_minus_integral_of_phi() {
        let one = Constant::new(3, 1.0).unwrap();
        let phi = TestFunction::bump(&[0.2, 0.0, 0.0], 1.0).unwrap();
        let rule = build_ball_rule(3, &[0.2, 0.0, 0.0], 1.0, QuadOrder::new(160, 16)).unwrap();
        let direct = integrate(&rule, |x| phi.value(x)).unwrap();
        assert_relative_eq!(weak_residual(&one, &phi, &rule).unwrap(), -direct, max_relative = 1e-10);
        let outside = build_ball_rule(3, &[0.0; 3], 1.0, 8).unwrap();
        assert!(matches!(
            weak_residual(&one, &phi, &outside),
            Err(Error::SupportOutsideRegion { .. })
        ));
        let sphere = build_sphere_rule(3, &[0.0; 3], 5.0, 8).unwrap();
        assert!(weak_residual(&one, &phi, &sphere).is_err());
    }

    #[test]
    fn surface_measure_helper_matches_rule() {
        let rule = build_sphere_rule(5, &[0.0; 5], 1.3, 6).unwrap();
        assert_relative_eq!(
            integrate(&rule, |_| 1.0).unwrap(),
            sphere_area(5, 1.3),
            max_relative = 1e-12
        );
    }
}
