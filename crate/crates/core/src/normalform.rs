//! Cubic expansion of the field in diagonal coordinates, twist coefficient and energy coefficient.

use num_complex::Complex64;
use serde::Serialize;

use crate::equilibria::{
    canonicity_residual, center_basis_vector, hamiltonian_hessian, ordered_eigenvalues,
    reality_residual, CMatrix4, EquilibriumData,
};
use crate::error::{Error, Result};
use crate::models::{circular_primaries, ModelId, HILL_MASS};
use crate::poly::{inverse_distance_taylor, Exponent, Poly, NVARS};
use crate::state::PhaseState;

const CUBIC: usize = 3;

/// Field in coordinates w with z = L + Phi w, through degree three.
#[derive(Debug, Clone)]
pub struct CubicVectorField {
    /// Eigenvalues (alpha1, alpha2, -alpha1, -alpha2).
    pub alpha: [Complex64; 4],
    /// Components (x1', x2', y1', y2').
    pub components: [Poly<Complex64>; NVARS],
    /// Largest deviation of the linear part from the eigenvalue diagonal.
    pub linear_residual: f64,
    /// Largest constant term.
    pub constant_residual: f64,
    pub phi: CMatrix4,
}

impl CubicVectorField {
    /// Coefficient f^nu of the x_nu' component, nu in {1, 2}.
    pub fn f(&self, nu: usize, e: Exponent) -> Complex64 {
        self.components[nu - 1].coeff(e)
    }

    /// Coefficient g^nu of the y_nu' component, nu in {1, 2}.
    pub fn g(&self, nu: usize, e: Exponent) -> Complex64 {
        self.components[nu + 1].coeff(e)
    }

    pub fn alpha2(&self) -> Complex64 {
        self.alpha[1]
    }

    pub fn eval(&self, w: &[Complex64; NVARS]) -> [Complex64; NVARS] {
        std::array::from_fn(|i| self.components[i].eval(w))
    }
}

/// Taylor polynomials of the field about `p`, in the shifts of (x, y, px, py).
pub fn vector_field_taylor(model: &ModelId, p: &PhaseState, deg: usize) -> [Poly<f64>; NVARS] {
    let d = deg + 1;
    let var = |i| Poly::<f64>::variable(d, i);
    let cst = |c| Poly::<f64>::constant(d, c);
    let x = cst(p.x).add(&var(0));
    let y = cst(p.y).add(&var(1));
    let px = cst(p.px).add(&var(2));
    let py = cst(p.py).add(&var(3));
    let u = match model.unperturbed() {
        ModelId::Circular { mu } => {
            let mut u = x.mul(&x).add(&y.mul(&y)).scale(0.5);
            for b in circular_primaries(mu) {
                u = u.add(&inverse_distance_taylor(d, b.m, p.x, p.y, b.cx, b.cy));
            }
            u
        }
        ModelId::Hill => x.mul(&x).scale(1.5).add(&inverse_distance_taylor(
            d, HILL_MASS.m, p.x, p.y, HILL_MASS.cx, HILL_MASS.cy,
        )),
        ModelId::EllipticFirstOrder { .. } => unreachable!(),
    };
    let vx = px.add(&y);
    let vy = py.sub(&x);
    [
        vx.truncate(deg),
        vy.truncate(deg),
        vy.add(&u.derivative(0)).truncate(deg),
        vx.scale(-1.0).add(&u.derivative(1)).truncate(deg),
    ]
}

pub fn expand_cubic(eq: &EquilibriumData) -> Result<CubicVectorField> {
    let taylor = vector_field_taylor(&eq.model, &eq.location, CUBIC);
    let phi = eq.phi;
    let phi_inv = phi
        .try_inverse()
        .ok_or_else(|| Error::PhiConstruction("transform is singular".into()))?;
    let m: [[Complex64; NVARS]; NVARS] = std::array::from_fn(|i| std::array::from_fn(|j| phi[(i, j)]));
    let in_w: Vec<Poly<Complex64>> = taylor.iter().map(|p| p.to_complex().compose_linear(&m)).collect();
    let components: [Poly<Complex64>; NVARS] = std::array::from_fn(|i| {
        (0..NVARS).fold(Poly::zero(CUBIC), |acc, j| acc.add(&in_w[j].scale(phi_inv[(i, j)])))
    });
    let alpha = ordered_eigenvalues(eq.alpha1, eq.omega2);
    let mut linear_residual: f64 = 0.0;
    let mut constant_residual: f64 = 0.0;
    for (i, comp) in components.iter().enumerate() {
        constant_residual = constant_residual.max(comp.coeff([0; 4]).norm());
        for j in 0..NVARS {
            let mut e = [0u8; NVARS];
            e[j] = 1;
            let expect = if i == j { alpha[i] } else { Complex64::new(0.0, 0.0) };
            linear_residual = linear_residual.max((comp.coeff(e) - expect).norm());
        }
    }
    Ok(CubicVectorField { alpha, components, linear_residual, constant_residual, phi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwistResult {
    pub a22: f64,
    /// mu^(2/3) a22 when a mass ratio is supplied.
    pub mu_scaled: Option<f64>,
    pub imaginary_residual: f64,
    pub canonicity_residual: f64,
    pub reality_residual: f64,
}

const IMAG_LIMIT: f64 = 1e-6;

fn realify(
    raw: Complex64,
    cvf: &CubicVectorField,
    mu: Option<f64>,
    context: &'static str,
) -> Result<TwistResult> {
    let rel = raw.im.abs() / raw.norm().max(f64::MIN_POSITIVE);
    if rel > IMAG_LIMIT {
        return Err(Error::ImaginaryResidual { context, residual: rel, limit: IMAG_LIMIT });
    }
    Ok(TwistResult {
        a22: raw.re,
        mu_scaled: mu.map(|m| m.powf(2.0 / 3.0) * raw.re),
        imaginary_residual: rel,
        canonicity_residual: canonicity_residual(&cvf.phi),
        reality_residual: reality_residual(&cvf.phi),
    })
}

/// Seven-term closed formula for the twist coefficient in terms of the cubic field.
pub fn twist_a22_raw(cvf: &CubicVectorField) -> Complex64 {
    let f = |nu, e| cvf.f(nu, e);
    let g = |nu, e| cvf.g(nu, e);
    let sum = -f(2, [1, 1, 0, 0]) * f(1, [0, 1, 0, 1])
        - f(2, [0, 1, 1, 0]) * g(1, [0, 1, 0, 1])
        + f(2, [0, 0, 1, 1]) * g(1, [0, 2, 0, 0])
        - f(2, [0, 2, 0, 0]) * f(2, [0, 1, 0, 1])
        + 2.0 * g(2, [0, 2, 0, 0]) * f(2, [0, 0, 0, 2])
        + f(2, [1, 0, 0, 1]) * f(1, [0, 2, 0, 0])
        - g(2, [0, 1, 0, 1]) * f(2, [0, 1, 0, 1]);
    sum / cvf.alpha2() + f(2, [0, 2, 0, 1])
}

pub fn twist_a22(cvf: &CubicVectorField, mu: Option<f64>) -> Result<TwistResult> {
    realify(twist_a22_raw(cvf), cvf, mu, "closed-formula twist coefficient")
}

/// Coefficient of x2^2 y2 in the x2' component after removing all quadratic terms
/// with the near-identity change w = xi + phi(xi).
pub fn twist_a22_homological_raw(cvf: &CubicVectorField) -> Complex64 {
    let alpha = cvf.alpha;
    let subs: [Poly<Complex64>; NVARS] = std::array::from_fn(|c| {
        let mut p = Poly::variable(CUBIC, c);
        for (e, coef) in cvf.components[c].terms() {
            if e.iter().map(|&v| v as usize).sum::<usize>() != 2 {
                continue;
            }
            let lam: Complex64 = (0..NVARS).map(|q| alpha[q] * e[q] as f64).sum();
            p.set(e, coef / (lam - alpha[c]));
        }
        p
    });
    cvf.components[1].compose(&subs).coeff([0, 2, 0, 1])
}

pub fn twist_a22_homological(cvf: &CubicVectorField, mu: Option<f64>) -> Result<TwistResult> {
    realify(twist_a22_homological_raw(cvf), cvf, mu, "normal-form twist coefficient")
}

/// Convenience: equilibrium analysis, expansion and the closed-formula coefficient.
pub fn twist_for_model(model: &ModelId) -> Result<TwistResult> {
    let eq = crate::equilibria::equilibrium_data(model)?;
    let cvf = expand_cubic(&eq)?;
    twist_a22(&cvf, model.mu())
}

/// Half the Hessian of H at the equilibrium applied twice to Phi (0, 1, 0, i).
pub fn energy_coefficient_h2(eq: &EquilibriumData) -> Result<f64> {
    let hess = hamiltonian_hessian(&eq.model, &eq.location)?.map(|c| Complex64::new(c, 0.0));
    let v = center_basis_vector(&eq.phi);
    let h = (v.transpose() * hess * v)[(0, 0)] * 0.5;
    if h.im.abs() > 1e-9 {
        return Err(Error::ImaginaryResidual {
            context: "energy coefficient",
            residual: h.im.abs(),
            limit: 1e-9,
        });
    }
    Ok(h.re)
}

/// Rate of change of the Lapunov frequency with the energy offset, -a22 / h2.
///
/// With alpha2 = -i omega2 the orbit through Phi (0, r, 0, i r) has x2 y2 = i r^2,
/// so its frequency is omega2 - a22 r^2 while its energy offset is h2 r^2.
pub fn frequency_slope(a22: f64, h2: f64) -> f64 {
    -a22 / h2
}

pub fn predicted_frequency(a22: f64, omega2: f64, h2: f64, dc: f64) -> f64 {
    omega2 + frequency_slope(a22, h2) * dc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{build_phi_with, equilibrium_data, find_libration_l2, PhiChoice};
    use crate::models::vector_field;
    use crate::state::Vec4;

    fn hill_closed_form() -> f64 {
        9f64.cbrt() / 224.0 * (102.0 * 7f64.sqrt() - 57.0)
    }

    #[test]
    fn expansion_has_diagonal_linear_part() {
        let eq = equilibrium_data(&ModelId::circular(1e-3).unwrap()).unwrap();
        let cvf = expand_cubic(&eq).unwrap();
        assert!(cvf.linear_residual < 1e-10);
        assert!(cvf.constant_residual < 1e-12);
    }

    #[test]
    fn truncated_series_matches_conjugated_field() {
        for model in [ModelId::Hill, ModelId::circular(4e-3).unwrap()] {
            let eq = equilibrium_data(&model).unwrap();
            let cvf = expand_cubic(&eq).unwrap();
            let inv = eq.phi.try_inverse().unwrap();
            // displacements measured in the natural length of the model
            let size = 1e-3 * model.mu().map_or(1.0, |mu| mu.cbrt());
            for k in 0..20 {
                let a = k as f64;
                let d = Vec4::new((1.3 * a).sin(), (0.7 * a + 1.0).cos(), (2.1 * a).sin(), (a + 0.3).cos())
                    .normalize()
                    * size;
                let w = inv * d.map(|c| Complex64::new(c, 0.0));
                let series = cvf.eval(&[w[0], w[1], w[2], w[3]]);
                let z = PhaseState::from_vec(&(eq.location.to_vec() + d));
                let exact = inv * vector_field(&model, &z, 0.0).unwrap().map(|c| Complex64::new(c, 0.0));
                for i in 0..4 {
                    assert!((series[i] - exact[i]).norm() < 1e-10, "{model:?} {k} {i}");
                }
            }
        }
    }

    #[test]
    fn truncation_error_is_fourth_order() {
        let eq = equilibrium_data(&ModelId::Hill).unwrap();
        let cvf = expand_cubic(&eq).unwrap();
        let inv = eq.phi.try_inverse().unwrap();
        let err = |size: f64| {
            let d = Vec4::new(0.6, -0.3, 0.5, 0.55).normalize() * size;
            let w = inv * d.map(|c| Complex64::new(c, 0.0));
            let series = cvf.eval(&[w[0], w[1], w[2], w[3]]);
            let z = PhaseState::from_vec(&(eq.location.to_vec() + d));
            let exact = inv * vector_field(&ModelId::Hill, &z, 0.0).unwrap().map(|c| Complex64::new(c, 0.0));
            (0..4).map(|i| (series[i] - exact[i]).norm()).fold(0.0, f64::max)
        };
        let ratio = err(2e-2) / err(1e-2);
        assert!((ratio - 16.0).abs() < 1.5, "{ratio}");
    }

    #[test]
    fn hill_twist_closed_form() {
        let eq = equilibrium_data(&ModelId::Hill).unwrap();
        let t = twist_a22(&expand_cubic(&eq).unwrap(), None).unwrap();
        assert!(((t.a22 - hill_closed_form()) / hill_closed_form()).abs() < 1e-8);
        assert!(t.mu_scaled.is_none());
    }

    #[test]
    fn twist_is_invariant_under_admissible_choices() {
        let lp = find_libration_l2(&ModelId::circular(6.75e-4).unwrap()).unwrap();
        let mut eq = equilibrium_data(&lp.model).unwrap();
        let base = twist_a22(&expand_cubic(&eq).unwrap(), None).unwrap().a22;
        let base_nf = twist_a22_homological(&expand_cubic(&eq).unwrap(), None).unwrap().a22;
        for choice in [
            PhiChoice { hyperbolic_sign: -1.0, centre_phase: 0.0 },
            PhiChoice { hyperbolic_sign: 1.0, centre_phase: 1.1 },
        ] {
            eq.phi = build_phi_with(&lp, choice).unwrap().0;
            let cvf = expand_cubic(&eq).unwrap();
            assert!(((twist_a22(&cvf, None).unwrap().a22 - base) / base).abs() < 1e-8);
            assert!(((twist_a22_homological(&cvf, None).unwrap().a22 - base_nf) / base_nf).abs() < 1e-8);
        }
    }

    #[test]
    fn energy_coefficient_is_real() {
        for model in [ModelId::Hill, ModelId::circular(1e-3).unwrap()] {
            let eq = equilibrium_data(&model).unwrap();
            let h2 = energy_coefficient_h2(&eq).unwrap();
            assert!(h2 > 0.0);
        }
    }

    #[test]
    fn energy_coefficient_scales_like_hill() {
        let hill = energy_coefficient_h2(&equilibrium_data(&ModelId::Hill).unwrap()).unwrap();
        let mut prev = f64::INFINITY;
        for mu in [1e-4, 1e-5, 1e-7] {
            let eq = equilibrium_data(&ModelId::circular(mu).unwrap()).unwrap();
            // distances scale by mu^(1/3), energies by mu^(2/3): h2 itself is scale free
            let gap = (energy_coefficient_h2(&eq).unwrap() - hill).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn predicted_frequency_at_zero_offset() {
        assert_eq!(predicted_frequency(1.9, 2.07, 2.07, 0.0), 2.07);
        assert!(frequency_slope(1.9, 2.07) != 0.0);
    }
}
