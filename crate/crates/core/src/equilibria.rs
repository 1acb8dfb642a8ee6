//! Collinear equilibrium, its linearization and the canonical diagonalizing transform.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{hamiltonian, potential_jet, ModelId};
use crate::roots::brent;
use crate::state::{PhaseState, Vec4};

pub type CMatrix4 = Matrix4<Complex64>;
pub type CVec4 = Vector4<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Equilibrium location and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LibrationPoint {
    pub model: ModelId,
    pub location: PhaseState,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumData {
    pub model: ModelId,
    pub location: PhaseState,
    /// Energy at the point.
    pub c2: f64,
    pub alpha1: f64,
    pub omega2: f64,
    pub linearization: Matrix4<f64>,
    pub phi: CMatrix4,
}

/// Collinear point between the two primaries for the circular problem, and the
/// point on the positive axis for Hill.
pub fn find_libration_l2(model: &ModelId) -> Result<LibrationPoint> {
    let model = model.unperturbed();
    let (lo, hi) = match model {
        ModelId::Circular { mu } => {
            let h = (mu / 3.0).cbrt();
            (mu - 1.0 + 0.2 * h, mu - 1.0 + (2.0 * h).min(0.9))
        }
        ModelId::Hill => (0.3, 1.5),
        ModelId::EllipticFirstOrder { .. } => unreachable!(),
    };
    // at (x, 0, 0, x) the only nonzero component of the field is U_x
    let ux = |x: f64| potential_jet(&model, x, 0.0).map_or(f64::NAN, |j| j.ux);
    let mut x = brent(ux, lo, hi, 1e-16)?;
    for _ in 0..3 {
        let j = potential_jet(&model, x, 0.0)?;
        let f = j.ux;
        let step = f / j.uxx;
        if !step.is_finite() || step.abs() < 1e-17 {
            break;
        }
        let cand = x - step;
        if potential_jet(&model, cand, 0.0)?.ux.abs() < f.abs() {
            x = cand;
        } else {
            break;
        }
    }
    let location = PhaseState::new(x, 0.0, 0.0, x);
    Ok(LibrationPoint {
        model,
        location,
        energy: hamiltonian(&model, &location, 0.0)?,
    })
}

/// Jacobian of the vector field.
pub fn linearize(model: &ModelId, p: &PhaseState) -> Result<Matrix4<f64>> {
    let j = potential_jet(&model.unperturbed(), p.x, p.y)?;
    Ok(Matrix4::new(
        0.0, 1.0, 1.0, 0.0, //
        -1.0, 0.0, 0.0, 1.0, //
        j.uxx - 1.0, j.uxy, 0.0, 1.0, //
        j.uxy, j.uyy - 1.0, -1.0, 0.0,
    ))
}

/// Hessian of the Hamiltonian.
pub fn hamiltonian_hessian(model: &ModelId, p: &PhaseState) -> Result<Matrix4<f64>> {
    let j = potential_jet(&model.unperturbed(), p.x, p.y)?;
    Ok(Matrix4::new(
        1.0 - j.uxx, -j.uxy, 0.0, -1.0, //
        -j.uxy, 1.0 - j.uyy, 1.0, 0.0, //
        0.0, 1.0, 1.0, 0.0, //
        -1.0, 0.0, 0.0, 1.0,
    ))
}

/// Standard symplectic matrix [[0, I], [-I, 0]].
pub fn symplectic_j() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, 0.0,
    )
}

/// Saddle exponent and centre frequency at a collinear point with curvatures a = U_xx, b = U_yy.
fn saddle_centre(a: f64, b: f64) -> Result<(f64, f64)> {
    // lambda^4 + (4 - a - b) lambda^2 + a b = 0
    let p = 4.0 - a - b;
    let q = a * b;
    let disc = p * p - 4.0 * q;
    if q >= 0.0 || disc <= 0.0 {
        return Err(Error::PhiConstruction(format!(
            "spectrum is not saddle x centre (U_xx = {a}, U_yy = {b})"
        )));
    }
    let sq = disc.sqrt();
    let z_plus = if p > 0.0 { -2.0 * q / (p + sq) } else { (-p + sq) / 2.0 };
    let z_minus = q / z_plus;
    Ok((z_plus.sqrt(), (-z_minus).sqrt()))
}

/// Eigenvector (1, Y, lambda - Y, lambda Y + 1) with Y = (lambda^2 - a) / (2 lambda).
fn collinear_eigenvector(lambda: Complex64, a: f64) -> CVec4 {
    let y = (lambda * lambda - a) / (2.0 * lambda);
    CVec4::new(Complex64::new(1.0, 0.0), y, lambda - y, lambda * y + 1.0)
}

fn omega(u: &CVec4, v: &CVec4) -> Complex64 {
    let j = symplectic_j().map(|c| Complex64::new(c, 0.0));
    (u.transpose() * j * v)[(0, 0)]
}

/// Residual freedom of the transform: sign of the hyperbolic columns and phase of the centre columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiChoice {
    pub hyperbolic_sign: f64,
    pub centre_phase: f64,
}

impl Default for PhiChoice {
    fn default() -> Self {
        Self { hyperbolic_sign: 1.0, centre_phase: 0.0 }
    }
}

/// Eigenvalues ordered as (alpha1, alpha2, -alpha1, -alpha2) with alpha2 = -i omega2.
pub fn ordered_eigenvalues(alpha1: f64, omega2: f64) -> [Complex64; 4] {
    let a1 = Complex64::new(alpha1, 0.0);
    let a2 = Complex64::new(0.0, -omega2);
    [a1, a2, -a1, -a2]
}

pub fn build_phi(eq: &LibrationPoint) -> Result<(CMatrix4, f64, f64)> {
    build_phi_with(eq, PhiChoice::default())
}

/// Columns (c1, c2, c3, c4) with c1, c3 real saddle directions, c2 = beta v(alpha2),
/// c4 = -i conj(c2); scaled so that Phi^T J Phi = J.
pub fn build_phi_with(eq: &LibrationPoint, choice: PhiChoice) -> Result<(CMatrix4, f64, f64)> {
    let p = &eq.location;
    let jet = potential_jet(&eq.model, p.x, p.y)?;
    if jet.uxy.abs() > 1e-12 || p.y.abs() > 1e-12 {
        return Err(Error::PhiConstruction("equilibrium is not collinear".into()));
    }
    let (alpha1, omega2) = saddle_centre(jet.uxx, jet.uyy)?;
    let [l1, l2, l3, _] = ordered_eigenvalues(alpha1, omega2);
    let v1 = collinear_eigenvector(l1, jet.uxx);
    let v3 = collinear_eigenvector(l3, jet.uxx);
    let v2 = collinear_eigenvector(l2, jet.uxx);

    let w13 = omega(&v1, &v3).re;
    if w13 == 0.0 {
        return Err(Error::PhiConstruction("degenerate saddle pair".into()));
    }
    let s1 = choice.hyperbolic_sign / w13.abs().sqrt();
    let s3 = 1.0 / (s1 * w13);

    let kappa = -I * omega(&v2, &v2.map(|c| c.conj()));
    if kappa.re <= 0.0 || kappa.im.abs() > 1e-9 * kappa.re {
        return Err(Error::PhiConstruction(format!(
            "centre pair is not positively oriented ({kappa})"
        )));
    }
    let beta = Complex64::from_polar(1.0 / kappa.re.sqrt(), choice.centre_phase);
    let c1 = v1 * Complex64::new(s1, 0.0);
    let c2 = v2 * beta;
    let c3 = v3 * Complex64::new(s3, 0.0);
    let c4 = c2.map(|c| -I * c.conj());
    Ok((CMatrix4::from_columns(&[c1, c2, c3, c4]), alpha1, omega2))
}

/// Full equilibrium analysis: location, energy, spectrum, transform.
pub fn equilibrium_data(model: &ModelId) -> Result<EquilibriumData> {
    let lp = find_libration_l2(model)?;
    let (phi, alpha1, omega2) = build_phi(&lp)?;
    Ok(EquilibriumData {
        model: lp.model,
        location: lp.location,
        c2: lp.energy,
        alpha1,
        omega2,
        linearization: linearize(&lp.model, &lp.location)?,
        phi,
    })
}

impl EquilibriumData {
    pub fn libration_point(&self) -> LibrationPoint {
        LibrationPoint { model: self.model, location: self.location, energy: self.c2 }
    }

    /// Unit real eigenvector of +alpha1 with positive x-component.
    pub fn unstable_direction(&self) -> Vec4 {
        let c = self.phi.column(0).map(|z| z.re);
        let v = c / c.norm();
        if v[0] < 0.0 {
            -v
        } else {
            v
        }
    }

    /// Unit real eigenvector of -alpha1 with positive x-component.
    pub fn stable_direction(&self) -> Vec4 {
        let c = self.phi.column(2).map(|z| z.re);
        let v = c / c.norm();
        if v[0] < 0.0 {
            -v
        } else {
            v
        }
    }
}

/// max |Phi^T J Phi - J|.
pub fn canonicity_residual(phi: &CMatrix4) -> f64 {
    let j = symplectic_j().map(|c| Complex64::new(c, 0.0));
    (phi.transpose() * j * phi - j).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// The reality involution (x1, x2, y1, y2) -> (conj x1, i conj y2, conj y1, i conj x2)
/// written as conj(w) -> R conj(w).
pub fn reality_matrix() -> CMatrix4 {
    let o = Complex64::new(0.0, 0.0);
    let e = Complex64::new(1.0, 0.0);
    CMatrix4::new(
        e, o, o, o, //
        o, o, o, I, //
        o, o, e, o, //
        o, I, o, o,
    )
}

/// max |conj(Phi w) - Phi J_w(w)| over the basis, i.e. max |conj(Phi) - Phi R|.
pub fn reality_residual(phi: &CMatrix4) -> f64 {
    (phi.map(|z| z.conj()) - phi * reality_matrix())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Phi (0, 1, 0, i).
pub fn center_basis_vector(phi: &CMatrix4) -> CVec4 {
    phi * CVec4::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        I,
    )
}
