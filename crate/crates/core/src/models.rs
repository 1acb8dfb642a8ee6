//! Circular, Hill and first-order elliptic models in the rotating frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{PhaseState, Vec4};

/// Evaluations closer than this to a primary are rejected.
pub const MIN_DISTANCE: f64 = 1e-6;

/// Largest eccentricity accepted by the first-order elliptic model.
pub const DEFAULT_E_MAX: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelId {
    Circular { mu: f64 },
    Hill,
    EllipticFirstOrder { mu: f64, e: f64 },
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 && mu < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mass ratio {mu} outside (0, 1/2)")))
    }
}

impl ModelId {
    pub fn circular(mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Ok(Self::Circular { mu })
    }

    pub fn elliptic(mu: f64, e: f64) -> Result<Self> {
        check_mu(mu)?;
        if !(0.0..=DEFAULT_E_MAX).contains(&e) {
            return Err(Error::InvalidParameter(format!(
                "eccentricity {e} outside [0, {DEFAULT_E_MAX}]"
            )));
        }
        Ok(Self::EllipticFirstOrder { mu, e })
    }

    pub fn mu(&self) -> Option<f64> {
        match *self {
            Self::Circular { mu } | Self::EllipticFirstOrder { mu, .. } => Some(mu),
            Self::Hill => None,
        }
    }

    pub fn is_autonomous(&self) -> bool {
        !matches!(self, Self::EllipticFirstOrder { e, .. } if *e != 0.0)
    }

    /// The autonomous part of the model.
    pub fn unperturbed(&self) -> Self {
        match *self {
            Self::EllipticFirstOrder { mu, .. } => Self::Circular { mu },
            m => m,
        }
    }
}

/// Potential value with first and second partial derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PotentialJet {
    pub u: f64,
    pub ux: f64,
    pub uy: f64,
    pub uxx: f64,
    pub uxy: f64,
    pub uyy: f64,
}

impl std::ops::Add for PotentialJet {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            u: self.u + o.u,
            ux: self.ux + o.ux,
            uy: self.uy + o.uy,
            uxx: self.uxx + o.uxx,
            uxy: self.uxy + o.uxy,
            uyy: self.uyy + o.uyy,
        }
    }
}

/// Attracting point mass m at (cx, cy): the potential m/r and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub m: f64,
    pub cx: f64,
    pub cy: f64,
}

impl PointMass {
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        (x - self.cx).hypot(y - self.cy)
    }

    fn guarded_distance(&self, x: f64, y: f64) -> Result<f64> {
        let r = self.distance(x, y);
        if r < MIN_DISTANCE || !r.is_finite() {
            return Err(Error::Singularity {
                distance: r,
                minimum: MIN_DISTANCE,
            });
        }
        Ok(r)
    }

    pub fn jet(&self, x: f64, y: f64) -> Result<PotentialJet> {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let r = self.guarded_distance(x, y)?;
        let r2 = r * r;
        let r3 = r2 * r;
        let r5 = r3 * r2;
        let m = self.m;
        Ok(PotentialJet {
            u: m / r,
            ux: -m * dx / r3,
            uy: -m * dy / r3,
            uxx: m * (3.0 * dx * dx / r5 - 1.0 / r3),
            uxy: m * 3.0 * dx * dy / r5,
            uyy: m * (3.0 * dy * dy / r5 - 1.0 / r3),
        })
    }
}

/// The two primaries of the circular problem: mass 1-mu at (mu, 0), mass mu at (mu-1, 0).
pub fn circular_primaries(mu: f64) -> [PointMass; 2] {
    [
        PointMass { m: 1.0 - mu, cx: mu, cy: 0.0 },
        PointMass { m: mu, cx: mu - 1.0, cy: 0.0 },
    ]
}

/// The attracting mass of the Hill problem, at the origin.
pub const HILL_MASS: PointMass = PointMass { m: 1.0, cx: 0.0, cy: 0.0 };

/// Effective potential (Omega for the circular problem, 1/r + 3x^2/2 for Hill).
pub fn potential_jet(model: &ModelId, x: f64, y: f64) -> Result<PotentialJet> {
    match model.unperturbed() {
        ModelId::Circular { mu } => {
            let [big, small] = circular_primaries(mu);
            let centrifugal = PotentialJet {
                u: 0.5 * (x * x + y * y),
                ux: x,
                uy: y,
                uxx: 1.0,
                uxy: 0.0,
                uyy: 1.0,
            };
            Ok(centrifugal + big.jet(x, y)? + small.jet(x, y)?)
        }
        ModelId::Hill => {
            let tidal = PotentialJet {
                u: 1.5 * x * x,
                ux: 3.0 * x,
                uxx: 3.0,
                ..Default::default()
            };
            Ok(tidal + HILL_MASS.jet(x, y)?)
        }
        ModelId::EllipticFirstOrder { .. } => unreachable!(),
    }
}

fn kinetic(s: &PhaseState) -> f64 {
    let (vx, vy) = s.velocity();
    0.5 * (vx * vx + vy * vy)
}

pub fn hamiltonian(model: &ModelId, s: &PhaseState, t: f64) -> Result<f64> {
    let jet = potential_jet(model, s.x, s.y)?;
    let h = kinetic(s) - jet.u;
    match *model {
        ModelId::EllipticFirstOrder { mu, e } if e != 0.0 => Ok(h + e * perturbation_g(mu, s, t)?),
        _ => Ok(h),
    }
}

/// J grad H, or f + e g for the first-order elliptic model.
pub fn vector_field(model: &ModelId, s: &PhaseState, t: f64) -> Result<Vec4> {
    let jet = potential_jet(model, s.x, s.y)?;
    let (vx, vy) = s.velocity();
    let mut f = Vec4::new(vx, vy, vy + jet.ux, -vx + jet.uy);
    if let ModelId::EllipticFirstOrder { mu, e } = *model {
        if e != 0.0 {
            let g = g_partials(mu, s, t)?;
            f[2] -= e * g.gx;
            f[3] -= e * g.gy;
        }
    }
    Ok(f)
}

pub fn jacobi_constant(mu: f64, s: &PhaseState) -> Result<f64> {
    let model = ModelId::circular(mu)?;
    let jet = potential_jet(&model, s.x, s.y)?;
    let (vx, vy) = s.velocity();
    Ok(2.0 * jet.u - (vx * vx + vy * vy))
}

/// Additive constant separating the scaled circular energy from the Hill energy:
/// mu^(-2/3) H(s) + shift ~ H_hill(hill_transform(s)).
pub fn hill_energy_shift(mu: f64) -> f64 {
    mu.powf(-2.0 / 3.0) * ((1.0 - mu) + 0.5 * (1.0 - mu) * (1.0 - mu))
}

/// Helper profile f(x, y, alpha, t) of the perturbation and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Profile {
    f: f64,
    fx: f64,
    fy: f64,
    ft: f64,
    ftt: f64,
}

fn profile(x: f64, y: f64, a: f64, t: f64) -> Profile {
    let (s, c) = t.sin_cos();
    let (s3, c3) = (3.0 * t).sin_cos();
    let ys = 3.0 * s - s * s * s;
    let xc = c + c * c * c;
    Profile {
        f: -y * a * ys + x * a * xc - a * a * c,
        fx: a * xc,
        fy: -a * ys,
        ft: -y * a * (3.0 * c - 3.0 * s * s * c) + x * a * (-s - 3.0 * c * c * s) + a * a * s,
        ftt: y * a * 2.25 * (s + s3) - x * a * 0.25 * (7.0 * c + 9.0 * c3) + a * a * c,
    }
}

/// First-order eccentricity correction to the Hamiltonian.
pub fn perturbation_g(mu: f64, s: &PhaseState, t: f64) -> Result<f64> {
    Ok(g_terms(mu, s, t)?.g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GPartials {
    pub g: f64,
    pub gx: f64,
    pub gy: f64,
    pub gt: f64,
    pub gtt: f64,
}

pub fn g_partials(mu: f64, s: &PhaseState, t: f64) -> Result<GPartials> {
    g_terms(mu, s, t)
}

fn g_terms(mu: f64, s: &PhaseState, t: f64) -> Result<GPartials> {
    let [big, small] = circular_primaries(mu);
    let mut out = GPartials { g: 0.0, gx: 0.0, gy: 0.0, gt: 0.0, gtt: 0.0 };
    for (body, alpha) in [(big, mu), (small, mu - 1.0)] {
        let r = body.guarded_distance(s.x, s.y)?;
        let dx = s.x - body.cx;
        let dy = s.y - body.cy;
        let w = body.m / (r * r * r);
        let wx = -3.0 * w * dx / (r * r);
        let wy = -3.0 * w * dy / (r * r);
        let p = profile(s.x, s.y, alpha, t);
        out.g += w * p.f;
        out.gx += wx * p.f + w * p.fx;
        out.gy += wy * p.f + w * p.fy;
        out.gt += w * p.ft;
        out.gtt += w * p.ftt;
    }
    Ok(out)
}

/// First-order eccentricity term obtained directly from the Kepler motion of the
/// primaries, mass-weighted alpha ((x - alpha) cos t - 2 y sin t) / r^3 per body.
pub fn kepler_first_order_term(mu: f64, s: &PhaseState, t: f64) -> Result<f64> {
    let (st, ct) = t.sin_cos();
    let mut g = 0.0;
    for (body, alpha) in circular_primaries(mu).into_iter().zip([mu, mu - 1.0]) {
        let r = body.guarded_distance(s.x, s.y)?;
        g += body.m / (r * r * r) * alpha * ((s.x - alpha) * ct - 2.0 * s.y * st);
    }
    Ok(g)
}

/// Perturbation profile of the Hill limit: cos^3 t / r^3 and its t-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillPerturbation {
    pub g: f64,
    pub gt: f64,
    pub gtt: f64,
}

pub fn hill_perturbation(s: &PhaseState, t: f64) -> Result<HillPerturbation> {
    let r = HILL_MASS.guarded_distance(s.x, s.y)?;
    let inv3 = 1.0 / (r * r * r);
    let c = cos_cubed(t);
    Ok(HillPerturbation {
        g: c.0 * inv3,
        gt: c.1 * inv3,
        gtt: c.2 * inv3,
    })
}

/// cos^3 t with its first and second derivatives.
pub fn cos_cubed(t: f64) -> (f64, f64, f64) {
    let (s, c) = t.sin_cos();
    let c3 = (3.0 * t).cos();
    (c * c * c, -3.0 * c * c * s, -0.25 * (3.0 * c + 9.0 * c3))
}

/// Positions of both primaries in the rotating frame for Keplerian relative motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimariesPose {
    /// Mass 1 - mu.
    pub big: [f64; 2],
    /// Mass mu.
    pub small: [f64; 2],
    pub kepler_residual: f64,
}

const KEPLER_MAX_ITER: usize = 50;

/// Solves E - e sin E = m by Newton iteration from E = m.
pub fn solve_kepler(e: f64, m: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::InvalidParameter(format!("eccentricity {e} outside [0, 1)")));
    }
    let mut big_e = m;
    for _ in 0..KEPLER_MAX_ITER {
        let res = big_e - e * big_e.sin() - m;
        if res.abs() <= 1e-15 * (1.0 + m.abs()) {
            return Ok((big_e, res.abs()));
        }
        big_e -= res / (1.0 - e * big_e.cos());
    }
    let res = (big_e - e * big_e.sin() - m).abs();
    if res <= 1e-14 {
        Ok((big_e, res))
    } else {
        Err(Error::NoConvergence(format!("Kepler equation e = {e}, t = {m}")))
    }
}

/// Inertial relative orbit of the primaries: unit semi-major axis, pericentre on +x.
pub fn relative_orbit_inertial(e: f64, t: f64) -> Result<([f64; 2], f64)> {
    let (big_e, res) = solve_kepler(e, t)?;
    let (se, ce) = big_e.sin_cos();
    Ok(([ce - e, (1.0 - e * e).sqrt() * se], res))
}

pub fn kepler_primaries(mu: f64, e: f64, t: f64) -> Result<PrimariesPose> {
    check_mu(mu)?;
    let ([x, y], res) = relative_orbit_inertial(e, t)?;
    let (st, ct) = t.sin_cos();
    let xr = x * ct + y * st;
    let yr = -x * st + y * ct;
    Ok(PrimariesPose {
        big: [mu * xr, mu * yr],
        small: [(mu - 1.0) * xr, (mu - 1.0) * yr],
        kepler_residual: res,
    })
}

/// Hamiltonian with exact elliptic primaries in the uniformly rotating frame.
pub fn elliptic_exact_hamiltonian(mu: f64, e: f64, s: &PhaseState, t: f64) -> Result<f64> {
    let pose = kepler_primaries(mu, e, t)?;
    let big = PointMass { m: 1.0 - mu, cx: pose.big[0], cy: pose.big[1] };
    let small = PointMass { m: mu, cx: pose.small[0], cy: pose.small[1] };
    let r1 = big.guarded_distance(s.x, s.y)?;
    let r2 = small.guarded_distance(s.x, s.y)?;
    Ok(kinetic(s) - 0.5 * (s.x * s.x + s.y * s.y) - (1.0 - mu) / r1 - mu / r2)
}

/// Reversing symmetry (x, y, px, py) -> (x, -y, -px, py).
pub fn symmetry_s(s: &PhaseState) -> PhaseState {
    PhaseState::new(s.x, -s.y, -s.px, s.py)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HillDirection {
    To,
    From,
}

/// Rescaling centred on the small primary.
pub fn hill_transform(mu: f64, s: &PhaseState, direction: HillDirection) -> PhaseState {
    let k = mu.cbrt();
    match direction {
        HillDirection::To => PhaseState::new(
            (s.x + 1.0 - mu) / k,
            s.y / k,
            s.px / k,
            (s.py + 1.0 - mu) / k,
        ),
        HillDirection::From => PhaseState::new(
            s.x * k - 1.0 + mu,
            s.y * k,
            s.px * k,
            s.py * k - 1.0 + mu,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const MU: f64 = 0.01;

    fn samples() -> Vec<PhaseState> {
        vec![
            PhaseState::new(0.3, 0.2, -0.1, 0.5),
            PhaseState::new(-0.8, -0.15, 0.05, -0.7),
            PhaseState::new(0.5, -0.6, 0.4, 0.2),
            PhaseState::new(-1.2, 0.3, -0.2, -1.0),
        ]
    }

    fn fd_gradient(model: &ModelId, s: &PhaseState, t: f64, h: f64) -> Vec4 {
        let mut g = Vec4::zeros();
        for i in 0..4 {
            let mut a = s.to_vec();
            let mut b = s.to_vec();
            a[i] += h;
            b[i] -= h;
            g[i] = (hamiltonian(model, &a.into(), t).unwrap()
                - hamiltonian(model, &b.into(), t).unwrap())
                / (2.0 * h);
        }
        g
    }

    #[test]
    fn vector_field_is_symplectic_gradient() {
        let models = [
            ModelId::circular(MU).unwrap(),
            ModelId::elliptic(MU, 0.05).unwrap(),
        ];
        for model in models {
            for s in samples() {
                let g = fd_gradient(&model, &s, 0.7, 1e-6);
                let f = vector_field(&model, &s, 0.7).unwrap();
                let jg = Vec4::new(g[2], g[3], -g[0], -g[1]);
                assert!((f - jg).amax() < 1e-7, "{model:?} {s:?}");
            }
        }
        let hill = PhaseState::new(1.1, 0.4, -0.3, 0.9);
        let g = fd_gradient(&ModelId::Hill, &hill, 0.0, 1e-6);
        let f = vector_field(&ModelId::Hill, &hill, 0.0).unwrap();
        assert!((f - Vec4::new(g[2], g[3], -g[0], -g[1])).amax() < 1e-7);
    }

    #[test]
    fn hill_energy_at_equilibrium() {
        let a = 3f64.powf(-1.0 / 3.0);
        let h = hamiltonian(&ModelId::Hill, &PhaseState::new(a, 0.0, 0.0, a), 0.0).unwrap();
        assert_relative_eq!(h, -1.5 * 3f64.cbrt(), max_relative = 1e-14);
        let f = vector_field(&ModelId::Hill, &PhaseState::new(a, 0.0, 0.0, a), 0.0).unwrap();
        assert!(f.amax() < 1e-14);
    }

    #[test]
    fn zero_eccentricity_matches_circular_bitwise() {
        let c = ModelId::circular(MU).unwrap();
        let e = ModelId::elliptic(MU, 0.0).unwrap();
        for s in samples() {
            for t in [0.0, 1.3, -2.0] {
                assert_eq!(
                    hamiltonian(&c, &s, t).unwrap().to_bits(),
                    hamiltonian(&e, &s, t).unwrap().to_bits()
                );
                assert_eq!(vector_field(&c, &s, t).unwrap(), vector_field(&e, &s, t).unwrap());
            }
        }
    }

    #[test]
    fn jacobi_is_minus_twice_energy() {
        let c = ModelId::circular(MU).unwrap();
        for s in samples() {
            let f = jacobi_constant(MU, &s).unwrap();
            assert_relative_eq!(f, -2.0 * hamiltonian(&c, &s, 0.0).unwrap(), max_relative = 1e-14);
        }
    }

    #[test]
    fn singularity_guard() {
        let c = ModelId::circular(MU).unwrap();
        let at_small = PhaseState::new(MU - 1.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            hamiltonian(&c, &at_small, 0.0),
            Err(Error::Singularity { .. })
        ));
        assert!(matches!(
            vector_field(&ModelId::Hill, &PhaseState::new(1e-8, 0.0, 0.0, 0.0), 0.0),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn profile_at_zero_time() {
        let p = profile(0.3, -0.7, 0.2, 0.0);
        assert_relative_eq!(p.f, 2.0 * 0.3 * 0.2 - 0.04, max_relative = 1e-15);
        assert_relative_eq!(p.ftt, -4.0 * 0.3 * 0.2 + 0.04, max_relative = 1e-14);
    }

    #[test]
    fn g_time_derivatives_match_differences() {
        let h = 1e-4;
        for s in samples() {
            for t in [0.3, 2.1, -1.7] {
                let d = g_partials(MU, &s, t).unwrap();
                let gp = perturbation_g(MU, &s, t + h).unwrap();
                let gm = perturbation_g(MU, &s, t - h).unwrap();
                let g0 = perturbation_g(MU, &s, t).unwrap();
                assert!((d.gt - (gp - gm) / (2.0 * h)).abs() < 1e-6 * (1.0 + d.gt.abs()));
                assert!((d.gtt - (gp - 2.0 * g0 + gm) / (h * h)).abs() < 1e-5 * (1.0 + d.gtt.abs()));
            }
        }
    }

    #[test]
    fn g_space_derivatives_match_differences() {
        let h = 1e-6;
        for s in samples() {
            let d = g_partials(MU, &s, 0.9).unwrap();
            let shift = |dx: f64, dy: f64| {
                perturbation_g(MU, &PhaseState::new(s.x + dx, s.y + dy, s.px, s.py), 0.9).unwrap()
            };
            assert!((d.gx - (shift(h, 0.0) - shift(-h, 0.0)) / (2.0 * h)).abs() < 1e-7);
            assert!((d.gy - (shift(0.0, h) - shift(0.0, -h)) / (2.0 * h)).abs() < 1e-7);
        }
    }

    #[test]
    fn hill_profile_derivatives() {
        let h = 1e-4;
        for t in [0.0, 0.4, 2.2] {
            let (_, d1, d2) = cos_cubed(t);
            let f = |t: f64| cos_cubed(t).0;
            assert!((d1 - (f(t + h) - f(t - h)) / (2.0 * h)).abs() < 1e-7);
            assert!((d2 - (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h)).abs() < 1e-6);
        }
    }

    #[test]
    fn kepler_solution_residual() {
        let (big_e, res) = solve_kepler(0.3, 1.7).unwrap();
        assert!((big_e - 0.3 * big_e.sin() - 1.7).abs() <= 1e-14);
        assert!(res <= 1e-14);
    }

    #[test]
    fn circular_pose() {
        for t in [0.0, 1.0, 4.0] {
            let p = kepler_primaries(MU, 0.0, t).unwrap();
            assert!((p.big[0] - MU).abs() < 1e-15 && p.big[1].abs() < 1e-15);
            assert!((p.small[0] - (MU - 1.0)).abs() < 1e-15 && p.small[1].abs() < 1e-15);
        }
    }

    #[test]
    fn inertial_orbit_matches_first_order_expansion() {
        let e = 1e-3;
        for t in [0.5, 2.0] {
            let ([x, y], _) = relative_orbit_inertial(e, t).unwrap();
            let psi = t + 2.0 * e * t.sin();
            let xa = (1.0 - e * psi.cos()) * psi.cos();
            let ya = (1.0 - e * psi.cos()) * psi.sin();
            assert!((x - xa).abs() < 5.0 * e * e);
            assert!((y - ya).abs() < 5.0 * e * e);
        }
    }

    #[test]
    fn symmetry_is_an_involution_preserving_energy() {
        let c = ModelId::circular(MU).unwrap();
        for s in samples() {
            assert_eq!(symmetry_s(&symmetry_s(&s)), s);
            assert_relative_eq!(
                hamiltonian(&c, &symmetry_s(&s), 0.0).unwrap(),
                hamiltonian(&c, &s, 0.0).unwrap(),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn hill_transform_roundtrip() {
        for s in samples() {
            let back = hill_transform(
                1e-4,
                &hill_transform(1e-4, &s, HillDirection::To),
                HillDirection::From,
            );
            assert!(back.distance(&s) < 1e-13);
        }
    }
}
