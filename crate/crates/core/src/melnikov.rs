//! Melnikov function of the elliptic perturbation along symmetric homoclinic orbits,
//! its slope at zero and the Hill-limit slope along tip-calibrated branches.

use serde::Serialize;

use crate::equilibria::{equilibrium_data, EquilibriumData};
use crate::error::{Error, Result};
use crate::integrate::{find_events, propagate, Direction, Trajectory};
use crate::models::{
    circular_primaries, cos_cubed, g_partials, hill_perturbation, symmetry_s, vector_field, ModelId,
};
use crate::orbits::{branch_seed, HomoclinicOrbit, ShootSettings};
use crate::quad::integrate;
use crate::state::{PhaseState, Vec4};

pub const DEFAULT_QUAD_TOL: f64 = 1e-8;
pub const MAX_PANEL: f64 = 0.5;
pub const DEFAULT_HILL_DELTA: f64 = 1e-9;
pub const DEFAULT_TIP_INDEX: usize = 3;
/// Length of the linear tail, in units of 1 / alpha1.
const TAIL_EFOLDS: f64 = 30.0;
/// Safety factor applied to truncation estimates.
const TAIL_SAFETY: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MelnikovForm {
    Bracket,
    Potential,
    Derivative,
    Hill,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MelnikovResult {
    pub value: f64,
    /// Time from the seed to the time origin.
    pub horizon: f64,
    pub quad_tol: f64,
    pub quad_error: f64,
    /// Contribution of the linearized approach to L2 beyond the computed orbit.
    pub tail_correction: f64,
    pub tail_bound: f64,
    pub form: MelnikovForm,
}

/// Computed half orbit on [-T, 0] continued backwards along the linear unstable manifold
/// and forwards by the reversing symmetry.
struct SymmetricOrbit<'a> {
    half: &'a Trajectory,
    l2: Vec4,
    /// q(-T) - L2.
    offset: Vec4,
    alpha1: f64,
    horizon: f64,
}

impl<'a> SymmetricOrbit<'a> {
    fn new(half: &'a Trajectory, eq: &EquilibriumData) -> Self {
        let l2 = eq.location.to_vec();
        Self {
            half,
            l2,
            offset: half.states[0] - l2,
            alpha1: eq.alpha1,
            horizon: -half.start_time(),
        }
    }

    fn unstable(&self, s: f64) -> Result<PhaseState> {
        if s < -self.horizon {
            let v = self.l2 + self.offset * (self.alpha1 * (s + self.horizon)).exp();
            Ok(PhaseState::from_vec(&v))
        } else {
            self.half.eval(s)
        }
    }

    fn state(&self, s: f64) -> Result<PhaseState> {
        if s <= 0.0 {
            self.unstable(s)
        } else {
            self.unstable(-s).map(|q| symmetry_s(&q))
        }
    }

    fn tail_length(&self) -> f64 {
        TAIL_EFOLDS / self.alpha1
    }

    fn offset_size(&self) -> f64 {
        self.offset.norm()
    }
}

fn natural_length(model: &ModelId, l2: &PhaseState) -> f64 {
    match model.mu() {
        Some(mu) => {
            let small = circular_primaries(mu)[1];
            small.distance(l2.x, l2.y)
        }
        None => l2.x.hypot(l2.y),
    }
}

fn tail_bound(tail: f64, offset: f64, length: f64) -> f64 {
    tail.abs() * (TAIL_SAFETY * offset / length + (-TAIL_EFOLDS).exp())
}

fn finish(
    value: f64,
    horizon: f64,
    quad_tol: f64,
    quad_error: f64,
    tail_correction: f64,
    bound: f64,
    form: MelnikovForm,
) -> Result<MelnikovResult> {
    if bound > TAIL_SAFETY * quad_tol {
        return Err(Error::HorizonTooShort { tail: bound, target: quad_tol });
    }
    Ok(MelnikovResult { value, horizon, quad_tol, quad_error, tail_correction, tail_bound: bound, form })
}

pub fn melnikov(h: &HomoclinicOrbit, t0: f64, form: MelnikovForm) -> Result<MelnikovResult> {
    melnikov_with_tol(h, t0, form, DEFAULT_QUAD_TOL)
}

/// M(t0) in the bracket form, integrating -(dx/dt G_x + dy/dt G_y) along q(s) at time s + t0,
/// or in the potential form, integrating G_t(q(s), s + t0) - G_t(L2, s + t0).
pub fn melnikov_with_tol(h: &HomoclinicOrbit, t0: f64, form: MelnikovForm, quad_tol: f64) -> Result<MelnikovResult> {
    let mu = h.mu;
    let orbit = SymmetricOrbit::new(&h.unstable_half, &h.equilibrium);
    let l2 = h.equilibrium.location;
    let big_t = orbit.horizon;
    let bracket = |s: f64, q: &PhaseState| -> Result<f64> {
        let g = g_partials(mu, q, s + t0)?;
        let (vx, vy) = q.velocity();
        Ok(-(vx * g.gx + vy * g.gy))
    };
    let potential = |s: f64, q: &PhaseState| -> Result<f64> {
        Ok(g_partials(mu, q, s + t0)?.gt - g_partials(mu, &l2, s + t0)?.gt)
    };
    let integrand = |s: f64| -> Result<f64> {
        let q = orbit.state(s)?;
        match form {
            MelnikovForm::Bracket => bracket(s, &q),
            MelnikovForm::Potential => potential(s, &q),
            _ => Err(Error::InvalidParameter(format!("{form:?} is not a form of M(t0)"))),
        }
    };
    let w = orbit.tail_length();
    let share = quad_tol / 4.0;
    let (main, e_main) = match form {
        MelnikovForm::Potential => {
            // the L2 part integrates exactly to a difference of G
            let (a, e) = integrate(|s| Ok(g_partials(mu, &orbit.state(s)?, s + t0)?.gt), -big_t, big_t, 2.0 * share, MAX_PANEL)?;
            let l2_part = g_partials(mu, &l2, big_t + t0)?.g - g_partials(mu, &l2, -big_t + t0)?.g;
            (a - l2_part, e)
        }
        _ => integrate(integrand, -big_t, big_t, 2.0 * share, MAX_PANEL)?,
    };
    let (left, e_left) = integrate(integrand, -big_t - w, -big_t, share, MAX_PANEL)?;
    let (right, e_right) = integrate(integrand, big_t, big_t + w, share, MAX_PANEL)?;
    let tail = left + right;
    let length = natural_length(&h.model(), &l2);
    let bound = tail_bound(tail, orbit.offset_size(), length);
    finish(main + tail, big_t, quad_tol, e_main + e_left + e_right, tail, bound, form)
}

pub fn melnikov_derivative_at_zero(h: &HomoclinicOrbit) -> Result<MelnikovResult> {
    melnikov_derivative_with_tol(h, DEFAULT_QUAD_TOL)
}

/// dM/dt0 at t0 = 0 as twice the integral of G_tt(q(s), s) - G_tt(L2, s) over s < 0.
pub fn melnikov_derivative_with_tol(h: &HomoclinicOrbit, quad_tol: f64) -> Result<MelnikovResult> {
    let mu = h.mu;
    let orbit = SymmetricOrbit::new(&h.unstable_half, &h.equilibrium);
    let l2 = h.equilibrium.location;
    let big_t = orbit.horizon;
    let w = orbit.tail_length();
    let (a, e_main) = integrate(
        |s| Ok(g_partials(mu, &orbit.state(s)?, s)?.gtt),
        -big_t,
        0.0,
        quad_tol / 2.0,
        MAX_PANEL,
    )?;
    // over whole periods far from the orbit the L2 term integrates to zero; in closed form
    // its integral is a difference of G_t
    let l2_part = g_partials(mu, &l2, 0.0)?.gt - g_partials(mu, &l2, -big_t)?.gt;
    let (tail, e_tail) = integrate(
        |s| Ok(g_partials(mu, &orbit.state(s)?, s)?.gtt - g_partials(mu, &l2, s)?.gtt),
        -big_t - w,
        -big_t,
        quad_tol / 2.0,
        MAX_PANEL,
    )?;
    let length = natural_length(&h.model(), &l2);
    let bound = 2.0 * tail_bound(tail, orbit.offset_size(), length);
    finish(
        2.0 * (a - l2_part + tail),
        big_t,
        quad_tol,
        2.0 * (e_main + e_tail),
        2.0 * tail,
        bound,
        MelnikovForm::Derivative,
    )
}

/// Parity of the wave count; selects which kind of tip fixes the time origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(k: usize) -> Self {
        if k.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Even parity is calibrated at far tips, odd parity at tips next to the zero velocity curve.
    pub fn tip_kind(self) -> TipKind {
        match self {
            Parity::Even => TipKind::Far,
            Parity::Odd => TipKind::NearZeroVelocity,
        }
    }
}

/// Tips are the extrema of x, which far from the mass measures the distance to the zero
/// velocity curve up to a constant. Far tips are maxima, where the speed peaks; the others
/// are minima next to the curve, where the motion nearly stalls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TipKind {
    Far,
    NearZeroVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tip {
    /// Time from the seed.
    pub time: f64,
    pub kind: TipKind,
    pub x: f64,
    pub speed: f64,
}

/// Hill unstable branch with t = 0 at a selected tip, covering [-T, 0].
#[derive(Debug, Clone)]
pub struct HillTipOrbit {
    pub trajectory: Trajectory,
    pub parity: Parity,
    pub tip_index: usize,
    pub tip: Tip,
    /// Every tip found up to the selected one, times measured from the seed.
    pub tips: Vec<Tip>,
    pub delta: f64,
    pub equilibrium: EquilibriumData,
}

impl HillTipOrbit {
    pub fn horizon(&self) -> f64 {
        -self.trajectory.start_time()
    }
}

/// Extrema of x along a Hill trajectory.
pub fn hill_tips(traj: &Trajectory) -> Result<Vec<Tip>> {
    let events = find_events(traj, |_, y| Ok(y[2] + y[1]), Direction::Any, None)?;
    let mut tips = Vec::with_capacity(events.len());
    for ev in events {
        let (vx, vy) = ev.state.velocity();
        let kind = if x_acceleration(&ev.state)? < 0.0 {
            TipKind::Far
        } else {
            TipKind::NearZeroVelocity
        };
        tips.push(Tip { time: ev.time, kind, x: ev.state.x, speed: vx.hypot(vy) });
    }
    Ok(tips)
}

/// d^2x/dt^2 for the Hill model.
fn x_acceleration(s: &PhaseState) -> Result<f64> {
    let f = vector_field(&ModelId::Hill, s, 0.0)?;
    Ok(f[2] + f[1])
}

pub fn hill_tip_orbit(parity: Parity, tip_index: usize, delta: f64) -> Result<HillTipOrbit> {
    hill_tip_orbit_with(parity, tip_index, &ShootSettings::with_delta(delta))
}

/// As [`hill_tip_orbit`]; the search gives up `t_max` after leaving the neighbourhood of L2.
pub fn hill_tip_orbit_with(parity: Parity, tip_index: usize, settings: &ShootSettings) -> Result<HillTipOrbit> {
    let (delta, tol) = (settings.delta, settings.tol);
    if tip_index == 0 {
        return Err(Error::InvalidParameter("tip index starts at 1".into()));
    }
    let model = ModelId::Hill;
    let eq = equilibrium_data(&model)?;
    let seed = branch_seed(&eq, delta, 1)?;
    let kind = parity.tip_kind();
    let departure = (eq.location.x / delta).ln() / eq.alpha1;
    let mut horizon = departure + 2.0 * std::f64::consts::PI * (tip_index as f64 + 1.0);
    let limit = departure + settings.t_max;
    loop {
        let traj = propagate(&model, &seed, 0.0, horizon.min(limit), tol)?;
        let tips = hill_tips(&traj)?;
        let selected = tips.iter().filter(|t| t.kind == kind).nth(tip_index - 1).copied();
        if let Some(tip) = selected {
            let upto: Vec<Tip> = tips.iter().copied().filter(|t| t.time <= tip.time).collect();
            let half = propagate(&model, &seed, 0.0, tip.time, tol)?.rebased(tip.time);
            return Ok(HillTipOrbit {
                trajectory: half,
                parity,
                tip_index,
                tip,
                tips: upto,
                delta,
                equilibrium: eq,
            });
        }
        if horizon >= limit {
            return Err(Error::TipNotFound { requested: tip_index, horizon });
        }
        horizon = (horizon * 2.0).min(limit);
    }
}

pub fn hill_melnikov_derivative(tip: &HillTipOrbit) -> Result<MelnikovResult> {
    hill_melnikov_derivative_with_tol(tip, DEFAULT_QUAD_TOL)
}

/// Twice the integral over s < 0 of G_tt(q(s), s) - G_tt(L2, s) for the Hill profile cos^3 t / r^3.
pub fn hill_melnikov_derivative_with_tol(tip: &HillTipOrbit, quad_tol: f64) -> Result<MelnikovResult> {
    let orbit = SymmetricOrbit::new(&tip.trajectory, &tip.equilibrium);
    let l2 = tip.equilibrium.location;
    let big_t = orbit.horizon;
    let w = orbit.tail_length();
    let l2_weight = hill_perturbation(&l2, 0.0)?.g;
    let (a, e_main) = integrate(
        |s| Ok(hill_perturbation(&orbit.unstable(s)?, s)?.gtt),
        -big_t,
        0.0,
        quad_tol / 2.0,
        MAX_PANEL,
    )?;
    let l2_part = l2_weight * (cos_cubed(0.0).1 - cos_cubed(-big_t).1);
    let (tail, e_tail) = integrate(
        |s| Ok(hill_perturbation(&orbit.unstable(s)?, s)?.gtt - l2_weight * cos_cubed(s).2),
        -big_t - w,
        -big_t,
        quad_tol / 2.0,
        MAX_PANEL,
    )?;
    let length = natural_length(&ModelId::Hill, &l2);
    let bound = 2.0 * tail_bound(tail, orbit.offset_size(), length);
    finish(
        2.0 * (a - l2_part + tail),
        big_t,
        quad_tol,
        2.0 * (e_main + e_tail),
        2.0 * tail,
        bound,
        MelnikovForm::Hill,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{find_mu_k, homoclinic, DEFAULT_DELTA};

    fn first_orbit() -> HomoclinicOrbit {
        let m = find_mu_k(2, 1e-10).unwrap();
        homoclinic(m.mu, 2, DEFAULT_DELTA).unwrap()
    }

    #[test]
    fn parity_selects_tip_kind() {
        assert_eq!(Parity::of(4), Parity::Even);
        assert_eq!(Parity::of(7), Parity::Odd);
        assert_ne!(Parity::Even.tip_kind(), Parity::Odd.tip_kind());
    }

    #[test]
    fn melnikov_vanishes_at_zero() {
        let h = first_orbit();
        for form in [MelnikovForm::Bracket, MelnikovForm::Potential] {
            assert!(melnikov(&h, 0.0, form).unwrap().value.abs() < 1e-6);
        }
    }

    #[test]
    fn melnikov_is_periodic() {
        let h = first_orbit();
        let a = melnikov(&h, 0.5, MelnikovForm::Potential).unwrap().value;
        let b = melnikov(&h, 0.5 + 2.0 * std::f64::consts::PI, MelnikovForm::Potential).unwrap().value;
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let h = first_orbit();
        let d = melnikov_derivative_at_zero(&h).unwrap();
        let e = 1e-3;
        let plus = melnikov(&h, e, MelnikovForm::Potential).unwrap().value;
        let minus = melnikov(&h, -e, MelnikovForm::Potential).unwrap().value;
        assert!(((plus - minus) / (2.0 * e) - d.value).abs() < 1e-5);
    }

    #[test]
    fn rejects_derivative_form_for_m() {
        let h = first_orbit();
        assert!(melnikov(&h, 0.0, MelnikovForm::Derivative).is_err());
    }

    #[test]
    fn tips_alternate() {
        let tip = hill_tip_orbit(Parity::Even, 2, DEFAULT_HILL_DELTA).unwrap();
        assert_eq!(tip.tip.kind, TipKind::Far);
        for pair in tip.tips.windows(2) {
            assert_ne!(pair[0].kind, pair[1].kind);
        }
        assert_eq!(tip.trajectory.end_time(), 0.0);
    }
}
