//! Unstable manifold branch of L2, symmetric homoclinic orbits and Lapunov orbits.

use serde::Serialize;

use crate::equilibria::{equilibrium_data, EquilibriumData};
use crate::error::{Error, Result};
use crate::integrate::{
    find_crossings, find_events, propagate, propagate_until, Direction, Section, SectionEvent, StepControl,
    Trajectory, DEFAULT_TOL,
};
use crate::models::{circular_primaries, potential_jet, symmetry_s, ModelId};
use crate::state::{PhaseState, Vec4};

pub const DEFAULT_DELTA: f64 = 1e-7;
/// Flight time budget for one branch.
pub const DEFAULT_T_MAX: f64 = 400.0;
/// Extra time integrated past the symmetric crossing so its extremum is counted.
const WAVE_MARGIN: f64 = 0.5;
/// Largest mass ratio probed by the scan.
pub const SCAN_START: f64 = 0.02;
/// Ratio between consecutive probes of the scan.
pub const SCAN_RATIO: f64 = 0.985;
/// Required |p_x| at a symmetric crossing.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Radius of the box that the branch must stay inside.
fn escape_radius(model: &ModelId) -> f64 {
    match model {
        ModelId::Hill => 200.0,
        _ => 2.5,
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(1e-10..=1e-4).contains(&delta) {
        return Err(Error::InvalidParameter(format!("seed offset {delta} outside [1e-10, 1e-4]")));
    }
    Ok(())
}

fn check_branch(branch: i32) -> Result<f64> {
    match branch {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => Err(Error::InvalidParameter(format!("branch must be +1 or -1, got {branch}"))),
    }
}

/// L2 + delta * branch * v_u, with v_u the unit unstable eigenvector pointing to increasing x.
pub fn branch_seed(eq: &EquilibriumData, delta: f64, branch: i32) -> Result<PhaseState> {
    check_delta(delta)?;
    let sign = check_branch(branch)?;
    Ok(PhaseState::from_vec(&(eq.location.to_vec() + eq.unstable_direction() * (delta * sign))))
}

fn escaped(model: &ModelId, y: &Vec4) -> bool {
    y[0].hypot(y[1]) > escape_radius(model)
}

/// Forward run of the unstable branch from its seed up to `t_max`.
pub fn unstable_branch(model: &ModelId, delta: f64, branch: i32, t_max: f64) -> Result<Trajectory> {
    let eq = equilibrium_data(model)?;
    let seed = branch_seed(&eq, delta, branch)?;
    propagate_until(model, &seed, 0.0, t_max, DEFAULT_TOL, |_, _, t, y| {
        if escaped(model, y) {
            Err(Error::Escape { t })
        } else {
            Ok(StepControl::Continue)
        }
    })
}

/// Time derivative of the distance to the larger primary, up to the positive factor 1/r.
fn larger_primary_rate(model: &ModelId, y: &Vec4) -> f64 {
    let (cx, cy) = match model.mu() {
        Some(mu) => {
            let big = circular_primaries(mu)[0];
            (big.cx, big.cy)
        }
        // in Hill coordinates the larger primary sits at +infinity on the x axis
        None => return -(y[2] + y[1]),
    };
    let vx = y[2] + y[1];
    let vy = y[3] - y[0];
    (y[0] - cx) * vx + (y[1] - cy) * vy
}

/// Strict local extrema of the distance to the larger primary inside the window.
pub fn wave_count_in(traj: &Trajectory, window: (f64, f64)) -> Result<usize> {
    let model = traj.model;
    let events = find_events(traj, |_, y| Ok(larger_primary_rate(&model, y)), Direction::Any, Some(window))?;
    Ok(events.len())
}

/// Number of waves before the symmetric crossing, the crossing's own extremum included.
pub fn wave_count(traj: &Trajectory) -> Result<usize> {
    let end = match first_qualifying_crossing(traj) {
        Ok(ev) => (ev.time + WAVE_MARGIN).min(traj.end_time()),
        Err(_) => traj.end_time(),
    };
    wave_count_in(traj, (traj.start_time(), end))
}

/// First y = 0 crossing on the far side of the larger primary (x > 0).
pub fn first_qualifying_crossing(traj: &Trajectory) -> Result<SectionEvent> {
    let all = find_crossings(traj, &Section::y_axis_crossing(), None)?;
    all.into_iter()
        .find(|ev| ev.state.x > 0.0)
        .ok_or(Error::NoCrossing { requested: 1, found: 0 })
}

/// Seed offset, integrator tolerance and flight-time budget of a branch run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootSettings {
    pub delta: f64,
    pub tol: f64,
    pub t_max: f64,
}

impl Default for ShootSettings {
    fn default() -> Self {
        Self { delta: DEFAULT_DELTA, tol: DEFAULT_TOL, t_max: DEFAULT_T_MAX }
    }
}

impl ShootSettings {
    pub fn with_delta(delta: f64) -> Self {
        Self { delta, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootResult {
    pub mu: f64,
    /// p_x at the crossing, which equals dx/dt there.
    pub residual: f64,
    pub wave_count: usize,
    pub crossing: SectionEvent,
    /// Time from the seed to the crossing.
    pub flight_time: f64,
}

fn shoot_with_trajectory(mu: f64, settings: &ShootSettings) -> Result<(ShootResult, Trajectory)> {
    let model = ModelId::circular(mu)?;
    let eq = equilibrium_data(&model)?;
    let seed = branch_seed(&eq, settings.delta, 1)?;
    let mut stop_at = f64::INFINITY;
    let traj = propagate_until(&model, &seed, 0.0, settings.t_max, settings.tol, |_, y0, t, y1| {
        if escaped(&model, y1) {
            return Err(Error::Escape { t });
        }
        if stop_at.is_infinite() && y0[1] * y1[1] <= 0.0 && y0[1] != 0.0 && (y0[0] > 0.0 || y1[0] > 0.0) {
            stop_at = t + WAVE_MARGIN;
        }
        Ok(if t >= stop_at { StepControl::Stop } else { StepControl::Continue })
    })?;
    let crossing = first_qualifying_crossing(&traj).map_err(|_| Error::NoCrossing { requested: 1, found: 0 })?;
    let waves = wave_count_in(&traj, (0.0, crossing.time + WAVE_MARGIN))?;
    let res = ShootResult {
        mu,
        residual: crossing.state.px,
        wave_count: waves,
        crossing,
        flight_time: crossing.time,
    };
    Ok((res, traj))
}

/// Runs the branch for Circular(mu) to its first qualifying crossing.
pub fn shoot(mu: f64, delta: f64) -> Result<ShootResult> {
    shoot_with(mu, &ShootSettings::with_delta(delta))
}

pub fn shoot_with(mu: f64, settings: &ShootSettings) -> Result<ShootResult> {
    shoot_with_trajectory(mu, settings).map(|(r, _)| r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuK {
    pub k: usize,
    pub mu: f64,
    pub residual: f64,
    pub wave_count: usize,
    pub flight_time: f64,
    pub crossing: PhaseState,
}

/// Bisects a sign change of the residual; None if the change is a jump rather than a zero.
fn bisect(lo: ShootResult, hi: ShootResult, settings: &ShootSettings, tol: f64) -> Result<Option<ShootResult>> {
    let (mut a, mut b) = (lo, hi);
    let start_jump = a.residual.abs().max(b.residual.abs());
    for _ in 0..200 {
        let mid = 0.5 * (a.mu + b.mu);
        if mid <= a.mu.min(b.mu) || mid >= a.mu.max(b.mu) {
            break;
        }
        let m = match shoot_with(mid, settings) {
            Ok(m) => m,
            Err(Error::NoCrossing { .. } | Error::Escape { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        if m.residual.abs() <= tol {
            return Ok(Some(m));
        }
        if m.residual.signum() == a.residual.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    // a jump keeps a residual of the original size at the smallest bracket
    let best = if a.residual.abs() < b.residual.abs() { a } else { b };
    if best.residual.abs() <= tol || best.residual.abs() < 1e-6 * start_jump && best.residual.abs() < 1e-8 {
        Ok(Some(best))
    } else {
        Ok(None)
    }
}

fn probe(mu: f64, settings: &ShootSettings) -> Result<Option<ShootResult>> {
    match shoot_with(mu, settings) {
        Ok(r) => Ok(Some(r)),
        Err(Error::NoCrossing { .. } | Error::Escape { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Homoclinic masses for k = 2..=k_max, found in decreasing order of mass.
///
/// Each zero of the residual is bracketed by a geometric downward scan and refined by
/// bisection; a zero counts as the k-th one only when the branch shows k waves there.
pub fn find_mu_sequence(k_max: usize, tol: f64, delta: f64) -> Result<Vec<MuK>> {
    find_mu_sequence_with(k_max, tol, &ShootSettings::with_delta(delta))
}

/// As [`find_mu_sequence`] with explicit branch settings.
pub fn find_mu_sequence_with(k_max: usize, tol: f64, settings: &ShootSettings) -> Result<Vec<MuK>> {
    if k_max < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k_max}")));
    }
    let mut found: Vec<MuK> = Vec::new();
    let mut mu = SCAN_START;
    let mut prev = probe(mu, settings)?;
    let floor = 1e-9;
    while found.len() + 1 < k_max && mu > floor {
        let k = found.len() + 2;
        let next_mu = mu * SCAN_RATIO;
        let cur = probe(next_mu, settings)?;
        if let (Some(a), Some(b)) = (prev, cur) {
            if a.residual.signum() != b.residual.signum() {
                if let Some(z) = bisect(a, b, settings, tol)? {
                    if z.wave_count == k {
                        found.push(MuK {
                            k,
                            mu: z.mu,
                            residual: z.residual,
                            wave_count: z.wave_count,
                            flight_time: z.flight_time,
                            crossing: z.crossing.state,
                        });
                        // the next zero lies near mu_k (k / (k + 1))^3; skip most of the gap
                        let skip = z.mu * ((k as f64) / (k as f64 + 1.0)).powi(3) * 1.3;
                        if skip < next_mu {
                            mu = skip;
                            prev = probe(mu, settings)?;
                            continue;
                        }
                    }
                }
            }
        }
        mu = next_mu;
        prev = cur;
    }
    if found.len() + 1 < k_max {
        return Err(Error::BracketFailure { lo: mu, hi: SCAN_START });
    }
    Ok(found)
}

pub fn find_mu_k(k: usize, tol: f64) -> Result<MuK> {
    find_mu_k_with_delta(k, tol, DEFAULT_DELTA)
}

pub fn find_mu_k_with_delta(k: usize, tol: f64, delta: f64) -> Result<MuK> {
    Ok(*find_mu_sequence(k, tol, delta)?.last().unwrap())
}

/// Symmetric homoclinic orbit with t = 0 at the crossing of y = 0.
#[derive(Debug, Clone)]
pub struct HomoclinicOrbit {
    pub mu: f64,
    pub k: usize,
    pub crossing_state: PhaseState,
    /// Unstable half on [-T, 0].
    pub unstable_half: Trajectory,
    pub offset_delta: f64,
    pub residual: f64,
    pub equilibrium: EquilibriumData,
}

impl HomoclinicOrbit {
    /// Flight time T from the seed to the crossing.
    pub fn horizon(&self) -> f64 {
        -self.unstable_half.start_time()
    }

    pub fn model(&self) -> ModelId {
        self.equilibrium.model
    }

    /// q(t) on [-T, T]; the stable half is S(q(-t)).
    pub fn state(&self, t: f64) -> Result<PhaseState> {
        if t <= 0.0 {
            self.unstable_half.eval(t)
        } else {
            self.unstable_half.eval(-t).map(|s| symmetry_s(&s))
        }
    }

    /// Stable half obtained by propagating the crossing state forward to T.
    pub fn propagate_stable_half(&self) -> Result<Trajectory> {
        propagate(&self.model(), &self.crossing_state, 0.0, self.horizon(), self.unstable_half.tol)
    }

    pub fn seed(&self) -> PhaseState {
        self.unstable_half.first()
    }

    /// Largest |S(q(-t)) - q_stable(t)| at t = T i / (n + 1), i = 1..=n, with the stable
    /// half propagated forward from the crossing.
    pub fn symmetry_residual(&self, n: usize) -> Result<f64> {
        let stable = self.propagate_stable_half()?;
        let big_t = self.horizon();
        let mut worst: f64 = 0.0;
        for i in 1..=n {
            let t = big_t * i as f64 / (n + 1) as f64;
            let mirrored = symmetry_s(&self.unstable_half.eval(-t)?);
            worst = worst.max(mirrored.distance(&stable.eval(t)?));
        }
        Ok(worst)
    }
}

pub fn homoclinic(mu_k: f64, k: usize, delta: f64) -> Result<HomoclinicOrbit> {
    homoclinic_with_tol(mu_k, k, delta, DEFAULT_TOL)
}

/// As [`homoclinic`], integrating at `tol`.
pub fn homoclinic_with_tol(mu_k: f64, k: usize, delta: f64, tol: f64) -> Result<HomoclinicOrbit> {
    homoclinic_with(mu_k, k, &ShootSettings { delta, tol, ..ShootSettings::default() })
}

/// As [`homoclinic`] with explicit branch settings.
pub fn homoclinic_with(mu_k: f64, k: usize, settings: &ShootSettings) -> Result<HomoclinicOrbit> {
    let (shot, mut traj) = shoot_with_trajectory(mu_k, settings)?;
    if shot.wave_count != k {
        return Err(Error::NoConvergence(format!(
            "branch at mu = {mu_k} shows {} waves, expected {k}",
            shot.wave_count
        )));
    }
    let model = ModelId::circular(mu_k)?;
    let eq = equilibrium_data(&model)?;
    let t_cross = shot.flight_time;
    let keep = traj.times.partition_point(|&t| t < t_cross);
    traj.times.truncate(keep);
    traj.states.truncate(keep);
    traj.times.push(t_cross);
    traj.states.push(shot.crossing.state.to_vec());
    Ok(HomoclinicOrbit {
        mu: mu_k,
        k,
        crossing_state: shot.crossing.state,
        residual: shot.residual.abs(),
        unstable_half: traj.rebased(t_cross),
        offset_delta: settings.delta,
        equilibrium: eq,
    })
}

/// Periodic orbit of the Lapunov family crossing y = 0 perpendicularly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LapunovOrbit {
    pub model: ModelId,
    /// Energy offset H - H(L2).
    pub energy_offset: f64,
    pub period: f64,
    pub initial_state: PhaseState,
    /// x-distance of the initial state from L2.
    pub amplitude: f64,
    pub correction_residual: f64,
}

impl LapunovOrbit {
    pub fn frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }
}

/// State on y = 0 with p_x = 0, dy/dt > 0 and the requested energy.
fn symmetric_state(model: &ModelId, x: f64, energy: f64) -> Result<PhaseState> {
    let u = potential_jet(model, x, 0.0)?.u;
    let k = 2.0 * (energy + u);
    if k < 0.0 {
        return Err(Error::NoConvergence(format!("x = {x} lies outside the Hill region")));
    }
    Ok(PhaseState::new(x, 0.0, 0.0, x + k.sqrt()))
}

/// p_x and time at the first return to y = 0.
fn half_return(model: &ModelId, x: f64, energy: f64, t_max: f64) -> Result<(f64, f64)> {
    let s0 = symmetric_state(model, x, energy)?;
    let mut done = false;
    let traj = propagate_until(model, &s0, 0.0, t_max, DEFAULT_TOL, |_, y0, _, y1| {
        if y0[1] > 0.0 && y1[1] <= 0.0 {
            done = true;
        }
        Ok(if done { StepControl::Stop } else { StepControl::Continue })
    })?;
    let section = Section { coordinate: 1, level: 0.0, direction: Direction::Decreasing };
    let ev = crate::integrate::find_crossing(&traj, &section, 1, None)?;
    Ok((ev.state.px, ev.time))
}

/// Differential correction at fixed energy for the orbit with energy offset `dc`.
///
/// The initial x lies between the smaller primary and L2; `amplitude_guess`
/// defaults to the linear estimate.
pub fn lapunov(model: &ModelId, dc: f64, amplitude_guess: Option<f64>) -> Result<LapunovOrbit> {
    if dc.is_nan() || dc <= 0.0 {
        return Err(Error::InvalidParameter(format!("energy offset must be positive, got {dc}")));
    }
    let eq = equilibrium_data(model)?;
    let energy = eq.c2 + dc;
    let h2 = crate::normalform::energy_coefficient_h2(&eq)?;
    let linear = 2.0 * (dc / h2).sqrt() * eq.phi[(0, 1)].norm();
    let mut a = amplitude_guess.unwrap_or(linear);
    let t_max = 4.0 * std::f64::consts::PI / eq.omega2;
    let xl = eq.location.x;
    let mut res = half_return(model, xl - a, energy, t_max)?;
    // keep refining past the tolerance until the residual stops decreasing
    for _ in 0..50 {
        if res.0 == 0.0 {
            break;
        }
        let h = 1e-7 * a.max(1e-6);
        let plus = half_return(model, xl - a - h, energy, t_max)?;
        let minus = half_return(model, xl - a + h, energy, t_max)?;
        let slope = (plus.0 - minus.0) / (2.0 * h);
        let mut step = -res.0 / slope;
        if !step.is_finite() {
            break;
        }
        // damp until the residual decreases
        let mut accepted = false;
        for _ in 0..20 {
            let cand = a + step;
            if cand > 0.0 {
                if let Ok(r) = half_return(model, xl - cand, energy, t_max) {
                    if r.0.abs() < res.0.abs() {
                        a = cand;
                        res = r;
                        accepted = true;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res.0.abs() > RESIDUAL_TOL {
        return Err(Error::NoConvergence(format!(
            "Lapunov correction stalled at |p_x| = {:.3e} for energy offset {dc}",
            res.0.abs()
        )));
    }
    Ok(LapunovOrbit {
        model: *model,
        energy_offset: dc,
        period: 2.0 * res.1,
        initial_state: symmetric_state(model, xl - a, energy)?,
        amplitude: a,
        correction_residual: res.0.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{hamiltonian, vector_field};

    #[test]
    fn seed_validation() {
        let eq = equilibrium_data(&ModelId::Hill).unwrap();
        assert!(branch_seed(&eq, 1e-2, 1).is_err());
        assert!(branch_seed(&eq, 1e-7, 0).is_err());
        let s = branch_seed(&eq, 1e-7, -1).unwrap();
        assert!(s.x < eq.location.x);
    }

    #[test]
    fn seed_lies_on_the_unstable_direction() {
        let eq = equilibrium_data(&ModelId::circular(4e-3).unwrap()).unwrap();
        let s = branch_seed(&eq, 1e-7, 1).unwrap();
        let f = vector_field(&eq.model, &s, 0.0).unwrap();
        let d = s.to_vec() - eq.location.to_vec();
        assert!((f - d * eq.alpha1).norm() < 1e-12);
    }

    #[test]
    fn monotone_segment_has_no_waves() {
        let model = ModelId::circular(4e-3).unwrap();
        let tr = unstable_branch(&model, 1e-7, 1, 2.0).unwrap();
        assert_eq!(wave_count_in(&tr, (0.0, 2.0)).unwrap(), 0);
    }

    #[test]
    fn shooting_near_first_mass() {
        let r = shoot(4.2538635218e-3, 1e-7).unwrap();
        assert_eq!(r.wave_count, 2);
        assert!(r.residual.abs() < 1e-6);
        assert!(r.crossing.state.x > 0.0);
    }

    #[test]
    fn lapunov_orbit_closes() {
        let orbit = lapunov(&ModelId::Hill, 1e-5, None).unwrap();
        let tr = propagate(&ModelId::Hill, &orbit.initial_state, 0.0, orbit.period, 1e-12).unwrap();
        assert!(tr.last().distance(&orbit.initial_state) < 1e-9);
        let eq = equilibrium_data(&ModelId::Hill).unwrap();
        let h = hamiltonian(&ModelId::Hill, &orbit.initial_state, 0.0).unwrap();
        assert!((h - eq.c2 - 1e-5).abs() < 1e-12);
    }
}
