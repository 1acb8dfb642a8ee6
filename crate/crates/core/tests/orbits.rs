use std::sync::OnceLock;

use l2dyn::equilibria::equilibrium_data;
use l2dyn::integrate::{find_crossing, propagate, Direction, Section};
use l2dyn::models::{hamiltonian, symmetry_s};
use l2dyn::normalform::energy_coefficient_h2;
use l2dyn::orbits::{
    branch_seed, find_mu_sequence, homoclinic, homoclinic_with_tol, lapunov, shoot, unstable_branch, wave_count, HomoclinicOrbit, MuK,
    DEFAULT_DELTA, RESIDUAL_TOL,
};
use l2dyn::{ModelId, PhaseState};

fn sequence() -> &'static [MuK] {
    static SEQ: OnceLock<Vec<MuK>> = OnceLock::new();
    SEQ.get_or_init(|| find_mu_sequence(8, RESIDUAL_TOL, DEFAULT_DELTA).unwrap())
}

fn first_homoclinic() -> &'static HomoclinicOrbit {
    static H: OnceLock<HomoclinicOrbit> = OnceLock::new();
    H.get_or_init(|| homoclinic(sequence()[0].mu, 2, DEFAULT_DELTA).unwrap())
}

#[test]
fn masses_are_indexed_by_wave_count() {
    for (i, m) in sequence().iter().enumerate() {
        assert_eq!(m.k, i + 2);
        assert_eq!(m.wave_count, m.k);
        assert!(m.residual.abs() <= RESIDUAL_TOL);
        assert!(m.crossing.x > 0.0);
    }
}

#[test]
fn masses_decrease_with_the_expected_ratio() {
    let seq = sequence();
    let ratio = seq[0].mu / seq[1].mu;
    assert!((ratio - 6.30).abs() / 6.30 < 0.15, "{ratio}");
    // mu_k ~ c / k^3 only for large k: the gap to the cubic ratio shrinks along the sequence
    let gaps: Vec<f64> = seq
        .windows(2)
        .map(|w| {
            let k = w[0].k as f64;
            let r = w[0].mu / w[1].mu;
            assert!(r > 1.0);
            r / ((k + 1.0) / k).powi(3) - 1.0
        })
        .collect();
    for w in gaps.windows(2) {
        assert!(w[1].abs() < w[0].abs(), "{gaps:?}");
    }
    assert!(gaps.last().unwrap().abs() < 0.1, "{gaps:?}");
}

#[test]
fn residual_changes_sign_between_consecutive_masses() {
    let seq = sequence();
    let a = shoot(seq[0].mu * 1.001, DEFAULT_DELTA).unwrap();
    let b = shoot(seq[0].mu * 0.999, DEFAULT_DELTA).unwrap();
    assert!(a.residual * b.residual < 0.0);
}

#[test]
fn masses_do_not_depend_on_the_seed_offset() {
    let base = sequence()[0].mu;
    for delta in [1e-6, 1e-8] {
        let m = find_mu_sequence(2, RESIDUAL_TOL, delta).unwrap()[0].mu;
        assert!(((m - base) / base).abs() < 1e-6, "{delta}: {m} vs {base}");
    }
}

#[test]
fn homoclinic_crosses_perpendicularly() {
    let h = first_homoclinic();
    let s = h.crossing_state;
    assert!(s.y.abs() <= 1e-12);
    assert!((s.px + s.y).abs() <= 1e-10);
    assert!(s.x > 0.0);
    assert!(h.unstable_half.end_time() == 0.0);
}

#[test]
fn stable_half_is_the_symmetric_image() {
    let h = homoclinic_with_tol(sequence()[0].mu, 2, DEFAULT_DELTA, 1e-14).unwrap();
    assert!(h.residual <= RESIDUAL_TOL);
    let worst = h.symmetry_residual(10).unwrap();
    assert!(worst <= 1e-8, "{worst}");
}

#[test]
fn tail_decays_at_the_unstable_rate() {
    let h = first_homoclinic();
    let l2 = h.equilibrium.location;
    let t0 = -h.horizon() + 0.5;
    let t1 = t0 + 1.0 / h.equilibrium.alpha1;
    let d0 = h.state(t0).unwrap().distance(&l2);
    let d1 = h.state(t1).unwrap().distance(&l2);
    let slope = (d1 / d0).ln() / (t1 - t0);
    assert!((slope / h.equilibrium.alpha1 - 1.0).abs() < 0.1, "{slope}");
}

#[test]
fn energy_is_conserved_along_the_flight() {
    let h = first_homoclinic();
    let model = h.model();
    let h0 = hamiltonian(&model, &h.seed(), 0.0).unwrap();
    for y in &h.unstable_half.states {
        let e = hamiltonian(&model, &PhaseState::from_vec(y), 0.0).unwrap();
        assert!((e - h0).abs() <= 1e-10);
    }
}

#[test]
fn crossing_time_is_stable_under_tolerance() {
    let h = first_homoclinic();
    let model = h.model();
    let section = Section { coordinate: 1, level: 0.0, direction: Direction::Any };
    let mut times = Vec::new();
    for tol in [1e-12, 1e-13] {
        let tr = propagate(&model, &h.seed(), 0.0, h.horizon() + 0.5, tol).unwrap();
        let all = l2dyn::integrate::find_crossings(&tr, &section, None).unwrap();
        times.push(all.iter().find(|e| e.state.x > 0.0).unwrap().time);
    }
    assert!((times[0] - times[1]).abs() < 1e-9);
}

#[test]
fn reflected_branch_is_the_image_of_the_stable_branch() {
    let model = ModelId::circular(sequence()[0].mu).unwrap();
    let eq = equilibrium_data(&model).unwrap();
    let tr = unstable_branch(&model, DEFAULT_DELTA, -1, 3.0).unwrap();
    // S maps the unstable direction to the stable one, up to sign
    let vs = eq.stable_direction();
    let vu = eq.unstable_direction();
    let image = symmetry_s(&PhaseState::from_vec(&vu)).to_vec();
    let sign = if image.dot(&vs) > 0.0 { 1.0 } else { -1.0 };
    let stable_seed = PhaseState::from_vec(&(eq.location.to_vec() - vs * (sign * DEFAULT_DELTA)));
    let back = propagate(&model, &stable_seed, 0.0, -3.0, 1e-12).unwrap();
    for t in [1.0, 2.0, 3.0] {
        let a = tr.eval(t).unwrap();
        let b = symmetry_s(&back.eval(-t).unwrap());
        assert!(a.distance(&b) < 1e-8, "t = {t}: {}", a.distance(&b));
    }
}

#[test]
fn crossing_converges_with_the_seed_offset() {
    let mu = sequence()[0].mu;
    let a = shoot(mu, 2e-7).unwrap();
    let b = shoot(mu, 1e-7).unwrap();
    let c = shoot(mu, 5e-8).unwrap();
    let d1 = a.crossing.state.distance(&b.crossing.state);
    let d2 = b.crossing.state.distance(&c.crossing.state);
    // time re-basing absorbs the seed shift; what remains is the O(delta) nonlinearity
    assert!(d1 < 1e-5 && d2 < d1, "{d1} {d2}");
}

#[test]
fn hill_branch_oscillates_with_period_two_pi() {
    let tr = unstable_branch(&ModelId::Hill, 1e-9, 1, 40.0).unwrap();
    let section = Section { coordinate: 0, level: 3.0, direction: Direction::Increasing };
    let a = find_crossing(&tr, &section, 1, None).unwrap();
    let b = find_crossing(&tr, &section, 2, None).unwrap();
    assert!(((b.time - a.time) / (2.0 * std::f64::consts::PI) - 1.0).abs() < 0.15);
}

#[test]
fn wave_count_of_the_first_branch() {
    let model = ModelId::circular(sequence()[0].mu).unwrap();
    let tr = unstable_branch(&model, DEFAULT_DELTA, 1, sequence()[0].flight_time + 0.6).unwrap();
    assert_eq!(wave_count(&tr).unwrap(), 2);
    let model = ModelId::circular(sequence()[1].mu).unwrap();
    let tr = unstable_branch(&model, DEFAULT_DELTA, 1, sequence()[1].flight_time + 0.6).unwrap();
    assert_eq!(wave_count(&tr).unwrap(), 3);
}

#[test]
fn seed_outside_range_is_rejected() {
    let eq = equilibrium_data(&ModelId::Hill).unwrap();
    assert!(branch_seed(&eq, 1e-3, 1).is_err());
}

#[test]
fn lapunov_period_tends_to_the_linear_one() {
    let eq = equilibrium_data(&ModelId::Hill).unwrap();
    let orbit = lapunov(&ModelId::Hill, 1e-8, None).unwrap();
    let linear = 2.0 * std::f64::consts::PI / eq.omega2;
    assert!((orbit.period / linear - 1.0).abs() < 1e-3);
}

#[test]
fn lapunov_orbit_crosses_perpendicularly_after_half_a_period() {
    let orbit = lapunov(&ModelId::Hill, 1e-5, None).unwrap();
    let tr = propagate(&ModelId::Hill, &orbit.initial_state, 0.0, 0.75 * orbit.period, 1e-12).unwrap();
    let section = Section { coordinate: 1, level: 0.0, direction: Direction::Any };
    let ev = find_crossing(&tr, &section, 1, None).unwrap();
    assert!((ev.time - 0.5 * orbit.period).abs() < 1e-9);
    assert!(ev.state.px.abs() <= 1e-10);
    let full = propagate(&ModelId::Hill, &orbit.initial_state, 0.0, orbit.period, 1e-12).unwrap();
    assert!(full.last().distance(&orbit.initial_state) <= 1e-9);
}

#[test]
fn lapunov_energy_grows_with_amplitude() {
    let offsets = [2e-6, 5e-6, 1e-5, 2e-5];
    let orbits: Vec<_> = offsets.iter().map(|&dc| lapunov(&ModelId::Hill, dc, None).unwrap()).collect();
    for w in orbits.windows(2) {
        assert!(w[1].amplitude > w[0].amplitude);
    }
}

#[test]
fn lapunov_family_matches_the_energy_coefficient() {
    // energy offset against squared amplitude; the linear orbit has x-amplitude 2 r |Phi_12|
    let eq = equilibrium_data(&ModelId::Hill).unwrap();
    let h2 = energy_coefficient_h2(&eq).unwrap();
    let scale = 2.0 * eq.phi[(0, 1)].norm();
    let offsets = [1e-7, 2e-7, 4e-7];
    let points: Vec<(f64, f64)> = offsets
        .iter()
        .map(|&dc| {
            let o = lapunov(&ModelId::Hill, dc, None).unwrap();
            ((o.amplitude / scale).powi(2), dc)
        })
        .collect();
    // least-squares slope through the origin with a quadratic correction
    let (mut sxx, mut sxy, mut sx3, mut sx4, mut sx2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &points {
        sxx += x * x;
        sxy += x * y;
        sx3 += x * x * x;
        sx4 += x * x * x * x;
        sx2y += x * x * y;
    }
    let det = sxx * sx4 - sx3 * sx3;
    let slope = (sxy * sx4 - sx3 * sx2y) / det;
    assert!((slope / h2 - 1.0).abs() < 0.05, "{slope} vs {h2}");
}
