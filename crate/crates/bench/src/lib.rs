//! Fixtures shared by the benchmarks.

use l2dyn::orbits::{homoclinic, HomoclinicOrbit, DEFAULT_DELTA};
use l2dyn::{ModelId, PhaseState, Result};

/// Homoclinic mass ratio with two waves, as tabulated.
pub const MU_2: f64 = 0.4253863522e-2;
/// Homoclinic mass ratio with five waves, as tabulated.
pub const MU_5: f64 = 0.1036375967e-3;

pub fn circular_model() -> ModelId {
    ModelId::circular(MU_2).expect("valid mass ratio")
}

/// A point on a bounded orbit around the larger primary.
pub fn interior_state() -> PhaseState {
    PhaseState::new(0.5, 0.0, 0.0, 0.9)
}

pub fn two_wave_orbit() -> Result<HomoclinicOrbit> {
    homoclinic(MU_2, 2, DEFAULT_DELTA)
}
