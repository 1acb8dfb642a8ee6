use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

pub type Vec4 = Vector4<f64>;

/// Point in the rotating frame: positions and conjugate momenta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
}

impl PhaseState {
    pub const fn new(x: f64, y: f64, px: f64, py: f64) -> Self {
        Self { x, y, px, py }
    }

    pub fn from_vec(v: &Vec4) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vec(&self) -> Vec4 {
        Vec4::new(self.x, self.y, self.px, self.py)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.px, self.py]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// Euclidean distance in phase space.
    pub fn distance(&self, other: &PhaseState) -> f64 {
        (self.to_vec() - other.to_vec()).norm()
    }

    /// Synodic velocity (x', y') recovered from the momenta.
    pub fn velocity(&self) -> (f64, f64) {
        (self.px + self.y, self.py - self.x)
    }
}

impl From<Vec4> for PhaseState {
    fn from(v: Vec4) -> Self {
        Self::from_vec(&v)
    }
}

impl From<PhaseState> for Vec4 {
    fn from(s: PhaseState) -> Self {
        s.to_vec()
    }
}
