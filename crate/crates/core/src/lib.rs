pub mod equilibria;
pub mod error;
pub mod integrate;
pub mod melnikov;
pub mod models;
pub mod normalform;
pub mod orbits;
pub mod poly;
pub mod quad;
pub mod roots;
pub mod state;

pub use error::{Error, Result};
pub use models::ModelId;
pub use state::{PhaseState, Vec4};
