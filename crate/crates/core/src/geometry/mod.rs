//! Flat good orbifolds `T^n / G`: points, local groups, the maximal stratum
//! `Z`, distance, exponential map, singular projection and the convenient
//! radius ρ.

mod action;
mod orbifold;
mod preset;
mod torus;

pub use action::{Isometry, IsometryAction};
pub use orbifold::{GoodOrbifold, LocalGroupInfo, MaxStratum, OrbifoldPoint};
pub use preset::{GroupElementConfig, OrbifoldConfig, PRESET_NAMES};
pub use torus::{FlatTorus, Point};
