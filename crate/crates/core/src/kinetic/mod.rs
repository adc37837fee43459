//! Discrete-velocity kinetic layer: grids, Maxwellians, projections, BGK.

pub mod grid;
pub mod maxwellian;
pub mod projection;

pub use grid::{Quadrature, VelocityGrid};
pub use maxwellian::{maxwellian, moments, write_maxwellian, DiscreteMaxwellian};
pub use projection::{
    bgk_linearized, streaming_of_maxwellian, CollisionFrequency, MicroBasis,
};
