//! State representations and inner-product geometry: grid wavefunctions,
//! finite kets, statistical operators, tensor products and partial traces.

mod density;
mod finite;
mod grid;

pub use density::{
    diagonal_operator, reduced_from_ket, DensityOperator, WeightedEnsemble, DENSITY_DIM_CAP,
};
pub use finite::{FiniteKet, KET_DIM_CAP};
pub use grid::{GaussianSpec, GridSpec, GridWavefunction, GRID_POINT_CAP};
