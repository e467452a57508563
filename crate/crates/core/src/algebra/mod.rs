//! Composite atoms-plus-mode Hilbert space and the operator/state algebra
//! over it.

pub mod expm;
pub mod local;
mod operator;
mod space;
mod sparse;

pub use operator::{
    boson_ops, collective, collective_sx, displacement_series, embed_atom_op, embed_mode_op, mode_annihilation,
    DensityMatrix, Operator, SeriesOrder, StateVector,
};
pub(crate) use operator::{cr, normal_ordered, sideband_coefficient, top_fock_population};
pub use space::{make_space, BasisLabel, Level, Space};
pub use sparse::SparseMatrix;
