//! Boundary potential solver: source potentials, Volterra kernels, the
//! vertex system and evaluation of the resulting field.

pub mod kernel;
pub mod march;
pub mod field;
pub mod source;
pub mod vertex;

pub use kernel::{kernel_eval, layer_primitive, KernelId, KernelTable};
pub use vertex::{assemble_vertex_matrix, bond_matrix, displayed_bond_matrix};
