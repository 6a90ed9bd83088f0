//! Exact change-of-weights calculus for trianguline parameter data.
//!
//! Characters are formal group elements with exact weights and valuations,
//! triangulated modules are ordered parameter lists with extension flags, and
//! the Sen-lattice, slope, refinement and deformation layers operate on those.

pub mod error;
pub mod exactalg;

pub use error::{Error, Result};
pub mod characters;
pub mod refinements;
pub mod trianguline;
pub mod senlattice;
pub mod slopes;
pub mod deformations;
pub mod io;
pub mod cli;
