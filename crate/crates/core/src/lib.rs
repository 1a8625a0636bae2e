//! Coherence-based steering witnesses and their resource theory.
//!
//! Alice measures her half of a shared state and Bob either distills
//! coherence from the conditional states he receives or estimates it with
//! the dephased entropy. Any local-hidden-state model keeps the best
//! conditional distillable coherence below the smallest conditional dephased
//! entropy; [`steering::sivp`] measures by how much an assemblage breaks that
//! bound.

pub mod channels;
pub mod error;
pub mod figures;
pub mod incompat;
pub mod infotheory;
pub mod io;
pub mod qmat;
pub mod states;
pub mod steering;
pub mod suites;
pub mod tomo;

pub use error::{QcurError, Result};
