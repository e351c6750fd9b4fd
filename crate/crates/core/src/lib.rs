//! Spectral stability of vortices in the two-dimensional trapped
//! Gross–Pitaevskii equation, computed with an exterior-product Evans function.

pub mod evans;
pub mod krein;
pub mod linearized;
pub mod ode;
pub mod profile;
pub mod quad;
pub mod sim;
pub mod special;
pub mod symmetry;

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;
