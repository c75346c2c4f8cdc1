//! Torus-invariant Sasaki–Ricci flow on weighted Sasakian 3-spheres.
//!
//! The crate is organised bottom-up:
//!
//! * [`weighted`] closed forms and coordinates of the weighted structures;
//! * [`grid`] uniform s-grids, fourth-order stencils, quadrature and the
//!   banded solver used by the time stepper;
//! * [`profile`] and [`calculus`] the transverse profile `gtilde(s)` and the
//!   quantities derived from it (curvature, measures, potential, Harnack
//!   field, transverse distances);
//! * [`soliton`] the gradient soliton for a weight pair;
//! * [`flow`] the reduced normalized flow and its monitors;
//! * [`ambient`] geometry of the weighted metric on `S^3 ⊂ R^4`.

pub mod ambient;
pub mod calculus;
pub mod error;
pub mod flow;
pub mod grid;
pub mod profile;
pub mod soliton;
pub mod weighted;

pub use error::{Error, Result};
pub use profile::{Profile, ScalarField};
pub use weighted::{closed_forms, ClosedForms, WeightedParams};
