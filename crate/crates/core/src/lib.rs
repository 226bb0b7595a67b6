//! Laboratory for the continuous Heavy-Ball dynamics on
//! Polyak-Lojasiewicz objectives: ODE integration against closed-form
//! oracles, damping-parameter tuning with linear-rate certificates,
//! sampled verification of geometric conditions, a Moreau-envelope layer
//! for nonsmooth convex problems, and pointwise certificate checking.

pub mod certificates;
pub mod error;
pub mod geometry;
pub mod integrator;
pub mod moreau;
pub mod numerics;
pub mod objectives;
pub mod verify;

pub use error::{Error, Result};
