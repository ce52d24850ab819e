//! Contact-Hamiltonian calculus, loops of contactomorphisms and fibered-sum surgery
//! on coordinate 3-manifolds.

pub mod contact;
pub mod error;
pub mod fieldcalc;
pub mod loopalg;
pub mod models;
pub mod surgery;

pub use error::{Error, Result};
