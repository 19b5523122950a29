//! Displaced-frame master-equation simulation of driven cavity QED and
//! cavity optomechanics.

pub mod analysis;
pub mod error;
pub mod fockops;
pub mod frames;
pub mod hamiltonian;
pub mod io;
pub mod lindblad;
pub mod models;
pub mod protocol;
pub mod sparse;
pub mod theory;

pub use error::{Result, SimError};
