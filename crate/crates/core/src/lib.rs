//! Simulation of a non-destructive vacuum measurement on a cavity mode.
//!
//! A Λ atom prepared in `g'` is swept through a counter-intuitive pulse
//! pair (laser on `g–e`, cavity on `g'–e`). Every Fock component `n ≥ 1`
//! follows the dark state to `|g, n−1>`, while `|g', 0>` is untouched, so a
//! readout of the atom projects the field onto the vacuum or its
//! complement. Running the sweep forwards adds the photon back.
//!
//! Units: `hbar = 1`, rates in units of the peak cavity coupling `g`, times
//! in `1/g`.

pub mod adiabatic;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod harness;
pub mod integrate;
pub mod output;
pub mod protocol;
pub mod pulses;
pub mod search;
pub mod wigner;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
