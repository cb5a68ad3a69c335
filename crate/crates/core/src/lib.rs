//! Simulation and fitting toolkit for multiphoton interference at asymmetric
//! beam splitters.
//!
//! The crate is layered bottom-up:
//!
//! * [`fock`]: multimode bosonic Fock states, linear mode transforms and a
//!   permanent-based transition amplitude.
//! * [`optics`]: beam splitters, half-wave plates and phase shifters composed
//!   into circuits, with internal-mode-blind detection.
//! * [`source`]: double-pair input states (ideal, Schmidt-mode mismatched,
//!   delayed).
//! * [`scan`]: the delay, HWP-angle and phase scans as probability tables,
//!   plus seeded Poisson sampling.
//! * [`fit`]: dip, theta and fringe models with a Levenberg-Marquardt fitter
//!   and the HWP1 balance search.
//! * [`cli`] and [`report`]: the command-line front end and the built-in
//!   check table.

pub mod cli;
pub mod error;
pub mod fit;
pub mod fock;
pub mod optics;
pub mod report;
pub mod scan;
pub mod source;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
