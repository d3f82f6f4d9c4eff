//! Simulation and verification toolkit for a local hidden-trajectory account of
//! spin-½ quantum mechanics.
//!
//! The crate is organised by concern:
//!
//! * [`probspace`]: finite probability spaces, partition conditioning, the two
//!   locality predicates and the Bell/CHSH functionals.
//! * [`dynamics`]: the A/B sub-ensemble Langevin engine with the
//!   velocity-ordered trajectory exchange.
//! * [`spin`]: Pauli algebra, Euler-angle rotations, Stern–Gerlach amplitudes
//!   and singlet correlations.
//! * [`epr`]: paired sources with shared seeds, detection models and the
//!   statistical test battery.
//! * [`oracle`]: an independent Crank–Nicolson Schrödinger solver used to
//!   validate ensemble densities.
//! * [`packet`]: Gaussian packets run through the ensemble and the oracle side
//!   by side.
//!
//! Data-parallel loops go through [`par`]; with the `parallel` feature disabled
//! everything runs sequentially and produces bit-identical results.

pub mod dynamics;
pub mod epr;
pub mod oracle;
pub mod packet;
pub mod par;
pub mod probspace;
pub mod rng;
pub mod spin;

pub use par::Execution;
