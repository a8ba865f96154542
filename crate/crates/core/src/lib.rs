//! Pilot-wave (de Broglie–Bohm) trajectory laboratory.
//!
//! Closed-form wavefunctions ([`wavemodels`]), adaptive integration of the
//! guidance flow ([`dynamics`]), equilibrium sampling and equivariance checks
//! ([`equilibrium`]), ensemble versus trial averages with an empty-wave
//! detection rule ([`averages`]), ergodicity diagnostics ([`ergodicity`]) and a
//! config-driven scenario runner ([`scenarios`]).

pub mod averages;
pub mod dynamics;
pub mod equilibrium;
pub mod ergodicity;
pub mod quadrature;
pub mod scenarios;
pub mod stats;
pub mod wavemodels;
