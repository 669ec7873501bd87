//! Reduction pipeline from bounded multivariate polynomial systems (and
//! 3-player games) to Leontief exchange markets whose equilibria correspond
//! one-to-one with the system's solutions.
//!
//! Modules:
//! - [`rational`]: exact arbitrary-precision rationals.
//! - [`poly`]: polynomial systems, evaluation, residuals, size accounting.
//! - [`reduce`]: decomposition into EQ/LIN/QD relations and homogenization.
//! - [`market`]: Leontief exchange markets, demand, equilibrium verification.
//! - [`gadgets`]: relation-to-submarket compiler, lifting, projection,
//!   closed-submarket audit.
//! - [`nash`]: 3-player games encoded as polynomial systems.
//! - [`ncp`]: AD-NCP system for PLC markets and ETR (SMT-LIB) export.
//! - [`oracle`]: desk-scale brute-force solvers used as independent ground
//!   truth.

pub mod rational;
pub mod poly;
pub mod reduce;
pub mod market;
pub mod gadgets;
pub mod nash;
pub mod ncp;
pub mod oracle;

pub use rational::Rational;
