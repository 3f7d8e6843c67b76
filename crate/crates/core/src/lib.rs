//! Constructive steering of bilinear parabolic systems
//! `u' + A u + p(t) B u = 0` to their ground state, at finite spectral
//! truncation.
//!
//! The crate is organised bottom-up:
//!
//! - [`spectral`]: eigen-data of `(A, B)`, graded norms, a-priori constants;
//! - [`catalog`]: the model problems (Fokker–Planck, drift-diffusion,
//!   degenerate operators) and their hypothesis checks;
//! - [`moment`]: minimum-norm null controls of the linearised system;
//! - [`sim`]: exponential integrators for the bilinear Galerkin system;
//! - [`steering`]: the staged local loop and the semi-global strategies;
//! - [`sde`]: Euler–Maruyama particles for the Fokker–Planck problem;
//! - [`config`] and [`report`]: run configuration and artifacts.

pub mod basis;
pub mod bessel;
pub mod catalog;
pub mod config;
pub mod control;
pub mod error;
pub mod moment;
pub mod quadrature;
pub mod report;
pub mod sde;
pub mod sim;
pub mod spectral;
pub mod steering;

pub use error::{Error, Result};
