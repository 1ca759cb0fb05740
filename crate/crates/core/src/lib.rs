//! Numerical toolkit for concentrating solutions of critical elliptic systems in R⁴.
//!
//! The crate computes Green and Robin functions of bounded four-dimensional
//! domains, projects Aubin–Talenti bubbles onto H¹₀, integrates concentrated
//! integrands, evaluates the reduced energy of a spike ensemble and studies the
//! radial Brezis–Nirenberg problem on the unit ball.

pub mod bubble;
pub mod config;
pub mod constants;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod green_robin;
pub mod projection;
pub mod quadrature;
pub mod radial_solver;
pub mod reduced_energy;
pub mod verify;

pub use error::{Result, SpikeError};
pub use geometry::{Box4, Point4};
