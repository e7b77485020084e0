//! Numerical laboratory for the planar dynamics of a deformable satellite
//! orbiting a fixed attracting center.
//!
//! The satellite is a point cloud whose shape may deform slightly; its
//! configuration is reduced by the rotational symmetry of the plane to the
//! coordinates (R, chi, beta, J1, J2, J3, z1..zn): orbital radius, attitude
//! angle relative to the orbital ray, internal twist angle, moment-of-inertia
//! increments, and auxiliary shape coordinates. The crate provides
//!
//! * rigid-body kinematics and the 24-fold principal-frame covering
//!   ([`kinematics`]),
//! * gravitational and elastic potentials with analytic gradients
//!   ([`potentials`]),
//! * the reduced equations of motion with Rayleigh dissipation and their
//!   integrators ([`dynamics`], [`integrate`]),
//! * relative-equilibrium solving and stability experiments
//!   ([`equilibrium`]),
//! * a JSON-configured command-line interface ([`config`], [`cli`]).
//!
//! Quantities are expressed in nondimensional units chosen so that the
//! default configuration has order-one radius and frequencies (orbital
//! radius near 2, mean motion near 1.1); see the repository README for the
//! scaling conventions and the default constants.

pub mod body;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod integrate;
pub mod kinematics;
pub mod potentials;
#[doc(hidden)]
pub mod testutil;
pub mod unreduced;

pub use error::{Error, Result};
