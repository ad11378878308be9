//! Fluid-antenna beamforming simulator.
//!
//! A dual-layer MIMO downlink is modeled: a terrestrial base station with a
//! fixed array serves single-antenna ground users while a second base station
//! with repositionable (fluid) antennas serves an aerial user whose receive
//! array is also fluid, all under a high-power jammer whose arrival angles are
//! only known up to a box of uncertainty. The solver alternately optimizes
//! the two transmit beamformers, the receive combiner, and both antenna
//! position vectors to maximize the worst-case aerial rate subject to
//! per-user rate floors.
//!
//! Module layout:
//! - [`geometry`]: placement regions, spacing checks, KD-tree range queries
//! - [`channel`]: field-response channel synthesis and scenario sampling
//! - [`robust`]: angular grid, convex-hull weights, worst-case covariance
//! - [`beamforming`]: auxiliary updates and all beam/combiner solutions
//! - [`placement`]: surrogate descent plus the geometric boundary method
//! - [`solver`]: the outer block-coordinate loop and baseline schemes
//! - [`config`]: scenario parameters and validation

mod linalg;
pub mod beamforming;
pub mod channel;
pub mod config;
pub mod geometry;
pub mod placement;
pub mod robust;
pub mod solver;

pub use num_complex::Complex64;

/// Complex column vector used throughout the signal-processing code.
pub type CVector = nalgebra::DVector<Complex64>;
/// Complex matrix used throughout the signal-processing code.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// 2-D point or direction in the local antenna coordinate frame (meters).
pub type Point = nalgebra::Vector2<f64>;
