//! Experiment harness around the fluidbeam solver: configuration files,
//! Monte Carlo sweeps with CSV output, and beampattern / channel-gain-map
//! exports.

pub mod configfile;
pub mod experiment;
pub mod pattern;

/// Format a float with nine significant digits, the fixed CSV convention.
pub fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}
