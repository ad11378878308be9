//! Scenario parameters: geometry, powers, channel statistics, uncertainty.
//!
//! Defaults follow the reference deployment: a 16-antenna terrestrial base
//! station at the origin serving four ground users, a 16-antenna fluid-array
//! base station at (0, 100, 10) m serving a 4-antenna aerial user at
//! (10, 60, 100) m, and a 16-antenna jammer at (40, 80, 10) m transmitting at
//! 30 dBm. Carrier 3 GHz (wavelength 0.1 m), movement regions 3λ × 3λ,
//! spacing floor λ/2, noise −80 dBm, per-user rate floor 1 bps/Hz, angular
//! uncertainty 4° on a 5 × 5 grid. Links carry two paths each: the tap
//! variance profile concentrates half the power in the first tap, and two
//! paths reproduce the reference rate levels and scheme gaps at the default
//! powers.

use thiserror::Error;

use crate::geometry::{GeometryError, PlacementRegion};

/// Largest supported angular uncertainty box (degrees). The jammer's nominal
/// arrival elevations are sampled with a 6° margin so every grid shift stays
/// inside the valid elevation range.
pub const MAX_DELTA_DEG: f64 = 12.0;

/// Elevation sampling margin for the jammer link (radians).
pub const JAMMER_ELEVATION_MARGIN: f64 = 6.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Geometry(#[from] GeometryError),
    #[error("count {name} must be at least 1")]
    ZeroCount { name: &'static str },
    #[error("wavelength must be positive, got {0}")]
    BadWavelength(f64),
    #[error("path count must be at least 1, got {0}")]
    BadPathCount(usize),
    #[error("minimum spacing {d} exceeds side/sqrt(2) = {bound} for region `{name}`")]
    SpacingVsSide { name: &'static str, d: f64, bound: f64 },
    #[error("power `{name}` must be finite, got {value}")]
    NonFinitePower { name: &'static str, value: f64 },
    #[error("uncertainty grid counts must be at least 1")]
    BadGrid,
    #[error("uncertainty width {0}° exceeds the supported maximum {MAX_DELTA_DEG}°")]
    DeltaTooWide(f64),
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("rate floor must be non-negative, got {0}")]
    NegativeRateFloor(f64),
    #[error("user disk radius must be non-negative, got {0}")]
    NegativeDiskRadius(f64),
}

/// How path loss scales with log-distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathLossModel {
    /// `PL = -40 - 2.8 log10(d)` dB: the literal reference formula.
    Shallow,
    /// `PL = -40 - 28 log10(d)` dB: conventional 2.8-exponent reading.
    Steep,
}

impl PathLossModel {
    pub fn db_per_decade(self) -> f64 {
        match self {
            PathLossModel::Shallow => 2.8,
            PathLossModel::Steep => 28.0,
        }
    }
}

/// All physical and statistical parameters of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Terrestrial base station antenna count `N_T`.
    pub n_tbs: usize,
    /// Fluid-array base station antenna count `N_L`.
    pub n_lbs: usize,
    /// Aerial user antenna count `N_A`.
    pub n_aerial: usize,
    /// Jammer antenna count `N_J`.
    pub n_jammer: usize,
    /// Terrestrial user count `K` (may be zero).
    pub users: usize,
    /// Carrier wavelength λ (meters).
    pub wavelength: f64,
    /// Transmit region side in wavelengths (`A_t/λ`).
    pub side_tx_wl: f64,
    /// Receive region side in wavelengths (`A_r/λ`).
    pub side_rx_wl: f64,
    /// Minimum antenna spacing in wavelengths (`D/λ`).
    pub spacing_wl: f64,
    /// 3-D node positions (meters).
    pub tbs_pos: [f64; 3],
    pub lbs_pos: [f64; 3],
    pub aerial_pos: [f64; 3],
    pub jammer_pos: [f64; 3],
    /// Terrestrial users are drawn uniformly from a disk at this center.
    pub user_center: [f64; 3],
    pub user_radius: f64,
    /// LBS maximum transmit power (dBm).
    pub lbs_power_dbm: f64,
    /// Estimated jammer transmit power (dBm).
    pub jammer_power_dbm: f64,
    /// Noise power, every receiver (dBm).
    pub noise_dbm: f64,
    /// Per-user rate floor (bps/Hz), identical for all users.
    pub rate_min: f64,
    /// Paths per link `L` (same for every link).
    pub paths: usize,
    /// Path-loss slope switch.
    pub path_loss: PathLossModel,
    /// Total angular uncertainty width Δ (degrees); the offset box is
    /// `[-Δ/2, Δ/2]` in both elevation and azimuth.
    pub delta_deg: f64,
    /// Grid counts over the uncertainty box.
    pub grid_theta: usize,
    pub grid_phi: usize,
    /// Monte Carlo controls.
    pub trials: usize,
    pub base_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_tbs: 16,
            n_lbs: 16,
            n_aerial: 4,
            n_jammer: 16,
            users: 4,
            wavelength: 0.1,
            side_tx_wl: 3.0,
            side_rx_wl: 3.0,
            spacing_wl: 0.5,
            tbs_pos: [0.0, 0.0, 10.0],
            lbs_pos: [0.0, 100.0, 10.0],
            aerial_pos: [10.0, 60.0, 100.0],
            jammer_pos: [40.0, 80.0, 10.0],
            user_center: [40.0, 30.0, 1.5],
            user_radius: 10.0,
            lbs_power_dbm: 10.0,
            jammer_power_dbm: 30.0,
            noise_dbm: -80.0,
            rate_min: 1.0,
            paths: 2,
            path_loss: PathLossModel::Shallow,
            delta_deg: 4.0,
            grid_theta: 5,
            grid_phi: 5,
            trials: 50,
            base_seed: 1,
        }
    }
}

/// Convert dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Convert a path-loss value in dB to a linear power gain.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ScenarioConfig {
    /// Transmit-side (LBS) placement region in meters.
    pub fn region_tx(&self) -> PlacementRegion {
        PlacementRegion {
            side: self.side_tx_wl * self.wavelength,
            min_distance: self.spacing_wl * self.wavelength,
        }
    }

    /// Receive-side (aerial) placement region in meters.
    pub fn region_rx(&self) -> PlacementRegion {
        PlacementRegion {
            side: self.side_rx_wl * self.wavelength,
            min_distance: self.spacing_wl * self.wavelength,
        }
    }

    pub fn lbs_power_watts(&self) -> f64 {
        dbm_to_watts(self.lbs_power_dbm)
    }

    pub fn jammer_power_watts(&self) -> f64 {
        dbm_to_watts(self.jammer_power_dbm)
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Half-width of the uncertainty box in radians.
    pub fn delta_half_rad(&self) -> f64 {
        0.5 * self.delta_deg.to_radians()
    }

    /// Path loss in dB at link distance `d` meters.
    pub fn path_loss_db(&self, d: f64) -> f64 {
        -40.0 - self.path_loss.db_per_decade() * d.log10()
    }

    /// Check every invariant; returns the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("n_tbs", self.n_tbs),
            ("n_lbs", self.n_lbs),
            ("n_aerial", self.n_aerial),
            ("n_jammer", self.n_jammer),
        ] {
            if v == 0 {
                return Err(ConfigError::ZeroCount { name });
            }
        }
        if !(self.wavelength > 0.0) {
            return Err(ConfigError::BadWavelength(self.wavelength));
        }
        if self.paths == 0 {
            return Err(ConfigError::BadPathCount(self.paths));
        }
        for (name, power) in [
            ("lbs_power_dbm", self.lbs_power_dbm),
            ("jammer_power_dbm", self.jammer_power_dbm),
            ("noise_dbm", self.noise_dbm),
        ] {
            if !power.is_finite() {
                return Err(ConfigError::NonFinitePower { name, value: power });
            }
        }
        if self.rate_min < 0.0 {
            return Err(ConfigError::NegativeRateFloor(self.rate_min));
        }
        if self.user_radius < 0.0 {
            return Err(ConfigError::NegativeDiskRadius(self.user_radius));
        }
        let d = self.spacing_wl * self.wavelength;
        for (name, side_wl, count) in [
            ("tx", self.side_tx_wl, self.n_lbs),
            ("rx", self.side_rx_wl, self.n_aerial),
        ] {
            let side = side_wl * self.wavelength;
            let bound = side / 2f64.sqrt();
            if d > bound {
                return Err(ConfigError::SpacingVsSide { name, d, bound });
            }
            let region = PlacementRegion::new(side, d)?;
            region.admits(count)?;
        }
        if self.grid_theta == 0 || self.grid_phi == 0 {
            return Err(ConfigError::BadGrid);
        }
        if self.delta_deg > MAX_DELTA_DEG {
            return Err(ConfigError::DeltaTooWide(self.delta_deg));
        }
        if self.trials == 0 {
            return Err(ConfigError::NoTrials);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn spacing_larger_than_region_rejected() {
        let cfg = ScenarioConfig {
            spacing_wl: 4.0,
            ..Default::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::SpacingVsSide { .. })
        ));
    }

    #[test]
    fn packing_bound_named_in_error() {
        // 16 LBS antennas at spacing λ/2 cannot fit a 1λ square.
        let cfg = ScenarioConfig {
            side_tx_wl: 1.0,
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("packing"));
    }

    #[test]
    fn dbm_conversions() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_watts(10.0) - 0.01).abs() < 1e-12);
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-23);
    }

    #[test]
    fn path_loss_examples() {
        let cfg = ScenarioConfig::default();
        assert!((cfg.path_loss_db(1.0) + 40.0).abs() < 1e-12);
        assert!((cfg.path_loss_db(100.0) + 45.6).abs() < 1e-12);
        let steep = ScenarioConfig {
            path_loss: PathLossModel::Steep,
            ..Default::default()
        };
        assert!((steep.path_loss_db(100.0) + 96.0).abs() < 1e-12);
    }
}
