//! Receive beampattern and channel-gain-map exports.

use fluidbeam::channel::{
    field_response_from_waves, sigma_g, wave_vector_unchecked, LinkModel, Side,
};
use fluidbeam::geometry::{PlacementRegion, PositionVector};
use fluidbeam::{CVector, Complex64, Point};

use crate::fmt9;

/// Amplitude-to-dB conversion (`20·log10`), floored far below any pattern
/// of interest.
pub fn amplitude_db(a: f64) -> f64 {
    20.0 * a.max(1e-150).log10()
}

/// Power-to-dB conversion (`10·log10`).
pub fn power_db(p: f64) -> f64 {
    10.0 * p.max(1e-300).log10()
}

/// Receive array gain `|v^H f(θ, φ)|` over an angle grid, normalized so the
/// peak sits at 0 dB. Rows follow `thetas`, columns follow `phis`.
pub fn beampattern(
    v_a: &CVector,
    r_apv: &PositionVector,
    lambda: f64,
    thetas: &[f64],
    phis: &[f64],
) -> Vec<Vec<f64>> {
    let mut raw = Vec::with_capacity(thetas.len());
    let mut peak = 0.0f64;
    for &theta in thetas {
        let mut row = Vec::with_capacity(phis.len());
        for &phi in phis {
            let wave = wave_vector_unchecked(theta, phi, Side::Receive);
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, p) in r_apv.points().iter().enumerate() {
                let f = field_response_from_waves(p, &[wave], lambda);
                acc += v_a[m].conj() * f[0];
            }
            let a = acc.norm();
            peak = peak.max(a);
            row.push(a);
        }
        raw.push(row);
    }
    let peak = peak.max(1e-300);
    raw.iter()
        .map(|row| row.iter().map(|a| amplitude_db(a / peak)).collect())
        .collect()
}

/// Channel power gain (dB) of a single receive antenna swept over the
/// region on a square grid: `‖f(g)^H Σ G‖²` per grid point. Returns the
/// axis coordinates and the row-major gain matrix (rows follow `ys`).
pub fn channel_gain_map(
    region: &PlacementRegion,
    step: f64,
    link: &LinkModel,
    tx_apv: Option<&PositionVector>,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let sigma_bar = sigma_g(link, tx_apv, lambda).expect("transmit side resolved");
    let waves = link.rx.paths.wave_vectors();
    let half = region.half();
    let n = (2.0 * half / step).floor() as usize + 1;
    let coords: Vec<f64> = (0..n).map(|i| -half + i as f64 * step).collect();
    let mut rows = Vec::with_capacity(n);
    for &y in &coords {
        let mut row = Vec::with_capacity(n);
        for &x in &coords {
            let f = field_response_from_waves(&Point::new(x, y), &waves, lambda);
            let eff = f.adjoint() * &sigma_bar;
            row.push(power_db(eff.norm_squared()));
        }
        rows.push(row);
    }
    (coords.clone(), coords, rows)
}

/// Render a wide CSV grid: header `row\col` then the column coordinates,
/// one row per row coordinate.
pub fn grid_csv(row_label: &str, rows: &[f64], cols: &[f64], values: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(row_label);
    for c in cols {
        out.push(',');
        out.push_str(&fmt9(*c));
    }
    out.push('\n');
    for (r, row) in rows.iter().zip(values) {
        out.push_str(&fmt9(*r));
        for v in row {
            out.push(',');
            out.push_str(&fmt9(*v));
        }
        out.push('\n');
    }
    out
}
