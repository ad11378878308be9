//! Angular-uncertainty handling for the jammer link.
//!
//! The jammer's arrival angles are only known up to a box. The box is
//! discretized on a uniform grid, each grid point yields one candidate
//! channel `H⁽ᵖ⁾`, and the worst case is modeled as a convex combination of
//! the per-sample outer products with weights proportional to the jamming
//! power each sample delivers through the current combiner. The jammer's
//! transmit beam is unknown, so its received power is upper-bounded by
//! `p̂_J · vᴴ H Hᴴ v` (Cauchy–Schwarz with `‖w_J‖² = p̂_J`).

use thiserror::Error;

use crate::channel::{field_response_matrix, sigma_g, LinkModel};
use crate::geometry::PositionVector;
use crate::{CMatrix, CVector, Point};

#[derive(Debug, Error, PartialEq)]
pub enum RobustError {
    #[error("covariance input is not Hermitian (max asymmetry {0:.3e})")]
    NonHermitianInput(f64),
}

/// Angular offset box and grid resolution for the jamming channel.
///
/// Bounds are offsets in radians applied to every receive-path angle of the
/// nominal jammer link; `p = (i₂−1)·Q₁ + i₁` indexes the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub q1: usize,
    pub q2: usize,
}

impl UncertaintySet {
    /// Symmetric box of total width `delta` radians in both angles.
    pub fn centered(delta: f64, q1: usize, q2: usize) -> Self {
        let h = 0.5 * delta;
        Self {
            theta_lo: -h,
            theta_hi: h,
            phi_lo: -h,
            phi_hi: h,
            q1,
            q2,
        }
    }

    pub fn sample_count(&self) -> usize {
        self.q1 * self.q2
    }

    /// Grid offsets `(θ, φ)` in sample order.
    pub fn offsets(&self) -> Vec<(f64, f64)> {
        let step = |lo: f64, hi: f64, q: usize, i: usize| {
            if q > 1 {
                lo + (hi - lo) * i as f64 / (q as f64 - 1.0)
            } else {
                lo
            }
        };
        let mut out = Vec::with_capacity(self.sample_count());
        for i2 in 0..self.q2 {
            for i1 in 0..self.q1 {
                out.push((
                    step(self.theta_lo, self.theta_hi, self.q1, i1),
                    step(self.phi_lo, self.phi_hi, self.q2, i2),
                ));
            }
        }
        out
    }
}

/// Position-independent jamming grid data: the per-sample shifted receive
/// wave vectors plus the shared transmit-side contraction `Σ_JA · G_JA`.
#[derive(Debug, Clone)]
pub struct JammerGrid {
    /// Shifted receive wave vectors, one set of `L_r` per grid sample.
    pub wave_sets: Vec<Vec<Point>>,
    /// `Σ_JA · G_JA`, shared by all samples (`L_r × N_J`).
    pub sigma_bar: CMatrix,
    pub lambda: f64,
}

impl JammerGrid {
    pub fn new(set: &UncertaintySet, link: &LinkModel, lambda: f64) -> Self {
        let sigma_bar = sigma_g(link, None, lambda).expect("jammer transmit side is fixed");
        let wave_sets = set
            .offsets()
            .iter()
            .map(|&(dt, dp)| {
                link.rx
                    .paths
                    .elevations
                    .iter()
                    .zip(&link.rx.paths.azimuths)
                    .map(|(&t, &p)| {
                        crate::channel::wave_vector_unchecked(
                            t + dt,
                            p + dp,
                            crate::channel::Side::Receive,
                        )
                    })
                    .collect()
            })
            .collect();
        Self {
            wave_sets,
            sigma_bar,
            lambda,
        }
    }

    /// Assemble all `Q` candidate channels `H⁽ᵖ⁾ = F⁽ᵖ⁾ᴴ Σ G` at `r̃`.
    pub fn sample_channels(&self, rx_apv: &PositionVector) -> Vec<CMatrix> {
        self.wave_sets
            .iter()
            .map(|waves| {
                let f = field_response_matrix(rx_apv.points(), waves, self.lambda);
                f.adjoint() * &self.sigma_bar
            })
            .collect()
    }
}

/// Grid-sample channels for the uncertainty box around the nominal link.
pub fn discretize(
    set: &UncertaintySet,
    rx_apv: &PositionVector,
    link: &LinkModel,
    lambda: f64,
) -> Vec<CMatrix> {
    JammerGrid::new(set, link, lambda).sample_channels(rx_apv)
}

/// Convex-hull weights over the grid samples.
#[derive(Debug, Clone, PartialEq)]
pub struct HullWeights {
    pub weights: Vec<f64>,
    /// Set when every sample had zero power and uniform weights were used.
    pub degenerate: bool,
}

impl HullWeights {
    pub fn uniform(q: usize) -> Self {
        Self {
            weights: vec![1.0 / q as f64; q],
            degenerate: false,
        }
    }
}

/// Jamming power of one sample through combiner `v`: `vᴴ H Hᴴ v = ‖Hᴴv‖²`.
pub fn sample_power(v: &CVector, sample: &CMatrix) -> f64 {
    sample.ad_mul(v).norm_squared()
}

/// Weights proportional to per-sample received jamming power,
/// `μ_p = vᴴH⁽ᵖ⁾H⁽ᵖ⁾ᴴv / Σ_p' vᴴH⁽ᵖ'⁾H⁽ᵖ'⁾ᴴv`. When every sample power
/// vanishes the weights fall back to uniform and the result is flagged.
pub fn optimal_hull_weights(v: &CVector, samples: &[CMatrix]) -> HullWeights {
    assert!(!samples.is_empty(), "need at least one grid sample");
    let powers: Vec<f64> = samples.iter().map(|s| sample_power(v, s)).collect();
    let total: f64 = powers.iter().sum();
    if total <= 0.0 {
        return HullWeights {
            weights: vec![1.0 / samples.len() as f64; samples.len()],
            degenerate: true,
        };
    }
    HullWeights {
        weights: powers.iter().map(|p| p / total).collect(),
        degenerate: false,
    }
}

fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Worst-case interference-plus-noise covariance
/// `Ã = A₁ + p̂_J Σ_p μ_p H⁽ᵖ⁾H⁽ᵖ⁾ᴴ`; the result is explicitly
/// re-symmetrized so downstream Cholesky factorizations are stable.
pub fn worst_case_covariance(
    mu: &HullWeights,
    samples: &[CMatrix],
    jammer_power: f64,
    a1: &CMatrix,
) -> Result<CMatrix, RobustError> {
    let scale = a1.iter().map(|e| e.norm()).fold(1.0f64, f64::max);
    let asym = hermitian_asymmetry(a1);
    if asym > 1e-12 * scale {
        return Err(RobustError::NonHermitianInput(asym));
    }
    let mut cov = a1.clone();
    for (w, h) in mu.weights.iter().zip(samples) {
        let scaled = h.map(|e| e * num_complex::Complex64::new((jammer_power * w).sqrt(), 0.0));
        cov += &scaled * scaled.adjoint();
    }
    let sym = cov.adjoint();
    cov += sym;
    cov.scale_mut(0.5);
    Ok(cov)
}
