//! Antenna-position optimization at both link ends.
//!
//! Every position-dependent quantity here is a quadratic form in per-antenna
//! field-response phases,
//! `q(p̃) = Σ_{i,j} u_i* u_j g(p_i)ᴴ Σ̃ g(p_j) = aᴴ Σ̃ a` with
//! `a = Σ_i u_i g(p_i)`, so one kernel supplies values, gradients, and
//! Hessians for the receive objective (Dinkelbach form
//! `f₁ = κ·vᴴÃ(r̃)v − |vᴴH_LA(r̃)w_L|²`), the transmit objective
//! (`f₂ = −|vᴴH_LA(t̃)w_L|²`), and the per-user constraint functions
//! (`f₃ₖ = −R″_k`, whose only `t̃` dependence is the LBS leakage term).
//!
//! Per antenna, the objective is majorized by the quadratic surrogate
//! `f(p) + ∇fᵀ(x−p) + τ/2‖x−p‖²` with `τ ≥ λ_max(∇²f)` at the expansion
//! point; the unconstrained minimizer is repaired against the spacing and
//! region constraints by enumerating candidate points on the constraint
//! boundaries (square projection, circle-line, circle-circle, and
//! circle-edge intersections) and keeping the nearest feasible one inside
//! the surrogate-improvement ball. Because the curvature bound is local, the
//! majorization chain is re-checked numerically on every step and violating
//! steps are rejected.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::beamforming::{qos_budgets, BeamformingState};
use crate::channel::{
    field_response_from_waves, field_response_matrix, sigma_g, ChannelRealization, ChannelSet,
};
use crate::geometry::{build_index, project_to_square, PlacementRegion, PositionVector};
use crate::robust::JammerGrid;
use crate::{CMatrix, CVector, Point};

use std::f64::consts::TAU;

/// Quadratic form `aᴴ Σ̃ a` over antenna positions through their
/// field-response phases, with `a = Σ_i u_i g(p_i)`.
#[derive(Debug, Clone)]
pub struct PhaseQuadForm {
    waves: Vec<Point>,
    sigma: CMatrix,
    weights: CVector,
    lambda: f64,
}

impl PhaseQuadForm {
    pub fn new(waves: Vec<Point>, sigma: CMatrix, weights: CVector, lambda: f64) -> Self {
        debug_assert_eq!(sigma.nrows(), waves.len());
        debug_assert_eq!(sigma.ncols(), waves.len());
        Self {
            waves,
            sigma,
            weights,
            lambda,
        }
    }

    /// Rank-one form `|bᴴ a|²`.
    pub fn rank_one(waves: Vec<Point>, b: CVector, weights: CVector, lambda: f64) -> Self {
        let sigma = &b * b.adjoint();
        Self::new(waves, sigma, weights, lambda)
    }

    fn aggregate(&self, pts: &[Point]) -> CVector {
        let mut a = CVector::zeros(self.waves.len());
        for (i, p) in pts.iter().enumerate() {
            let g = field_response_from_waves(p, &self.waves, self.lambda);
            a += g.map(|e| e * self.weights[i]);
        }
        a
    }

    pub fn value(&self, pts: &[Point]) -> f64 {
        let a = self.aggregate(pts);
        (a.adjoint() * &self.sigma * &a)[(0, 0)].re
    }

    /// Gradient and Hessian with respect to the position of antenna `m`.
    pub fn grad_hess(&self, pts: &[Point], m: usize) -> (Point, Matrix2<f64>) {
        let k = TAU / self.lambda;
        let a = self.aggregate(pts);
        let sa = &self.sigma * &a;
        let g = field_response_from_waves(&pts[m], &self.waves, self.lambda);
        let u = self.weights[m];

        let l_n = self.waves.len();
        let mut gx = CVector::zeros(l_n);
        let mut gy = CVector::zeros(l_n);
        let mut s1x = Complex64::default();
        let mut s1y = Complex64::default();
        let mut s2xx = Complex64::default();
        let mut s2xy = Complex64::default();
        let mut s2yy = Complex64::default();
        for l in 0..l_n {
            let (nx, ny) = (self.waves[l].x, self.waves[l].y);
            gx[l] = g[l] * nx;
            gy[l] = g[l] * ny;
            let c = sa[l].conj();
            s1x += c * gx[l];
            s1y += c * gy[l];
            s2xx += c * gx[l] * nx;
            s2xy += c * gx[l] * ny;
            s2yy += c * gy[l] * ny;
        }
        let grad = Point::new(-2.0 * k * (u * s1x).im, -2.0 * k * (u * s1y).im);

        let sgx = &self.sigma * &gx;
        let sgy = &self.sigma * &gy;
        let um2 = u.norm_sqr();
        let two_k2 = 2.0 * k * k;
        let hxx = two_k2 * (um2 * gx.dotc(&sgx).re - (u * s2xx).re);
        let hxy = two_k2 * (um2 * gy.dotc(&sgx).re - (u * s2xy).re);
        let hyy = two_k2 * (um2 * gy.dotc(&sgy).re - (u * s2yy).re);
        (grad, Matrix2::new(hxx, hxy, hxy, hyy))
    }
}

/// Dinkelbach receive objective `f₁(r̃) = κ·den(r̃) − num(r̃)`: `num` is the
/// desired-signal power, `den` collects TBS interference, weighted jamming
/// samples, and noise.
#[derive(Debug, Clone)]
pub struct ReceiveObjective {
    signal: PhaseQuadForm,
    interference: Vec<PhaseQuadForm>,
    interference_weights: Vec<f64>,
    noise: f64,
    kappa: f64,
}

impl ReceiveObjective {
    /// `(num, den)` of the signal-to-worst-case-interference ratio.
    pub fn ratio_parts(&self, pts: &[Point]) -> (f64, f64) {
        let num = self.signal.value(pts);
        let den = self.noise
            + self
                .interference
                .iter()
                .zip(&self.interference_weights)
                .map(|(f, w)| w * f.value(pts))
                .sum::<f64>();
        (num, den)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn set_kappa(&mut self, kappa: f64) {
        self.kappa = kappa;
    }

    /// Set κ to the current ratio value and return it.
    pub fn update_kappa(&mut self, pts: &[Point]) -> f64 {
        let (num, den) = self.ratio_parts(pts);
        self.kappa = num / den;
        self.kappa
    }

    pub fn value(&self, pts: &[Point]) -> f64 {
        let (num, den) = self.ratio_parts(pts);
        self.kappa * den - num
    }

    pub fn grad_hess(&self, pts: &[Point], m: usize) -> (Point, Matrix2<f64>) {
        let (gs, hs) = self.signal.grad_hess(pts, m);
        let mut grad = -gs;
        let mut hess = -hs;
        for (f, w) in self.interference.iter().zip(&self.interference_weights) {
            let (g, h) = f.grad_hess(pts, m);
            let c = self.kappa * w;
            grad += g * c;
            hess += h * c;
        }
        (grad, hess)
    }

    fn lambda(&self) -> f64 {
        self.signal.lambda
    }
}

/// Assemble the receive objective at the current beams, hull weights, and
/// transmit positions.
pub fn build_receive_objective(
    real: &ChannelRealization,
    grid: &JammerGrid,
    state: &BeamformingState,
    jam_power: f64,
) -> ReceiveObjective {
    let lambda = real.lambda;
    let v = state.v_a.clone();

    // Desired signal: rank-one Σ̃ from Σ̄_LA w_L over receive-side phases.
    let sb_la = sigma_g(&real.lbs_aerial, Some(&state.t_apv), lambda).unwrap();
    let signal = PhaseQuadForm::rank_one(
        real.lbs_aerial.rx.paths.wave_vectors(),
        &sb_la * &state.w_l,
        v.clone(),
        lambda,
    );

    // TBS interference: Σ̃ = (Σ̄_TA W_T)(Σ̄_TA W_T)ᴴ.
    let sb_ta = sigma_g(&real.tbs_aerial, None, lambda).unwrap();
    let m_ta = &sb_ta * &state.w_t;
    let mut interference = vec![PhaseQuadForm::new(
        real.tbs_aerial.rx.paths.wave_vectors(),
        &m_ta * m_ta.adjoint(),
        v.clone(),
        lambda,
    )];
    let mut weights = vec![1.0];

    // Jamming samples share Σ̃_JA; only the shifted wave vectors differ.
    let sigma_ja = &grid.sigma_bar * grid.sigma_bar.adjoint();
    for (p, waves) in grid.wave_sets.iter().enumerate() {
        interference.push(PhaseQuadForm::new(
            waves.clone(),
            sigma_ja.clone(),
            v.clone(),
            lambda,
        ));
        weights.push(jam_power * state.mu.weights[p]);
    }

    ReceiveObjective {
        signal,
        interference,
        interference_weights: weights,
        noise: real.noise_aerial * v.norm_squared(),
        kappa: 0.0,
    }
}

/// Transmit objective `f₂ = −|vᴴH_LA(t̃)w_L|²` plus the per-user constraint
/// functions `f₃ₖ(t̃) = offset_k + z_k²·|h_{L,k}(t̃)ᴴw_L|²`.
///
/// The constraint functions and the rate floor are in the natural-log units
/// of [`qos_budgets`]; `f₃ₖ ≤ −rate_floor` is the surrogate QoS constraint.
#[derive(Debug, Clone)]
pub struct TransmitObjective {
    signal: PhaseQuadForm,
    qos: Vec<TransmitQos>,
    rate_floor: f64,
}

#[derive(Debug, Clone)]
struct TransmitQos {
    quad: PhaseQuadForm,
    coeff: f64,
    offset: f64,
}

impl TransmitObjective {
    pub fn users(&self) -> usize {
        self.qos.len()
    }

    /// Rate floor in natural-log units.
    pub fn rate_floor(&self) -> f64 {
        self.rate_floor
    }

    pub fn f2(&self, pts: &[Point]) -> f64 {
        -self.signal.value(pts)
    }

    pub fn f2_grad_hess(&self, pts: &[Point], n: usize) -> (Point, Matrix2<f64>) {
        let (g, h) = self.signal.grad_hess(pts, n);
        (-g, -h)
    }

    pub fn f3(&self, k: usize, pts: &[Point]) -> f64 {
        let q = &self.qos[k];
        q.offset + q.coeff * q.quad.value(pts)
    }

    pub fn f3_grad_hess(&self, k: usize, pts: &[Point], n: usize) -> (Point, Matrix2<f64>) {
        let q = &self.qos[k];
        let (g, h) = q.quad.grad_hess(pts, n);
        (g * q.coeff, h * q.coeff)
    }

    fn lambda(&self) -> f64 {
        self.signal.lambda
    }
}

/// Assemble the transmit objective at the current receive positions, beams,
/// and auxiliaries.
pub fn build_transmit_objective(
    real: &ChannelRealization,
    ch: &ChannelSet,
    state: &BeamformingState,
    rate_min: f64,
) -> TransmitObjective {
    let lambda = real.lambda;
    // a = Σ_LAᴴ F_LA(r̃) v: receive-side contraction of the LBS link.
    let f_la = field_response_matrix(
        state.r_apv.points(),
        &real.lbs_aerial.rx.paths.wave_vectors(),
        lambda,
    );
    let a = real.lbs_aerial.prm.adjoint() * (&f_la * &state.v_a);
    let signal = PhaseQuadForm::rank_one(
        real.lbs_aerial.tx.paths.wave_vectors(),
        a,
        state.w_l.clone(),
        lambda,
    );

    let budgets = qos_budgets(ch, state, rate_min);
    let qos = real
        .lbs_user
        .iter()
        .enumerate()
        .map(|(k, link)| {
            let ones = CVector::from_element(link.prm.nrows(), Complex64::new(1.0, 0.0));
            let b = link.prm.adjoint() * ones;
            TransmitQos {
                quad: PhaseQuadForm::rank_one(
                    link.tx.paths.wave_vectors(),
                    b,
                    state.w_l.clone(),
                    lambda,
                ),
                coeff: state.z[k] * state.z[k],
                // f₃ₖ ≤ −rate_floor  ⟺  z_k²·leakage ≤ budget_k.
                offset: -(budgets[k] + rate_min * std::f64::consts::LN_2),
            }
        })
        .collect();

    TransmitObjective {
        signal,
        qos,
        rate_floor: rate_min * std::f64::consts::LN_2,
    }
}

/// `max(λ_max(H), ε)` for a symmetric 2×2 matrix; the floor
/// `ε = 1e-8·(4π/λ)²` keeps surrogate steps finite.
pub fn curvature_bound(hess: &Matrix2<f64>, lambda: f64) -> f64 {
    let (a, b, c) = (hess[(0, 0)], hess[(0, 1)], hess[(1, 1)]);
    let lmax = 0.5 * ((a + c) + ((a - c).powi(2) + 4.0 * b * b).sqrt());
    let floor = 1e-8 * (2.0 * TAU / lambda).powi(2);
    lmax.max(floor)
}

/// Feasibility slack for candidates sitting exactly on a constraint boundary.
const CANDIDATE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateCategory {
    /// Projection of the stationary point onto the square.
    Projection,
    /// Spacing circle ∩ line from its center to the stationary point.
    CircleLine,
    /// Intersection of two spacing circles.
    CircleCircle,
    /// Spacing circle ∩ region edge.
    CircleBoundary,
}

#[derive(Debug, Clone, Copy)]
pub struct CandidatePoint {
    pub position: Point,
    pub category: CandidateCategory,
}

/// Enumerate boundary candidates for a stationary point given the active
/// (nearby) antennas. Tangencies within 1e-9 collapse to a single candidate;
/// coincident circle centers yield none.
pub fn boundary_candidates(
    p_star: &Point,
    active: &[Point],
    region: &PlacementRegion,
) -> Vec<CandidatePoint> {
    let d = region.min_distance;
    let h = region.half();
    let mut out = vec![CandidatePoint {
        position: project_to_square(p_star, region),
        category: CandidateCategory::Projection,
    }];

    for a in active {
        let u = p_star - a;
        let n = u.norm();
        if n > 1e-15 {
            let dir = u / n;
            for s in [1.0, -1.0] {
                out.push(CandidatePoint {
                    position: a + dir * (s * d),
                    category: CandidateCategory::CircleLine,
                });
            }
        }
    }

    for i in 0..active.len() {
        for j in (i + 1)..active.len() {
            let (a, b) = (active[i], active[j]);
            let diff = b - a;
            let dist = diff.norm();
            if dist < 1e-15 || dist > 2.0 * d + 1e-15 {
                continue;
            }
            let mid = (a + b) * 0.5;
            let half = (d * d - 0.25 * dist * dist).max(0.0).sqrt();
            if half <= CANDIDATE_SLACK {
                out.push(CandidatePoint {
                    position: mid,
                    category: CandidateCategory::CircleCircle,
                });
            } else {
                let perp = Point::new(-diff.y, diff.x) / dist;
                for s in [1.0, -1.0] {
                    out.push(CandidatePoint {
                        position: mid + perp * (s * half),
                        category: CandidateCategory::CircleCircle,
                    });
                }
            }
        }
    }

    for a in active {
        for &edge_x in &[-h, h] {
            let dx = edge_x - a.x;
            if dx.abs() <= d {
                let dy = (d * d - dx * dx).sqrt();
                if dy <= CANDIDATE_SLACK {
                    out.push(CandidatePoint {
                        position: Point::new(edge_x, a.y),
                        category: CandidateCategory::CircleBoundary,
                    });
                } else {
                    for s in [-1.0, 1.0] {
                        let y = a.y + s * dy;
                        if y.abs() <= h + CANDIDATE_SLACK {
                            out.push(CandidatePoint {
                                position: Point::new(edge_x, y),
                                category: CandidateCategory::CircleBoundary,
                            });
                        }
                    }
                }
            }
        }
        for &edge_y in &[-h, h] {
            let dy = edge_y - a.y;
            if dy.abs() <= d {
                let dx = (d * d - dy * dy).sqrt();
                if dx <= CANDIDATE_SLACK {
                    out.push(CandidatePoint {
                        position: Point::new(a.x, edge_y),
                        category: CandidateCategory::CircleBoundary,
                    });
                } else {
                    for s in [-1.0, 1.0] {
                        let x = a.x + s * dx;
                        if x.abs() <= h + CANDIDATE_SLACK {
                            out.push(CandidatePoint {
                                position: Point::new(x, edge_y),
                                category: CandidateCategory::CircleBoundary,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

fn feasible_position(p: &Point, others: &[Point], region: &PlacementRegion) -> bool {
    if !region.contains(p) {
        return false;
    }
    let d = region.min_distance;
    others.iter().all(|o| (p - o).norm() >= d - CANDIDATE_SLACK)
}

#[derive(Debug, Clone, Copy)]
pub struct BoundaryOutcome {
    pub point: Point,
    pub moved: bool,
}

/// Geometric boundary step: return the stationary point when feasible,
/// otherwise the nearest feasible boundary candidate inside the
/// `step_radius` ball around it, otherwise hold the current position.
pub fn geometric_boundary(
    p_star: &Point,
    current: &Point,
    others: &PositionVector,
    region: &PlacementRegion,
    step_radius: f64,
) -> BoundaryOutcome {
    if feasible_position(p_star, others.points(), region) {
        return BoundaryOutcome {
            point: *p_star,
            moved: true,
        };
    }
    let index = build_index(others);
    let active_idx = index.range_query(p_star, region.min_distance + step_radius);
    let active: Vec<Point> = active_idx.iter().map(|&i| others.point(i)).collect();
    // A candidate violates spacing iff some antenna sits strictly inside
    // its D-circle, which the same index answers.
    let spacing_ok = |p: &Point| {
        index
            .range_query(p, region.min_distance - CANDIDATE_SLACK)
            .is_empty()
    };

    let mut best: Option<(f64, Point)> = None;
    for cand in boundary_candidates(p_star, &active, region) {
        let p = cand.position;
        let dist = (p - p_star).norm();
        if dist > step_radius + 1e-12 || !region.contains(&p) || !spacing_ok(&p) {
            continue;
        }
        if best.as_ref().map_or(true, |(b, _)| dist < *b) {
            best = Some((dist, p));
        }
    }
    match best {
        Some((_, p)) => BoundaryOutcome {
            point: p,
            moved: (p - current).norm() > 0.0,
        },
        None => BoundaryOutcome {
            point: *current,
            moved: false,
        },
    }
}

/// Controls for the per-antenna sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepParams {
    /// Relative objective-change tolerance across sweeps.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Optional seed for a randomized antenna visiting order.
    pub shuffle_seed: Option<u64>,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_sweeps: 30,
            shuffle_seed: None,
        }
    }
}

/// Bookkeeping from one sweep-based optimization call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub sweeps: usize,
    pub moves: usize,
    pub no_moves: usize,
    pub majorization_rejects: usize,
}

fn sweep_order(n: usize, sweep: usize, params: &SweepParams) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = params.shuffle_seed {
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ ((sweep as u64) << 17));
        order.shuffle(&mut rng);
    }
    order
}

fn others_of(pts: &[Point], m: usize) -> PositionVector {
    PositionVector::new(
        pts.iter()
            .enumerate()
            .filter(|(i, _)| *i != m)
            .map(|(_, p)| *p)
            .collect(),
    )
}

/// `f(new) ≤ surrogate(new) ≤ surrogate(old) = f(old)` within a relative
/// 1e-9; the curvature bound is local, so this is re-verified per step.
fn majorization_holds(f_old: f64, f_new: f64, surr_new: f64) -> bool {
    let tol = 1e-9 * f_old.abs().max(f_new.abs()).max(1e-300);
    f_new <= surr_new + tol && surr_new <= f_old + tol
}

/// Cyclic per-antenna descent on the Dinkelbach receive objective: refresh
/// κ, run each antenna through a surrogate step plus the geometric boundary
/// projection, and stop once the ratio stalls.
pub fn optimize_receive_apv(
    obj: &mut ReceiveObjective,
    start: &PositionVector,
    region: &PlacementRegion,
    params: &SweepParams,
) -> (PositionVector, SweepReport) {
    let mut pts: Vec<Point> = start.points().to_vec();
    let mut report = SweepReport::default();
    let mut kappa_prev = obj.update_kappa(&pts);
    for sweep in 0..params.max_sweeps {
        report.sweeps = sweep + 1;
        for m in sweep_order(pts.len(), sweep, params) {
            let f_old = obj.value(&pts);
            let (grad, hess) = obj.grad_hess(&pts, m);
            let others = others_of(&pts, m);
            // The curvature bound is local; when the majorization check
            // fails at the candidate, double τ (still a valid majorizer)
            // and retry with the shorter step.
            let mut tau = curvature_bound(&hess, obj.lambda());
            let mut accepted = false;
            let mut blocked = false;
            for _ in 0..12 {
                let step = grad / tau;
                let p_star = pts[m] - step;
                let outcome =
                    geometric_boundary(&p_star, &pts[m], &others, region, step.norm());
                if !outcome.moved {
                    blocked = true;
                    break;
                }
                let delta = outcome.point - pts[m];
                let surr_new = f_old + grad.dot(&delta) + 0.5 * tau * delta.norm_squared();
                let old = pts[m];
                pts[m] = outcome.point;
                let f_new = obj.value(&pts);
                if majorization_holds(f_old, f_new, surr_new) {
                    accepted = true;
                    break;
                }
                pts[m] = old;
                tau *= 2.0;
            }
            if accepted {
                report.moves += 1;
            } else if blocked {
                report.no_moves += 1;
            } else {
                report.majorization_rejects += 1;
            }
        }
        let kappa_new = obj.update_kappa(&pts);
        if (kappa_new - kappa_prev).abs() <= params.tol * kappa_new.abs().max(1e-300) {
            break;
        }
        kappa_prev = kappa_new;
    }
    (PositionVector::new(pts), report)
}

/// One user's surrogate QoS disk: radius `‖∇f₃ₖ/υ‖` around
/// `tₙ − ∇f₃ₖ/υ`, which always contains the expansion point, plus the data
/// to evaluate the surrogate exactly.
#[derive(Debug, Clone, Copy)]
pub struct QoSCircle {
    pub center: Point,
    pub radius: f64,
    pub curvature: f64,
    /// `f₃ₖ` at the expansion point.
    pub f3_value: f64,
}

impl QoSCircle {
    /// Surrogate value `f₃ₖ(tₙ) + υ/2·(‖x−c‖² − r²)` at `x`.
    pub fn surrogate(&self, x: &Point) -> f64 {
        self.f3_value
            + 0.5 * self.curvature * ((x - self.center).norm_squared() - self.radius * self.radius)
    }

    /// Constant part `u_{c,k}` of the expanded surrogate.
    pub fn offset(&self, t_n: &Point, grad: &Point) -> f64 {
        self.f3_value - grad.dot(t_n) + 0.5 * self.curvature * t_n.norm_squared()
    }

    /// Acceptance level for the surrogate: `−rate_floor` when the
    /// expansion point is feasible (slack is usable), otherwise the current
    /// value, so an infeasible entry can only be repaired, never worsened.
    pub fn bound(&self, rate_floor: f64) -> f64 {
        (-rate_floor).max(self.f3_value)
    }

    /// Radius of the disk on which the surrogate stays at or below
    /// [`QoSCircle::bound`]; equals `radius` when the constraint is tight at
    /// the expansion point and grows with the available slack.
    pub fn feasible_radius(&self, rate_floor: f64) -> f64 {
        let slack = 2.0 * (self.bound(rate_floor) - self.f3_value) / self.curvature;
        (self.radius * self.radius + slack).max(0.0).sqrt()
    }
}

/// Projection of `x0` onto the intersection of the QoS disks and the square
/// region by Dykstra's alternating projections (tolerance 1e-9, 500
/// cycles); `None` when the iterate fails to reach the intersection.
fn dykstra_project(
    x0: &Point,
    disks: &[(Point, f64)],
    region: &PlacementRegion,
) -> Option<Point> {
    let n_sets = disks.len() + 1;
    let mut x = *x0;
    let mut corrections = vec![Point::new(0.0, 0.0); n_sets];
    let scale = region.side.max(1e-300);
    for _ in 0..500 {
        let x_before = x;
        for (i, corr) in corrections.iter_mut().enumerate() {
            let y = x + *corr;
            let projected = if i < disks.len() {
                let (c, r) = disks[i];
                let d = y - c;
                let n = d.norm();
                if n <= r {
                    y
                } else {
                    c + d * (r / n.max(1e-300))
                }
            } else {
                project_to_square(&y, region)
            };
            *corr = y - projected;
            x = projected;
        }
        if (x - x_before).norm() <= 1e-9 * scale {
            break;
        }
    }
    // Dykstra crawls on nearly-tangent disks; finish with plain alternating
    // projections, which restore feasibility without moving far.
    let feasible = |x: &Point| {
        disks.iter().all(|(c, r)| (x - c).norm() <= r + 1e-9 * scale) && region.contains(x)
    };
    for _ in 0..5000 {
        if feasible(&x) {
            break;
        }
        for (c, r) in disks {
            let d = x - c;
            let n = d.norm();
            if n > *r {
                x = c + d * (*r / n.max(1e-300));
            }
        }
        x = project_to_square(&x, region);
    }
    feasible(&x).then_some(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmitCase {
    StationaryFeasible,
    QosProjection,
    Boundary,
}

#[derive(Debug, Clone, Copy)]
pub struct TransmitOutcome {
    pub point: Point,
    pub moved: bool,
    pub case: TransmitCase,
}

/// Per-antenna transmit step. Case 1: the stationary point meets every
/// constraint. Case 2 (no nearby antennas): nearest point to it inside
/// step-ball ∩ QoS disks ∩ region. Case 3: geometric boundary candidates
/// additionally filtered by QoS-disk membership.
pub fn transmit_case_solver(
    current: &Point,
    others: &PositionVector,
    region: &PlacementRegion,
    t_star: &Point,
    step_radius: f64,
    circles: &[QoSCircle],
    rate_floor: f64,
) -> TransmitOutcome {
    let qos_surrogate_ok = |x: &Point| {
        circles.iter().all(|c| {
            let s = c.surrogate(x);
            s <= -rate_floor + 1e-12 * s.abs().max(1.0)
        })
    };
    if feasible_position(t_star, others.points(), region) && qos_surrogate_ok(t_star) {
        return TransmitOutcome {
            point: *t_star,
            moved: true,
            case: TransmitCase::StationaryFeasible,
        };
    }

    let index = build_index(others);
    let active_idx = index.range_query(t_star, region.min_distance + step_radius);
    if active_idx.is_empty() {
        // Every point of the step ball clears the spacing constraint here,
        // so only the QoS disks and the region participate.
        let disks: Vec<(Point, f64)> = circles
            .iter()
            .map(|c| (c.center, c.feasible_radius(rate_floor)))
            .collect();
        if let Some(p) = dykstra_project(t_star, &disks, region) {
            let within_ball = (p - t_star).norm() <= step_radius + 1e-9 * region.side.max(1.0);
            if within_ball && feasible_position(&p, others.points(), region) {
                return TransmitOutcome {
                    point: p,
                    moved: (p - current).norm() > 0.0,
                    case: TransmitCase::QosProjection,
                };
            }
        }
        return TransmitOutcome {
            point: *current,
            moved: false,
            case: TransmitCase::QosProjection,
        };
    }

    let active: Vec<Point> = active_idx.iter().map(|&i| others.point(i)).collect();
    let mut best: Option<(f64, Point)> = None;
    for cand in boundary_candidates(t_star, &active, region) {
        let p = cand.position;
        let dist = (p - t_star).norm();
        if dist > step_radius + 1e-12 || !feasible_position(&p, others.points(), region) {
            continue;
        }
        let in_disks = circles
            .iter()
            .all(|c| (p - c.center).norm() <= c.feasible_radius(rate_floor) + CANDIDATE_SLACK);
        if !in_disks {
            continue;
        }
        if best.as_ref().map_or(true, |(b, _)| dist < *b) {
            best = Some((dist, p));
        }
    }
    match best {
        Some((_, p)) => TransmitOutcome {
            point: p,
            moved: (p - current).norm() > 0.0,
            case: TransmitCase::Boundary,
        },
        None => TransmitOutcome {
            point: *current,
            moved: false,
            case: TransmitCase::Boundary,
        },
    }
}

/// Per-antenna sweeps on the transmit objective under the surrogate QoS
/// constraints. Accepted moves keep each surrogate `f₃ₖ` at or below
/// `max(f₃ₖ(old), −rate_min)`, which preserves exact QoS feasibility across
/// the sweep.
pub fn optimize_transmit_apv(
    obj: &TransmitObjective,
    start: &PositionVector,
    region: &PlacementRegion,
    params: &SweepParams,
) -> (PositionVector, SweepReport) {
    let mut pts: Vec<Point> = start.points().to_vec();
    let mut report = SweepReport::default();
    let mut f2_prev = obj.f2(&pts);
    for sweep in 0..params.max_sweeps {
        report.sweeps = sweep + 1;
        for n in sweep_order(pts.len(), sweep, params) {
            let f2_old = obj.f2(&pts);
            let (grad, hess) = obj.f2_grad_hess(&pts, n);
            let base_eta = curvature_bound(&hess, obj.lambda());
            let qos_data: Vec<(Point, f64, f64)> = (0..obj.users())
                .map(|k| {
                    let (g3, h3) = obj.f3_grad_hess(k, &pts, n);
                    (g3, curvature_bound(&h3, obj.lambda()), obj.f3(k, &pts))
                })
                .collect();
            let others = others_of(&pts, n);
            // On a failed majorization check, double every curvature bound
            // (still valid majorizers) and retry with the shorter step.
            let mut scale = 1.0;
            let mut accepted = false;
            let mut blocked = false;
            for _ in 0..12 {
                let eta = base_eta * scale;
                let step = grad / eta;
                let t_star = pts[n] - step;
                let circles: Vec<QoSCircle> = qos_data
                    .iter()
                    .map(|&(g3, ups, f3)| {
                        let upsilon = ups * scale;
                        let pull = g3 / upsilon;
                        QoSCircle {
                            center: pts[n] - pull,
                            radius: pull.norm(),
                            curvature: upsilon,
                            f3_value: f3,
                        }
                    })
                    .collect();
                let outcome = transmit_case_solver(
                    &pts[n],
                    &others,
                    region,
                    &t_star,
                    step.norm(),
                    &circles,
                    obj.rate_floor,
                );
                if !outcome.moved {
                    blocked = true;
                    break;
                }
                let delta = outcome.point - pts[n];
                let surr2_new = f2_old + grad.dot(&delta) + 0.5 * eta * delta.norm_squared();
                let old = pts[n];
                pts[n] = outcome.point;
                let f2_new = obj.f2(&pts);
                let mut ok = majorization_holds(f2_old, f2_new, surr2_new);
                for (k, c) in circles.iter().enumerate() {
                    if !ok {
                        break;
                    }
                    let f3_new = obj.f3(k, &pts);
                    let s3_new = c.surrogate(&pts[n]);
                    let tol = 1e-9 * f3_new.abs().max(s3_new.abs()).max(1e-300);
                    // Majorization of f₃ₖ plus the surrogate QoS bound.
                    ok = f3_new <= s3_new + tol && s3_new <= c.bound(obj.rate_floor) + tol;
                }
                if ok {
                    accepted = true;
                    break;
                }
                pts[n] = old;
                scale *= 2.0;
            }
            if accepted {
                report.moves += 1;
            } else if blocked {
                report.no_moves += 1;
            } else {
                report.majorization_rejects += 1;
            }
        }
        let f2_new = obj.f2(&pts);
        if (f2_prev - f2_new).abs() <= params.tol * f2_new.abs().max(1e-300) {
            break;
        }
        f2_prev = f2_new;
    }
    (PositionVector::new(pts), report)
}

/// Gradient and Hessian of the Dinkelbach objective at antenna `m`; the
/// spec-level entry point over a prebuilt objective.
pub fn grad_hess_f1(obj: &ReceiveObjective, pts: &[Point], m: usize) -> (Point, Matrix2<f64>) {
    obj.grad_hess(pts, m)
}
