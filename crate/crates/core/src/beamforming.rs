//! Fractional-programming auxiliaries and the closed/semi-closed-form
//! signal-processing updates.
//!
//! The per-user rate constraint is handled through two stacked transforms:
//! a Lagrangian-dual transform introducing the SINR auxiliary `ỹ_k`, then a
//! quadratic transform introducing `z_k`, giving the concave minorant
//! `R″_k = log2(1+ỹ_k) − ỹ_k + 2 z_k √(1+ỹ_k) Re{h^H w_k} − z_k² Γ_k`.
//! With both auxiliaries at their update formulas `R″_k` equals the true
//! rate, so enforcing `R″_k ≥ R_min` enforces the exact QoS constraint.
//!
//! The LBS beam solves a rank-one-objective QCQP whose dual weights collapse
//! the power and QoS constraints into a single trace constraint; the TBS
//! beams take minimum-power stationary directions through a pseudo-inverse
//! and get their powers from a small linear program; the combiner is MMSE.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ChannelSet;
use crate::geometry::PositionVector;
use crate::linalg::{inv_sqrt, pinv_apply, top_eigpair};
use crate::robust::HullWeights;
use crate::{CMatrix, CVector};

pub use crate::linalg::canonicalize_phase;

#[derive(Debug, Error, PartialEq)]
pub enum BeamformingError {
    #[error("QoS budget {budget:.3e} for user {user} cannot be met by any LBS beam")]
    InfeasibleQos { user: usize, budget: f64 },
    #[error("dual-weighted matrix is singular")]
    SingularPhi,
    #[error("terrestrial channel {0} is zero")]
    ZeroChannel(usize),
    #[error("power allocation has no feasible nonnegative solution")]
    InfeasiblePowerAllocation,
    #[error("signal-plus-covariance matrix is singular")]
    SingularCovariance,
    #[error("effective desired channel is zero")]
    DegenerateSignal,
    #[error("ratio denominator is not positive")]
    ZeroDenominator,
}

/// All optimization variables of one solver instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingState {
    /// LBS beam, `‖w_l‖² ≤ P_max`.
    pub w_l: CVector,
    /// TBS beams, one column per user (`N_T × K`).
    pub w_t: CMatrix,
    /// Unit-norm aerial combiner.
    pub v_a: CVector,
    /// SINR auxiliaries `ỹ_k ≥ 0`.
    pub y: Vec<f64>,
    /// Quadratic-transform auxiliaries.
    pub z: Vec<f64>,
    /// Convex-hull weights over the jamming grid.
    pub mu: HullWeights,
    /// Transmit-side (LBS) antenna positions.
    pub t_apv: PositionVector,
    /// Receive-side (aerial) antenna positions.
    pub r_apv: PositionVector,
}

/// `|aᴴb|²` for complex vectors.
fn abs2(x: Complex64) -> f64 {
    x.norm_sqr()
}

/// Total received power at user `k` plus noise: `Γ_k`.
pub fn gamma_denominator(ch: &ChannelSet, w_t: &CMatrix, w_l: &CVector, k: usize) -> f64 {
    let h = &ch.h_t[k];
    let mut acc = ch.noise_terr[k];
    for i in 0..w_t.ncols() {
        acc += abs2(h.dotc(&w_t.column(i).into_owned()));
    }
    acc += abs2(ch.h_l[k].dotc(w_l));
    acc
}

/// Exact SINR of terrestrial user `k`.
pub fn terrestrial_sinr(ch: &ChannelSet, w_t: &CMatrix, w_l: &CVector, k: usize) -> f64 {
    let h = &ch.h_t[k];
    let sig = abs2(h.dotc(&w_t.column(k).into_owned()));
    let denom = gamma_denominator(ch, w_t, w_l, k) - sig;
    sig / denom
}

/// Optimal SINR auxiliaries: `ỹ_k` equals the current exact SINR.
pub fn update_aux_y(ch: &ChannelSet, state: &BeamformingState) -> Vec<f64> {
    (0..ch.h_t.len())
        .map(|k| terrestrial_sinr(ch, &state.w_t, &state.w_l, k))
        .collect()
}

/// Optimal quadratic-transform auxiliaries:
/// `z_k = √(1+ỹ_k)·Re{h_kᴴ w_k} / Γ_k`.
pub fn update_aux_z(ch: &ChannelSet, state: &BeamformingState) -> Vec<f64> {
    (0..ch.h_t.len())
        .map(|k| {
            let re = ch.h_t[k].dotc(&state.w_t.column(k).into_owned()).re;
            let gamma = gamma_denominator(ch, &state.w_t, &state.w_l, k);
            (1.0 + state.y[k]).sqrt() * re / gamma
        })
        .collect()
}

/// Transformed rate minorant `R″_k` at the current auxiliaries.
pub fn transformed_rate(ch: &ChannelSet, state: &BeamformingState, k: usize) -> f64 {
    let y = state.y[k];
    let z = state.z[k];
    let re = ch.h_t[k].dotc(&state.w_t.column(k).into_owned()).re;
    let gamma = gamma_denominator(ch, &state.w_t, &state.w_l, k);
    (1.0 + y).log2() - y + 2.0 * z * (1.0 + y).sqrt() * re - z * z * gamma
}

/// Per-user budget `R̃_k` for LBS leakage: the transformed-rate constraint
/// rearranged as `z_k²·|h_{L,k}ᴴ w_L|² ≤ R̃_k`.
///
/// Budgets are carried in natural-log units (floor scaled by ln 2): the
/// dual transform is a global rate minorant only with the natural
/// logarithm, and that property is what makes `R″_k ≥ R_min` imply the
/// exact QoS constraint for stale auxiliaries. At the auxiliary update
/// point the two bases agree.
pub fn qos_budgets(ch: &ChannelSet, state: &BeamformingState, rate_min: f64) -> Vec<f64> {
    (0..ch.h_t.len())
        .map(|k| {
            let y = state.y[k];
            let z = state.z[k];
            let h = &ch.h_t[k];
            let re = h.dotc(&state.w_t.column(k).into_owned()).re;
            let mut tbs_power = ch.noise_terr[k];
            for i in 0..state.w_t.ncols() {
                tbs_power += abs2(h.dotc(&state.w_t.column(i).into_owned()));
            }
            (1.0 + y).ln() - y + 2.0 * z * (1.0 + y).sqrt() * re - z * z * tbs_power
                - rate_min * std::f64::consts::LN_2
        })
        .collect()
}

/// Interference-plus-noise covariance at the aerial user, jamming excluded:
/// `A₁ = H_TA W_T W_Tᴴ H_TAᴴ + σ²_A I`.
pub fn a1_matrix(ch: &ChannelSet, w_t: &CMatrix) -> CMatrix {
    let n = ch.h_ta.nrows();
    let hw = &ch.h_ta * w_t;
    let mut a1 = &hw * hw.adjoint();
    for i in 0..n {
        a1[(i, i)] += Complex64::new(ch.noise_aerial, 0.0);
    }
    a1
}

/// Dual variables of the LBS beam subproblem and the derived single-trace
/// aggregation.
#[derive(Debug, Clone)]
pub struct DualWeights {
    /// `ξ_0` (power) followed by `ξ_1..ξ_K` (QoS).
    pub xi: Vec<f64>,
    /// Normalized weights `ν_i = ξ_i R̄ / (ξ_0 P + Σ ξ_j R̃_j)`.
    pub nu: Vec<f64>,
    /// Aggregated constraint matrix `Φ = ν_0 I + Σ ν_k Φ_k` (Hermitian PD).
    pub phi: CMatrix,
    /// Aggregated budget `R̄ = P + Σ R̃_k`.
    pub r_bar: f64,
    /// Complementary-slackness residual of the reconstructed beam,
    /// normalized by the unconstrained objective scale.
    pub slack_residual: f64,
}

/// Subgradient/polish controls for the dual solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSolveParams {
    /// Diminishing step scale `c` in `c/√iter`.
    pub step_scale: f64,
    /// Subgradient iteration cap.
    pub max_iters: usize,
    /// Armijo-polish iteration cap.
    pub polish_iters: usize,
    /// Floor applied to `ν_0` to keep `Φ` positive definite.
    pub nu0_floor: f64,
}

impl Default for DualSolveParams {
    fn default() -> Self {
        Self {
            step_scale: 1.0,
            max_iters: 500,
            polish_iters: 300,
            nu0_floor: 1e-8,
        }
    }
}

/// Normalized dual objective pieces for the LBS subproblem, projected onto
/// `span{h̄, φ_1..φ_K}` so each evaluation is an eigen-solve of size `K+1`.
struct DualProblem {
    /// `ĥ ĥᴴ` in the reduced basis (`r × r`).
    h_outer: CMatrix,
    /// `P · Φ_k / R̃_k` in the reduced basis.
    psi: Vec<CMatrix>,
}

impl DualProblem {
    /// Objective `F(ψ) = max(0, λ_max(ĥĥᴴ − Σψ_kΨ_k)) + Σψ_k`, its top
    /// eigenpair, and the active flag.
    fn eval(&self, psi_w: &[f64]) -> (f64, f64, CVector) {
        let mut m = self.h_outer.clone();
        for (k, p) in self.psi.iter().enumerate() {
            m -= p.map(|e| e * Complex64::new(psi_w[k], 0.0));
        }
        let (lmax, u) = top_eigpair(&m);
        let f = lmax.max(0.0) + psi_w.iter().sum::<f64>();
        (f, lmax, u)
    }

    fn gradient(&self, lmax: f64, u: &CVector) -> Vec<f64> {
        self.psi
            .iter()
            .map(|p| {
                if lmax > 0.0 {
                    1.0 - (u.adjoint() * p * u)[(0, 0)].re
                } else {
                    1.0
                }
            })
            .collect()
    }
}

/// Orthonormal basis of the span of the given vectors (modified
/// Gram-Schmidt with a relative drop tolerance).
fn orthonormal_basis(vectors: &[CVector], n: usize) -> CMatrix {
    let mut cols: Vec<CVector> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        for q in &cols {
            let c = q.dotc(&r);
            r -= q.map(|e| e * c);
        }
        let scale = v.norm().max(1e-300);
        if r.norm() > 1e-12 * scale {
            let nrm = Complex64::new(1.0 / r.norm(), 0.0);
            cols.push(r.map(|e| e * nrm));
        }
    }
    if cols.is_empty() {
        cols.push(CVector::from_fn(n, |i, _| {
            Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)
        }));
    }
    CMatrix::from_columns(&cols)
}

/// Solve the dual of the LBS subproblem: projected subgradient with
/// diminishing steps on the QoS multipliers, then a monotone Armijo polish,
/// with the power multiplier recovered in closed form.
///
/// Errors with [`BeamformingError::InfeasibleQos`] when some budget is
/// negative (no beam can satisfy that user's transformed-rate constraint).
pub fn lbs_dual_weights(
    ch: &ChannelSet,
    state: &BeamformingState,
    rate_min: f64,
    power_max: f64,
    params: &DualSolveParams,
) -> Result<DualWeights, BeamformingError> {
    let k_users = ch.h_t.len();
    let n = state.w_l.len();
    let budgets = qos_budgets(ch, state, rate_min);
    for (k, &b) in budgets.iter().enumerate() {
        if b < 0.0 {
            return Err(BeamformingError::InfeasibleQos { user: k, budget: b });
        }
    }
    let h_bar = ch.h_la.ad_mul(&state.v_a).column(0).into_owned();
    let h_norm_sq = h_bar.norm_squared();
    // Leakage weight vectors: Φ_k = φ_k φ_kᴴ with φ_k = z_k h_{L,k}.
    let phis: Vec<CVector> = (0..k_users)
        .map(|k| ch.h_l[k].map(|e| e * Complex64::new(state.z[k], 0.0)))
        .collect();

    let finish = |xi: Vec<f64>| finalize_duals(xi, &h_bar, &phis, &budgets, power_max, params);

    if h_norm_sq == 0.0 {
        // Objective is identically zero; any feasible beam is optimal.
        let mut xi = vec![0.0; k_users + 1];
        xi[0] = 1.0;
        return Ok(finish(xi));
    }

    // Fast path: full-power matched beam feasible for every QoS budget.
    let w0 = h_bar.map(|e| e * Complex64::new((power_max / h_norm_sq).sqrt(), 0.0));
    let slack_ok = (0..k_users).all(|k| {
        let leak = abs2(phis[k].dotc(&w0));
        leak <= budgets[k] * (1.0 + 1e-12) + 1e-300
    });
    if slack_ok {
        let mut xi = vec![0.0; k_users + 1];
        xi[0] = h_norm_sq;
        return Ok(finish(xi));
    }

    // Reduced-space dual. ψ_k are the QoS multipliers scaled so the
    // unconstrained optimum has objective 1.
    let mut all = vec![h_bar.clone()];
    all.extend(phis.iter().cloned());
    let basis = orthonormal_basis(&all, n);
    let reduce = |v: &CVector| basis.ad_mul(v).column(0).into_owned();
    let h_red = reduce(&h_bar).map(|e| e / Complex64::new(h_norm_sq.sqrt(), 0.0));
    let problem = DualProblem {
        h_outer: &h_red * h_red.adjoint(),
        psi: phis
            .iter()
            .zip(&budgets)
            .map(|(p, &b)| {
                let pr = reduce(p);
                (&pr * pr.adjoint()).map(|e| e * Complex64::new(power_max / b.max(1e-300), 0.0))
            })
            .collect(),
    };

    let mut psi_w = vec![0.0; k_users];
    let (mut best_f, _, _) = problem.eval(&psi_w);
    let mut best_psi = psi_w.clone();
    let mut stall = 0usize;
    for it in 1..=params.max_iters {
        let (f, lmax, u) = problem.eval(&psi_w);
        if f < best_f - 1e-15 {
            best_f = f;
            best_psi = psi_w.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall > 80 {
                break;
            }
        }
        let g = problem.gradient(lmax, &u);
        let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        let step = params.step_scale / (it as f64).sqrt();
        for (p, gi) in psi_w.iter_mut().zip(&g) {
            *p = (*p - step * gi / gn).max(0.0);
        }
    }

    // Armijo polish from the best subgradient iterate.
    psi_w = best_psi;
    for _ in 0..params.polish_iters {
        let (f, lmax, u) = problem.eval(&psi_w);
        let g = problem.gradient(lmax, &u);
        let gn2 = g.iter().map(|x| x * x).sum::<f64>();
        if gn2 < 1e-24 {
            break;
        }
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-14 {
            let cand: Vec<f64> = psi_w
                .iter()
                .zip(&g)
                .map(|(p, gi)| (p - step * gi).max(0.0))
                .collect();
            let moved: f64 = cand
                .iter()
                .zip(&psi_w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if moved < 1e-30 {
                break;
            }
            let (fc, _, _) = problem.eval(&cand);
            if fc < f - 1e-4 * moved.sqrt() * gn2.sqrt() {
                psi_w = cand;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }

    // One-dimensional case: golden-section refinement to machine accuracy.
    if k_users == 1 || psi_w.iter().filter(|&&p| p > 0.0).count() == 1 {
        let active = psi_w
            .iter()
            .position(|&p| p > 0.0)
            .unwrap_or(0);
        let eval1 = |x: f64| {
            let mut w = psi_w.clone();
            w[active] = x;
            problem.eval(&w).0
        };
        let (mut lo, mut hi) = (0.0f64, (psi_w[active].max(1.0)) * 4.0);
        let gr = 0.5 * (5.0f64.sqrt() - 1.0);
        let (mut x1, mut x2) = (hi - gr * (hi - lo), lo + gr * (hi - lo));
        let (mut f1, mut f2) = (eval1(x1), eval1(x2));
        for _ in 0..200 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - gr * (hi - lo);
                f1 = eval1(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + gr * (hi - lo);
                f2 = eval1(x2);
            }
        }
        let xg = 0.5 * (lo + hi);
        if eval1(xg) <= problem.eval(&psi_w).0 {
            psi_w[active] = xg;
        }
    }

    // Map back: ξ_k = s·ψ_k/R̃_k with s = P‖h̄‖², then closed-form ξ_0.
    let s = power_max * h_norm_sq;
    let mut xi = vec![0.0; k_users + 1];
    for k in 0..k_users {
        xi[k + 1] = s * psi_w[k] / budgets[k].max(1e-300);
    }
    Ok(finish(xi))
}

/// Aggregate duals into `(ν, Φ, R̄)` and measure complementary slackness.
fn finalize_duals(
    mut xi: Vec<f64>,
    h_bar: &CVector,
    phis: &[CVector],
    budgets: &[f64],
    power_max: f64,
    params: &DualSolveParams,
) -> DualWeights {
    let n = h_bar.len();
    let k_users = phis.len();
    // Closed-form power multiplier: smallest ξ_0 keeping Φ(ξ) ⪰ h̄h̄ᴴ.
    let mut m = h_bar * h_bar.adjoint();
    for (k, p) in phis.iter().enumerate() {
        let pph = p * p.adjoint();
        m -= pph.map(|e| e * Complex64::new(xi[k + 1], 0.0));
    }
    let (lmax, _) = top_eigpair(&m);
    xi[0] = xi[0].max(lmax).max(0.0);

    let r_bar = power_max + budgets.iter().sum::<f64>();
    let denom: f64 = xi[0] * power_max
        + xi[1..].iter().zip(budgets).map(|(x, b)| x * b).sum::<f64>();
    let denom = denom.max(1e-300);
    let mut nu: Vec<f64> = xi.iter().map(|&x| x * r_bar / denom).collect();
    nu[0] = nu[0].max(params.nu0_floor);
    let mut phi = CMatrix::identity(n, n).map(|e| e * Complex64::new(nu[0], 0.0));
    for (k, p) in phis.iter().enumerate() {
        phi += (p * p.adjoint()).map(|e| e * Complex64::new(nu[k + 1], 0.0));
    }

    // Reconstruct the beam and measure complementary slackness.
    let mut residual = 0.0;
    if let Ok(w) = beam_from_duals(h_bar, &phi, r_bar) {
        let scale = (power_max * h_bar.norm_squared()).max(1e-300);
        residual += (xi[0] * (w.norm_squared() - power_max)).abs() / scale;
        for k in 0..k_users {
            let leak = abs2(phis[k].dotc(&w));
            residual += (xi[k + 1] * (leak - budgets[k])).abs() / scale;
        }
    }

    DualWeights {
        xi,
        nu,
        phi,
        r_bar,
        slack_residual: residual,
    }
}

/// Closed-form beam for the aggregated problem:
/// `w = √R̄ Φ^{-1} h̄ / ‖Φ^{-1/2} h̄‖`, which meets `tr(Φ wwᴴ) = R̄` with
/// equality. A zero `h̄` falls back to the canonical `√R̄ Φ^{-1/2} e₁`.
fn beam_from_duals(h_bar: &CVector, phi: &CMatrix, r_bar: f64) -> Result<CVector, BeamformingError> {
    let n = h_bar.len();
    let phi_is = inv_sqrt(phi).ok_or(BeamformingError::SingularPhi)?;
    let root = Complex64::new(r_bar.sqrt(), 0.0);
    if h_bar.norm_squared() == 0.0 {
        let e1 = CVector::from_fn(n, |i, _| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0));
        return Ok((phi_is * e1).map(|e| e * root));
    }
    let half = &phi_is * h_bar;
    let dir = half.map(|e| e / Complex64::new(half.norm().max(1e-300), 0.0));
    Ok((phi_is * dir).map(|e| e * root))
}

/// Eigen-beamformer for the LBS: top eigenvector of
/// `Φ^{-1/2} H̄_LA Φ^{-1/2}` scaled by `√R̄` and mapped back through
/// `Φ^{-1/2}`. The output phase is canonicalized.
pub fn lbs_beamformer(
    h_la: &CMatrix,
    v_a: &CVector,
    duals: &DualWeights,
) -> Result<CVector, BeamformingError> {
    let h_bar = h_la.ad_mul(v_a).column(0).into_owned();
    let w = beam_from_duals(&h_bar, &duals.phi, duals.r_bar)?;
    Ok(canonicalize_phase(&w))
}

/// Unit-norm TBS beam directions `w̃_k = B†h_k / ‖B†h_k‖` with
/// `B = H_TAᴴ v vᴴ H_TA + Σ_i ω_i z_i² h_i h_iᴴ`. Singular values below
/// `1e-10·σ_max` are dropped from the pseudo-inverse. A direction that
/// degenerates to zero (user decoupled from `B`'s range) falls back to the
/// matched filter.
pub fn tbs_directions(
    v_a: &CVector,
    ch: &ChannelSet,
    z: &[f64],
    omega: &[f64],
) -> Result<CMatrix, BeamformingError> {
    let k_users = ch.h_t.len();
    let n_t = ch.h_ta.ncols();
    let hv = ch.h_ta.ad_mul(v_a).column(0).into_owned();
    let mut b = &hv * hv.adjoint();
    for i in 0..k_users {
        let c = Complex64::new(omega[i] * z[i] * z[i], 0.0);
        b += (&ch.h_t[i] * ch.h_t[i].adjoint()).map(|e| e * c);
    }
    let mut dirs = CMatrix::zeros(n_t, k_users);
    for k in 0..k_users {
        let h = &ch.h_t[k];
        let hn = h.norm();
        if hn == 0.0 {
            return Err(BeamformingError::ZeroChannel(k));
        }
        let raw = pinv_apply(&b, h, 1e-10);
        let dir = if raw.norm() > 1e-12 * hn {
            raw.map(|e| e / Complex64::new(raw.norm(), 0.0))
        } else {
            h.map(|e| e / Complex64::new(hn, 0.0))
        };
        dirs.set_column(k, &dir);
    }
    Ok(dirs)
}

/// Power allocation for fixed TBS directions: minimize the interference
/// delivered to the aerial user subject to every exact QoS row
/// `α_{1,k} p_k − Σ_{i≠k} α_{2,k,i} p_i ≥ β_k` and `p ≥ 0`.
///
/// The all-tight linear system is solved first; with strictly positive
/// right-hand sides its nonnegative solution is the least element of the
/// feasible region and hence optimal for any nonnegative cost. Otherwise
/// all active subsets are enumerated (`K ≤ 8` in practice).
pub fn tbs_power_allocation(
    directions: &CMatrix,
    ch: &ChannelSet,
    v_a: &CVector,
    w_l: &CVector,
    rate_min: f64,
) -> Result<Vec<f64>, BeamformingError> {
    let k_users = ch.h_t.len();
    if k_users == 0 {
        return Ok(vec![]);
    }
    let gain = 2f64.powf(rate_min) - 1.0;
    let mut m = nalgebra::DMatrix::<f64>::zeros(k_users, k_users);
    let mut beta = vec![0.0; k_users];
    let mut cost = vec![0.0; k_users];
    let hv = ch.h_ta.ad_mul(v_a).column(0).into_owned();
    for k in 0..k_users {
        let h = &ch.h_t[k];
        for i in 0..k_users {
            let g = abs2(h.dotc(&directions.column(i).into_owned()));
            m[(k, i)] = if i == k { g } else { -gain * g };
        }
        beta[k] = gain * (abs2(ch.h_l[k].dotc(w_l)) + ch.noise_terr[k]);
        cost[k] = abs2(hv.dotc(&directions.column(k).into_owned()));
    }

    let check = |p: &[f64]| -> bool {
        p.iter().all(|&x| x >= -1e-12)
            && (0..k_users).all(|k| {
                let lhs: f64 = (0..k_users).map(|i| m[(k, i)] * p[i]).sum();
                let scale = beta[k].abs().max(1e-300);
                lhs >= beta[k] - 1e-9 * scale
            })
    };

    if beta.iter().all(|&b| b > 0.0) {
        let rhs = nalgebra::DVector::from_vec(beta.clone());
        if let Some(sol) = m.clone().lu().solve(&rhs) {
            let p: Vec<f64> = sol.iter().map(|&x| x.max(0.0)).collect();
            if sol.iter().all(|&x| x >= -1e-12) && check(&p) {
                return Ok(p);
            }
        }
    }

    // Active-subset enumeration: users outside the subset get zero power.
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0..(1usize << k_users) {
        let idx: Vec<usize> = (0..k_users).filter(|k| mask & (1 << k) != 0).collect();
        let mut p = vec![0.0; k_users];
        if !idx.is_empty() {
            let sub = nalgebra::DMatrix::<f64>::from_fn(idx.len(), idx.len(), |a, b| {
                m[(idx[a], idx[b])]
            });
            let rhs = nalgebra::DVector::from_iterator(idx.len(), idx.iter().map(|&k| beta[k]));
            match sub.lu().solve(&rhs) {
                Some(sol) => {
                    for (a, &k) in idx.iter().enumerate() {
                        p[k] = sol[a];
                    }
                }
                None => continue,
            }
        }
        if !check(&p) {
            continue;
        }
        let p: Vec<f64> = p.iter().map(|&x| x.max(0.0)).collect();
        let obj: f64 = cost.iter().zip(&p).map(|(c, x)| c * x).sum();
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, p));
        }
    }
    best.map(|(_, p)| p)
        .ok_or(BeamformingError::InfeasiblePowerAllocation)
}

/// MMSE combiner `v = normalize((H w wᴴ Hᴴ + Ã)^{-1} H w)`, phase
/// canonicalized.
pub fn mmse_combiner(
    h_la: &CMatrix,
    w_l: &CVector,
    a_tilde: &CMatrix,
) -> Result<CVector, BeamformingError> {
    let h_eff = h_la * w_l;
    if h_eff.norm() == 0.0 {
        return Err(BeamformingError::DegenerateSignal);
    }
    let m = a_tilde + &h_eff * h_eff.adjoint();
    let chol = nalgebra::Cholesky::new(m).ok_or(BeamformingError::SingularCovariance)?;
    let x = chol.solve(&h_eff);
    let nrm = x.norm();
    if nrm == 0.0 {
        return Err(BeamformingError::SingularCovariance);
    }
    Ok(canonicalize_phase(
        &x.map(|e| e / Complex64::new(nrm, 0.0)),
    ))
}

/// Worst-case aerial rate and exact terrestrial rates:
/// `(log2(1+γ'_A), [log2(1+γ_{T,k})])` with `γ'_A` evaluated against `Ã`.
pub fn evaluate_rates(
    state: &BeamformingState,
    ch: &ChannelSet,
    a_tilde: &CMatrix,
) -> (f64, Vec<f64>) {
    let aerial = aerial_rate(&state.v_a, &ch.h_la, &state.w_l, a_tilde);
    let terr = (0..ch.h_t.len())
        .map(|k| (1.0 + terrestrial_sinr(ch, &state.w_t, &state.w_l, k)).log2())
        .collect();
    (aerial, terr)
}

/// `log2(1 + |vᴴ H w|² / (vᴴ Ã v))`.
pub fn aerial_rate(v_a: &CVector, h_la: &CMatrix, w_l: &CVector, a_tilde: &CMatrix) -> f64 {
    let sig = abs2(v_a.dotc(&(h_la * w_l)));
    let den = (v_a.adjoint() * a_tilde * v_a)[(0, 0)].re;
    if den <= 0.0 {
        return 0.0;
    }
    (1.0 + sig / den).log2()
}

/// The Dinkelbach ratio value `κ = |vᴴ H_LA w_L|² / (vᴴ Ã v)`.
pub fn dinkelbach_kappa(
    v_a: &CVector,
    h_la: &CMatrix,
    w_l: &CVector,
    a_tilde: &CMatrix,
) -> Result<f64, BeamformingError> {
    let num = abs2(v_a.dotc(&(h_la * w_l)));
    let den = (v_a.adjoint() * a_tilde * v_a)[(0, 0)].re;
    if den <= 0.0 {
        return Err(BeamformingError::ZeroDenominator);
    }
    Ok(num / den)
}

/// Scale factor ≤ 1 that restores the power cap and every leakage budget of
/// an LBS beam; returns 1 when the beam is already feasible.
pub fn lbs_feasibility_shrink(
    ch: &ChannelSet,
    state: &BeamformingState,
    w: &CVector,
    budgets: &[f64],
    power_max: f64,
) -> f64 {
    let mut s2 = 1.0f64;
    let pw = w.norm_squared();
    if pw > power_max {
        s2 = s2.min(power_max / pw);
    }
    for (k, &b) in budgets.iter().enumerate() {
        let leak = state.z[k] * state.z[k] * abs2(ch.h_l[k].dotc(w));
        if leak > b && leak > 0.0 {
            s2 = s2.min(b.max(0.0) / leak);
        }
    }
    s2.sqrt()
}

/// Top eigenvalue of `Φ^{-1/2} H̄ Φ^{-1/2}` scaled by `R̄`: the optimum of
/// the aggregated problem, used by tests to cross-check the beamformer.
pub fn aggregated_objective_bound(h_la: &CMatrix, v_a: &CVector, duals: &DualWeights) -> f64 {
    let h_bar = h_la.ad_mul(v_a).column(0).into_owned();
    let phi_is = match inv_sqrt(&duals.phi) {
        Some(m) => m,
        None => return 0.0,
    };
    let half = &phi_is * &h_bar;
    duals.r_bar * half.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::upa_positions;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cplx(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    fn random_channels(
        rng: &mut ChaCha8Rng,
        n_t: usize,
        n_l: usize,
        n_a: usize,
        k: usize,
        noise: f64,
    ) -> ChannelSet {
        ChannelSet {
            h_t: (0..k)
                .map(|_| CVector::from_fn(n_t, |_, _| cplx(rng)))
                .collect(),
            h_l: (0..k)
                .map(|_| CVector::from_fn(n_l, |_, _| cplx(rng)))
                .collect(),
            h_ta: CMatrix::from_fn(n_a, n_t, |_, _| cplx(rng)),
            h_la: CMatrix::from_fn(n_a, n_l, |_, _| cplx(rng)),
            noise_terr: vec![noise; k],
            noise_aerial: noise,
        }
    }

    fn random_state(
        rng: &mut ChaCha8Rng,
        n_t: usize,
        n_l: usize,
        n_a: usize,
        k: usize,
    ) -> BeamformingState {
        let v_raw = CVector::from_fn(n_a, |_, _| cplx(rng));
        let v = v_raw.map(|e| e / Complex64::new(v_raw.norm(), 0.0));
        BeamformingState {
            w_l: CVector::from_fn(n_l, |_, _| cplx(rng)),
            w_t: CMatrix::from_fn(n_t, k, |_, _| cplx(rng)),
            v_a: v,
            y: vec![0.0; k],
            z: vec![0.0; k],
            mu: HullWeights::uniform(1),
            t_apv: upa_positions(n_l, 0.05),
            r_apv: upa_positions(n_a, 0.05),
        }
    }

    /// Rotate each TBS beam so `h_kᴴ w_k` is real-positive; this is the
    /// gauge the algorithm's own updates produce and the one in which the
    /// quadratic transform is tight.
    fn align_beam_phases(ch: &ChannelSet, state: &mut BeamformingState) {
        for k in 0..ch.h_t.len() {
            let ip = ch.h_t[k].dotc(&state.w_t.column(k).into_owned());
            if ip.norm() > 0.0 {
                let rot = Complex64::from_polar(1.0, -ip.arg());
                let col = state.w_t.column(k).map(|e| e * rot);
                state.w_t.set_column(k, &col);
            }
        }
    }

    #[test]
    fn aux_y_unit_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ch = random_channels(&mut rng, 4, 4, 2, 1, 1.0);
        let mut state = random_state(&mut rng, 4, 4, 2, 1);
        // Zero LBS leakage, one user, signal power equal to noise.
        ch.h_l[0] = CVector::zeros(4);
        let h = ch.h_t[0].clone();
        let w = h.map(|e| e / Complex64::new(h.norm(), 0.0));
        state.w_t.set_column(0, &w);
        // |h^H w|^2 = ‖h‖²; rescale noise to match.
        ch.noise_terr[0] = h.norm_squared();
        let y = update_aux_y(&ch, &state);
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-12);

        state.w_t.set_column(0, &CVector::zeros(4));
        let y = update_aux_y(&ch, &state);
        assert_relative_eq!(y[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn aux_y_matches_scalar_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = random_channels(&mut rng, 5, 4, 3, 3, 0.3);
        let state = random_state(&mut rng, 5, 4, 3, 3);
        let y = update_aux_y(&ch, &state);
        for k in 0..3 {
            let h = &ch.h_t[k];
            let mut interf = 0.3;
            for i in 0..3 {
                if i != k {
                    interf += h.dotc(&state.w_t.column(i).into_owned()).norm_sqr();
                }
            }
            interf += ch.h_l[k].dotc(&state.w_l).norm_sqr();
            let sig = h.dotc(&state.w_t.column(k).into_owned()).norm_sqr();
            assert_relative_eq!(y[k], sig / interf, epsilon = 1e-12);
        }
    }

    #[test]
    fn aux_z_zero_when_real_part_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = random_channels(&mut rng, 4, 4, 2, 1, 0.5);
        let mut state = random_state(&mut rng, 4, 4, 2, 1);
        // Rotate the beam so h^H w is purely imaginary.
        let ip = ch.h_t[0].dotc(&state.w_t.column(0).into_owned());
        let rot = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 - ip.arg());
        let col = state.w_t.column(0).map(|e| e * rot);
        state.w_t.set_column(0, &col);
        state.y = update_aux_y(&ch, &state);
        let z = update_aux_z(&ch, &state);
        assert!(z[0].abs() < 1e-12);
    }

    #[test]
    fn aux_z_scalar_hand_case() {
        // K=1, no LBS leakage, real scalar channel: z = √(1+y)·hw/(h²w²+σ²).
        let ch = ChannelSet {
            h_t: vec![CVector::from_vec(vec![Complex64::new(2.0, 0.0)])],
            h_l: vec![CVector::from_vec(vec![Complex64::new(0.0, 0.0)])],
            h_ta: CMatrix::zeros(1, 1),
            h_la: CMatrix::zeros(1, 1),
            noise_terr: vec![1.0],
            noise_aerial: 1.0,
        };
        let mut state = BeamformingState {
            w_l: CVector::from_vec(vec![Complex64::new(0.0, 0.0)]),
            w_t: CMatrix::from_element(1, 1, Complex64::new(1.5, 0.0)),
            v_a: CVector::from_vec(vec![Complex64::new(1.0, 0.0)]),
            y: vec![0.0],
            z: vec![0.0],
            mu: HullWeights::uniform(1),
            t_apv: upa_positions(1, 0.05),
            r_apv: upa_positions(1, 0.05),
        };
        state.y = update_aux_y(&ch, &state);
        assert_relative_eq!(state.y[0], 9.0, epsilon = 1e-12);
        let z = update_aux_z(&ch, &state);
        // z = √10 · 3 / 10
        assert_relative_eq!(z[0], 10f64.sqrt() * 3.0 / 10.0, epsilon = 1e-12);
    }

    #[test]
    fn transforms_exact_at_optimal_auxiliaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let k = rng.gen_range(1..4);
            let noise = 10f64.powf(rng.gen_range(-3.0..1.0));
            let ch = random_channels(&mut rng, 4, 3, 2, k, noise);
            let mut state = random_state(&mut rng, 4, 3, 2, k);
            align_beam_phases(&ch, &mut state);
            state.y = update_aux_y(&ch, &state);
            state.z = update_aux_z(&ch, &state);
            for kk in 0..k {
                let rate = (1.0 + terrestrial_sinr(&ch, &state.w_t, &state.w_l, kk)).log2();
                let transformed = transformed_rate(&ch, &state, kk);
                assert!(
                    (rate - transformed).abs() < 1e-9,
                    "rate {rate} vs transformed {transformed}"
                );
            }
        }
    }

    #[test]
    fn dual_weights_slack_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = random_channels(&mut rng, 4, 6, 3, 2, 1.0);
        let mut state = random_state(&mut rng, 4, 6, 3, 2);
        align_beam_phases(&ch, &mut state);
        state.y = update_aux_y(&ch, &state);
        state.z = update_aux_z(&ch, &state);
        // Make budgets huge by shrinking the leakage channels.
        let mut ch = ch;
        for h in ch.h_l.iter_mut() {
            *h = h.map(|e| e * Complex64::new(1e-6, 0.0));
        }
        let duals =
            lbs_dual_weights(&ch, &state, 0.01, 1.0, &DualSolveParams::default()).unwrap();
        assert!(duals.xi[1..].iter().all(|&x| x == 0.0));
        let h_bar = ch.h_la.ad_mul(&state.v_a).column(0).into_owned();
        assert_relative_eq!(duals.xi[0], h_bar.norm_squared(), epsilon = 1e-12);
        // Beam is then full-power matched filtering.
        let w = lbs_beamformer(&ch.h_la, &state.v_a, &duals).unwrap();
        assert_relative_eq!(w.norm_squared(), 1.0, epsilon = 1e-9);
        let obj = state.v_a.dotc(&(&ch.h_la * &w)).norm_sqr();
        assert_relative_eq!(obj, h_bar.norm_squared(), epsilon = 1e-9);
    }

    #[test]
    fn dual_weights_k1_tight_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut bound_cases = 0;
        for trial in 0..20 {
            let ch = random_channels(&mut rng, 4, 6, 3, 1, 1.0);
            let mut state = random_state(&mut rng, 4, 6, 3, 1);
            align_beam_phases(&ch, &mut state);
            state.y = update_aux_y(&ch, &state);
            state.z = update_aux_z(&ch, &state);
            let power = 1.0;
            // Pick the rate floor so the budget sits strictly below the
            // leakage of the unconstrained matched beam: the QoS must bind.
            let base = qos_budgets(&ch, &state, 0.0)[0];
            let h_bar = ch.h_la.ad_mul(&state.v_a).column(0).into_owned();
            let w_unc = h_bar.map(|e| {
                e * Complex64::new((power / h_bar.norm_squared()).sqrt(), 0.0)
            });
            let leak_unc = state.z[0] * state.z[0] * ch.h_l[0].dotc(&w_unc).norm_sqr();
            if leak_unc <= 1e-12 {
                continue;
            }
            let rate_min = base - 0.3 * leak_unc;
            let budgets = qos_budgets(&ch, &state, rate_min);
            assert!(budgets[0] > 0.0);
            let duals =
                match lbs_dual_weights(&ch, &state, rate_min, power, &DualSolveParams::default())
                {
                    Ok(d) => d,
                    Err(_) => continue,
                };
            bound_cases += 1;
            let w = lbs_beamformer(&ch.h_la, &state.v_a, &duals).unwrap();
            // tr(Φ_1 W) = z²|h_l^H w|² vs budget, when the constraint binds.
            let leak = state.z[0] * state.z[0] * ch.h_l[0].dotc(&w).norm_sqr();
            if duals.xi[1] > 1e-9 {
                assert!(
                    (leak - budgets[0]).abs() <= 1e-6 * budgets[0].max(1.0),
                    "trial {trial}: leak {leak} vs budget {}",
                    budgets[0]
                );
            }
            assert!(duals.slack_residual < 1e-5, "residual {}", duals.slack_residual);
        }
        assert!(bound_cases >= 10, "only {bound_cases} binding instances");
    }

    #[test]
    fn dual_weights_k0_reduces_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ch = random_channels(&mut rng, 4, 5, 3, 0, 1.0);
        let state = random_state(&mut rng, 4, 5, 3, 0);
        let duals = lbs_dual_weights(&ch, &state, 1.0, 2.0, &DualSolveParams::default()).unwrap();
        // Φ = ν_0 I with ν_0 = R̄/P = 1: power-only eigen-beamforming.
        assert_relative_eq!(duals.r_bar, 2.0, epsilon = 1e-12);
        assert!((&duals.phi - CMatrix::identity(5, 5)).norm() < 1e-9);
        let w = lbs_beamformer(&ch.h_la, &state.v_a, &duals).unwrap();
        assert_relative_eq!(w.norm_squared(), 2.0, epsilon = 1e-9);
        let h_bar = ch.h_la.ad_mul(&state.v_a).column(0).into_owned();
        let cos = h_bar.dotc(&w).norm() / (h_bar.norm() * w.norm());
        assert_relative_eq!(cos, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_budget_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ch = random_channels(&mut rng, 4, 5, 3, 1, 1.0);
        let mut state = random_state(&mut rng, 4, 5, 3, 1);
        state.y = update_aux_y(&ch, &state);
        state.z = update_aux_z(&ch, &state);
        // An enormous rate floor makes every budget negative.
        let err = lbs_dual_weights(&ch, &state, 1e9, 1.0, &DualSolveParams::default());
        assert!(matches!(err, Err(BeamformingError::InfeasibleQos { .. })));
    }

    #[test]
    fn beamformer_dominates_random_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let k = rng.gen_range(0..3);
            let ch = random_channels(&mut rng, 4, 6, 3, k, 1.0);
            let mut state = random_state(&mut rng, 4, 6, 3, k);
            align_beam_phases(&ch, &mut state);
            state.y = update_aux_y(&ch, &state);
            state.z = update_aux_z(&ch, &state);
            let power = 1.0;
            let budgets = qos_budgets(&ch, &state, 0.1);
            if budgets.iter().any(|&b| b <= 0.0) {
                continue;
            }
            let duals =
                match lbs_dual_weights(&ch, &state, 0.1, power, &DualSolveParams::default()) {
                    Ok(d) => d,
                    Err(_) => continue,
                };
            let w = lbs_beamformer(&ch.h_la, &state.v_a, &duals).unwrap();
            let shrink = lbs_feasibility_shrink(&ch, &state, &w, &budgets, power);
            let w = w.map(|e| e * Complex64::new(shrink, 0.0));
            let objective = |w: &CVector| state.v_a.dotc(&(&ch.h_la * w)).norm_sqr();
            let ours = objective(&w);
            for _ in 0..1000 {
                let u = CVector::from_fn(6, |_, _| cplx(&mut rng));
                // Scale a random direction to the feasibility boundary.
                let mut s2 = power / u.norm_squared();
                for (kk, &b) in budgets.iter().enumerate() {
                    let leak = state.z[kk] * state.z[kk] * ch.h_l[kk].dotc(&u).norm_sqr();
                    if leak > 0.0 {
                        s2 = s2.min(b / leak);
                    }
                }
                let cand = u.map(|e| e * Complex64::new(s2.sqrt(), 0.0));
                assert!(
                    objective(&cand) <= ours * (1.0 + 1e-7) + 1e-12,
                    "random feasible beam beat the eigen solution"
                );
            }
        }
    }

    #[test]
    fn directions_rank_one_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        // v^H H_TA = 0 and a single user: B = ω z² h h^H, direction = h/‖h‖.
        let mut ch = random_channels(&mut rng, 2, 3, 2, 1, 1.0);
        ch.h_ta = CMatrix::zeros(2, 2);
        let v = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let dirs = tbs_directions(&v, &ch, &[1.0], &[1.0]).unwrap();
        let h = &ch.h_t[0];
        let cos = h.dotc(&dirs.column(0).into_owned()).norm() / h.norm();
        assert_relative_eq!(cos, 1.0, epsilon = 1e-10);

        // ω = 0: B is rank-one along H^H v; every direction lies in its span.
        let mut ch = random_channels(&mut rng, 3, 3, 2, 2, 1.0);
        ch.h_ta = CMatrix::from_fn(2, 3, |_, _| cplx(&mut rng));
        let v_raw = CVector::from_fn(2, |_, _| cplx(&mut rng));
        let v = v_raw.map(|e| e / Complex64::new(v_raw.norm(), 0.0));
        let dirs = tbs_directions(&v, &ch, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let b_dir = ch.h_ta.ad_mul(&v).column(0).into_owned();
        // Explicit SVD construction of B†h: B = b b^H so B†h = b (b^H h)/‖b‖⁴.
        for k in 0..2 {
            let expect = &b_dir
                * (b_dir.dotc(&ch.h_t[k]) / Complex64::new(b_dir.norm_squared().powi(2), 0.0));
            let got = dirs.column(k).into_owned();
            let cos = expect.dotc(&got).norm() / (expect.norm() * got.norm());
            assert_relative_eq!(cos, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn directions_orthogonal_users() {
        // Orthogonal channels, unit weights, zero aerial coupling:
        // B = Σ h_i h_i^H, direction_k = h_k/‖h_k‖.
        let mut ch = ChannelSet {
            h_t: vec![
                CVector::from_vec(vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)]),
                CVector::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 3.0)]),
            ],
            h_l: vec![CVector::zeros(2), CVector::zeros(2)],
            h_ta: CMatrix::zeros(2, 2),
            h_la: CMatrix::zeros(2, 2),
            noise_terr: vec![1.0, 1.0],
            noise_aerial: 1.0,
        };
        ch.h_ta = CMatrix::zeros(2, 2);
        let v = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let dirs = tbs_directions(&v, &ch, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        for k in 0..2 {
            let cos = ch.h_t[k].dotc(&dirs.column(k).into_owned()).norm() / ch.h_t[k].norm();
            assert_relative_eq!(cos, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn power_allocation_k1_and_zero_pressure() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ch = random_channels(&mut rng, 4, 3, 2, 1, 0.7);
        let state = random_state(&mut rng, 4, 3, 2, 1);
        let dirs = {
            let h = &ch.h_t[0];
            let d = h.map(|e| e / Complex64::new(h.norm(), 0.0));
            let mut m = CMatrix::zeros(4, 1);
            m.set_column(0, &d);
            m
        };
        let p = tbs_power_allocation(&dirs, &ch, &state.v_a, &state.w_l, 1.0).unwrap();
        let alpha = ch.h_t[0].dotc(&dirs.column(0).into_owned()).norm_sqr();
        let beta = (2f64.powf(1.0) - 1.0)
            * (ch.h_l[0].dotc(&state.w_l).norm_sqr() + ch.noise_terr[0]);
        assert_relative_eq!(p[0], beta / alpha, epsilon = 1e-9);

        // Zero rate floor: β = 0, optimal powers are all zero.
        let mut ch0 = ch.clone();
        ch0.noise_terr = vec![0.7];
        let p = tbs_power_allocation(&dirs, &ch0, &state.v_a, &state.w_l, 0.0).unwrap();
        assert_relative_eq!(p[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn power_allocation_satisfies_qos_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut checked = 0;
        for _ in 0..100 {
            let k = rng.gen_range(1..5);
            let ch = random_channels(&mut rng, 6, 3, 2, k, 0.2);
            let state = random_state(&mut rng, 6, 3, 2, k);
            let mut dirs = CMatrix::zeros(6, k);
            for i in 0..k {
                let u = CVector::from_fn(6, |_, _| cplx(&mut rng));
                dirs.set_column(i, &u.map(|e| e / Complex64::new(u.norm(), 0.0)));
            }
            let w_l = state.w_l.map(|e| e * Complex64::new(0.05, 0.0));
            let rate_min = 0.5;
            if let Ok(p) = tbs_power_allocation(&dirs, &ch, &state.v_a, &w_l, rate_min) {
                checked += 1;
                let w_t = {
                    let mut m = CMatrix::zeros(6, k);
                    for i in 0..k {
                        let col = dirs.column(i).map(|e| e * Complex64::new(p[i].sqrt(), 0.0));
                        m.set_column(i, &col);
                    }
                    m
                };
                for kk in 0..k {
                    let rate = (1.0 + terrestrial_sinr(&ch, &w_t, &w_l, kk)).log2();
                    assert!(
                        rate >= rate_min - 1e-8,
                        "QoS violated: rate {rate} < {rate_min}"
                    );
                }
            }
        }
        assert!(checked > 20, "too few feasible instances: {checked}");
    }

    #[test]
    fn mmse_matched_filter_under_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h_la = CMatrix::from_fn(3, 4, |_, _| cplx(&mut rng));
        let w = CVector::from_fn(4, |_, _| cplx(&mut rng));
        let a = CMatrix::identity(3, 3).map(|e| e * Complex64::new(0.3, 0.0));
        let v = mmse_combiner(&h_la, &w, &a).unwrap();
        let h_eff = &h_la * &w;
        let cos = h_eff.dotc(&v).norm() / h_eff.norm();
        assert_relative_eq!(cos, 1.0, epsilon = 1e-10);
        assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mmse_degenerate_signal_errors() {
        let h_la = CMatrix::zeros(3, 4);
        let w = CVector::zeros(4);
        let a = CMatrix::identity(3, 3);
        assert_eq!(
            mmse_combiner(&h_la, &w, &a),
            Err(BeamformingError::DegenerateSignal)
        );
    }

    #[test]
    fn mmse_dominates_random_combiners() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..5 {
            let h_la = CMatrix::from_fn(3, 4, |_, _| cplx(&mut rng));
            let w = CVector::from_fn(4, |_, _| cplx(&mut rng));
            // Random Hermitian PD covariance.
            let q = CMatrix::from_fn(3, 3, |_, _| cplx(&mut rng));
            let a = &q * q.adjoint() + CMatrix::identity(3, 3).map(|e| e * Complex64::new(0.1, 0.0));
            let v = mmse_combiner(&h_la, &w, &a).unwrap();
            let sinr = |v: &CVector| {
                let sig = v.dotc(&(&h_la * &w)).norm_sqr();
                let den = (v.adjoint() * &a * v)[(0, 0)].re;
                sig / den
            };
            let ours = sinr(&v);
            for _ in 0..1000 {
                let u = CVector::from_fn(3, |_, _| cplx(&mut rng));
                let u = u.map(|e| e / Complex64::new(u.norm(), 0.0));
                assert!(sinr(&u) <= ours * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn mmse_invariant_to_positive_scaling_of_beam() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let h_la = CMatrix::from_fn(3, 4, |_, _| cplx(&mut rng));
        let w = CVector::from_fn(4, |_, _| cplx(&mut rng));
        let q = CMatrix::from_fn(3, 3, |_, _| cplx(&mut rng));
        let a = &q * q.adjoint() + CMatrix::identity(3, 3).map(|e| e * Complex64::new(0.2, 0.0));
        let v1 = mmse_combiner(&h_la, &w, &a).unwrap();
        let v2 = mmse_combiner(&h_la, &w.map(|e| e * Complex64::new(3.7, 0.0)), &a).unwrap();
        // Directions agree after canonicalization (signal subspace is 1-D).
        let cos = v1.dotc(&v2).norm();
        assert_relative_eq!(cos, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rates_scalar_cases() {
        let ch = ChannelSet {
            h_t: vec![],
            h_l: vec![],
            h_ta: CMatrix::zeros(1, 1),
            h_la: CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
            noise_terr: vec![],
            noise_aerial: 1.0,
        };
        let state = BeamformingState {
            w_l: CVector::from_vec(vec![Complex64::new(1.0, 0.0)]),
            w_t: CMatrix::zeros(1, 0),
            v_a: CVector::from_vec(vec![Complex64::new(1.0, 0.0)]),
            y: vec![],
            z: vec![],
            mu: HullWeights::uniform(1),
            t_apv: upa_positions(1, 0.05),
            r_apv: upa_positions(1, 0.05),
        };
        let a = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let (rate, terr) = evaluate_rates(&state, &ch, &a);
        assert_relative_eq!(rate, 1.0, epsilon = 1e-12);
        assert!(terr.is_empty());

        // Zero signal: rate 0.
        let zero = BeamformingState {
            w_l: CVector::zeros(1),
            ..state
        };
        let (rate, _) = evaluate_rates(&zero, &ch, &a);
        assert_relative_eq!(rate, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kappa_examples() {
        let h_la = CMatrix::from_element(1, 1, Complex64::new(2.0f64.sqrt(), 0.0));
        let w = CVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let v = CVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let a = CMatrix::from_element(1, 1, Complex64::new(4.0, 0.0));
        let k = dinkelbach_kappa(&v, &h_la, &w, &a).unwrap();
        assert_relative_eq!(k, 0.5, epsilon = 1e-12);
        let k0 = dinkelbach_kappa(&v, &CMatrix::zeros(1, 1), &w, &a).unwrap();
        assert_relative_eq!(k0, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn lbs_beamformer_scale_invariant_in_combiner() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let ch = random_channels(&mut rng, 4, 5, 3, 0, 1.0);
        let state = random_state(&mut rng, 4, 5, 3, 0);
        let duals = lbs_dual_weights(&ch, &state, 1.0, 2.0, &DualSolveParams::default()).unwrap();
        let w1 = lbs_beamformer(&ch.h_la, &state.v_a, &duals).unwrap();
        let scaled_v = state.v_a.map(|e| e * Complex64::new(0.0, -2.0));
        let duals2 =
            lbs_dual_weights(&ch, &state, 1.0, 2.0, &DualSolveParams::default()).unwrap();
        let w2 = lbs_beamformer(&ch.h_la, &scaled_v, &duals2).unwrap();
        let cos = w1.dotc(&w2).norm() / (w1.norm() * w2.norm());
        assert_relative_eq!(cos, 1.0, epsilon = 1e-9);
    }
}
