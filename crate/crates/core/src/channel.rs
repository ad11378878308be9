//! Field-response channel synthesis and randomized scenario generation.
//!
//! Under the far-field assumption only the per-path phases change when an
//! antenna moves. A link is described by transmit/receive path sets (angles),
//! a path-response matrix Σ coupling transmit to receive paths, and the
//! positions of both antenna arrays. The channel is `H = F^H Σ G`, where the
//! columns of the field-response matrices `F` and `G` hold the unit-modulus
//! per-path phases `exp(j 2π/λ · pᵀn_l)` of each antenna position `p`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::config::{db_to_linear, ScenarioConfig, JAMMER_ELEVATION_MARGIN};
use crate::geometry::PositionVector;
use crate::{CMatrix, CVector, Point};

use std::f64::consts::{PI, TAU};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("angle ({theta}, {phi}) outside the valid {side:?} range")]
    OutOfRangeAngle { side: Side, theta: f64, phi: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Which end of a link a path set belongs to. The two ends use different
/// wave-vector conventions and different valid angle ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Transmit,
    Receive,
}

/// Normalized 2-D wave vector of one path.
///
/// Transmit: `[cosθ·cosφ, sinθ]` with θ ∈ (−π/2, π/2), φ ∈ (0, π).
/// Receive:  `[cosθ·cosφ, cosθ·sinφ]` with θ ∈ (−π/2, 0), φ ∈ [−π, π).
pub fn wave_vector(theta: f64, phi: f64, side: Side) -> Result<Point, ChannelError> {
    let ok = match side {
        Side::Transmit => {
            theta > -PI / 2.0 && theta < PI / 2.0 && phi > 0.0 && phi < PI
        }
        Side::Receive => theta > -PI / 2.0 && theta < 0.0 && phi >= -PI && phi < PI,
    };
    if !ok {
        return Err(ChannelError::OutOfRangeAngle { side, theta, phi });
    }
    Ok(wave_vector_unchecked(theta, phi, side))
}

/// Wave vector without the range check; used for gridded angle shifts that
/// may step slightly outside the sampling ranges.
pub fn wave_vector_unchecked(theta: f64, phi: f64, side: Side) -> Point {
    match side {
        Side::Transmit => Point::new(theta.cos() * phi.cos(), theta.sin()),
        Side::Receive => Point::new(theta.cos() * phi.cos(), theta.cos() * phi.sin()),
    }
}

/// Elevation/azimuth angles of the `L` paths on one side of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub side: Side,
    pub elevations: Vec<f64>,
    pub azimuths: Vec<f64>,
}

impl PathSet {
    pub fn new(side: Side, elevations: Vec<f64>, azimuths: Vec<f64>) -> Self {
        assert_eq!(elevations.len(), azimuths.len());
        Self {
            side,
            elevations,
            azimuths,
        }
    }

    pub fn len(&self) -> usize {
        self.elevations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elevations.is_empty()
    }

    /// Wave vectors of all paths, in path order.
    pub fn wave_vectors(&self) -> Vec<Point> {
        self.elevations
            .iter()
            .zip(&self.azimuths)
            .map(|(&t, &p)| wave_vector_unchecked(t, p, self.side))
            .collect()
    }

    /// True iff every angle lies in the side's valid sampling range.
    pub fn in_range(&self) -> bool {
        self.elevations
            .iter()
            .zip(&self.azimuths)
            .all(|(&t, &p)| wave_vector(t, p, self.side).is_ok())
    }
}

/// Field-response vector of one antenna at `pos`: entry `l` is
/// `exp(j 2π/λ · posᵀ n_l)`; every entry has unit modulus.
pub fn field_response_vector(pos: &Point, paths: &PathSet, lambda: f64) -> CVector {
    field_response_from_waves(pos, &paths.wave_vectors(), lambda)
}

/// Same as [`field_response_vector`] but from precomputed wave vectors.
pub fn field_response_from_waves(pos: &Point, waves: &[Point], lambda: f64) -> CVector {
    let k = TAU / lambda;
    CVector::from_iterator(
        waves.len(),
        waves.iter().map(|n| Complex64::from_polar(1.0, k * pos.dot(n))),
    )
}

/// Field-response matrix `[f(p_1) … f(p_N)]` of size `L × N`.
pub fn field_response_matrix(positions: &[Point], waves: &[Point], lambda: f64) -> CMatrix {
    let k = TAU / lambda;
    DMatrix::from_fn(waves.len(), positions.len(), |l, n| {
        Complex64::from_polar(1.0, k * positions[n].dot(&waves[l]))
    })
}

/// One end of a link: its path set plus, for conventional arrays, the fixed
/// antenna positions. Fluid ends carry `fixed: None` and take their positions
/// from the optimizer state at assembly time.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkEnd {
    pub paths: PathSet,
    pub fixed: Option<PositionVector>,
}

impl LinkEnd {
    pub fn fluid(paths: PathSet) -> Self {
        Self { paths, fixed: None }
    }

    pub fn fixed(paths: PathSet, positions: PositionVector) -> Self {
        Self {
            paths,
            fixed: Some(positions),
        }
    }
}

/// One propagation link: both path sets and the path-response matrix Σ of
/// size `L_r × L_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    pub tx: LinkEnd,
    pub rx: LinkEnd,
    pub prm: CMatrix,
}

impl LinkModel {
    pub fn new(tx: LinkEnd, rx: LinkEnd, prm: CMatrix) -> Result<Self, ChannelError> {
        if prm.nrows() != rx.paths.len() || prm.ncols() != tx.paths.len() {
            return Err(ChannelError::DimensionMismatch(format!(
                "PRM is {}x{} but link has {} receive and {} transmit paths",
                prm.nrows(),
                prm.ncols(),
                rx.paths.len(),
                tx.paths.len()
            )));
        }
        Ok(Self { tx, rx, prm })
    }
}

fn resolve_end<'a>(
    end: &'a LinkEnd,
    apv: Option<&'a PositionVector>,
) -> Result<&'a PositionVector, ChannelError> {
    match (&end.fixed, apv) {
        (Some(fixed), _) => Ok(fixed),
        (None, Some(apv)) => Ok(apv),
        (None, None) => Err(ChannelError::DimensionMismatch(
            "fluid link end needs a position vector".into(),
        )),
    }
}

/// Assemble `H = F^H Σ G` at the given antenna positions. Fixed ends use
/// their stored positions; fluid ends use the supplied position vector.
pub fn assemble_channel(
    link: &LinkModel,
    tx_apv: Option<&PositionVector>,
    rx_apv: Option<&PositionVector>,
    lambda: f64,
) -> Result<CMatrix, ChannelError> {
    let tx_pos = resolve_end(&link.tx, tx_apv)?;
    let rx_pos = resolve_end(&link.rx, rx_apv)?;
    let g = field_response_matrix(tx_pos.points(), &link.tx.paths.wave_vectors(), lambda);
    let f = field_response_matrix(rx_pos.points(), &link.rx.paths.wave_vectors(), lambda);
    Ok(f.adjoint() * &link.prm * g)
}

/// Transmit-side contraction `Σ · G` of size `L_r × N_t` (the part of the
/// channel that does not depend on the receive positions).
pub fn sigma_g(
    link: &LinkModel,
    tx_apv: Option<&PositionVector>,
    lambda: f64,
) -> Result<CMatrix, ChannelError> {
    let tx_pos = resolve_end(&link.tx, tx_apv)?;
    let g = field_response_matrix(tx_pos.points(), &link.tx.paths.wave_vectors(), lambda);
    Ok(&link.prm * g)
}

/// Centered uniform planar array on a `spacing` grid; rows fill first.
pub fn upa_positions(count: usize, spacing: f64) -> PositionVector {
    let nx = (count as f64).sqrt().ceil() as usize;
    let ny = count.div_ceil(nx);
    let x0 = -0.5 * (nx.saturating_sub(1)) as f64 * spacing;
    let y0 = -0.5 * (ny.saturating_sub(1)) as f64 * spacing;
    let pts = (0..count)
        .map(|i| {
            let (ix, iy) = (i % nx, i / nx);
            Point::new(x0 + ix as f64 * spacing, y0 + iy as f64 * spacing)
        })
        .collect();
    PositionVector::new(pts)
}

/// All sampled links and noise levels of one Monte Carlo scenario.
///
/// Links, in order: TBS→user k (fixed/fixed), LBS→user k (fluid/fixed),
/// TBS→aerial (fixed/fluid), LBS→aerial (fluid/fluid), jammer→aerial
/// (fixed/fluid). Jammer→user links are absent (blocked).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub tbs_user: Vec<LinkModel>,
    pub lbs_user: Vec<LinkModel>,
    pub tbs_aerial: LinkModel,
    pub lbs_aerial: LinkModel,
    pub jammer_aerial: LinkModel,
    pub lambda: f64,
    /// Per-user noise power σ²_{T,k} (watts).
    pub noise_terr: Vec<f64>,
    /// Aerial noise power σ²_A (watts).
    pub noise_aerial: f64,
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn sample_path_set(rng: &mut ChaCha8Rng, side: Side, count: usize, margin: f64) -> PathSet {
    let (elevations, azimuths): (Vec<f64>, Vec<f64>) = (0..count)
        .map(|_| match side {
            Side::Transmit => (
                rng.gen_range(-PI / 2.0..PI / 2.0),
                rng.gen_range(0.0..PI),
            ),
            Side::Receive => (
                rng.gen_range(-PI / 2.0 + margin..-margin),
                rng.gen_range(-PI..PI),
            ),
        })
        .unzip();
    PathSet::new(side, elevations, azimuths)
}

/// Diagonal PRM with the first tap carrying the full path-loss variance and
/// the remaining `L−1` taps splitting it evenly.
fn sample_prm(rng: &mut ChaCha8Rng, paths: usize, pl_db: f64) -> CMatrix {
    let v0 = db_to_linear(pl_db);
    let mut prm = CMatrix::zeros(paths, paths);
    for l in 0..paths {
        let var = if l == 0 {
            v0
        } else {
            v0 / (paths as f64 - 1.0)
        };
        let s = (var / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        prm[(l, l)] = Complex64::new(s * re, s * im);
    }
    prm
}

fn sample_link(
    rng: &mut ChaCha8Rng,
    cfg: &ScenarioConfig,
    distance: f64,
    tx_fixed: Option<&PositionVector>,
    rx_fixed: Option<&PositionVector>,
    rx_margin: f64,
) -> LinkModel {
    let tx_paths = sample_path_set(rng, Side::Transmit, cfg.paths, 0.0);
    let rx_paths = sample_path_set(rng, Side::Receive, cfg.paths, rx_margin);
    let prm = sample_prm(rng, cfg.paths, cfg.path_loss_db(distance));
    let tx = match tx_fixed {
        Some(p) => LinkEnd::fixed(tx_paths, p.clone()),
        None => LinkEnd::fluid(tx_paths),
    };
    let rx = match rx_fixed {
        Some(p) => LinkEnd::fixed(rx_paths, p.clone()),
        None => LinkEnd::fluid(rx_paths),
    };
    LinkModel::new(tx, rx, prm).expect("sampled PRM dimensions match")
}

/// Draw one scenario. The draw order is fixed and is part of the seed
/// contract: user positions, then per-user TBS links, per-user LBS links,
/// TBS→aerial, LBS→aerial, jammer→aerial.
pub fn sample_scenario(cfg: &ScenarioConfig, seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = cfg.spacing_wl * cfg.wavelength;
    let tbs_apv = upa_positions(cfg.n_tbs, spacing);
    let jammer_apv = upa_positions(cfg.n_jammer, spacing);
    let single = PositionVector::new(vec![Point::new(0.0, 0.0)]);

    let user_pos: Vec<[f64; 3]> = (0..cfg.users)
        .map(|_| {
            let r = cfg.user_radius * rng.gen::<f64>().sqrt();
            let ang = rng.gen_range(0.0..TAU);
            [
                cfg.user_center[0] + r * ang.cos(),
                cfg.user_center[1] + r * ang.sin(),
                cfg.user_center[2],
            ]
        })
        .collect();

    let tbs_user = user_pos
        .iter()
        .map(|&u| {
            let d = dist3(cfg.tbs_pos, u);
            sample_link(&mut rng, cfg, d, Some(&tbs_apv), Some(&single), 0.0)
        })
        .collect();
    let lbs_user = user_pos
        .iter()
        .map(|&u| {
            let d = dist3(cfg.lbs_pos, u);
            sample_link(&mut rng, cfg, d, None, Some(&single), 0.0)
        })
        .collect();
    let tbs_aerial = sample_link(
        &mut rng,
        cfg,
        dist3(cfg.tbs_pos, cfg.aerial_pos),
        Some(&tbs_apv),
        None,
        0.0,
    );
    let lbs_aerial = sample_link(
        &mut rng,
        cfg,
        dist3(cfg.lbs_pos, cfg.aerial_pos),
        None,
        None,
        0.0,
    );
    let jammer_aerial = sample_link(
        &mut rng,
        cfg,
        dist3(cfg.jammer_pos, cfg.aerial_pos),
        Some(&jammer_apv),
        None,
        JAMMER_ELEVATION_MARGIN,
    );

    ChannelRealization {
        tbs_user,
        lbs_user,
        tbs_aerial,
        lbs_aerial,
        jammer_aerial,
        lambda: cfg.wavelength,
        noise_terr: vec![cfg.noise_watts(); cfg.users],
        noise_aerial: cfg.noise_watts(),
    }
}

/// Channels assembled at one pair of antenna position vectors. Jamming
/// samples are handled separately by the `robust` module.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// TBS→user channels `h_{T,k}` (length `N_T` each).
    pub h_t: Vec<CVector>,
    /// LBS→user channels `h_{L,k}(t̃)` (length `N_L` each).
    pub h_l: Vec<CVector>,
    /// TBS→aerial channel `H_TA(r̃)`, `N_A × N_T`.
    pub h_ta: CMatrix,
    /// LBS→aerial channel `H_LA(t̃, r̃)`, `N_A × N_L`.
    pub h_la: CMatrix,
    /// Per-user noise powers (watts).
    pub noise_terr: Vec<f64>,
    /// Aerial noise power (watts).
    pub noise_aerial: f64,
}

impl ChannelRealization {
    /// Assemble every non-jamming channel at the given position vectors.
    pub fn assemble_set(&self, t_apv: &PositionVector, r_apv: &PositionVector) -> ChannelSet {
        let row_to_vec = |m: CMatrix| -> CVector { m.row(0).adjoint() };
        let h_t = self
            .tbs_user
            .iter()
            .map(|l| row_to_vec(assemble_channel(l, None, None, self.lambda).unwrap()))
            .collect();
        let h_l = self
            .lbs_user
            .iter()
            .map(|l| row_to_vec(assemble_channel(l, Some(t_apv), None, self.lambda).unwrap()))
            .collect();
        let h_ta = assemble_channel(&self.tbs_aerial, None, Some(r_apv), self.lambda).unwrap();
        let h_la =
            assemble_channel(&self.lbs_aerial, Some(t_apv), Some(r_apv), self.lambda).unwrap();
        ChannelSet {
            h_t,
            h_l,
            h_ta,
            h_la,
            noise_terr: self.noise_terr.clone(),
            noise_aerial: self.noise_aerial,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn wave_vector_examples() {
        let t = wave_vector(0.0, 0.0001, Side::Transmit).unwrap();
        assert_relative_eq!(t.x, 1.0, epsilon = 1e-7);
        assert_relative_eq!(t.y, 0.0, epsilon = 1e-7);
        let t = wave_vector(PI / 4.0, PI / 2.0, Side::Transmit).unwrap();
        assert_relative_eq!(t.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(t.y, (2.0f64).sqrt() / 2.0, epsilon = 1e-12);
        let r = wave_vector(-PI / 4.0, 0.0, Side::Receive).unwrap();
        assert_relative_eq!(r.x, (2.0f64).sqrt() / 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.y, 0.0, epsilon = 1e-12);
        assert!(wave_vector(0.3, 0.5, Side::Receive).is_err());
        assert!(wave_vector(0.0, -0.5, Side::Transmit).is_err());
    }

    #[test]
    fn frv_at_origin_is_ones() {
        let paths = PathSet::new(Side::Transmit, vec![0.4, -0.2, 1.1], vec![0.3, 2.0, 1.5]);
        let v = field_response_vector(&Point::new(0.0, 0.0), &paths, 0.1);
        for e in v.iter() {
            assert_relative_eq!(e.re, 1.0, epsilon = 1e-15);
            assert_relative_eq!(e.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn frv_half_wavelength_phase_pi() {
        let lambda = 0.1;
        let paths = PathSet::new(Side::Transmit, vec![0.0], vec![1e-9]);
        let v = field_response_vector(&Point::new(lambda / 2.0, 0.0), &paths, lambda);
        assert_relative_eq!(v[0].re, -1.0, epsilon = 1e-9);
        assert_relative_eq!(v[0].im, 0.0, epsilon = 1e-7);
    }

    #[test]
    fn assemble_trivial_link() {
        let origin = PositionVector::new(vec![Point::new(0.0, 0.0)]);
        let tx = LinkEnd::fixed(
            PathSet::new(Side::Transmit, vec![0.0], vec![PI / 2.0]),
            origin.clone(),
        );
        let rx = LinkEnd::fixed(
            PathSet::new(Side::Receive, vec![-0.3], vec![0.2]),
            origin.clone(),
        );
        let prm = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let link = LinkModel::new(tx, rx, prm).unwrap();
        let h = assemble_channel(&link, None, None, 0.1).unwrap();
        assert_relative_eq!(h[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(h[(0, 0)].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn assemble_single_path_phase() {
        // tx at (λ/2, 0) with a boresight path flips the sign of σ.
        let lambda = 0.1;
        let sigma = Complex64::new(0.7, -0.2);
        let tx = LinkEnd::fixed(
            PathSet::new(Side::Transmit, vec![0.0], vec![1e-12]),
            PositionVector::new(vec![Point::new(lambda / 2.0, 0.0)]),
        );
        let rx = LinkEnd::fixed(
            PathSet::new(Side::Receive, vec![-0.4], vec![1.0]),
            PositionVector::new(vec![Point::new(0.0, 0.0)]),
        );
        let link = LinkModel::new(tx, rx, CMatrix::from_element(1, 1, sigma)).unwrap();
        let h = assemble_channel(&link, None, None, lambda).unwrap();
        assert_relative_eq!(h[(0, 0)].re, -sigma.re, epsilon = 1e-9);
        assert_relative_eq!(h[(0, 0)].im, -sigma.im, epsilon = 1e-9);
    }

    #[test]
    fn assemble_matches_scalar_loop() {
        // Entry-wise recomputation of H = F^H Σ G from the scalar formula.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lambda = 0.1;
        let lt = 3;
        let lr = 2;
        let tx_paths = sample_path_set(&mut rng, Side::Transmit, lt, 0.0);
        let rx_paths = sample_path_set(&mut rng, Side::Receive, lr, 0.0);
        let mut prm = CMatrix::zeros(lr, lt);
        for e in prm.iter_mut() {
            *e = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let tx_pos = PositionVector::new(vec![
            Point::new(0.01, -0.02),
            Point::new(0.04, 0.0),
        ]);
        let rx_pos = PositionVector::new(vec![
            Point::new(-0.03, 0.01),
            Point::new(0.02, 0.02),
            Point::new(0.0, -0.04),
        ]);
        let link = LinkModel::new(
            LinkEnd::fluid(tx_paths.clone()),
            LinkEnd::fluid(rx_paths.clone()),
            prm.clone(),
        )
        .unwrap();
        let h = assemble_channel(&link, Some(&tx_pos), Some(&rx_pos), lambda).unwrap();
        let k = TAU / lambda;
        for m in 0..rx_pos.len() {
            for n in 0..tx_pos.len() {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..lr {
                    for b in 0..lt {
                        let fr = Complex64::from_polar(
                            1.0,
                            k * rx_pos.point(m).dot(&rx_paths.wave_vectors()[a]),
                        );
                        let gt = Complex64::from_polar(
                            1.0,
                            k * tx_pos.point(n).dot(&tx_paths.wave_vectors()[b]),
                        );
                        acc += fr.conj() * prm[(a, b)] * gt;
                    }
                }
                assert_relative_eq!((h[(m, n)] - acc).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn scenario_deterministic_for_seed() {
        let cfg = ScenarioConfig::default();
        let a = sample_scenario(&cfg, 42);
        let b = sample_scenario(&cfg, 42);
        assert_eq!(a, b);
        let c = sample_scenario(&cfg, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn scenario_angles_in_range() {
        let cfg = ScenarioConfig::default();
        let real = sample_scenario(&cfg, 5);
        for link in real
            .tbs_user
            .iter()
            .chain(real.lbs_user.iter())
            .chain([&real.tbs_aerial, &real.lbs_aerial, &real.jammer_aerial])
        {
            assert!(link.tx.paths.in_range());
            assert!(link.rx.paths.in_range());
        }
    }

    #[test]
    fn upa_is_centered_grid() {
        let lambda = 0.1;
        let apv = upa_positions(4, lambda / 2.0);
        let expect = [
            Point::new(-0.025, -0.025),
            Point::new(0.025, -0.025),
            Point::new(-0.025, 0.025),
            Point::new(0.025, 0.025),
        ];
        for (p, e) in apv.points().iter().zip(expect.iter()) {
            assert_relative_eq!((p - e).norm(), 0.0, epsilon = 1e-15);
        }
        assert!(crate::geometry::min_distance_satisfied(&apv, lambda / 2.0));
        let apv16 = upa_positions(16, lambda / 2.0);
        assert!(crate::geometry::min_distance_satisfied(
            &apv16,
            lambda / 2.0
        ));
    }

    proptest! {
        #[test]
        fn frv_entries_unit_modulus(
            x in -0.5f64..0.5, y in -0.5f64..0.5,
            t1 in -1.5f64..1.5, p1 in 0.01f64..3.1,
            t2 in -1.5f64..1.5, p2 in 0.01f64..3.1,
        ) {
            let paths = PathSet::new(Side::Transmit, vec![t1, t2], vec![p1, p2]);
            let v = field_response_vector(&Point::new(x, y), &paths, 0.1);
            for e in v.iter() {
                prop_assert!((e.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn wave_vector_norm_at_most_one(
            t in -1.57f64..1.57, p in 0.001f64..3.14,
        ) {
            let w = wave_vector_unchecked(t, p, Side::Transmit);
            prop_assert!(w.norm() <= 1.0 + 1e-12);
            let t_rx = -t.abs().max(1e-6);
            let w = wave_vector_unchecked(t_rx, p, Side::Receive);
            prop_assert!(w.norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn receive_translation_preserves_single_path_norm(
            dx in -0.3f64..0.3, dy in -0.3f64..0.3, seed in 0u64..50,
        ) {
            // One receive path: a common receive-side shift leaves ‖H‖ unchanged.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lambda = 0.1;
            let tx_paths = sample_path_set(&mut rng, Side::Transmit, 3, 0.0);
            let rx_paths = sample_path_set(&mut rng, Side::Receive, 1, 0.0);
            let mut prm = CMatrix::zeros(1, 3);
            for e in prm.iter_mut() {
                *e = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let link = LinkModel::new(
                LinkEnd::fluid(tx_paths),
                LinkEnd::fluid(rx_paths),
                prm,
            ).unwrap();
            let tx_pos = PositionVector::new(vec![Point::new(0.0, 0.0), Point::new(0.03, 0.01)]);
            let rx_pos = PositionVector::new(vec![Point::new(0.0, 0.02), Point::new(-0.02, 0.0)]);
            let shifted = PositionVector::new(
                rx_pos.points().iter().map(|p| p + Point::new(dx, dy)).collect(),
            );
            let h0 = assemble_channel(&link, Some(&tx_pos), Some(&rx_pos), lambda).unwrap();
            let h1 = assemble_channel(&link, Some(&tx_pos), Some(&shifted), lambda).unwrap();
            prop_assert!((h0.norm() - h1.norm()).abs() < 1e-9);
        }

        #[test]
        fn assembly_linear_in_prm(seed in 0u64..30, scale_re in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lambda = 0.1;
            let tx_paths = sample_path_set(&mut rng, Side::Transmit, 2, 0.0);
            let rx_paths = sample_path_set(&mut rng, Side::Receive, 2, 0.0);
            let mut prm = CMatrix::zeros(2, 2);
            for e in prm.iter_mut() {
                *e = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let pos = PositionVector::new(vec![Point::new(0.01, 0.0), Point::new(-0.02, 0.03)]);
            let mk = |prm: CMatrix| {
                LinkModel::new(LinkEnd::fluid(tx_paths.clone()), LinkEnd::fluid(rx_paths.clone()), prm).unwrap()
            };
            let s = Complex64::new(scale_re, 0.5);
            let h1 = assemble_channel(&mk(prm.clone()), Some(&pos), Some(&pos), lambda).unwrap();
            let h2 = assemble_channel(&mk(prm.map(|e| e * s)), Some(&pos), Some(&pos), lambda).unwrap();
            prop_assert!((h2 - h1.map(|e| e * s)).norm() < 1e-10);
        }
    }
}
