//! Sequential RLS signal estimation along the daisy chain, plus the
//! centralized closed form it must reproduce at the final AP.
//!
//! All per-AP quantities live in the whitener's basis: the whitened channel
//! Z^-1/2 H and observation Z^-1/2 y are expressed in the coordinates where
//! Z^-1 is diagonal. The RLS recursion only sees inner products, which are
//! invariant under that rotation, and discarded directions stay exactly zero.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::compression::Whitener;
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-8;

/// Running state of the RLS recursion: Gamma_l and the signal estimates.
#[derive(Debug, Clone)]
pub struct RlsState {
    /// K x K Hermitian PSD matrix Gamma_l.
    pub gamma: DMatrix<Complex64>,
    /// K x S estimates, one column per uplink sample.
    pub s_hat: DMatrix<Complex64>,
    /// APs processed so far.
    pub stage: usize,
}

impl RlsState {
    /// Gamma_0 = p I_K, estimates zero.
    pub fn init(power: f64, num_users: usize, samples: usize) -> RlsState {
        RlsState {
            gamma: DMatrix::from_diagonal_element(
                num_users,
                num_users,
                Complex64::new(power, 0.0),
            ),
            s_hat: DMatrix::zeros(num_users, samples),
            stage: 0,
        }
    }
}

/// One whitened observation block at an AP: N x S, in the whitener's basis.
#[derive(Debug, Clone)]
pub struct WhitenedObservation {
    pub y_tilde: DMatrix<Complex64>,
}

fn unit_complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// The noise-free part Z^-1/2 H s of the whitened observation.
pub fn whitened_signal(
    h: &DMatrix<Complex64>,
    whitener: &Whitener,
    s: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    whitener.whiten_channel(h) * s
}

/// Simulate Z^-1/2 (H s + n + q): the signal part plus one unit complex
/// Gaussian per kept direction and exact zeros along discarded directions.
pub fn simulate_whitened_observation<R: Rng>(
    h: &DMatrix<Complex64>,
    whitener: &Whitener,
    s: &DMatrix<Complex64>,
    rng: &mut R,
) -> Result<WhitenedObservation> {
    if h.nrows() != whitener.dim() {
        return Err(Error::Dimension(format!(
            "channel has {} rows but whitener has dimension {}",
            h.nrows(),
            whitener.dim()
        )));
    }
    if h.ncols() != s.nrows() {
        return Err(Error::Dimension(format!(
            "channel has {} users but signal has {} rows",
            h.ncols(),
            s.nrows()
        )));
    }
    let mut y = whitened_signal(h, whitener, s);
    for i in 0..y.nrows() {
        if whitener.zinv_eigs[i] > 0.0 {
            for j in 0..y.ncols() {
                y[(i, j)] += unit_complex_gaussian(rng);
            }
        }
    }
    Ok(WhitenedObservation { y_tilde: y })
}

fn check_hermitian(gamma: &DMatrix<Complex64>) -> Result<()> {
    let dev = (gamma - gamma.adjoint()).norm();
    if dev > HERMITIAN_TOL * gamma.norm().max(1.0) {
        return Err(Error::Numeric(format!(
            "Gamma deviates from Hermitian by {dev}"
        )));
    }
    Ok(())
}

fn hermitize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let adj = m.adjoint();
    (m + adj) * Complex64::new(0.5, 0.0)
}

/// One AP update of the RLS recursion.
pub fn rls_step(
    state: &RlsState,
    h: &DMatrix<Complex64>,
    whitener: &Whitener,
    y_tilde: &DMatrix<Complex64>,
) -> Result<RlsState> {
    check_hermitian(&state.gamma)?;
    let hw = whitener.whiten_channel(h);
    let n = hw.nrows();

    // Gamma_l = Gamma - Gamma Hw^H (I + Hw Gamma Hw^H)^-1 Hw Gamma
    let b = &hw * &state.gamma; // N x K
    let m = hermitize(DMatrix::identity(n, n) + &b * hw.adjoint());
    let chol = Cholesky::new(m)
        .ok_or_else(|| Error::Numeric("innovation covariance is not positive definite".into()))?;
    let minv_b = chol.solve(&b);
    let gamma = hermitize(&state.gamma - b.adjoint() * minv_b);

    // s_l = s_{l-1} + Gamma_l Hw^H (y - Hw s_{l-1})
    let innovation = y_tilde - &hw * &state.s_hat;
    let s_hat = &state.s_hat + &gamma * hw.adjoint() * innovation;

    Ok(RlsState {
        gamma,
        s_hat,
        stage: state.stage + 1,
    })
}

/// Fold the RLS update over the whole chain; returns the final state and the
/// Gamma trajectory.
pub fn rls_run(
    channels: &[DMatrix<Complex64>],
    whiteners: &[Whitener],
    observations: &[WhitenedObservation],
    power: f64,
) -> Result<(RlsState, Vec<DMatrix<Complex64>>)> {
    if channels.len() != whiteners.len() || channels.len() != observations.len() {
        return Err(Error::Dimension(
            "channels, whiteners and observations must cover the same APs".into(),
        ));
    }
    let num_users = channels
        .first()
        .map(|h| h.ncols())
        .ok_or_else(|| Error::Dimension("empty chain".into()))?;
    let samples = observations[0].y_tilde.ncols();

    let mut state = RlsState::init(power, num_users, samples);
    let mut trajectory = Vec::with_capacity(channels.len());
    for ((h, w), obs) in channels.iter().zip(whiteners).zip(observations) {
        state = rls_step(&state, h, w, &obs.y_tilde)?;
        trajectory.push(state.gamma.clone());
    }
    Ok((state, trajectory))
}

/// Closed-form regularized LS estimate from all whitened observations:
/// s = (H^H Z^-1 H + (1/p) I)^-1 H^H Z^-1 y, assembled per AP block.
pub fn centralized_ls(
    channels: &[DMatrix<Complex64>],
    whiteners: &[Whitener],
    observations: &[WhitenedObservation],
    power: f64,
) -> Result<DMatrix<Complex64>> {
    if channels.is_empty() {
        return Err(Error::Dimension("empty chain".into()));
    }
    let k = channels[0].ncols();
    let samples = observations[0].y_tilde.ncols();
    let mut normal = DMatrix::from_diagonal_element(k, k, Complex64::new(1.0 / power, 0.0));
    let mut rhs = DMatrix::<Complex64>::zeros(k, samples);
    for ((h, w), obs) in channels.iter().zip(whiteners).zip(observations) {
        let hw = w.whiten_channel(h);
        normal += hw.adjoint() * &hw;
        rhs += hw.adjoint() * &obs.y_tilde;
    }
    let chol = Cholesky::new(hermitize(normal))
        .ok_or_else(|| Error::Numeric("normal matrix is not positive definite".into()))?;
    Ok(chol.solve(&rhs))
}
