//! Correlated Rayleigh channel generation for one coherence block.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::geometry::{ap_user_distance, large_scale_fading, Placement};

/// Spatial correlation across the antennas of one AP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationModel {
    /// R_kl = beta_kl * I.
    Uncorrelated,
    /// R_kl[i][j] = beta_kl * rho^|i-j|.
    Exponential { rho: f64 },
}

impl CorrelationModel {
    pub fn from_rho(rho: f64) -> CorrelationModel {
        if rho == 0.0 {
            CorrelationModel::Uncorrelated
        } else {
            CorrelationModel::Exponential { rho }
        }
    }
}

/// Large-scale coefficients and per-AP channel matrices for one block.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// beta[k][l], linear.
    pub beta: Vec<Vec<f64>>,
    pub model: CorrelationModel,
    /// One N x K matrix per AP.
    pub h: Vec<DMatrix<Complex64>>,
}

impl ChannelRealization {
    /// The N x N spatial correlation matrix of user `k` at AP `l`.
    pub fn spatial_correlation(&self, k: usize, l: usize) -> DMatrix<Complex64> {
        let n = self.h[l].nrows();
        correlation_matrix(self.beta[k][l], self.model, n)
    }
}

pub fn correlation_matrix(beta: f64, model: CorrelationModel, n: usize) -> DMatrix<Complex64> {
    match model {
        CorrelationModel::Uncorrelated => {
            DMatrix::from_diagonal_element(n, n, Complex64::new(beta, 0.0))
        }
        CorrelationModel::Exponential { rho } => DMatrix::from_fn(n, n, |i, j| {
            let lag = i.abs_diff(j) as i32;
            Complex64::new(beta * rho.powi(lag), 0.0)
        }),
    }
}

fn unit_complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Draw the per-AP channel matrices for one coherence block.
///
/// Column k of H_l is R_kl^{1/2} g with g a vector of independent unit
/// complex Gaussians.
pub fn draw_channel<R: Rng>(
    config: &NetworkConfig,
    placement: &Placement,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let n = config.antennas_per_ap;
    let k_users = placement.user_positions.len();
    let model = CorrelationModel::from_rho(config.corr_rho);

    let mut beta = vec![vec![0.0; placement.ap_positions.len()]; k_users];
    for (k, user) in placement.user_positions.iter().enumerate() {
        for (l, ap) in placement.ap_positions.iter().enumerate() {
            let d = ap_user_distance(*ap, *user, config.height_m);
            beta[k][l] = large_scale_fading(d)?;
        }
    }

    let mut h = Vec::with_capacity(placement.ap_positions.len());
    for l in 0..placement.ap_positions.len() {
        let mut h_l = DMatrix::zeros(n, k_users);
        for k in 0..k_users {
            let g: Vec<Complex64> = (0..n).map(|_| unit_complex_gaussian(rng)).collect();
            match model {
                CorrelationModel::Uncorrelated => {
                    let s = beta[k][l].sqrt();
                    for i in 0..n {
                        h_l[(i, k)] = g[i] * s;
                    }
                }
                CorrelationModel::Exponential { .. } => {
                    let r = correlation_matrix(beta[k][l], model, n);
                    let chol = nalgebra::Cholesky::new(r).ok_or_else(|| {
                        Error::Numeric("correlation matrix is not positive definite".into())
                    })?;
                    let col = chol.l() * DMatrix::from_column_slice(n, 1, &g);
                    for i in 0..n {
                        h_l[(i, k)] = col[(i, 0)];
                    }
                }
            }
        }
        h.push(h_l);
    }

    Ok(ChannelRealization { beta, model, h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{dbm_to_mw, Scheme};
    use crate::geometry::place_aps;
    use crate::memory::{AllocationRule, MemoryKind, MemoryPolicy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize, k: usize, rho: f64) -> NetworkConfig {
        NetworkConfig {
            num_aps: 2,
            antennas_per_ap: n,
            num_users: k,
            power_mw: 10.0,
            noise_mw: dbm_to_mw(-85.0),
            perimeter_m: 500.0,
            inner_perimeter_m: 400.0,
            height_m: 5.0,
            subcarriers: 1024,
            tau_factor: 1.0,
            corr_rho: rho,
            memory_policy: MemoryPolicy {
                kind: MemoryKind::Infinite,
                capacity_bytes: 0,
                allocation_rule: AllocationRule::PerApLoad,
            },
            scheme: Scheme::None,
            trials: 1,
            master_seed: 3,
        }
    }

    fn placement() -> Placement {
        Placement {
            ap_positions: place_aps(2, 500.0).unwrap(),
            user_positions: vec![[40.0, 70.0], [90.0, 30.0]],
        }
    }

    #[test]
    fn trace_normalization_holds_for_both_models() {
        for rho in [0.0, 0.6] {
            let config = cfg(4, 2, rho);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let ch = draw_channel(&config, &placement(), &mut rng).unwrap();
            for k in 0..2 {
                for l in 0..2 {
                    let r = ch.spatial_correlation(k, l);
                    let tr: f64 = (0..4).map(|i| r[(i, i)].re).sum();
                    assert!((tr / 4.0 - ch.beta[k][l]).abs() < 1e-18 * ch.beta[k][l].abs());
                }
            }
        }
    }

    #[test]
    fn rho_zero_matches_uncorrelated_model_exactly() {
        let config = cfg(4, 2, 0.0);
        let ch = draw_channel(
            &config,
            &placement(),
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        assert_eq!(ch.model, CorrelationModel::Uncorrelated);
        let r0 = correlation_matrix(2.0, CorrelationModel::Uncorrelated, 3);
        let r1 = correlation_matrix(2.0, CorrelationModel::Exponential { rho: 0.0 }, 3);
        assert_eq!(r0, r1);
    }

    #[test]
    fn empirical_column_covariance_matches_beta_identity() {
        let config = cfg(3, 1, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pl = placement();
        let trials = 10_000;
        let mut cov = DMatrix::<Complex64>::zeros(3, 3);
        let mut beta = 0.0;
        for _ in 0..trials {
            let ch = draw_channel(&config, &pl, &mut rng).unwrap();
            let col = ch.h[0].column(0).clone_owned();
            cov += &col * col.adjoint();
            beta = ch.beta[0][0];
        }
        cov /= Complex64::new(trials as f64, 0.0);
        let target = DMatrix::from_diagonal_element(3, 3, Complex64::new(beta, 0.0));
        let err = (cov.clone() - &target).norm() / target.norm();
        assert!(err < 0.05, "relative covariance error {err}");

        // E||h||^2 = N * beta, within 2%.
        let tr: f64 = (0..3).map(|i| cov[(i, i)].re).sum();
        assert!((tr - 3.0 * beta).abs() / (3.0 * beta) < 0.02);
    }

    #[test]
    fn channel_is_reproducible_from_seed() {
        let config = cfg(4, 2, 0.3);
        let pl = placement();
        let a = draw_channel(&config, &pl, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = draw_channel(&config, &pl, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        for l in 0..2 {
            assert_eq!(a.h[l], b.h[l]);
        }
    }
}
