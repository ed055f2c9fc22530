//! Exact and upper-bound sum spectral efficiency.
//!
//! Everything is evaluated in whitened coordinates, where the network-wide
//! log-det collapses to a K x K Gram determinant:
//!
//!   log2 det(p H H^H Z^-1 + I_NL) = log2 det(I_K + p sum_l Hw_l^H Hw_l)
//!
//! with Hw_l = Z_l^-1/2 H_l. The per-AP bound replaces the network Gram with
//! per-block determinants, and the EC diagonal bound further replaces each
//! block with its antenna-wise scalar terms.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

use crate::compression::{row_norms, Whitener};
use crate::config::Scheme;

/// SE outputs of one realization, bits/s/Hz.
#[derive(Debug, Clone, Copy)]
pub struct SeReport {
    pub sum_se_exact: f64,
    pub sum_se_bound: f64,
    pub per_user_exact: f64,
    pub per_user_bound: f64,
    pub scheme: Scheme,
}

fn hermitize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let adj = m.adjoint();
    (m + adj) * Complex64::new(0.5, 0.0)
}

/// log2 det(I + p G) for Hermitian PSD G, via Cholesky.
fn logdet2_identity_plus(g: DMatrix<Complex64>, power: f64) -> f64 {
    let k = g.nrows();
    let m = hermitize(g * Complex64::new(power, 0.0)) + DMatrix::identity(k, k);
    let chol = Cholesky::new(m).expect("I + PSD is positive definite");
    2.0 * chol
        .l()
        .diagonal()
        .iter()
        .map(|d| d.re.log2())
        .sum::<f64>()
}

/// Network-wide exact sum-SE, log2 det(p H H^H Z^-1 + I_NL).
pub fn sum_se_exact(
    channels: &[DMatrix<Complex64>],
    whiteners: &[Whitener],
    power: f64,
) -> f64 {
    let k = channels[0].ncols();
    let mut gram = DMatrix::<Complex64>::zeros(k, k);
    for (h, w) in channels.iter().zip(whiteners) {
        let hw = w.whiten_channel(h);
        gram += hw.adjoint() * hw;
    }
    logdet2_identity_plus(gram, power)
}

/// Per-AP blockwise sum, sum_l log2 det(p H_l H_l^H Z_l^-1 + I_N).
///
/// This is the VC upper bound, and the intermediate term of the EC chain.
pub fn sum_se_blockwise(
    channels: &[DMatrix<Complex64>],
    whiteners: &[Whitener],
    power: f64,
) -> f64 {
    channels
        .iter()
        .zip(whiteners)
        .map(|(h, w)| {
            let hw = w.whiten_channel(h);
            // Use the smaller Gram side.
            if hw.nrows() <= hw.ncols() {
                logdet2_identity_plus(&hw * hw.adjoint(), power)
            } else {
                logdet2_identity_plus(hw.adjoint() * &hw, power)
            }
        })
        .sum()
}

/// EC diagonal bound, sum_l log2 det(p W_l Z_l^-1 + I_N) with diagonal Z_l.
///
/// Only meaningful for identity-basis whiteners (EC or none).
pub fn sum_se_ec_diag(
    channels: &[DMatrix<Complex64>],
    whiteners: &[Whitener],
    power: f64,
) -> f64 {
    channels
        .iter()
        .zip(whiteners)
        .map(|(h, w)| {
            debug_assert!(w.basis.is_none());
            row_norms(h)
                .iter()
                .zip(w.zinv_eigs.iter())
                .map(|(&wn, &zinv)| (power * wn * zinv + 1.0).log2())
                .sum::<f64>()
        })
        .sum()
}

/// Average SE per user after the coherence-block prefactor.
pub fn per_user_se(sum_se: f64, num_users: usize, tau_factor: f64) -> f64 {
    tau_factor * sum_se / num_users as f64
}

/// Assemble the exact/bound report for one realization.
pub fn se_report(
    channels: &[DMatrix<Complex64>],
    whiteners: &[Whitener],
    power: f64,
    scheme: Scheme,
    num_users: usize,
    tau_factor: f64,
) -> SeReport {
    let exact = sum_se_exact(channels, whiteners, power);
    let bound = match scheme {
        Scheme::Vc => sum_se_blockwise(channels, whiteners, power),
        Scheme::Ec => sum_se_ec_diag(channels, whiteners, power),
        Scheme::None => sum_se_blockwise(channels, whiteners, power),
    };
    SeReport {
        sum_se_exact: exact,
        sum_se_bound: bound,
        per_user_exact: per_user_se(exact, num_users, tau_factor),
        per_user_bound: per_user_se(bound, num_users, tau_factor),
        scheme,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::{build_whitener, ec_waterfill, vc_waterfill, Compression};
    use crate::memory::VectorBudget;
    use nalgebra::{dmatrix, DVector};
    use rand::Rng as _;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cplx(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_channel(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, k, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    #[test]
    fn scalar_uncompressed_se() {
        let h = vec![dmatrix![cplx(3f64.sqrt())]];
        let w = vec![Whitener::uniform(1, 1.0)];
        assert!((sum_se_exact(&h, &w, 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_compressed_se() {
        // With the C_s = 2 VC allocation, zinv = 3/7 and SE = log2(16/7).
        let h = dmatrix![cplx(3f64.sqrt())];
        let a = vc_waterfill(&h, 1.0, 1.0, VectorBudget::Bits(2.0)).unwrap();
        let w = build_whitener(&Compression::Vc(a), 1.0, 1);
        let se = sum_se_exact(&[h], &[w], 1.0);
        assert!((se - (16f64 / 7.0).log2()).abs() < 1e-6, "se = {se}");
    }

    #[test]
    fn all_discarded_gives_zero_se() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = vec![random_channel(&mut rng, 2, 2)];
        let zero = Whitener {
            basis: None,
            zinv_eigs: DVector::zeros(2),
            zinv_sqrt_eigs: DVector::zeros(2),
        };
        assert_eq!(sum_se_exact(&h, &[zero], 1.0), 0.0);
    }

    #[test]
    fn single_block_bound_is_exact_for_vc() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = vec![random_channel(&mut rng, 3, 2)];
        let a = vc_waterfill(&h[0], 1.0, 0.5, VectorBudget::Bits(5.0)).unwrap();
        let w = vec![build_whitener(&Compression::Vc(a), 0.5, 3)];
        let exact = sum_se_exact(&h, &w, 1.0);
        let bound = sum_se_blockwise(&h, &w, 1.0);
        assert!((exact - bound).abs() < 1e-9);
    }

    #[test]
    fn bound_chains_hold_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let channels: Vec<_> = (0..4).map(|_| random_channel(&mut rng, 2, 3)).collect();
            let sigma2 = 0.6;
            let vc_w: Vec<_> = channels
                .iter()
                .map(|h| {
                    let a =
                        vc_waterfill(h, 1.0, sigma2, VectorBudget::Bits(rng.gen_range(0.5..8.0)))
                            .unwrap();
                    build_whitener(&Compression::Vc(a), sigma2, 2)
                })
                .collect();
            let exact = sum_se_exact(&channels, &vc_w, 1.0);
            let bound = sum_se_blockwise(&channels, &vc_w, 1.0);
            assert!(bound >= exact - 1e-9);

            let ec_w: Vec<_> = channels
                .iter()
                .map(|h| {
                    let a =
                        ec_waterfill(h, 1.0, sigma2, VectorBudget::Bits(rng.gen_range(0.5..8.0)))
                            .unwrap();
                    build_whitener(&Compression::Ec(a), sigma2, 2)
                })
                .collect();
            let ec_exact = sum_se_exact(&channels, &ec_w, 1.0);
            let ec_mid = sum_se_blockwise(&channels, &ec_w, 1.0);
            let ec_diag = sum_se_ec_diag(&channels, &ec_w, 1.0);
            assert!(ec_mid >= ec_exact - 1e-9);
            assert!(ec_diag >= ec_mid - 1e-9);
        }
    }

    #[test]
    fn no_compression_reduces_to_receiver_noise_logdet() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let channels: Vec<_> = (0..3).map(|_| random_channel(&mut rng, 2, 2)).collect();
        let sigma2 = 0.3;
        let w: Vec<_> = (0..3).map(|_| Whitener::uniform(2, 1.0 / sigma2)).collect();
        let se = sum_se_exact(&channels, &w, 2.0);

        // Direct stacked evaluation of log2 det(p H H^H / sigma^2 + I).
        let mut stacked = DMatrix::<Complex64>::zeros(6, 2);
        for (l, h) in channels.iter().enumerate() {
            stacked.view_mut((2 * l, 0), (2, 2)).copy_from(h);
        }
        let m = &stacked * stacked.adjoint() * cplx(2.0 / sigma2)
            + DMatrix::<Complex64>::identity(6, 6);
        let direct = m.lu().determinant().norm().log2();
        assert!((se - direct).abs() < 1e-9);
    }

    #[test]
    fn exact_se_monotone_in_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let channels: Vec<_> = (0..2).map(|_| random_channel(&mut rng, 3, 2)).collect();
        let sigma2 = 0.5;
        let se_at = |bits: f64| {
            let w: Vec<_> = channels
                .iter()
                .map(|h| {
                    let a = vc_waterfill(h, 1.0, sigma2, VectorBudget::Bits(bits)).unwrap();
                    build_whitener(&Compression::Vc(a), sigma2, 3)
                })
                .collect();
            sum_se_exact(&channels, &w, 1.0)
        };
        let mut prev = -1.0;
        for bits in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let se = se_at(bits);
            assert!(se >= prev - 1e-9, "SE decreased at C_s = {bits}");
            prev = se;
        }
    }

    #[test]
    fn single_antenna_schemes_coincide() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let channels: Vec<_> = (0..4).map(|_| random_channel(&mut rng, 1, 3)).collect();
            let sigma2 = 0.4;
            let bits = rng.gen_range(0.5..6.0);
            let vc_w: Vec<_> = channels
                .iter()
                .map(|h| {
                    let a = vc_waterfill(h, 1.0, sigma2, VectorBudget::Bits(bits)).unwrap();
                    build_whitener(&Compression::Vc(a), sigma2, 1)
                })
                .collect();
            let ec_w: Vec<_> = channels
                .iter()
                .map(|h| {
                    let a = ec_waterfill(h, 1.0, sigma2, VectorBudget::Bits(bits)).unwrap();
                    build_whitener(&Compression::Ec(a), sigma2, 1)
                })
                .collect();
            let dv = sum_se_exact(&channels, &vc_w, 1.0);
            let de = sum_se_exact(&channels, &ec_w, 1.0);
            assert!((dv - de).abs() < 1e-10, "VC {dv} vs EC {de}");
        }
    }

    #[test]
    fn per_user_scaling() {
        assert_eq!(per_user_se(8.0, 4, 1.0), 2.0);
        assert_eq!(per_user_se(8.0, 4, 0.5), 1.0);
        assert_eq!(per_user_se(3.0, 1, 1.0), 3.0);
    }

    #[test]
    fn report_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let channels: Vec<_> = (0..2).map(|_| random_channel(&mut rng, 2, 3)).collect();
        let w: Vec<_> = (0..2).map(|_| Whitener::uniform(2, 2.0)).collect();
        let r = se_report(&channels, &w, 1.0, Scheme::None, 3, 0.5);
        assert!(r.sum_se_bound >= r.sum_se_exact - 1e-9);
        assert!((r.per_user_exact - 0.5 * r.sum_se_exact / 3.0).abs() < 1e-15);
        assert!((r.per_user_bound - 0.5 * r.sum_se_bound / 3.0).abs() < 1e-15);
    }
}
