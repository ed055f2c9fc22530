//! Sum-SE-maximizing compression allocations under a per-vector bit budget.
//!
//! Both schemes reduce to the same water-filling problem. With per-direction
//! signal gains g_i (p lambda_i^2 for VC in the channel eigenbasis, p w_i for
//! EC per antenna element) and P_i = g_i + sigma^2, the inverse compression
//! noise variance in direction i is
//!
//!   x_i = [ (1/mu) (1/sigma^2 - 1/P_i) - 1/sigma^2 ]^+
//!
//! with mu chosen so that sum_i log2(x_i P_i + 1) equals the budget C_s.
//! The rate is strictly decreasing in mu, so mu is found by bisection.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::memory::VectorBudget;

/// Bisection stops once the achieved rate is within this many bits of C_s.
pub const RATE_TOL_BITS: f64 = 1e-6;
const MAX_BISECTION_ITERS: usize = 200;

/// Per active direction, budgets beyond this are numerically lossless: the
/// implied compression noise variance underflows relative to sigma^2.
const LOSSLESS_BITS_PER_DIR: f64 = 400.0;

/// Eigenvalues of H H^H below this fraction of the largest are treated as a
/// numerical null space and receive zero rate.
const NULLSPACE_REL_TOL: f64 = 1e-12;

/// Vector-wise compression allocation at one AP.
#[derive(Debug, Clone)]
pub struct VcAllocation {
    /// Eigenvectors of H_l H_l^H, one per column.
    pub basis: DMatrix<Complex64>,
    /// Eigenvalues lambda_i^2 of H_l H_l^H.
    pub lambda_h2: DVector<f64>,
    /// Eigenvalues of the inverse compression noise covariance Q^-1.
    pub lambda_q: DVector<f64>,
    /// Lagrange multiplier of the rate constraint.
    pub mu: f64,
    pub achieved_bits: f64,
    /// Budget was unlimited (or numerically lossless); no compression applied.
    pub unlimited: bool,
    /// The rate constraint could not be met (zero channel with C_s > 0).
    pub rate_unreachable: bool,
}

/// Element-wise compression allocation at one AP.
#[derive(Debug, Clone)]
pub struct EcAllocation {
    /// Diagonal of (Q^d)^-1, i.e. 1 / sigma_e,i^2.
    pub inv_sigma2_e: DVector<f64>,
    /// Bits b_i spent on each element.
    pub bits_per_element: DVector<f64>,
    /// Diagonal of P = p W + sigma^2 I.
    pub p_diag: DVector<f64>,
    /// Row norms ||H[i,:]||^2.
    pub w_diag: DVector<f64>,
    pub mu: f64,
    pub achieved_bits: f64,
    pub unlimited: bool,
    pub rate_unreachable: bool,
}

/// A per-AP compression choice, as consumed by the whitener and metrics.
#[derive(Debug, Clone)]
pub enum Compression {
    /// Store uncompressed; Z = sigma^2 I.
    None,
    Vc(VcAllocation),
    Ec(EcAllocation),
}

/// Z^-1 in eigenvalue form. A zero eigenvalue encodes a direction whose
/// compression noise is infinite (the direction is discarded); no infinities
/// are ever stored.
#[derive(Debug, Clone)]
pub struct Whitener {
    /// Orthonormal basis of Z^-1; `None` means the identity (EC, none).
    pub basis: Option<DMatrix<Complex64>>,
    pub zinv_eigs: DVector<f64>,
    pub zinv_sqrt_eigs: DVector<f64>,
}

struct WaterfillSolution {
    x: Vec<f64>,
    mu: f64,
    achieved_bits: f64,
    unlimited: bool,
    rate_unreachable: bool,
}

fn rate_bits(x: f64, p_i: f64) -> f64 {
    (x * p_i + 1.0).log2()
}

/// Total rate at multiplier mu for the active directions.
fn rate_at_mu(gains: &[f64], sigma2: f64, mu: f64) -> f64 {
    let inv_s2 = 1.0 / sigma2;
    gains
        .iter()
        .filter(|&&g| g > 0.0)
        .map(|&g| {
            let p_i = g + sigma2;
            let x = ((inv_s2 - 1.0 / p_i) / mu - inv_s2).max(0.0);
            rate_bits(x, p_i)
        })
        .sum()
}

/// Solve the common water-filling problem over per-direction gains.
fn waterfill(gains: &[f64], sigma2: f64, target_bits: f64) -> Result<WaterfillSolution> {
    let n = gains.len();
    let inv_s2 = 1.0 / sigma2;
    let active: Vec<usize> = (0..n).filter(|&i| gains[i] > 0.0).collect();
    let zeros = WaterfillSolution {
        x: vec![0.0; n],
        mu: 0.0,
        achieved_bits: 0.0,
        unlimited: false,
        rate_unreachable: false,
    };

    if target_bits <= 0.0 {
        return Ok(zeros);
    }
    if active.is_empty() {
        // The rate constraint cannot be met by any allocation; the objective
        // does not depend on the allocation either, so return zeros flagged.
        return Ok(WaterfillSolution {
            rate_unreachable: true,
            ..zeros
        });
    }
    if target_bits >= LOSSLESS_BITS_PER_DIR * active.len() as f64 {
        return Ok(WaterfillSolution {
            x: vec![0.0; n],
            mu: 0.0,
            achieved_bits: target_bits,
            unlimited: true,
            rate_unreachable: false,
        });
    }

    // mu >= sigma^2 * max_i a_i zeroes every direction; the rate blows up as
    // mu -> 0. Bisect in log(mu) between a bracket verified below.
    let a_max = active
        .iter()
        .map(|&i| inv_s2 - 1.0 / (gains[i] + sigma2))
        .fold(0.0f64, f64::max);
    let mu_hi = sigma2 * a_max;
    debug_assert!(rate_at_mu(gains, sigma2, mu_hi) <= RATE_TOL_BITS);

    let mut mu_lo = mu_hi / 2.0;
    let mut guard = 0;
    while rate_at_mu(gains, sigma2, mu_lo) < target_bits {
        mu_lo /= 2.0;
        guard += 1;
        if guard > 2000 || mu_lo == 0.0 {
            return Err(Error::Numeric(format!(
                "failed to bracket the water-filling multiplier for C_s = {target_bits}"
            )));
        }
    }

    let mut lo = mu_lo.ln();
    let mut hi = mu_hi.ln();
    let mut mu = (0.5 * (lo + hi)).exp();
    for _ in 0..MAX_BISECTION_ITERS {
        mu = (0.5 * (lo + hi)).exp();
        let r = rate_at_mu(gains, sigma2, mu);
        if (r - target_bits).abs() <= RATE_TOL_BITS {
            break;
        }
        if r > target_bits {
            lo = mu.ln();
        } else {
            hi = mu.ln();
        }
    }

    let x: Vec<f64> = gains
        .iter()
        .map(|&g| {
            if g > 0.0 {
                ((inv_s2 - 1.0 / (g + sigma2)) / mu - inv_s2).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let achieved_bits = x
        .iter()
        .zip(gains)
        .map(|(&xi, &g)| rate_bits(xi, g + sigma2))
        .sum();

    Ok(WaterfillSolution {
        x,
        mu,
        achieved_bits,
        unlimited: false,
        rate_unreachable: false,
    })
}

fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Solve the VC allocation for one AP.
pub fn vc_waterfill(
    h: &DMatrix<Complex64>,
    power: f64,
    sigma2: f64,
    budget: VectorBudget,
) -> Result<VcAllocation> {
    let n = h.nrows();
    let gram = hermitize(&(h * h.adjoint()));
    let eig = gram.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let lambda_h2 = DVector::from_iterator(
        n,
        eig.eigenvalues
            .iter()
            .map(|&v| if v > NULLSPACE_REL_TOL * lambda_max { v } else { 0.0 }),
    );

    let (lambda_q, mu, achieved_bits, unlimited, rate_unreachable) = match budget {
        VectorBudget::Unlimited => (DVector::zeros(n), 0.0, 0.0, true, false),
        VectorBudget::Bits(bits) => {
            let gains: Vec<f64> = lambda_h2.iter().map(|&l2| power * l2).collect();
            let sol = waterfill(&gains, sigma2, bits)?;
            (
                DVector::from_vec(sol.x),
                sol.mu,
                sol.achieved_bits,
                sol.unlimited,
                sol.rate_unreachable,
            )
        }
    };

    Ok(VcAllocation {
        basis: eig.eigenvectors,
        lambda_h2,
        lambda_q,
        mu,
        achieved_bits,
        unlimited,
        rate_unreachable,
    })
}

/// Row norms ||H[i,:]||^2, the per-antenna signal gains of EC.
pub fn row_norms(h: &DMatrix<Complex64>) -> DVector<f64> {
    DVector::from_iterator(h.nrows(), h.row_iter().map(|r| r.norm_squared()))
}

/// Solve the EC allocation for one AP.
pub fn ec_waterfill(
    h: &DMatrix<Complex64>,
    power: f64,
    sigma2: f64,
    budget: VectorBudget,
) -> Result<EcAllocation> {
    let n = h.nrows();
    let w_diag = row_norms(h);
    let p_diag = DVector::from_iterator(n, w_diag.iter().map(|&w| power * w + sigma2));

    let (inv_sigma2_e, mu, achieved_bits, unlimited, rate_unreachable) = match budget {
        VectorBudget::Unlimited => (DVector::zeros(n), 0.0, 0.0, true, false),
        VectorBudget::Bits(bits) => {
            let gains: Vec<f64> = w_diag.iter().map(|&w| power * w).collect();
            let sol = waterfill(&gains, sigma2, bits)?;
            (
                DVector::from_vec(sol.x),
                sol.mu,
                sol.achieved_bits,
                sol.unlimited,
                sol.rate_unreachable,
            )
        }
    };

    let bits_per_element = DVector::from_iterator(
        n,
        inv_sigma2_e
            .iter()
            .zip(p_diag.iter())
            .map(|(&x, &p_i)| rate_bits(x, p_i)),
    );

    Ok(EcAllocation {
        inv_sigma2_e,
        bits_per_element,
        p_diag,
        w_diag,
        mu,
        achieved_bits,
        unlimited,
        rate_unreachable,
    })
}

/// Build the Z^-1 / Z^-1/2 operator for a per-AP compression choice.
pub fn build_whitener(alloc: &Compression, sigma2: f64, n: usize) -> Whitener {
    let inv_s2 = 1.0 / sigma2;
    let from_inv_q = |x: f64| x / (1.0 + sigma2 * x);
    match alloc {
        Compression::None => Whitener::uniform(n, inv_s2),
        Compression::Vc(a) => {
            if a.unlimited {
                Whitener::uniform(n, inv_s2)
            } else {
                let eigs = DVector::from_iterator(n, a.lambda_q.iter().map(|&x| from_inv_q(x)));
                Whitener::new(Some(a.basis.clone()), eigs)
            }
        }
        Compression::Ec(a) => {
            if a.unlimited {
                Whitener::uniform(n, inv_s2)
            } else {
                let eigs =
                    DVector::from_iterator(n, a.inv_sigma2_e.iter().map(|&x| from_inv_q(x)));
                Whitener::new(None, eigs)
            }
        }
    }
}

impl Whitener {
    fn new(basis: Option<DMatrix<Complex64>>, zinv_eigs: DVector<f64>) -> Whitener {
        let zinv_sqrt_eigs = zinv_eigs.map(f64::sqrt);
        Whitener {
            basis,
            zinv_eigs,
            zinv_sqrt_eigs,
        }
    }

    /// Whitener of the uncompressed observation, Z = sigma^2 I.
    pub fn uniform(n: usize, inv_sigma2: f64) -> Whitener {
        Whitener::new(None, DVector::from_element(n, inv_sigma2))
    }

    pub fn dim(&self) -> usize {
        self.zinv_eigs.len()
    }

    /// Z^-1/2 H, expressed in the whitener's basis. Rows along discarded
    /// directions (zero eigenvalue) are exactly zero.
    pub fn whiten_channel(&self, h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut rotated = match &self.basis {
            Some(u) => u.adjoint() * h,
            None => h.clone(),
        };
        for (i, &s) in self.zinv_sqrt_eigs.iter().enumerate() {
            if s == 0.0 {
                rotated.row_mut(i).fill(Complex64::new(0.0, 0.0));
            } else {
                rotated.row_mut(i).scale_mut(s);
            }
        }
        rotated
    }
}

/// Recompute the mutual-information rate of an allocation from the log-det
/// definition, independent of the water-filling internals.
pub fn achieved_rate(
    alloc: &Compression,
    h: &DMatrix<Complex64>,
    power: f64,
    sigma2: f64,
) -> f64 {
    match alloc {
        Compression::None => f64::INFINITY,
        Compression::Vc(a) => {
            if a.unlimited {
                return f64::INFINITY;
            }
            // log2 det( Q^-1 (p H H^H + sigma^2 I) + I )
            let n = h.nrows();
            let q_inv = &a.basis * DMatrix::from_diagonal(&a.lambda_q.map(|x| Complex64::new(x, 0.0))) * a.basis.adjoint();
            let cov = h * h.adjoint() * Complex64::new(power, 0.0)
                + DMatrix::from_diagonal_element(n, n, Complex64::new(sigma2, 0.0));
            let m = q_inv * cov + DMatrix::identity(n, n);
            let det: Complex64 = m.lu().determinant();
            det.norm().log2()
        }
        Compression::Ec(a) => {
            if a.unlimited {
                return f64::INFINITY;
            }
            // Recompute P from H directly.
            row_norms(h)
                .iter()
                .zip(a.inv_sigma2_e.iter())
                .map(|(&w, &x)| rate_bits(x, power * w + sigma2))
                .sum()
        }
    }
}
