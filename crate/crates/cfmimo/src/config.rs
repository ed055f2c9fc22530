//! Scalar parameters of one experiment configuration.

use std::fmt;

use crate::error::{Error, Result};
use crate::memory::MemoryPolicy;

/// Compression scheme applied to the stored received vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// No compression; only receiver noise.
    None,
    /// Vector-wise compression in the channel eigenbasis.
    Vc,
    /// Element-wise (per-antenna) compression.
    Ec,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::None => write!(f, "none"),
            Scheme::Vc => write!(f, "vc"),
            Scheme::Ec => write!(f, "ec"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scheme::None),
            "vc" => Ok(Scheme::Vc),
            "ec" => Ok(Scheme::Ec),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// All scalar parameters of one simulated network.
///
/// Powers are held in milliwatt throughout.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    /// Number of access points in the daisy chain (L).
    pub num_aps: usize,
    /// Antennas per AP (N).
    pub antennas_per_ap: usize,
    /// Number of single-antenna users (K).
    pub num_users: usize,
    /// Per-user uplink transmit power, mW.
    pub power_mw: f64,
    /// Receiver noise power per antenna, mW.
    pub noise_mw: f64,
    /// Perimeter of the outer square on which the APs sit, meters.
    pub perimeter_m: f64,
    /// Perimeter of the concentric inner square containing the users, meters.
    pub inner_perimeter_m: f64,
    /// Vertical AP-user offset, meters.
    pub height_m: f64,
    /// Number of OFDM subcarriers sharing each AP's memory (F).
    pub subcarriers: usize,
    /// Uplink fraction of the coherence block (tau_u / tau_c).
    pub tau_factor: f64,
    /// Antenna correlation coefficient for the exponential model; 0 = uncorrelated.
    pub corr_rho: f64,
    pub memory_policy: MemoryPolicy,
    pub scheme: Scheme,
    pub trials: usize,
    pub master_seed: u64,
}

impl NetworkConfig {
    pub fn total_antennas(&self) -> usize {
        self.num_aps * self.antennas_per_ap
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_aps < 1 {
            return Err(Error::Config("need at least one AP".into()));
        }
        if self.antennas_per_ap < 1 {
            return Err(Error::Config("need at least one antenna per AP".into()));
        }
        if self.num_users < 1 {
            return Err(Error::Config("need at least one user".into()));
        }
        if self.power_mw <= 0.0 {
            return Err(Error::Config("transmit power must be positive".into()));
        }
        if self.noise_mw <= 0.0 {
            return Err(Error::Config("noise power must be positive".into()));
        }
        if self.inner_perimeter_m >= self.perimeter_m {
            return Err(Error::Config(
                "inner perimeter must be smaller than the outer perimeter".into(),
            ));
        }
        if !(self.tau_factor > 0.0 && self.tau_factor <= 1.0) {
            return Err(Error::Config("tau factor must be in (0, 1]".into()));
        }
        if self.subcarriers < 1 {
            return Err(Error::Config("need at least one subcarrier".into()));
        }
        if !(0.0..1.0).contains(&self.corr_rho) {
            return Err(Error::Config("correlation rho must be in [0, 1)".into()));
        }
        self.memory_policy.validate()?;
        Ok(())
    }

    /// Redistribute the same total antenna count over `num_aps` APs.
    pub fn with_num_aps(&self, num_aps: usize) -> Result<NetworkConfig> {
        let total = self.total_antennas();
        if num_aps == 0 || total % num_aps != 0 {
            return Err(Error::Config(format!(
                "L = {num_aps} does not divide the total antenna count {total}"
            )));
        }
        let mut cfg = self.clone();
        cfg.num_aps = num_aps;
        cfg.antennas_per_ap = total / num_aps;
        Ok(cfg)
    }
}

/// Convert a dBm level to milliwatt.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}
