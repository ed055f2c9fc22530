//! Memory policies and the per-AP, per-stored-vector bit budget.
//!
//! In the daisy chain, AP l holds (l-1)F received vectors while waiting for
//! the estimates from its predecessor, so its bit pool is spread over that
//! many vectors. AP 1 stores nothing and is never compressed.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MemoryKind {
    /// No memory constraint.
    Infinite,
    /// Fixed capacity C_AP per AP; total memory grows with L.
    FixedPerAp,
    /// Fixed total capacity C_T split equally among the L APs.
    FixedTotal,
}

impl fmt::Display for MemoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemoryKind::Infinite => write!(f, "inf"),
            MemoryKind::FixedPerAp => write!(f, "fap"),
            MemoryKind::FixedTotal => write!(f, "ft"),
        }
    }
}

/// How an AP's bit pool maps to per-vector budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AllocationRule {
    /// Each AP divides its own pool over its own (l-1)F stored vectors.
    PerApLoad,
    /// Every compressing AP uses the last AP's (smallest) budget.
    UniformWorstCase,
}

impl fmt::Display for AllocationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocationRule::PerApLoad => write!(f, "per-ap-load"),
            AllocationRule::UniformWorstCase => write!(f, "uniform-worst-case"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemoryPolicy {
    pub kind: MemoryKind,
    /// C_AP for FixedPerAp, C_T for FixedTotal; ignored for Infinite.
    pub capacity_bytes: u64,
    pub allocation_rule: AllocationRule,
}

impl MemoryPolicy {
    pub fn infinite() -> MemoryPolicy {
        MemoryPolicy {
            kind: MemoryKind::Infinite,
            capacity_bytes: 0,
            allocation_rule: AllocationRule::PerApLoad,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != MemoryKind::Infinite && self.capacity_bytes == 0 {
            return Err(Error::Config(
                "finite memory policy needs a positive capacity".into(),
            ));
        }
        Ok(())
    }
}

/// Bits available to compress one stored complex N-vector at one AP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VectorBudget {
    Unlimited,
    Bits(f64),
}

impl VectorBudget {
    pub fn is_unlimited(&self) -> bool {
        matches!(self, VectorBudget::Unlimited)
    }
}

/// Per-AP bit budgets, indexed by chain position.
#[derive(Debug, Clone, PartialEq)]
pub struct BitBudget {
    pub per_ap: Vec<VectorBudget>,
}

/// Number of received vectors AP l (1-indexed) holds in memory.
pub fn stored_vectors(ap_index: usize, subcarriers: usize) -> usize {
    (ap_index - 1) * subcarriers
}

/// Convert a memory policy into per-AP bit budgets C_s,l.
pub fn per_vector_bits(
    policy: &MemoryPolicy,
    num_aps: usize,
    subcarriers: usize,
) -> Result<BitBudget> {
    if num_aps < 1 || subcarriers < 1 {
        return Err(Error::Config("need L >= 1 and F >= 1".into()));
    }
    policy.validate()?;

    if policy.kind == MemoryKind::Infinite {
        return Ok(BitBudget {
            per_ap: vec![VectorBudget::Unlimited; num_aps],
        });
    }

    let pool_bits = match policy.kind {
        MemoryKind::FixedPerAp => 8.0 * policy.capacity_bytes as f64,
        MemoryKind::FixedTotal => 8.0 * policy.capacity_bytes as f64 / num_aps as f64,
        MemoryKind::Infinite => unreachable!(),
    };

    let budget_at = |l: usize| -> VectorBudget {
        if l == 1 {
            VectorBudget::Unlimited
        } else {
            VectorBudget::Bits(pool_bits / stored_vectors(l, subcarriers) as f64)
        }
    };

    let per_ap = match policy.allocation_rule {
        AllocationRule::PerApLoad => (1..=num_aps).map(budget_at).collect(),
        AllocationRule::UniformWorstCase => {
            let worst = budget_at(num_aps);
            (1..=num_aps)
                .map(|l| if l == 1 { VectorBudget::Unlimited } else { worst })
                .collect()
        }
    };

    Ok(BitBudget { per_ap })
}
