//! Singularity-persistence condition for a transformer with context window `w`.
//!
//! A generic transformer embeds the context-window space topologically once
//! `m * latent_dim > 2 * w * d` with `w >= m`, so singularities in a token space
//! bounded by a `d`-manifold survive into the output whenever the smallest such
//! `m` fits in the window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersistenceCheck {
    pub latent_dim: u64,
    pub bounding_dim: u64,
    pub context_window: u64,
    /// Smallest integer `m` with `m * latent_dim > 2 * context_window * bounding_dim`.
    pub m_min: u64,
    /// `context_window >= m_min`.
    pub satisfied: bool,
}

/// Evaluates the condition in exact integer arithmetic.
pub fn theorem2_check(latent_dim: u64, bounding_dim: u64, context_window: u64) -> Result<PersistenceCheck> {
    if latent_dim == 0 || context_window == 0 {
        return Err(Error::Domain(format!(
            "latent dimension and context window must be positive (got {latent_dim}, {context_window})"
        )));
    }
    let bound = 2 * context_window as u128 * bounding_dim as u128;
    let m_min = bound / latent_dim as u128 + 1;
    let m_min = u64::try_from(m_min).map_err(|_| Error::Domain("minimum output length overflows 64 bits".into()))?;
    Ok(PersistenceCheck { latent_dim, bounding_dim, context_window, m_min, satisfied: context_window >= m_min })
}
