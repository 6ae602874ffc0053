//! Adadelta (Zeiler, 2012) over [`ModelParams`].
//!
//! ```text
//! E[g²]  ← ρ E[g²] + (1 − ρ) g²
//! Δx     ← −√(E[Δx²] + ε) / √(E[g²] + ε) · g
//! E[Δx²] ← ρ E[Δx²] + (1 − ρ) Δx²
//! x      ← x + Δx
//! ```

use serde::{Deserialize, Serialize};

use super::network::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdadeltaConfig {
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        Self {
            rho: 0.95,
            epsilon: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState {
    pub config: AdadeltaConfig,
    /// Running average of squared gradients.
    pub sq_grad: ModelParams,
    /// Running average of squared updates.
    pub sq_update: ModelParams,
}

impl AdadeltaState {
    pub fn new(config: AdadeltaConfig, like: &ModelParams) -> Self {
        Self {
            config,
            sq_grad: like.zeros_like(),
            sq_update: like.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
        let AdadeltaConfig { rho, epsilon } = self.config;
        let p_blocks = params.blocks_mut();
        let g_blocks = grads.blocks();
        let eg_blocks = self.sq_grad.blocks_mut();
        let ex_blocks = self.sq_update.blocks_mut();
        if p_blocks.len() != g_blocks.len()
            || p_blocks.iter().zip(&g_blocks).any(|(p, g)| p.len() != g.len())
            || eg_blocks.iter().zip(&g_blocks).any(|(e, g)| e.len() != g.len())
        {
            return Err(Error::Shape("gradient shape does not match parameters".into()));
        }
        for (((p, g), eg), ex) in p_blocks.into_iter().zip(g_blocks).zip(eg_blocks).zip(ex_blocks) {
            for i in 0..p.len() {
                let gi = g[i];
                eg[i] = rho * eg[i] + (1.0 - rho) * gi * gi;
                let dx = -((ex[i] + epsilon).sqrt() / (eg[i] + epsilon).sqrt()) * gi;
                ex[i] = rho * ex[i] + (1.0 - rho) * dx * dx;
                p[i] += dx;
            }
        }
        Ok(())
    }
}
