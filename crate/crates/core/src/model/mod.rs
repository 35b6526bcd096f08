//! Factor models over score tensors.
//!
//! All five variants share one log-joint density written over a flat vector of
//! unconstrained parameters (see [`ParamLayout`] for the packing order):
//!
//! * `Pmf`: `R[m,n,s] ~ N(U'_m · V'_n, σ²)` for every metric.
//! * `Ptf`: `R[m,n,s] ~ N((U'_m · V'_n) w_s + b_s, σ²)`.
//! * `Bptf`: `Ptf` with hierarchical latent priors `U_m ~ N(μ_U, Σ_U)`,
//!   `μ_U ~ N(0, Σ_U)`, `Σ_U = diag(τ) L Lᵀ diag(τ)`, `L ~ LKJ(η)`,
//!   `τ_d ~ Exp(λ)`, and the same for `V`.
//! * `Cptf` / `Bcptf`: `Ptf` / `Bptf` with profile effects
//!   `U' = U + H Y`, `V' = V + G X`.
//!
//! Unconstrained variants use `U' = U`, `V' = V`.

mod density;
pub mod layout;
pub mod lkj;
pub mod priors;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use density::{reconstruct, FactorModel, Observation};
pub use layout::{init_state, Block, LatentState, ParamLayout, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Pmf,
    Ptf,
    Bptf,
    Cptf,
    Bcptf,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Pmf, Variant::Ptf, Variant::Bptf, Variant::Cptf, Variant::Bcptf];

    /// Per-metric weight and bias (`w`, `b`).
    pub fn has_metric_affine(self) -> bool {
        !matches!(self, Variant::Pmf)
    }

    /// LKJ/Exponential hierarchical latent prior.
    pub fn is_hierarchical(self) -> bool {
        matches!(self, Variant::Bptf | Variant::Bcptf)
    }

    /// Uses model/dataset profiles.
    pub fn is_constrained(self) -> bool {
        matches!(self, Variant::Cptf | Variant::Bcptf)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Pmf => "pmf",
            Variant::Ptf => "ptf",
            Variant::Bptf => "bptf",
            Variant::Cptf => "cptf",
            Variant::Bcptf => "bcptf",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::arg("variant", format!("unknown variant {s}")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Observation noise σ: a fixed constant, or learned under a unit half-normal
/// prior (sampled on the log scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "sigma")]
pub enum NoiseModel {
    Fixed(f64),
    Learned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub latent_dim: usize,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub sigma_w: f64,
    pub sigma_b: f64,
    pub sigma_y: f64,
    pub sigma_x: f64,
    /// LKJ concentration η.
    pub lkj_eta: f64,
    /// Exponential rate λ on the covariance scales.
    pub scale_rate: f64,
    pub noise: NoiseModel,
}

impl ModelSpec {
    pub fn new(variant: Variant, latent_dim: usize) -> Self {
        ModelSpec {
            variant,
            latent_dim,
            sigma_u: 1.0,
            sigma_v: 1.0,
            sigma_w: 1.0,
            sigma_b: 1.0,
            sigma_y: 1.0,
            sigma_x: 1.0,
            lkj_eta: 2.0,
            scale_rate: 1.0,
            noise: NoiseModel::Learned,
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::arg("latent_dim", "must be at least 1"));
        }
        let scales = [
            ("sigma_u", self.sigma_u),
            ("sigma_v", self.sigma_v),
            ("sigma_w", self.sigma_w),
            ("sigma_b", self.sigma_b),
            ("sigma_y", self.sigma_y),
            ("sigma_x", self.sigma_x),
            ("lkj_eta", self.lkj_eta),
            ("scale_rate", self.scale_rate),
        ];
        for (name, value) in scales {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::arg(name, format!("must be positive, got {value}")));
            }
        }
        if let NoiseModel::Fixed(sigma) = self.noise {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::arg("noise", format!("must be positive, got {sigma}")));
            }
        }
        Ok(())
    }
}
