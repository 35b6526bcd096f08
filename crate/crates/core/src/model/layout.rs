//! Packing of model parameters into one unconstrained vector.
//!
//! Blocks appear in this fixed order, absent blocks skipped:
//! `U, V, w, b, μ_U, μ_V, chol_U, chol_V, scale_U, scale_V, Y, X, log_σ`.
//! Matrices are row-major. `chol_*` hold the unconstrained partial
//! correlations of [`super::lkj`], `scale_*` the log of the covariance scales.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::lkj;
use super::{ModelSpec, NoiseModel, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub models: usize,
    pub datasets: usize,
    pub metrics: usize,
    /// Columns of the model profile `H` (0 when unconstrained).
    pub model_features: usize,
    /// Columns of the dataset profile `G` (0 when unconstrained).
    pub dataset_features: usize,
    pub latent_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    U,
    V,
    W,
    B,
    MuU,
    MuV,
    CholU,
    CholV,
    ScaleU,
    ScaleV,
    Y,
    X,
    LogSigma,
}

impl Block {
    pub const ORDER: [Block; 13] = [
        Block::U,
        Block::V,
        Block::W,
        Block::B,
        Block::MuU,
        Block::MuV,
        Block::CholU,
        Block::CholV,
        Block::ScaleU,
        Block::ScaleV,
        Block::Y,
        Block::X,
        Block::LogSigma,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    shape: Shape,
    variant: Variant,
    ranges: [Option<Range<usize>>; 13],
    len: usize,
}

impl ParamLayout {
    pub fn new(spec: &ModelSpec, shape: Shape) -> Result<Self> {
        spec.validate()?;
        if shape.latent_dim != spec.latent_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.latent_dim,
                got: shape.latent_dim,
            });
        }
        if shape.models == 0 || shape.datasets == 0 || shape.metrics == 0 {
            return Err(Error::InvalidTensor("empty axis".into()));
        }
        let v = spec.variant;
        if v.is_constrained() && (shape.model_features == 0 || shape.dataset_features == 0) {
            return Err(Error::arg(
                "profiles",
                format!("variant {v} needs model and dataset profiles"),
            ));
        }
        let d = shape.latent_dim;
        let size = |b: Block| -> usize {
            match b {
                Block::U => shape.models * d,
                Block::V => shape.datasets * d,
                Block::W | Block::B if v.has_metric_affine() => shape.metrics,
                Block::MuU | Block::MuV | Block::ScaleU | Block::ScaleV if v.is_hierarchical() => d,
                Block::CholU | Block::CholV if v.is_hierarchical() => lkj::n_free(d),
                Block::Y if v.is_constrained() => shape.model_features * d,
                Block::X if v.is_constrained() => shape.dataset_features * d,
                Block::LogSigma if spec.noise == NoiseModel::Learned => 1,
                _ => 0,
            }
        };
        let present = |b: Block| -> bool {
            match b {
                Block::U | Block::V => true,
                Block::W | Block::B => v.has_metric_affine(),
                Block::MuU | Block::MuV | Block::ScaleU | Block::ScaleV | Block::CholU | Block::CholV => {
                    v.is_hierarchical()
                }
                Block::Y | Block::X => v.is_constrained(),
                Block::LogSigma => spec.noise == NoiseModel::Learned,
            }
        };
        let mut ranges: [Option<Range<usize>>; 13] = Default::default();
        let mut offset = 0;
        for (i, b) in Block::ORDER.into_iter().enumerate() {
            if present(b) {
                let n = size(b);
                ranges[i] = Some(offset..offset + n);
                offset += n;
            }
        }
        Ok(ParamLayout {
            shape,
            variant: v,
            ranges,
            len: offset,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn range(&self, block: Block) -> Option<Range<usize>> {
        self.ranges[block as usize].clone()
    }

    pub fn slice<'a>(&self, block: Block, v: &'a [f64]) -> Option<&'a [f64]> {
        self.range(block).map(|r| &v[r])
    }

    pub fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Constrained view of a parameter vector.
    pub fn unpack(&self, v: &[f64]) -> Result<LatentState> {
        self.check_len(v)?;
        let d = self.shape.latent_dim;
        let owned = |b: Block| self.slice(b, v).map(<[f64]>::to_vec);
        let chol = |b: Block| self.slice(b, v).map(|y| lkj::corr_cholesky(y, d).0);
        let scales = |b: Block| self.slice(b, v).map(|t| t.iter().map(|x| x.exp()).collect());
        Ok(LatentState {
            shape: self.shape,
            u: owned(Block::U).unwrap_or_default(),
            v: owned(Block::V).unwrap_or_default(),
            w: owned(Block::W),
            b: owned(Block::B),
            mu_u: owned(Block::MuU),
            mu_v: owned(Block::MuV),
            chol_u: chol(Block::CholU),
            chol_v: chol(Block::CholV),
            scale_u: scales(Block::ScaleU),
            scale_v: scales(Block::ScaleV),
            y: owned(Block::Y),
            x: owned(Block::X),
            log_sigma: self.slice(Block::LogSigma, v).map(|s| s[0]),
        })
    }

    /// Inverse of [`ParamLayout::unpack`].
    pub fn pack(&self, state: &LatentState) -> Result<Vec<f64>> {
        if state.shape != self.shape {
            return Err(Error::InvalidArgument {
                name: "state",
                message: "shape does not match layout".into(),
            });
        }
        let d = self.shape.latent_dim;
        let mut out = vec![0.0; self.len];
        for b in Block::ORDER {
            let Some(r) = self.range(b) else { continue };
            let missing = || Error::InvalidArgument {
                name: "state",
                message: format!("block {b:?} missing"),
            };
            let block: Vec<f64> = match b {
                Block::U => state.u.clone(),
                Block::V => state.v.clone(),
                Block::W => state.w.clone().ok_or_else(missing)?,
                Block::B => state.b.clone().ok_or_else(missing)?,
                Block::MuU => state.mu_u.clone().ok_or_else(missing)?,
                Block::MuV => state.mu_v.clone().ok_or_else(missing)?,
                Block::CholU => lkj::corr_cholesky_inverse(state.chol_u.as_ref().ok_or_else(missing)?, d),
                Block::CholV => lkj::corr_cholesky_inverse(state.chol_v.as_ref().ok_or_else(missing)?, d),
                Block::ScaleU => state
                    .scale_u
                    .as_ref()
                    .ok_or_else(missing)?
                    .iter()
                    .map(|x| x.ln())
                    .collect(),
                Block::ScaleV => state
                    .scale_v
                    .as_ref()
                    .ok_or_else(missing)?
                    .iter()
                    .map(|x| x.ln())
                    .collect(),
                Block::Y => state.y.clone().ok_or_else(missing)?,
                Block::X => state.x.clone().ok_or_else(missing)?,
                Block::LogSigma => vec![state.log_sigma.ok_or_else(missing)?],
            };
            if block.len() != r.len() {
                return Err(Error::DimensionMismatch {
                    expected: r.len(),
                    got: block.len(),
                });
            }
            out[r].copy_from_slice(&block);
        }
        Ok(out)
    }
}

/// One point in parameter space in constrained form. Matrices are row-major;
/// `chol_*` are `D×D` lower-triangular correlation factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub shape: Shape,
    #[serde(rename = "U")]
    pub u: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(rename = "mu_U", default, skip_serializing_if = "Option::is_none")]
    pub mu_u: Option<Vec<f64>>,
    #[serde(rename = "mu_V", default, skip_serializing_if = "Option::is_none")]
    pub mu_v: Option<Vec<f64>>,
    #[serde(rename = "L_U", default, skip_serializing_if = "Option::is_none")]
    pub chol_u: Option<Vec<f64>>,
    #[serde(rename = "L_V", default, skip_serializing_if = "Option::is_none")]
    pub chol_v: Option<Vec<f64>>,
    #[serde(rename = "sigma_L_U", default, skip_serializing_if = "Option::is_none")]
    pub scale_u: Option<Vec<f64>>,
    #[serde(rename = "sigma_L_V", default, skip_serializing_if = "Option::is_none")]
    pub scale_v: Option<Vec<f64>>,
    #[serde(rename = "Y", default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_sigma: Option<f64>,
}

/// Starting point for sampling: `U, V, Y, X, w ~ N(0, 0.1²)`, `b = 0`, `μ = 0`,
/// identity correlation, unit scales and unit noise.
pub fn init_state(spec: &ModelSpec, shape: Shape, seed: u64) -> Result<Vec<f64>> {
    let layout = ParamLayout::new(spec, shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.1).expect("valid normal");
    let mut v = vec![0.0; layout.len()];
    for b in [Block::U, Block::V, Block::W, Block::Y, Block::X] {
        if let Some(r) = layout.range(b) {
            for x in &mut v[r] {
                *x = normal.sample(&mut rng);
            }
        }
    }
    Ok(v)
}
