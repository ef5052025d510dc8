//! Model configuration, the flat parameter vector, and the full
//! graph-to-field forward pass.

mod config;
mod params;

pub use config::ModelConfig;
pub use params::{Bound, Init, ParamLayout, ParamSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdError, Scalar, Tape, Tensor, Var};
use crate::decoder::{coords_constant, decode};
use crate::encoder::{encode, GraphInput};

/// A configuration together with one value per entry of its layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("parameter vector has {found} values, layout needs {expected}")]
    Length { found: usize, expected: usize },
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        let layout = config.layout();
        let data = layout.init(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self { config, layout, data })
    }

    pub fn from_data(config: ModelConfig, data: Vec<f32>) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        let layout = config.layout();
        if data.len() != layout.total() {
            return Err(ModelError::Length { found: data.len(), expected: layout.total() });
        }
        Ok(Self { config, layout, data })
    }

    pub fn slice(&self, name: &str) -> &[f32] {
        let s = self.layout.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        &self.data[s.offset..s.offset + s.len()]
    }

    pub fn slice_mut(&mut self, name: &str) -> &mut [f32] {
        let s = self.layout.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        let (o, n) = (s.offset, s.len());
        &mut self.data[o..o + n]
    }

    /// Predicted `u` at each coordinate `(t, x)`.
    pub fn predict(&self, input: &GraphInput, coords: &[[f32; 2]]) -> Result<Vec<f32>, AdError> {
        let mut tape = Tape::<f32>::new();
        let mut w = Bound::constant(&mut tape, &self.layout, &self.data)?;
        let c = coords_constant(&mut tape, coords)?;
        let out = forward(&mut tape, &mut w, input, c, &self.config)?;
        Ok(tape.value(out).data().to_vec())
    }

    /// nRMSE against `target` and its gradient with respect to `data`.
    pub fn loss_and_grad(
        &self,
        input: &GraphInput,
        coords: &[[f32; 2]],
        target: &[f32],
    ) -> Result<(f32, Vec<f32>), AdError> {
        let mut tape = Tape::<f32>::new();
        let mut w = Bound::param(&mut tape, &self.layout, &self.data)?;
        let c = coords_constant(&mut tape, coords)?;
        let pred = forward(&mut tape, &mut w, input, c, &self.config)?;
        let loss = nrmse_loss(&mut tape, pred, target)?;
        let value = tape.value(loss).data()[0];
        let mut grads = tape.backward(loss)?;
        let g = grads.take(w.flat).expect("parameters are a leaf").into_data();
        Ok((value, g))
    }
}

/// Graph input and `[P, 2]` coordinates to `[P, 1]` predictions.
pub fn forward<T: Scalar>(
    tape: &mut Tape<T>,
    w: &mut Bound,
    input: &GraphInput,
    coords: Var,
    cfg: &ModelConfig,
) -> Result<Var, AdError> {
    let mu = encode(tape, w, input, cfg)?;
    decode(tape, w, mu, coords, cfg)
}

/// `||pred - target|| / ||target||`; a zero target norm is treated as 1.
pub fn nrmse_loss<T: Scalar>(tape: &mut Tape<T>, pred: Var, target: &[f32]) -> Result<Var, AdError> {
    let shape = tape.value(pred).shape().to_vec();
    let norm = target.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    let t = tape.constant(Tensor::new(shape, target.iter().map(|&v| T::from_f32(v).unwrap()).collect())?)?;
    let d = tape.sub(pred, t)?;
    let sq = tape.mul(d, d)?;
    let s = tape.sum(sq)?;
    let r = tape.sqrt(s)?;
    let inv = if norm > 0.0 { 1.0 / norm } else { 1.0 };
    tape.scale(r, T::from_f64_lossy(inv))
}
