//! Poly-INR decoder: coordinates `(t, x)` to `u`, with every hidden layer
//! scaled and shifted by a hypernet reading one latent row.

use crate::autodiff::{AdError, Scalar, Tape, Tensor, Var};
use crate::model::{Bound, ModelConfig};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const CLIP: f64 = 256.0;

/// `(s_scale, s_shift)` for decoder layer `layer` (0-based) from the
/// `[1, d_e]` latent row `mu_l`.
pub fn hypernet_modulations<T: Scalar>(
    tape: &mut Tape<T>,
    w: &mut Bound,
    layer: usize,
    mu_l: Var,
) -> Result<(Var, Var), AdError> {
    let scale = w.mlp(tape, &format!("dec.layer.{layer}.scale"), 3, mu_l)?;
    let shift = w.mlp(tape, &format!("dec.layer.{layer}.shift"), 3, mu_l)?;
    Ok((scale, shift))
}

/// `u` at each row of `coords` (`[P, 2]`, columns `t, x`), as `[P, 1]`.
///
/// Rows never interact, so any batching gives the same values.
pub fn decode<T: Scalar>(
    tape: &mut Tape<T>,
    w: &mut Bound,
    mu: Var,
    coords: Var,
    cfg: &ModelConfig,
) -> Result<Var, AdError> {
    let (l_rows, _) = tape.value(mu).dims2().unwrap_or((0, 0));
    if l_rows != cfg.n_mod {
        return Err(AdError::ShapeMismatch {
            op: "decode",
            detail: format!("latent has {l_rows} rows, decoder has {} layers", cfg.n_mod),
        });
    }
    let slope = T::from_f64_lossy(LEAKY_SLOPE);
    let (lo, hi) = (T::from_f64_lossy(-CLIP), T::from_f64_lossy(CLIP));
    let mut h: Option<Var> = None;
    for l in 0..cfg.n_mod {
        let pre = format!("dec.layer.{l}");
        let mu_l = tape.gather_rows(mu, &[l])?;
        let (s_scale, s_shift) = hypernet_modulations(tape, w, l, mu_l)?;
        let g = w.linear(tape, &format!("{pre}.in"), coords)?;
        // h_0 is all ones, so the first product is g itself.
        let hg = match h {
            None => g,
            Some(h) => tape.mul(h, g)?,
        };
        let q = w.linear(tape, &format!("{pre}.h"), hg)?;
        let q = tape.mul_row(q, s_scale)?;
        let q = tape.add_row(q, s_shift)?;
        h = Some(tape.leaky_relu_clip(q, slope, lo, hi)?);
    }
    let h = h.expect("decoder has at least one layer");
    w.linear(tape, "dec.last", h)
}

/// Coordinates as a `[P, 2]` constant.
pub fn coords_constant<T: Scalar>(tape: &mut Tape<T>, coords: &[[f32; 2]]) -> Result<Var, AdError> {
    let data = coords.iter().flat_map(|c| c.iter().map(|&v| T::from_f32(v).unwrap())).collect();
    tape.constant(Tensor::new(vec![coords.len(), 2], data)?)
}
