use super::{AdError, Tape, Tensor, Var};

/// Compares reverse-mode gradients with central differences.
///
/// `f` builds a scalar loss from the recorded input. Returns the largest
/// entrywise `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F>(f: F, x: &Tensor<f64>, eps: f64) -> Result<f64, AdError>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var, AdError>,
{
    assert!(eps > 0.0, "eps must be positive");
    let eval = |point: &Tensor<f64>| -> Result<f64, AdError> {
        let mut tape = Tape::new();
        let v = tape.constant(point.clone())?;
        let out = f(&mut tape, v)?;
        Ok(tape.value(out).data()[0])
    };

    let mut tape = Tape::new();
    let v = tape.param(x.clone())?;
    let loss = f(&mut tape, v)?;
    let grads = tape.backward(loss)?;
    let analytic = grads.get(v).cloned().unwrap_or_else(|| Tensor::zeros(x.shape().to_vec()));

    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + eps;
        let fp = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let fm = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (fp - fm) / (2.0 * eps);
        let a = analytic.data()[i];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
