use super::tensor::Tensor;
use crate::error::{shape_err, Result};

/// Predictions are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before the log.
pub const BCE_CLAMP: f64 = 1e-7;

fn check(pred: &Tensor, target: &Tensor) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(shape_err!("bce: prediction {:?} vs target {:?}", pred.shape(), target.shape()));
    }
    Ok(())
}

/// Mean binary cross-entropy over all elements.
pub fn bce_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    check(pred, target)?;
    let total: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / pred.len() as f64)
}

/// d loss / d pred. Zero where the clamp is active.
pub fn bce_loss_backward(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    check(pred, target)?;
    let n = pred.len() as f64;
    pred.zip_map(target, |p, t| {
        if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&p) {
            return 0.0;
        }
        (p - t) / (p * (1.0 - p)) / n
    })
}
