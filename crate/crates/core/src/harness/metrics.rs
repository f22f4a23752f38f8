use crate::error::{shape_err, Result};
use crate::nn::Tensor;

pub const IOU_THRESHOLD: f64 = 0.5;

/// Intersection over union of `pred >= threshold` against a binary target.
/// Two empty masks score 1.
pub fn iou(pred: &Tensor, target: &Tensor, threshold: f64) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(shape_err!("iou: prediction {:?} vs target {:?}", pred.shape(), target.shape()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let (p, t) = (p >= threshold, t >= 0.5);
        inter += usize::from(p && t);
        union += usize::from(p || t);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Per-image IoU averaged over the batch dimension of `[B, 1, H, W]` tensors.
pub fn mean_iou(pred: &Tensor, target: &Tensor, threshold: f64) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(shape_err!("iou: prediction {:?} vs target {:?}", pred.shape(), target.shape()));
    }
    let b = pred.dims4()?.0;
    let mut total = 0.0;
    for i in 0..b {
        total += iou(&pred.batch_item(i)?, &target.batch_item(i)?, threshold)?;
    }
    Ok(total / b as f64)
}
