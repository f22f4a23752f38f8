use crate::error::{shape_err, Error, Result};
use crate::nn::Tensor;

// Source coordinate of output index `o` (half-pixel centres), clamped at 0.
fn source(o: usize, scale: f64, len: usize) -> (usize, usize, f64) {
    let s = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
    let lo = (s.floor() as usize).min(len - 1);
    let hi = (lo + 1).min(len - 1);
    (lo, hi, s - lo as f64)
}

/// Bilinear resampling of a `[C, H, W]` image with half-pixel alignment
/// (align-corners off), applied per channel.
pub fn bilinear_resize(image: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Argument(format!("resize target {out_h}x{out_w} must be positive")));
    }
    let (c, h, w) = match image.shape()[..] {
        [c, h, w] => (c, h, w),
        _ => return Err(shape_err!("bilinear_resize expects [C, H, W], got {:?}", image.shape())),
    };
    if (h, w) == (out_h, out_w) {
        return Ok(image.clone());
    }
    let (sy, sx) = (h as f64 / out_h as f64, w as f64 / out_w as f64);
    let rows: Vec<_> = (0..out_h).map(|y| source(y, sy, h)).collect();
    let cols: Vec<_> = (0..out_w).map(|x| source(x, sx, w)).collect();
    let src = image.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &rows {
            for &(x0, x1, fx) in &cols {
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bottom = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

/// 1 where `v >= threshold`, else 0.
pub fn binarize(mask: &Tensor, threshold: f64) -> Tensor {
    mask.map(|v| if v >= threshold { 1.0 } else { 0.0 })
}
