use super::tensor::Tensor;
use crate::error::{shape_err, Result};

/// Max-pool output plus, per output element, the flat input index it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub output: Tensor,
    pub argmax: Vec<usize>,
}

/// 2x2 / stride 2 max pooling. Ties go to the first element in row-major order.
pub fn maxpool2(input: &Tensor) -> Result<Pooled> {
    let (b, c, h, w) = input.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(shape_err!("maxpool2 needs even spatial dims, got {h}x{w}"));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(b * c * oh * ow);
    let mut argmax = Vec::with_capacity(out.capacity());
    for plane in 0..b * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok(Pooled { output: Tensor::new(vec![b, c, oh, ow], out)?, argmax })
}

pub fn maxpool2_backward(input_shape: &[usize], argmax: &[usize], dout: &Tensor) -> Result<Tensor> {
    if dout.len() != argmax.len() {
        return Err(shape_err!("maxpool2 backward: {} gradients for {} windows", dout.len(), argmax.len()));
    }
    let mut dx = Tensor::zeros(input_shape);
    let data = dx.data_mut();
    for (&src, &g) in argmax.iter().zip(dout.data()) {
        data[src] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn picks_window_max() {
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(maxpool2(&x).unwrap().output.data(), &[4.0]);
    }

    #[test]
    fn ties_route_to_first_element() {
        let x = Tensor::full(&[1, 1, 2, 4], 0.3);
        let p = maxpool2(&x).unwrap();
        assert_eq!(p.output.data(), &[0.3, 0.3]);
        let dx = maxpool2_backward(x.shape(), &p.argmax, &Tensor::full(&[1, 1, 1, 2], 1.0)).unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn matches_brute_force_window_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::new(vec![1, 1, 4, 4], (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let got = maxpool2(&x).unwrap().output;
        let v = |r: usize, c: usize| x.data()[r * 4 + c];
        for oy in 0..2 {
            for ox in 0..2 {
                let want = [v(2 * oy, 2 * ox), v(2 * oy, 2 * ox + 1), v(2 * oy + 1, 2 * ox), v(2 * oy + 1, 2 * ox + 1)]
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(got.data()[oy * 2 + ox], want);
            }
        }
    }

    #[test]
    fn odd_dims_rejected() {
        assert!(maxpool2(&Tensor::zeros(&[1, 1, 3, 2])).is_err());
    }
}
