use super::tensor::Tensor;
use crate::error::{shape_err, Result};

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Passes `dout` where the forward input was strictly positive; the
/// subgradient at exactly 0 is 0.
pub fn relu_backward(input: &Tensor, dout: &Tensor) -> Result<Tensor> {
    input.zip_map(dout, |x, d| if x > 0.0 { d } else { 0.0 })
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(|v| 1.0 / (1.0 + (-v).exp()))
}

/// Takes the forward *output* `y`.
pub fn sigmoid_backward(output: &Tensor, dout: &Tensor) -> Result<Tensor> {
    output.zip_map(dout, |y, d| d * y * (1.0 - y))
}

pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ba, ca, ha, wa) = a.dims4()?;
    let (bb, cb, hb, wb) = b.dims4()?;
    if (ba, ha, wa) != (bb, hb, wb) {
        return Err(shape_err!("concat: {:?} and {:?} differ outside the channel axis", a.shape(), b.shape()));
    }
    let (sa, sb) = (ca * ha * wa, cb * hb * wb);
    let mut data = Vec::with_capacity(a.len() + b.len());
    for n in 0..ba {
        data.extend_from_slice(&a.data()[n * sa..(n + 1) * sa]);
        data.extend_from_slice(&b.data()[n * sb..(n + 1) * sb]);
    }
    Tensor::new(vec![ba, ca + cb, ha, wa], data)
}

/// Inverse of [`concat_channels`]: the first `first_channels` channels go left.
pub fn split_channels(x: &Tensor, first_channels: usize) -> Result<(Tensor, Tensor)> {
    let (b, c, h, w) = x.dims4()?;
    if first_channels > c {
        return Err(shape_err!("cannot split {first_channels} channels from {c}"));
    }
    let (sa, s) = (first_channels * h * w, c * h * w);
    let mut left = Vec::with_capacity(b * sa);
    let mut right = Vec::with_capacity(b * (s - sa));
    for chunk in x.data().chunks_exact(s) {
        left.extend_from_slice(&chunk[..sa]);
        right.extend_from_slice(&chunk[sa..]);
    }
    Ok((Tensor::new(vec![b, first_channels, h, w], left)?, Tensor::new(vec![b, c - first_channels, h, w], right)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_examples() {
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let d = relu_backward(&x, &Tensor::full(&[3], 1.0)).unwrap();
        assert_eq!(d.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn sigmoid_at_zero() {
        assert_eq!(sigmoid(&Tensor::zeros(&[1])).data(), &[0.5]);
    }

    #[test]
    fn concat_stacks_channels_and_splits_back() {
        let a = Tensor::full(&[2, 4, 3, 3], 1.0);
        let b = Tensor::full(&[2, 8, 3, 3], 2.0);
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 12, 3, 3]);
        let (l, r) = split_channels(&c, 4).unwrap();
        assert_eq!((l, r), (a, b));
        assert!(concat_channels(&Tensor::zeros(&[1, 1, 2, 2]), &Tensor::zeros(&[1, 1, 3, 2])).is_err());
    }
}
