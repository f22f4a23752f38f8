use rayon::prelude::*;

use super::tensor::Tensor;
use crate::error::{shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// No padding; output shrinks by `k - 1`.
    Valid,
    /// Zero padding of `(k - 1) / 2` on every side; odd kernels keep the size.
    Same,
}

impl Padding {
    fn amount(self, kernel: usize) -> usize {
        match self {
            Padding::Valid => 0,
            Padding::Same => (kernel - 1) / 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Option<Tensor>,
}

struct ConvGeom {
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    // Input row/col for output position `o` and kernel tap `k`, if inside.
    #[inline]
    fn src(o: usize, k: usize, pad: usize, len: usize) -> Option<usize> {
        (o + k).checked_sub(pad).filter(|&i| i < len)
    }
}

fn conv_geometry(input: &Tensor, kernel: &Tensor, padding: Padding) -> Result<ConvGeom> {
    let (_, cin, h, w) = input.dims4()?;
    let (cout, kin, kh, kw) = kernel.dims4()?;
    if cin != kin {
        return Err(shape_err!("conv2d: input has {cin} channels, kernel expects {kin}"));
    }
    let pad = padding.amount(kh.max(kw));
    if h + 2 * pad < kh || w + 2 * pad < kw {
        return Err(shape_err!("conv2d: {h}x{w} input too small for {kh}x{kw} kernel"));
    }
    Ok(ConvGeom { cin, cout, h, w, kh, kw, pad, oh: h + 2 * pad + 1 - kh, ow: w + 2 * pad + 1 - kw })
}

fn check_bias(bias: Option<&Tensor>, channels: usize) -> Result<()> {
    match bias {
        Some(b) if b.len() != channels => Err(shape_err!("bias has {} entries, expected {channels}", b.len())),
        _ => Ok(()),
    }
}

/// 2-d cross-correlation of `input [B, Cin, H, W]` with `kernel [Cout, Cin, kh, kw]`.
pub fn conv2d(input: &Tensor, kernel: &Tensor, bias: Option<&Tensor>, padding: Padding) -> Result<Tensor> {
    let g = conv_geometry(input, kernel, padding)?;
    check_bias(bias, g.cout)?;
    let batch = input.shape()[0];
    let (in_stride, out_stride) = (g.cin * g.h * g.w, g.cout * g.oh * g.ow);
    let k = kernel.data();
    let mut out = vec![0.0; batch * out_stride];
    out.par_chunks_mut(out_stride).zip(input.data().par_chunks(in_stride)).for_each(|(y, x)| {
        for co in 0..g.cout {
            let y_c = &mut y[co * g.oh * g.ow..(co + 1) * g.oh * g.ow];
            if let Some(b) = bias {
                y_c.iter_mut().for_each(|v| *v = b.data()[co]);
            }
            for ci in 0..g.cin {
                let x_c = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        let wv = k[((co * g.cin + ci) * g.kh + ky) * g.kw + kx];
                        for oy in 0..g.oh {
                            let Some(iy) = ConvGeom::src(oy, ky, g.pad, g.h) else { continue };
                            for ox in 0..g.ow {
                                if let Some(ix) = ConvGeom::src(ox, kx, g.pad, g.w) {
                                    y_c[oy * g.ow + ox] += wv * x_c[iy * g.w + ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    Tensor::new(vec![batch, g.cout, g.oh, g.ow], out)
}

/// Gradients of [`conv2d`] given the upstream gradient `dout`.
pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    with_bias: bool,
    padding: Padding,
    dout: &Tensor,
) -> Result<ConvGrads> {
    let g = conv_geometry(input, kernel, padding)?;
    let batch = input.shape()[0];
    if dout.shape() != [batch, g.cout, g.oh, g.ow] {
        return Err(shape_err!("conv2d backward: upstream gradient has shape {:?}", dout.shape()));
    }
    let (in_stride, out_stride) = (g.cin * g.h * g.w, g.cout * g.oh * g.ow);
    let k = kernel.data();
    // Per-sample partials, reduced afterwards in batch order.
    let partials: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = input
        .data()
        .par_chunks(in_stride)
        .zip(dout.data().par_chunks(out_stride))
        .map(|(x, dy)| {
            let mut dx = vec![0.0; in_stride];
            let mut dk = vec![0.0; kernel.len()];
            let mut db = vec![0.0; g.cout];
            for co in 0..g.cout {
                let dy_c = &dy[co * g.oh * g.ow..(co + 1) * g.oh * g.ow];
                db[co] = dy_c.iter().sum();
                for ci in 0..g.cin {
                    let base = ci * g.h * g.w;
                    for ky in 0..g.kh {
                        for kx in 0..g.kw {
                            let kidx = ((co * g.cin + ci) * g.kh + ky) * g.kw + kx;
                            let wv = k[kidx];
                            let mut acc = 0.0;
                            for oy in 0..g.oh {
                                let Some(iy) = ConvGeom::src(oy, ky, g.pad, g.h) else { continue };
                                for ox in 0..g.ow {
                                    if let Some(ix) = ConvGeom::src(ox, kx, g.pad, g.w) {
                                        let d = dy_c[oy * g.ow + ox];
                                        let xi = base + iy * g.w + ix;
                                        acc += x[xi] * d;
                                        dx[xi] += wv * d;
                                    }
                                }
                            }
                            dk[kidx] += acc;
                        }
                    }
                }
            }
            (dx, dk, db)
        })
        .collect();

    let mut dinput = Vec::with_capacity(batch * in_stride);
    let mut dkernel = vec![0.0; kernel.len()];
    let mut dbias = vec![0.0; g.cout];
    for (dx, dk, db) in partials {
        dinput.extend(dx);
        dkernel.iter_mut().zip(dk).for_each(|(a, b)| *a += b);
        dbias.iter_mut().zip(db).for_each(|(a, b)| *a += b);
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape().to_vec(), dinput)?,
        kernel: Tensor::new(kernel.shape().to_vec(), dkernel)?,
        bias: if with_bias { Some(Tensor::new(vec![g.cout], dbias)?) } else { None },
    })
}

fn transposed_dims(input: &Tensor, kernel: &Tensor) -> Result<(usize, usize, usize, usize, usize)> {
    let (_, cin, h, w) = input.dims4()?;
    let (kin, cout, kh, kw) = kernel.dims4()?;
    if kin != cin {
        return Err(shape_err!("transposed conv: input has {cin} channels, kernel expects {kin}"));
    }
    if kh != kw || !(2..=3).contains(&kh) {
        return Err(shape_err!("transposed conv: kernel must be 2x2 or 3x3, got {kh}x{kw}"));
    }
    Ok((cin, cout, h, w, kh))
}

/// Stride-2 transposed convolution with `kernel [Cin, Cout, k, k]`, `k` in
/// {2, 3}. Input pixel `(i, j)` scatters into `(2i + a, 2j + b)`; taps
/// landing past `2H x 2W` are cropped, so the output is always exactly
/// twice the input size.
pub fn transposed_conv2(input: &Tensor, kernel: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let (cin, cout, h, w, k) = transposed_dims(input, kernel)?;
    check_bias(bias, cout)?;
    let batch = input.shape()[0];
    let (oh, ow) = (2 * h, 2 * w);
    let (in_stride, out_stride) = (cin * h * w, cout * oh * ow);
    let kd = kernel.data();
    let mut out = vec![0.0; batch * out_stride];
    out.par_chunks_mut(out_stride).zip(input.data().par_chunks(in_stride)).for_each(|(y, x)| {
        if let Some(b) = bias {
            for co in 0..cout {
                y[co * oh * ow..(co + 1) * oh * ow].iter_mut().for_each(|v| *v = b.data()[co]);
            }
        }
        for ci in 0..cin {
            for co in 0..cout {
                for a in 0..k {
                    for bb in 0..k {
                        let wv = kd[((ci * cout + co) * k + a) * k + bb];
                        for i in 0..h {
                            let oy = 2 * i + a;
                            if oy >= oh {
                                continue;
                            }
                            for j in 0..w {
                                let ox = 2 * j + bb;
                                if ox < ow {
                                    y[(co * oh + oy) * ow + ox] += wv * x[(ci * h + i) * w + j];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    Tensor::new(vec![batch, cout, oh, ow], out)
}

/// Stride-2 convolution that is the exact adjoint of [`transposed_conv2`]
/// (without bias): maps `[B, Cout, 2H, 2W]` back to `[B, Cin, H, W]`.
pub fn conv2_stride2(y: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    let (batch, cout, oh, ow) = y.dims4()?;
    let (cin, kcout, k, _) = kernel.dims4()?;
    if kcout != cout || oh % 2 != 0 || ow % 2 != 0 {
        return Err(shape_err!("stride-2 conv: input {:?} incompatible with kernel {:?}", y.shape(), kernel.shape()));
    }
    let (h, w) = (oh / 2, ow / 2);
    let kd = kernel.data();
    let mut out = vec![0.0; batch * cin * h * w];
    out.par_chunks_mut(cin * h * w).zip(y.data().par_chunks(cout * oh * ow)).for_each(|(x, dy)| {
        for ci in 0..cin {
            for co in 0..cout {
                for a in 0..k {
                    for bb in 0..k {
                        let wv = kd[((ci * cout + co) * k + a) * k + bb];
                        for i in 0..h {
                            let oy = 2 * i + a;
                            if oy >= oh {
                                continue;
                            }
                            for j in 0..w {
                                let ox = 2 * j + bb;
                                if ox < ow {
                                    x[(ci * h + i) * w + j] += wv * dy[(co * oh + oy) * ow + ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    Tensor::new(vec![batch, cin, h, w], out)
}

pub fn transposed_conv2_backward(input: &Tensor, kernel: &Tensor, with_bias: bool, dout: &Tensor) -> Result<ConvGrads> {
    let (cin, cout, h, w, k) = transposed_dims(input, kernel)?;
    let batch = input.shape()[0];
    let (oh, ow) = (2 * h, 2 * w);
    if dout.shape() != [batch, cout, oh, ow] {
        return Err(shape_err!("transposed conv backward: upstream gradient has shape {:?}", dout.shape()));
    }
    let dinput = conv2_stride2(dout, kernel)?;
    let partials: Vec<(Vec<f64>, Vec<f64>)> = input
        .data()
        .par_chunks(cin * h * w)
        .zip(dout.data().par_chunks(cout * oh * ow))
        .map(|(x, dy)| {
            let mut dk = vec![0.0; kernel.len()];
            for ci in 0..cin {
                for co in 0..cout {
                    for a in 0..k {
                        for bb in 0..k {
                            let mut acc = 0.0;
                            for i in 0..h {
                                let oy = 2 * i + a;
                                if oy >= oh {
                                    continue;
                                }
                                for j in 0..w {
                                    let ox = 2 * j + bb;
                                    if ox < ow {
                                        acc += x[(ci * h + i) * w + j] * dy[(co * oh + oy) * ow + ox];
                                    }
                                }
                            }
                            dk[((ci * cout + co) * k + a) * k + bb] = acc;
                        }
                    }
                }
            }
            let db = (0..cout).map(|co| dy[co * oh * ow..(co + 1) * oh * ow].iter().sum()).collect();
            (dk, db)
        })
        .collect();
    let mut dkernel = vec![0.0; kernel.len()];
    let mut dbias = vec![0.0; cout];
    for (dk, db) in partials {
        dkernel.iter_mut().zip(dk).for_each(|(a, b)| *a += b);
        dbias.iter_mut().zip(db).for_each(|(a, b): (&mut f64, f64)| *a += b);
    }
    Ok(ConvGrads {
        input: dinput,
        kernel: Tensor::new(kernel.shape().to_vec(), dkernel)?,
        bias: if with_bias { Some(Tensor::new(vec![cout], dbias)?) } else { None },
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    // Sliding-window dot products, written independently of the strided loops above.
    fn naive_conv(x: &Tensor, k: &Tensor, bias: Option<&Tensor>, pad: usize) -> Tensor {
        let (b, cin, h, w) = x.dims4().unwrap();
        let (cout, _, kh, kw) = k.dims4().unwrap();
        let (oh, ow) = (h + 2 * pad + 1 - kh, w + 2 * pad + 1 - kw);
        let mut out = Tensor::zeros(&[b, cout, oh, ow]);
        let at = |t: &Tensor, i: [usize; 4]| {
            let s = t.shape();
            t.data()[((i[0] * s[1] + i[1]) * s[2] + i[2]) * s[3] + i[3]]
        };
        for n in 0..b {
            for co in 0..cout {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bias.map_or(0.0, |bt| bt.data()[co]);
                        for ci in 0..cin {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let (iy, ix) = (
                                        oy as isize + ky as isize - pad as isize,
                                        ox as isize + kx as isize - pad as isize,
                                    );
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                        acc += at(k, [co, ci, ky, kx]) * at(x, [n, ci, iy as usize, ix as usize]);
                                    }
                                }
                            }
                        }
                        out.data_mut()[((n * cout + co) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn ones_kernel_counts_overlaps() {
        let x = Tensor::full(&[1, 1, 3, 3], 1.0);
        let k = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = conv2d(&x, &k, None, Padding::Same).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn identity_1x1_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[2, 1, 4, 5], &mut rng);
        let k = Tensor::full(&[1, 1, 1, 1], 1.0);
        assert_eq!(conv2d(&x, &k, None, Padding::Same).unwrap(), x);
    }

    #[test]
    fn matches_naive_sliding_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random(&[2, 3, 5, 5], &mut rng);
        let k = random(&[4, 3, 3, 3], &mut rng);
        let b = random(&[4], &mut rng);
        for (pad, padding) in [(1, Padding::Same), (0, Padding::Valid)] {
            let got = conv2d(&x, &k, Some(&b), padding).unwrap();
            let want = naive_conv(&x, &k, Some(&b), pad);
            assert_eq!(got.shape(), want.shape());
            for (g, w) in got.data().iter().zip(want.data()) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let x = Tensor::zeros(&[1, 2, 3, 3]);
        let k = Tensor::zeros(&[1, 3, 3, 3]);
        assert!(matches!(conv2d(&x, &k, None, Padding::Same), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn transposed_single_pixel_scatters_kernel() {
        let x = Tensor::full(&[1, 1, 1, 1], 2.5);
        let k = Tensor::new(vec![1, 1, 2, 2], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let y = transposed_conv2(&x, &k, None).unwrap();
        assert_eq!(y.data(), &[2.5, -5.0, 7.5, 1.25]);
    }

    #[test]
    fn transposed_doubles_spatial_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [2, 3] {
            let x = random(&[2, 3, 3, 4], &mut rng);
            let kern = random(&[3, 5, k, k], &mut rng);
            let y = transposed_conv2(&x, &kern, None).unwrap();
            assert_eq!(y.shape(), &[2, 5, 6, 8]);
        }
    }

    #[test]
    fn stride2_conv_is_adjoint_of_transposed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in [2, 3] {
            let x = random(&[2, 3, 4, 3], &mut rng);
            let y = random(&[2, 2, 8, 6], &mut rng);
            let kern = random(&[3, 2, k, k], &mut rng);
            let lhs = conv2_stride2(&y, &kern).unwrap().dot(&x).unwrap();
            let rhs = y.dot(&transposed_conv2(&x, &kern, None).unwrap()).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }
}
