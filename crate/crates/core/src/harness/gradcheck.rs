//! Central finite-difference checks (`h = 1e-4`) of every analytic gradient:
//! parameter-shift circuit gradients, each classical op's backward, the
//! QuFeX set and a whole model.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::synth_dataset;
use crate::error::Result;
use crate::models::{build_model, Model, ModelConfig, ParamKind, Scale, Variant};
use crate::nn::{
    bce_loss, bce_loss_backward, concat_channels, conv2d, conv2d_backward, glorot_uniform, maxpool2, maxpool2_backward,
    relu, relu_backward, sigmoid, sigmoid_backward, split_channels, transposed_conv2, transposed_conv2_backward,
    Padding, Tensor,
};
use crate::qsim::{param_shift_grad, run_circuit, CircuitTemplate};
use crate::qufex::{build_template_with, EncodingBasis, QuFeXLayer, QuFeXSet, THETA_LEN};

pub const STEP: f64 = 1e-4;
pub const OP_TOLERANCE: f64 = 1e-5;
pub const MODEL_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub checked: usize,
    /// Largest error under the check's metric.
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_error <= self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<40} {:>5} coords  max err {:.3e} (tol {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.checked,
            self.max_error,
            self.tolerance
        )
    }
}

/// `|a - n|`, scaled down by the larger magnitude once that exceeds 1.
pub fn op_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Relative error with a `1e-6` floor on the denominator.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn central(mut f: impl FnMut(f64) -> f64) -> f64 {
    (f(STEP) - f(-STEP)) / (2.0 * STEP)
}

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).expect("shape matches")
}

fn perturbed(t: &Tensor, i: usize, d: f64) -> Tensor {
    let mut t = t.clone();
    t.data_mut()[i] += d;
    t
}

#[derive(Default)]
struct Acc {
    checked: usize,
    max_error: f64,
}

impl Acc {
    fn push(&mut self, err: f64) {
        self.checked += 1;
        self.max_error = self.max_error.max(err);
    }

    fn report(self, name: impl Into<String>, tolerance: f64) -> CheckReport {
        CheckReport { name: name.into(), checked: self.checked, max_error: self.max_error, tolerance }
    }
}

/// Checks `analytic` against FD of `loss` over every coordinate of `x`,
/// skipping coordinates where `same_region` says the step crosses a kink.
fn check_tensor(
    acc: &mut Acc,
    x: &Tensor,
    analytic: &[f64],
    loss: impl Fn(&Tensor) -> f64,
    same_region: impl Fn(&Tensor) -> bool,
) {
    for (i, &a) in analytic.iter().enumerate().take(x.len()) {
        let (plus, minus) = (perturbed(x, i, STEP), perturbed(x, i, -STEP));
        if !same_region(&plus) || !same_region(&minus) {
            continue;
        }
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * STEP);
        acc.push(op_error(a, numeric));
    }
}

fn qsim_templates() -> Vec<(String, CircuitTemplate)> {
    let mut out = Vec::new();
    for n in [4, 8] {
        for (layer, basis, label) in [
            (1, EncodingBasis::Y, "y"),
            (2, EncodingBasis::X { closing_h: false }, "x"),
            (2, EncodingBasis::X { closing_h: true }, "x+h"),
        ] {
            let t = build_template_with(n, layer, basis).expect("supported template");
            out.push((format!("qufex-{n}-{layer} ({label} encoding)"), t));
        }
    }
    out
}

/// Parameter-shift Jacobians of every template against FD of `run_circuit`.
pub fn qsim_suite(draws: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    for (name, template) in qsim_templates() {
        let n = template.n_qubits();
        let mut acc = Acc::default();
        for _ in 0..draws {
            let theta: Vec<f64> = (0..THETA_LEN).map(|_| rng.gen_range(0.0..TAU)).collect();
            let enc: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
            let g = param_shift_grad(&template, &theta, &enc)?;
            for i in 0..THETA_LEN {
                let fd = fd_columns(n, |d| {
                    let mut t = theta.clone();
                    t[i] += d;
                    run_circuit(&template, &t, &enc)
                })?;
                (0..n).for_each(|q| acc.push((g.theta.get(q, i) - fd[q]).abs()));
            }
            for j in 0..n {
                let fd = fd_columns(n, |d| {
                    let mut e = enc.clone();
                    e[j] += d;
                    run_circuit(&template, &theta, &e)
                })?;
                (0..n).for_each(|q| acc.push((g.encodings.get(q, j) - fd[q]).abs()));
            }
        }
        reports.push(acc.report(format!("param-shift {name}"), OP_TOLERANCE));
    }
    Ok(reports)
}

fn fd_columns(n: usize, f: impl Fn(f64) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let (p, m) = (f(STEP)?, f(-STEP)?);
    Ok((0..n).map(|q| (p[q] - m[q]) / (2.0 * STEP)).collect())
}

fn always(_: &Tensor) -> bool {
    true
}

/// Every classical op's backward against FD of `sum(r * op(x))`.
pub fn layer_suite(seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();

    for (padding, with_bias, label) in
        [(Padding::Valid, true, "valid, bias"), (Padding::Same, true, "same, bias"), (Padding::Same, false, "same")]
    {
        let x = uniform(&[2, 3, 5, 4], -1.0, 1.0, &mut rng);
        let k = uniform(&[2, 3, 3, 3], -1.0, 1.0, &mut rng);
        let b = uniform(&[2], -1.0, 1.0, &mut rng);
        let bias = with_bias.then_some(&b);
        let y = conv2d(&x, &k, bias, padding)?;
        let r = uniform(y.shape(), -1.0, 1.0, &mut rng);
        let g = conv2d_backward(&x, &k, with_bias, padding, &r)?;
        let mut acc = Acc::default();
        check_tensor(&mut acc, &x, g.input.data(), |x| conv2d(x, &k, bias, padding).unwrap().dot(&r).unwrap(), always);
        check_tensor(&mut acc, &k, g.kernel.data(), |k| conv2d(&x, k, bias, padding).unwrap().dot(&r).unwrap(), always);
        if let Some(gb) = &g.bias {
            check_tensor(
                &mut acc,
                &b,
                gb.data(),
                |b| conv2d(&x, &k, Some(b), padding).unwrap().dot(&r).unwrap(),
                always,
            );
        }
        reports.push(acc.report(format!("conv2d 3x3 ({label})"), OP_TOLERANCE));
    }

    for (ksize, with_bias) in [(2, true), (3, true), (3, false)] {
        let x = uniform(&[2, 3, 3, 2], -1.0, 1.0, &mut rng);
        let k = uniform(&[3, 2, ksize, ksize], -1.0, 1.0, &mut rng);
        let b = uniform(&[2], -1.0, 1.0, &mut rng);
        let bias = with_bias.then_some(&b);
        let y = transposed_conv2(&x, &k, bias)?;
        let r = uniform(y.shape(), -1.0, 1.0, &mut rng);
        let g = transposed_conv2_backward(&x, &k, with_bias, &r)?;
        let mut acc = Acc::default();
        check_tensor(&mut acc, &x, g.input.data(), |x| transposed_conv2(x, &k, bias).unwrap().dot(&r).unwrap(), always);
        check_tensor(
            &mut acc,
            &k,
            g.kernel.data(),
            |k| transposed_conv2(&x, k, bias).unwrap().dot(&r).unwrap(),
            always,
        );
        if let Some(gb) = &g.bias {
            check_tensor(
                &mut acc,
                &b,
                gb.data(),
                |b| transposed_conv2(&x, &k, Some(b)).unwrap().dot(&r).unwrap(),
                always,
            );
        }
        let bias_label = if with_bias { ", bias" } else { "" };
        reports.push(acc.report(format!("transposed conv {ksize}x{ksize} stride 2{bias_label}"), OP_TOLERANCE));
    }

    {
        let x = uniform(&[2, 2, 4, 6], -1.0, 1.0, &mut rng);
        let pooled = maxpool2(&x)?;
        let r = uniform(pooled.output.shape(), -1.0, 1.0, &mut rng);
        let dx = maxpool2_backward(x.shape(), &pooled.argmax, &r)?;
        let mut acc = Acc::default();
        let same = |x: &Tensor| maxpool2(x).unwrap().argmax == pooled.argmax;
        check_tensor(&mut acc, &x, dx.data(), |x| maxpool2(x).unwrap().output.dot(&r).unwrap(), same);
        reports.push(acc.report("maxpool 2x2", OP_TOLERANCE));
    }

    {
        let x = uniform(&[1, 2, 3, 4], -1.0, 1.0, &mut rng);
        let r = uniform(x.shape(), -1.0, 1.0, &mut rng);
        let dx = relu_backward(&x, &r)?;
        let mut acc = Acc::default();
        let signs: Vec<bool> = x.data().iter().map(|&v| v > 0.0).collect();
        let same = |x: &Tensor| x.data().iter().map(|&v| v > 0.0).eq(signs.iter().copied());
        check_tensor(&mut acc, &x, dx.data(), |x| relu(x).dot(&r).unwrap(), same);
        reports.push(acc.report("relu", OP_TOLERANCE));
    }

    {
        let x = uniform(&[1, 2, 3, 4], -4.0, 4.0, &mut rng);
        let r = uniform(x.shape(), -1.0, 1.0, &mut rng);
        let dx = sigmoid_backward(&sigmoid(&x), &r)?;
        let mut acc = Acc::default();
        check_tensor(&mut acc, &x, dx.data(), |x| sigmoid(x).dot(&r).unwrap(), always);
        reports.push(acc.report("sigmoid", OP_TOLERANCE));
    }

    {
        let p = uniform(&[2, 1, 3, 3], 0.02, 0.98, &mut rng);
        let t = uniform(p.shape(), 0.0, 1.0, &mut rng).map(|v| f64::from(u8::from(v >= 0.5)));
        let dp = bce_loss_backward(&p, &t)?;
        let mut acc = Acc::default();
        check_tensor(&mut acc, &p, dp.data(), |p| bce_loss(p, &t).unwrap(), always);
        reports.push(acc.report("binary cross-entropy", OP_TOLERANCE));
    }

    {
        let a = uniform(&[2, 2, 2, 3], -1.0, 1.0, &mut rng);
        let b = uniform(&[2, 3, 2, 3], -1.0, 1.0, &mut rng);
        let r = uniform(&[2, 5, 2, 3], -1.0, 1.0, &mut rng);
        let (da, db) = split_channels(&r, 2)?;
        let mut acc = Acc::default();
        check_tensor(&mut acc, &a, da.data(), |a| concat_channels(a, &b).unwrap().dot(&r).unwrap(), always);
        check_tensor(&mut acc, &b, db.data(), |b| concat_channels(&a, b).unwrap().dot(&r).unwrap(), always);
        reports.push(acc.report("channel concat", OP_TOLERANCE));
    }
    Ok(reports)
}

/// Both QuFeX configurations: gradients for theta, the merge kernel and the
/// input, through the residual bypass.
pub fn qufex_suite(seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eight = QuFeXSet::new(vec![QuFeXLayer::new(8, 1, 2)?.randomize(&mut rng)], None)?;
    let four = QuFeXSet::new(
        vec![QuFeXLayer::new(4, 1, 2)?.randomize(&mut rng), QuFeXLayer::new(4, 2, 2)?.randomize(&mut rng)],
        Some(glorot_uniform(&[2, 2, 3, 3], 18, 18, &mut rng)),
    )?;
    let mut reports = Vec::new();
    for (name, set, shape) in [("qufex 8(1)", eight, [2, 4, 2, 2]), ("qufex 4(2)", four, [2, 2, 2, 2])] {
        let x = uniform(&shape, 0.0, 1.5, &mut rng);
        let (y, cache) = set.forward(&x)?;
        let r = uniform(y.shape(), -1.0, 1.0, &mut rng);
        let g = set.backward(&cache, &r)?;
        let loss = |s: &QuFeXSet, x: &Tensor| s.forward(x).unwrap().0.dot(&r).unwrap();
        let mut acc = Acc::default();
        check_tensor(&mut acc, &x, g.input.data(), |x| loss(&set, x), always);
        for (l, dt) in g.theta.iter().enumerate() {
            for (i, &a) in dt.iter().enumerate() {
                let numeric = central(|d| {
                    let mut s = set.clone();
                    s.layers[l].theta.data_mut()[i] += d;
                    loss(&s, &x)
                });
                acc.push(op_error(a, numeric));
            }
        }
        if let (Some(k), Some(dk)) = (&set.merge_kernel, &g.merge_kernel) {
            check_tensor(
                &mut acc,
                k,
                dk.data(),
                |k| {
                    let mut s = set.clone();
                    s.merge_kernel = Some(k.clone());
                    loss(&s, &x)
                },
                always,
            );
        }
        reports.push(acc.report(name, OP_TOLERANCE));
    }
    Ok(reports)
}

fn model_loss(model: &Model, x: &Tensor, y: &Tensor) -> (f64, Vec<usize>) {
    let tape = model.forward_with_tape(x).expect("valid input");
    (bce_loss(tape.output(), y).expect("matching shapes"), tape.activation_signature())
}

fn nudge(model: &mut Model, param: usize, index: usize, d: f64) {
    model.params_mut()[param].2.data_mut()[index] += d;
}

/// BCE gradient of a freshly built model against FD on `coords` sampled
/// parameter coordinates: every quantum angle, then uniformly over the rest.
/// Coordinates whose step changes a ReLU sign or pooling winner are redrawn.
pub fn model_check(config: &ModelConfig, coords: usize, seed: u64) -> Result<CheckReport> {
    let mut model = build_model(config, seed)?;
    let s = config.input_size;
    let data = synth_dataset(2, s, seed)?;
    let x = Tensor::stack(&data.iter().map(|d| d.image.clone()).collect::<Vec<_>>())?;
    let y = Tensor::stack(&data.iter().map(|d| d.mask.clone()).collect::<Vec<_>>())?;

    let tape = model.forward_with_tape(&x)?;
    let base_sig = tape.activation_signature();
    model.zero_grad();
    model.backward(&tape, &bce_loss_backward(tape.output(), &y)?)?;
    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|(_, _, t)| t.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();

    let sizes: Vec<(usize, ParamKind)> = model.params().iter().map(|(_, k, t)| (t.len(), *k)).collect();
    let mut picks: Vec<(usize, usize)> = Vec::new();
    for (p, &(len, kind)) in sizes.iter().enumerate() {
        if kind == ParamKind::Quantum {
            picks.extend((0..len).map(|i| (p, i)));
        }
    }
    let total: usize = sizes.iter().map(|s| s.0).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);

    let mut acc = Acc::default();
    let mut attempts = 0;
    let mut next = 0;
    while acc.checked < coords && attempts < 20 * coords {
        attempts += 1;
        let (p, i) = if next < picks.len() {
            next += 1;
            picks[next - 1]
        } else {
            let mut flat = rng.gen_range(0..total);
            let p = sizes
                .iter()
                .position(|&(len, _)| {
                    flat < len || {
                        flat -= len;
                        false
                    }
                })
                .expect("in range");
            (p, flat)
        };
        nudge(&mut model, p, i, STEP);
        let (lp, sp) = model_loss(&model, &x, &y);
        nudge(&mut model, p, i, -2.0 * STEP);
        let (lm, sm) = model_loss(&model, &x, &y);
        nudge(&mut model, p, i, STEP);
        if sp != base_sig || sm != base_sig {
            continue;
        }
        acc.push(relative_error(analytic[p][i], (lp - lm) / (2.0 * STEP)));
    }
    Ok(acc.report(format!("model {} @ {s}x{s}", config.tag()), MODEL_TOLERANCE))
}

/// Whole-model checks for the tiny configurations.
pub fn model_suite(coords: usize, seed: u64) -> Result<Vec<CheckReport>> {
    [
        ModelConfig::new(Variant::Qunet4x2, Scale::Tiny).with_input_size(32),
        ModelConfig::new(Variant::Unet, Scale::Tiny).with_input_size(32),
        ModelConfig::new(Variant::Qunet8x1, Scale::Tiny).with_input_size(64),
    ]
    .iter()
    .map(|cfg| model_check(cfg, coords, seed))
    .collect()
}

/// Everything `qunet gradcheck` runs.
pub fn run_all(seed: u64) -> Result<Vec<CheckReport>> {
    let mut out = qsim_suite(10, seed)?;
    out.extend(layer_suite(seed)?);
    out.extend(qufex_suite(seed)?);
    out.extend(model_suite(64, seed)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_metrics() {
        assert_eq!(op_error(1e-3, 2e-3), 1e-3);
        assert_eq!(op_error(100.0, 101.0), 1.0 / 101.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-8) - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn layer_suite_passes() {
        for r in layer_suite(1).unwrap() {
            assert!(r.passed(), "{}", r.line());
        }
    }
}
