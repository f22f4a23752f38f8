use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, Variant};
use super::layers::{accumulate_grad, Conv, ConvRelu, ConvReluCache, ParamKind, UpConv};
use crate::error::{shape_err, Error, Result};
use crate::nn::{
    concat_channels, glorot_uniform, maxpool2, maxpool2_backward, sigmoid, sigmoid_backward, split_channels, Tensor,
};
use crate::qufex::{EncodingBasis, QuFeXCache, QuFeXLayer, QuFeXSet};

/// What sits between encoder and decoder.
#[derive(Debug, Clone, PartialEq)]
pub enum Bottleneck {
    Classical(usize),
    Quantum(QuFeXSet),
    /// Pass-through; the ablation hook.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
enum BottleneckLayers {
    Classical(Vec<ConvRelu>),
    Quantum(QuFeXSet),
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
struct Decoder {
    up: UpConv,
    convs: [ConvRelu; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub classical: usize,
    pub quantum: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.classical + self.quantum
    }
}

/// A U-Net whose bottleneck is classical, quantum or the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    encoder: Vec<[ConvRelu; 2]>,
    bottleneck: BottleneckLayers,
    decoder: Vec<Decoder>,
    head: Conv,
}

struct EncoderCache {
    convs: [ConvReluCache; 2],
    skip_shape: Vec<usize>,
    argmax: Vec<usize>,
}

enum BottleneckCache {
    Classical(Vec<ConvReluCache>),
    Quantum(Box<QuFeXCache>),
    Identity,
}

struct DecoderCache {
    up_input: Tensor,
    up_channels: usize,
    convs: [ConvReluCache; 2],
}

/// Everything the backward pass needs from one forward pass.
pub struct Tape {
    encoder: Vec<EncoderCache>,
    bottleneck: BottleneckCache,
    decoder: Vec<DecoderCache>,
    head_input: Tensor,
    output: Tensor,
}

impl Tape {
    pub fn output(&self) -> &Tensor {
        &self.output
    }

    /// ReLU sign patterns and max-pool winners of the pass. Two passes with
    /// equal signatures lie in the same piecewise-smooth region.
    pub fn activation_signature(&self) -> Vec<usize> {
        let mut sig = Vec::new();
        let push_relu = |sig: &mut Vec<usize>, c: &ConvReluCache| sig.extend(ConvRelu::signature(c).map(usize::from));
        for e in &self.encoder {
            e.convs.iter().for_each(|c| push_relu(&mut sig, c));
            sig.extend(&e.argmax);
        }
        if let BottleneckCache::Classical(cs) = &self.bottleneck {
            cs.iter().for_each(|c| push_relu(&mut sig, c));
        }
        for d in &self.decoder {
            d.convs.iter().for_each(|c| push_relu(&mut sig, c));
        }
        sig
    }

    /// Q(x) of a quantum bottleneck.
    pub fn quantum_output(&self) -> Option<&Tensor> {
        match &self.bottleneck {
            BottleneckCache::Quantum(c) => Some(c.quantum_output()),
            _ => None,
        }
    }
}

fn conv_relu<R: rand::Rng>(name: String, cin: usize, cout: usize, rng: &mut R) -> ConvRelu {
    ConvRelu(Conv::new(name, cin, cout, 3, true, rng))
}

/// Builds and initializes a model: Glorot-uniform kernels, zero biases and
/// QuFeX angles uniform in `[0, 2*pi)`, all drawn from `seed`.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<Model> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = config.arch;

    let mut encoder = Vec::new();
    let mut channels = config.input_channels;
    for (i, &f) in config.encoder_filters.iter().enumerate() {
        encoder.push([
            conv_relu(format!("enc{}.conv1", i + 1), channels, f, &mut rng),
            conv_relu(format!("enc{}.conv2", i + 1), f, f, &mut rng),
        ]);
        channels = f;
    }

    let side = config.bottleneck_size();
    let bottleneck = match config.variant {
        Variant::Unet => {
            let b = config.bottleneck_filters;
            let mut convs = vec![conv_relu("bottleneck.conv1".into(), channels, b, &mut rng)];
            for i in 1..arch.bottleneck_convs {
                convs.push(conv_relu(format!("bottleneck.conv{}", i + 1), b, b, &mut rng));
            }
            channels = b;
            BottleneckLayers::Classical(convs)
        }
        Variant::Qunet8x1 => {
            let layer = QuFeXLayer::new(8, 1, 2)?.randomize(&mut rng);
            let set = QuFeXSet::new(vec![layer], None)?;
            set.applications_per_sample(channels, side, side)?;
            BottleneckLayers::Quantum(set)
        }
        Variant::Qunet4x2 => {
            let basis = EncodingBasis::X { closing_h: arch.x_basis_closing_h };
            let layers = vec![
                QuFeXLayer::new(4, 1, channels)?.randomize(&mut rng),
                QuFeXLayer::with_basis(4, 2, channels, basis)?.randomize(&mut rng),
            ];
            let merge = glorot_uniform(&[channels, channels, 3, 3], channels * 9, channels * 9, &mut rng);
            let set = QuFeXSet::new(layers, Some(merge))?;
            set.applications_per_sample(channels, side, side)?;
            BottleneckLayers::Quantum(set)
        }
    };

    let mut decoder = Vec::new();
    let skips: Vec<usize> = config.encoder_filters.iter().rev().copied().collect();
    for (i, &f) in skips.iter().enumerate() {
        // Decoder filters mirror the encoder, so stage i uses the skip width.
        let up =
            UpConv::new(format!("dec{}.up", i + 1), channels, f, arch.upsample_kernel, arch.upsample_bias, &mut rng);
        decoder.push(Decoder {
            up,
            convs: [
                conv_relu(format!("dec{}.conv1", i + 1), f + f, f, &mut rng),
                conv_relu(format!("dec{}.conv2", i + 1), f, f, &mut rng),
            ],
        });
        channels = f;
    }
    let head = Conv::new("head".into(), channels, 1, 1, true, &mut rng);
    Ok(Model { config: config.clone(), encoder, bottleneck, decoder, head })
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn bottleneck(&self) -> Bottleneck {
        match &self.bottleneck {
            BottleneckLayers::Classical(c) => Bottleneck::Classical(c.len()),
            BottleneckLayers::Quantum(s) => Bottleneck::Quantum(s.clone()),
            BottleneckLayers::Identity => Bottleneck::Identity,
        }
    }

    pub fn qufex(&self) -> Option<&QuFeXSet> {
        match &self.bottleneck {
            BottleneckLayers::Quantum(s) => Some(s),
            _ => None,
        }
    }

    pub fn qufex_mut(&mut self) -> Option<&mut QuFeXSet> {
        match &mut self.bottleneck {
            BottleneckLayers::Quantum(s) => Some(s),
            _ => None,
        }
    }

    /// Replaces the bottleneck with the identity. Only valid when the
    /// bottleneck preserves the channel count.
    pub fn ablate_bottleneck(&mut self) -> Result<()> {
        let enc_out = *self.config.encoder_filters.last().expect("five encoder stages");
        let dec_in = self.decoder[0].up.kernel.shape()[0];
        if enc_out != dec_in {
            return Err(Error::Config(format!(
                "identity bottleneck needs {enc_out} -> {enc_out} channels, decoder expects {dec_in}"
            )));
        }
        self.bottleneck = BottleneckLayers::Identity;
        Ok(())
    }

    /// Circuit evaluations per input sample (0 for classical bottlenecks).
    pub fn circuit_applications_per_sample(&self) -> usize {
        let side = self.config.bottleneck_size();
        let channels = *self.config.encoder_filters.last().expect("five encoder stages");
        self.qufex().map_or(0, |s| s.applications_per_sample(channels, side, side).expect("checked at build"))
    }

    /// Every trainable tensor with its registry name and partition.
    pub fn params(&self) -> Vec<(String, ParamKind, &Tensor)> {
        let mut out = Vec::new();
        fn classical(list: Vec<(String, &Tensor)>) -> impl Iterator<Item = (String, ParamKind, &Tensor)> {
            list.into_iter().map(|(n, t)| (n, ParamKind::Classical, t))
        }
        for block in &self.encoder {
            for c in block {
                out.extend(classical(c.0.params()));
            }
        }
        match &self.bottleneck {
            BottleneckLayers::Classical(cs) => cs.iter().for_each(|c| out.extend(classical(c.0.params()))),
            BottleneckLayers::Quantum(set) => {
                for (i, l) in set.layers.iter().enumerate() {
                    out.push((format!("qufex.filter{}.theta", i + 1), ParamKind::Quantum, &l.theta));
                }
                if let Some(k) = &set.merge_kernel {
                    out.push(("qufex.merge.kernel".into(), ParamKind::Classical, k));
                }
            }
            BottleneckLayers::Identity => {}
        }
        for d in &self.decoder {
            out.extend(classical(d.up.params()));
            for c in &d.convs {
                out.extend(classical(c.0.params()));
            }
        }
        out.extend(classical(self.head.params()));
        out
    }

    /// Same order as [`Model::params`].
    pub fn params_mut(&mut self) -> Vec<(String, ParamKind, &mut Tensor)> {
        let mut out = Vec::new();
        fn classical(list: Vec<(String, &mut Tensor)>) -> impl Iterator<Item = (String, ParamKind, &mut Tensor)> {
            list.into_iter().map(|(n, t)| (n, ParamKind::Classical, t))
        }
        for block in &mut self.encoder {
            for c in block.iter_mut() {
                out.extend(classical(c.0.params_mut()));
            }
        }
        match &mut self.bottleneck {
            BottleneckLayers::Classical(cs) => {
                for c in cs.iter_mut() {
                    out.extend(classical(c.0.params_mut()));
                }
            }
            BottleneckLayers::Quantum(set) => {
                for (i, l) in set.layers.iter_mut().enumerate() {
                    out.push((format!("qufex.filter{}.theta", i + 1), ParamKind::Quantum, &mut l.theta));
                }
                if let Some(k) = set.merge_kernel.as_mut() {
                    out.push(("qufex.merge.kernel".into(), ParamKind::Classical, k));
                }
            }
            BottleneckLayers::Identity => {}
        }
        for d in &mut self.decoder {
            out.extend(classical(d.up.params_mut()));
            for c in d.convs.iter_mut() {
                out.extend(classical(c.0.params_mut()));
            }
        }
        out.extend(classical(self.head.params_mut()));
        out
    }

    pub fn count_params(&self) -> ParamCount {
        let mut count = ParamCount { classical: 0, quantum: 0 };
        for (_, kind, t) in self.params() {
            match kind {
                ParamKind::Classical => count.classical += t.len(),
                ParamKind::Quantum => count.quantum += t.len(),
            }
        }
        count
    }

    pub fn zero_grad(&mut self) {
        for (_, _, t) in self.params_mut() {
            t.zero_grad();
        }
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        let (_, c, h, w) = batch.dims4()?;
        let s = self.config.input_size;
        if (c, h, w) != (self.config.input_channels, s, s) {
            return Err(shape_err!(
                "model expects [B, {}, {s}, {s}] input, got {:?}",
                self.config.input_channels,
                batch.shape()
            ));
        }
        Ok(())
    }

    /// Predictions in (0, 1), shape `[B, 1, H, W]`.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(self.forward_with_tape(batch)?.output)
    }

    pub fn forward_with_tape(&self, batch: &Tensor) -> Result<Tape> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        let mut encoder = Vec::with_capacity(self.encoder.len());
        let mut skips = Vec::with_capacity(self.encoder.len());
        for [c1, c2] in &self.encoder {
            let (a1, k1) = c1.forward(&x)?;
            let (a2, k2) = c2.forward(&a1)?;
            let pooled = maxpool2(&a2)?;
            encoder.push(EncoderCache { convs: [k1, k2], skip_shape: a2.shape().to_vec(), argmax: pooled.argmax });
            skips.push(a2);
            x = pooled.output;
        }

        let bottleneck = match &self.bottleneck {
            BottleneckLayers::Classical(convs) => {
                let mut caches = Vec::with_capacity(convs.len());
                for c in convs {
                    let (a, k) = c.forward(&x)?;
                    caches.push(k);
                    x = a;
                }
                BottleneckCache::Classical(caches)
            }
            BottleneckLayers::Quantum(set) => {
                let (y, cache) = set.forward(&x)?;
                x = y;
                BottleneckCache::Quantum(Box::new(cache))
            }
            BottleneckLayers::Identity => BottleneckCache::Identity,
        };

        let mut decoder = Vec::with_capacity(self.decoder.len());
        for (d, skip) in self.decoder.iter().zip(skips.iter().rev()) {
            let up = d.up.forward(&x)?;
            let up_channels = up.shape()[1];
            let cat = concat_channels(&up, skip)?;
            let (a1, k1) = d.convs[0].forward(&cat)?;
            let (a2, k2) = d.convs[1].forward(&a1)?;
            decoder.push(DecoderCache { up_input: x, up_channels, convs: [k1, k2] });
            x = a2;
        }
        let output = sigmoid(&self.head.forward(&x)?);
        Ok(Tape { encoder, bottleneck, decoder, head_input: x, output })
    }

    /// Accumulates parameter gradients for upstream `dloss` (d loss / d
    /// prediction) and returns d loss / d input.
    pub fn backward(&mut self, tape: &Tape, dloss: &Tensor) -> Result<Tensor> {
        if dloss.shape() != tape.output.shape() {
            return Err(shape_err!("loss gradient {:?} vs output {:?}", dloss.shape(), tape.output.shape()));
        }
        let same_kind = matches!(
            (&self.bottleneck, &tape.bottleneck),
            (BottleneckLayers::Classical(_), BottleneckCache::Classical(_))
                | (BottleneckLayers::Quantum(_), BottleneckCache::Quantum(_))
                | (BottleneckLayers::Identity, BottleneckCache::Identity)
        );
        if !same_kind
            || tape.decoder.len() != self.decoder.len()
            || tape.head_input.shape()[1] != self.head.kernel.shape()[1]
        {
            return Err(Error::Usage("tape was recorded by a different model".into()));
        }
        let dlogits = sigmoid_backward(&tape.output, dloss)?;
        let mut dx = self.head.backward(&tape.head_input, &dlogits)?;

        let mut dskips = Vec::with_capacity(self.decoder.len());
        for (d, cache) in self.decoder.iter_mut().zip(&tape.decoder).rev() {
            let da1 = d.convs[1].backward(&cache.convs[1], &dx)?;
            let dcat = d.convs[0].backward(&cache.convs[0], &da1)?;
            let (dup, dskip) = split_channels(&dcat, cache.up_channels)?;
            dskips.push(dskip);
            dx = d.up.backward(&cache.up_input, &dup)?;
        }
        // dskips is now ordered by encoder stage (first decoder consumed the last skip).

        dx = match (&mut self.bottleneck, &tape.bottleneck) {
            (BottleneckLayers::Classical(convs), BottleneckCache::Classical(caches)) => {
                for (c, k) in convs.iter_mut().zip(caches).rev() {
                    dx = c.backward(k, &dx)?;
                }
                dx
            }
            (BottleneckLayers::Quantum(set), BottleneckCache::Quantum(cache)) => {
                let g = set.backward(cache, &dx)?;
                for (layer, dt) in set.layers.iter_mut().zip(&g.theta) {
                    accumulate_grad(&mut layer.theta, &Tensor::new(vec![dt.len()], dt.clone())?);
                }
                if let (Some(k), Some(dk)) = (set.merge_kernel.as_mut(), g.merge_kernel.as_ref()) {
                    accumulate_grad(k, dk);
                }
                g.input
            }
            (BottleneckLayers::Identity, BottleneckCache::Identity) => dx,
            _ => return Err(Error::Usage("tape was recorded with a different bottleneck".into())),
        };

        for ((block, cache), dskip) in self.encoder.iter_mut().zip(&tape.encoder).zip(dskips).rev() {
            let mut da2 = maxpool2_backward(&cache.skip_shape, &cache.argmax, &dx)?;
            da2.data_mut().iter_mut().zip(dskip.data()).for_each(|(a, b)| *a += b);
            let da1 = block[1].backward(&cache.convs[1], &da2)?;
            dx = block[0].backward(&cache.convs[0], &da1)?;
        }
        Ok(dx)
    }
}
