use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use super::grouping::group_positions;
use super::template::{build_template_with, EncodingBasis, THETA_LEN};
use crate::error::{shape_err, Error, Result};
use crate::nn::{conv2d, conv2d_backward, Padding, Tensor};
use crate::qsim::{param_shift_grad, run_circuit, CircuitTemplate};

/// One quantum filter: a circuit template and its 4 shared angles.
#[derive(Debug, Clone, PartialEq)]
pub struct QuFeXLayer {
    n_qubits: usize,
    layer_index: usize,
    group_size: usize,
    encoding_basis: EncodingBasis,
    template: CircuitTemplate,
    pub theta: Tensor,
}

impl QuFeXLayer {
    /// Layer with all angles zero.
    pub fn new(n_qubits: usize, layer_index: usize, group_size: usize) -> Result<Self> {
        Self::with_basis(n_qubits, layer_index, group_size, EncodingBasis::for_layer(layer_index))
    }

    pub fn with_basis(
        n_qubits: usize,
        layer_index: usize,
        group_size: usize,
        encoding_basis: EncodingBasis,
    ) -> Result<Self> {
        let expected = EncodingBasis::for_layer(layer_index);
        if std::mem::discriminant(&expected) != std::mem::discriminant(&encoding_basis) {
            return Err(Error::Config(format!(
                "layer {layer_index} must use {expected:?} encoding, got {encoding_basis:?}"
            )));
        }
        if group_size == 0 {
            return Err(Error::Config("group size must be positive".into()));
        }
        Ok(Self {
            n_qubits,
            layer_index,
            group_size,
            encoding_basis,
            template: build_template_with(n_qubits, layer_index, encoding_basis)?,
            theta: Tensor::zeros(&[THETA_LEN]),
        })
    }

    /// Draws every angle uniformly from `[0, 2*pi)`.
    pub fn randomize<R: Rng>(mut self, rng: &mut R) -> Self {
        for t in self.theta.data_mut() {
            *t = rng.gen_range(0.0..2.0 * PI);
        }
        self
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != THETA_LEN {
            return Err(Error::Argument(format!("QuFeX takes {THETA_LEN} angles, got {}", theta.len())));
        }
        self.theta.data_mut().copy_from_slice(theta);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn encoding_basis(&self) -> EncodingBasis {
        self.encoding_basis
    }

    pub fn template(&self) -> &CircuitTemplate {
        &self.template
    }

    /// Per-qubit <Z> for one window of raw activations (angles are `pi * v`).
    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        let angles: Vec<f64> = values.iter().map(|v| PI * v).collect();
        run_circuit(&self.template, self.theta.data(), &angles)
    }

    /// Q_k(x) for a `[B, C, H, W]` batch.
    fn transform(&self, input: &Tensor) -> Result<Tensor> {
        let (b, c, h, w) = input.dims4()?;
        let windows = group_positions(c, h, w, self.n_qubits, self.group_size)?;
        let stride = c * h * w;
        let mut out = vec![0.0; input.len()];
        out.par_chunks_mut(stride).zip(input.data().par_chunks(stride)).try_for_each(|(y, x)| {
            for pos in &windows {
                let values: Vec<f64> = pos.iter().map(|&p| x[p]).collect();
                for (&p, z) in pos.iter().zip(self.apply(&values)?) {
                    y[p] = z;
                }
            }
            Ok::<_, Error>(())
        })?;
        Tensor::new(vec![b, c, h, w], out)
    }

    /// Returns (d theta, d input) for upstream gradient `dq` on Q_k(x).
    fn pullback(&self, input: &Tensor, dq: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
        let (_, c, h, w) = input.dims4()?;
        let windows = group_positions(c, h, w, self.n_qubits, self.group_size)?;
        let stride = c * h * w;
        let per_sample: Vec<(Vec<f64>, Vec<f64>)> = input
            .data()
            .par_chunks(stride)
            .zip(dq.data().par_chunks(stride))
            .map(|(x, up)| {
                let mut dtheta = vec![0.0; THETA_LEN];
                let mut dx = vec![0.0; stride];
                for pos in &windows {
                    let angles: Vec<f64> = pos.iter().map(|&p| PI * x[p]).collect();
                    let g = param_shift_grad(&self.template, self.theta.data(), &angles)?;
                    let u: Vec<f64> = pos.iter().map(|&p| up[p]).collect();
                    for (acc, v) in dtheta.iter_mut().zip(g.theta.vjp(&u)) {
                        *acc += v;
                    }
                    for (&p, v) in pos.iter().zip(g.encodings.vjp(&u)) {
                        dx[p] += PI * v;
                    }
                }
                Ok((dtheta, dx))
            })
            .collect::<Result<_>>()?;
        let mut dtheta = vec![0.0; THETA_LEN];
        let mut dx = Vec::with_capacity(input.len());
        for (dt, d) in per_sample {
            dtheta.iter_mut().zip(dt).for_each(|(a, b)| *a += b);
            dx.extend(d);
        }
        Ok((dtheta, dx))
    }
}

/// Forward state kept for [`QuFeXSet::backward`].
#[derive(Debug, Clone)]
pub struct QuFeXCache {
    input: Tensor,
    // Sum of the filter outputs, i.e. the merge convolution's input.
    summed: Tensor,
    quantum: Tensor,
}

impl QuFeXCache {
    /// Q(x), the quantum branch before the residual addition.
    pub fn quantum_output(&self) -> &Tensor {
        &self.quantum
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuFeXGrads {
    pub theta: Vec<Vec<f64>>,
    pub merge_kernel: Option<Tensor>,
    pub input: Tensor,
}

/// The bottleneck replacement: one filter, or two filters merged by a
/// bias-free 3x3 convolution, plus the residual bypass.
#[derive(Debug, Clone, PartialEq)]
pub struct QuFeXSet {
    pub layers: Vec<QuFeXLayer>,
    pub merge_kernel: Option<Tensor>,
}

impl QuFeXSet {
    pub fn new(layers: Vec<QuFeXLayer>, merge_kernel: Option<Tensor>) -> Result<Self> {
        match (layers.len(), &merge_kernel) {
            (1, None) | (2, Some(_)) => Ok(Self { layers, merge_kernel }),
            (n, m) => Err(Error::Config(format!(
                "QuFeX set needs one filter without merge or two with merge; got {n} filters, merge {}",
                if m.is_some() { "present" } else { "absent" }
            ))),
        }
    }

    /// Circuit evaluations needed for one `channels x height x width` sample.
    pub fn applications_per_sample(&self, channels: usize, height: usize, width: usize) -> Result<usize> {
        self.layers
            .iter()
            .map(|l| group_positions(channels, height, width, l.n_qubits, l.group_size).map(|w| w.len()))
            .sum()
    }

    pub fn quantum_param_count(&self) -> usize {
        self.layers.iter().map(|l| l.theta.len()).sum()
    }

    fn check_merge(&self, channels: usize) -> Result<()> {
        if let Some(k) = &self.merge_kernel {
            if k.shape() != [channels, channels, 3, 3] {
                return Err(shape_err!("merge kernel {:?} does not map {channels} channels to itself", k.shape()));
            }
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, QuFeXCache)> {
        let (_, c, _, _) = input.dims4()?;
        self.check_merge(c)?;
        let mut summed: Option<Tensor> = None;
        for layer in &self.layers {
            let q = layer.transform(input)?;
            summed = Some(match summed {
                None => q,
                Some(s) => s.add(&q)?,
            });
        }
        let summed = summed.expect("set has at least one layer");
        let quantum = match &self.merge_kernel {
            Some(k) => conv2d(&summed, k, None, Padding::Same)?,
            None => summed.clone(),
        };
        let output = quantum.add(input)?;
        Ok((output, QuFeXCache { input: input.clone(), summed, quantum }))
    }

    pub fn backward(&self, cache: &QuFeXCache, upstream: &Tensor) -> Result<QuFeXGrads> {
        if upstream.shape() != cache.input.shape() {
            return Err(Error::Usage(format!(
                "upstream gradient {:?} does not match the cached forward input {:?}",
                upstream.shape(),
                cache.input.shape()
            )));
        }
        let (dsum, merge_kernel) = match &self.merge_kernel {
            Some(k) => {
                let g = conv2d_backward(&cache.summed, k, false, Padding::Same, upstream)?;
                (g.input, Some(g.kernel))
            }
            None => (upstream.clone(), None),
        };
        let mut input = upstream.clone();
        let mut theta = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (dt, dx) = layer.pullback(&cache.input, &dsum)?;
            input.data_mut().iter_mut().zip(dx).for_each(|(a, b)| *a += b);
            theta.push(dt);
        }
        Ok(QuFeXGrads { theta, merge_kernel, input })
    }
}

pub fn qufex_forward(set: &QuFeXSet, input: &Tensor) -> Result<(Tensor, QuFeXCache)> {
    set.forward(input)
}

pub fn qufex_backward(set: &QuFeXSet, cache: &QuFeXCache, upstream: &Tensor) -> Result<QuFeXGrads> {
    set.backward(cache, upstream)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_input_zero_theta_gives_ones() {
        let set = QuFeXSet::new(vec![QuFeXLayer::new(8, 1, 2).unwrap()], None).unwrap();
        let x = Tensor::zeros(&[1, 8, 2, 2]);
        let (y, cache) = set.forward(&x).unwrap();
        assert!(cache.quantum_output().data().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_eq!(y.shape(), x.shape());
        assert!(y.data().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layers = vec![
            QuFeXLayer::new(4, 1, 8).unwrap().randomize(&mut rng),
            QuFeXLayer::new(4, 2, 8).unwrap().randomize(&mut rng),
        ];
        let set = QuFeXSet::new(layers, Some(Tensor::full(&[8, 8, 3, 3], 0.1))).unwrap();
        let x = Tensor::full(&[2, 8, 2, 2], 0.3);
        let (_, cache) = set.forward(&x).unwrap();
        let g = set.backward(&cache, &Tensor::zeros(&[2, 8, 2, 2])).unwrap();
        assert!(g.theta.iter().flatten().all(|&v| v == 0.0));
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.merge_kernel.unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_upstream_is_usage_error() {
        let set = QuFeXSet::new(vec![QuFeXLayer::new(4, 1, 2).unwrap()], None).unwrap();
        let (_, cache) = set.forward(&Tensor::zeros(&[1, 2, 2, 2])).unwrap();
        assert!(matches!(set.backward(&cache, &Tensor::zeros(&[2, 2, 2, 2])), Err(Error::Usage(_))));
    }

    #[test]
    fn merge_required_for_two_filters() {
        let l = || QuFeXLayer::new(4, 1, 8).unwrap();
        assert!(QuFeXSet::new(vec![l(), l()], None).is_err());
        assert!(QuFeXSet::new(vec![l()], Some(Tensor::zeros(&[8, 8, 3, 3]))).is_err());
    }

    #[test]
    fn encoding_basis_must_match_layer() {
        assert!(QuFeXLayer::with_basis(4, 1, 2, EncodingBasis::X { closing_h: false }).is_err());
        assert!(QuFeXLayer::with_basis(4, 2, 2, EncodingBasis::X { closing_h: true }).is_ok());
    }
}
