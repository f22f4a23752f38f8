use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{
    conv2d, conv2d_backward, glorot_uniform, relu, relu_backward, transposed_conv2, transposed_conv2_backward, Padding,
    Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Classical,
    Quantum,
}

fn accumulate(param: &mut Tensor, grad: &Tensor) {
    param.grad_mut().iter_mut().zip(grad.data()).for_each(|(a, b)| *a += b);
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Conv {
    pub name: String,
    pub kernel: Tensor,
    pub bias: Option<Tensor>,
    pub padding: Padding,
}

impl Conv {
    pub fn new<R: Rng>(name: String, cin: usize, cout: usize, k: usize, bias: bool, rng: &mut R) -> Self {
        let kernel = glorot_uniform(&[cout, cin, k, k], cin * k * k, cout * k * k, rng);
        Self { name, kernel, bias: bias.then(|| Tensor::zeros(&[cout])), padding: Padding::Same }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        conv2d(x, &self.kernel, self.bias.as_ref(), self.padding)
    }

    pub fn backward(&mut self, input: &Tensor, dout: &Tensor) -> Result<Tensor> {
        let g = conv2d_backward(input, &self.kernel, self.bias.is_some(), self.padding, dout)?;
        accumulate(&mut self.kernel, &g.kernel);
        if let (Some(b), Some(db)) = (self.bias.as_mut(), g.bias.as_ref()) {
            accumulate(b, db);
        }
        Ok(g.input)
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![(format!("{}.kernel", self.name), &mut self.kernel)];
        if let Some(b) = self.bias.as_mut() {
            out.push((format!("{}.bias", self.name), b));
        }
        out
    }

    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![(format!("{}.kernel", self.name), &self.kernel)];
        if let Some(b) = self.bias.as_ref() {
            out.push((format!("{}.bias", self.name), b));
        }
        out
    }
}

/// Convolution followed by ReLU.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ConvRelu(pub Conv);

#[derive(Debug, Clone)]
pub(crate) struct ConvReluCache {
    input: Tensor,
    pre: Tensor,
}

impl ConvRelu {
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvReluCache)> {
        let pre = self.0.forward(x)?;
        let out = relu(&pre);
        Ok((out, ConvReluCache { input: x.clone(), pre }))
    }

    pub fn backward(&mut self, cache: &ConvReluCache, dout: &Tensor) -> Result<Tensor> {
        let dpre = relu_backward(&cache.pre, dout)?;
        self.0.backward(&cache.input, &dpre)
    }

    /// ReLU sign pattern of the cached pre-activation, used to detect kinks.
    pub fn signature(cache: &ConvReluCache) -> impl Iterator<Item = bool> + '_ {
        cache.pre.data().iter().map(|&v| v > 0.0)
    }
}

/// Stride-2 transposed convolution.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct UpConv {
    pub name: String,
    pub kernel: Tensor,
    pub bias: Option<Tensor>,
}

impl UpConv {
    pub fn new<R: Rng>(name: String, cin: usize, cout: usize, k: usize, bias: bool, rng: &mut R) -> Self {
        let kernel = glorot_uniform(&[cin, cout, k, k], cin * k * k, cout * k * k, rng);
        Self { name, kernel, bias: bias.then(|| Tensor::zeros(&[cout])) }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        transposed_conv2(x, &self.kernel, self.bias.as_ref())
    }

    pub fn backward(&mut self, input: &Tensor, dout: &Tensor) -> Result<Tensor> {
        let g = transposed_conv2_backward(input, &self.kernel, self.bias.is_some(), dout)?;
        accumulate(&mut self.kernel, &g.kernel);
        if let (Some(b), Some(db)) = (self.bias.as_mut(), g.bias.as_ref()) {
            accumulate(b, db);
        }
        Ok(g.input)
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![(format!("{}.kernel", self.name), &mut self.kernel)];
        if let Some(b) = self.bias.as_mut() {
            out.push((format!("{}.bias", self.name), b));
        }
        out
    }

    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![(format!("{}.kernel", self.name), &self.kernel)];
        if let Some(b) = self.bias.as_ref() {
            out.push((format!("{}.bias", self.name), b));
        }
        out
    }
}

pub(crate) fn accumulate_grad(param: &mut Tensor, grad: &Tensor) {
    accumulate(param, grad)
}
