use std::f64::consts::FRAC_PI_2;

use super::circuit::{CircuitTemplate, SlotBinding};
use crate::error::Result;

/// Row-major `outputs x inputs` matrix of partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    outputs: usize,
    inputs: usize,
    data: Vec<f64>,
}

impl Jacobian {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self { outputs, inputs, data: vec![0.0; outputs * inputs] }
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    /// d output / d input.
    pub fn get(&self, output: usize, input: usize) -> f64 {
        self.data[output * self.inputs + input]
    }

    fn add_column(&mut self, input: usize, column: &[f64]) {
        for (out, v) in column.iter().enumerate() {
            self.data[out * self.inputs + input] += v;
        }
    }

    /// `upstream^T J`: pulls an output cotangent back to the inputs.
    pub fn vjp(&self, upstream: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.inputs];
        for (row, &u) in self.data.chunks_exact(self.inputs).zip(upstream) {
            for (a, &j) in acc.iter_mut().zip(row) {
                *a += u * j;
            }
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftGradients {
    /// Expectations at the unshifted point.
    pub outputs: Vec<f64>,
    pub theta: Jacobian,
    pub encodings: Jacobian,
}

/// Parameter-shift gradients of every <Z_q> with respect to every slot.
///
/// The rule is applied per gate occurrence: a slot shared by several gates
/// gets the sum of the per-gate shifts.
pub fn param_shift_grad(template: &CircuitTemplate, theta: &[f64], encodings: &[f64]) -> Result<ShiftGradients> {
    let angles = template.slot_angles(theta, encodings)?;
    let n = template.n_qubits();
    let mut grad_theta = Jacobian::zeros(n, theta.len());
    let mut grad_enc = Jacobian::zeros(n, encodings.len());
    for (idx, gate) in template.gates().iter().enumerate() {
        let Some(slot) = gate.slot() else { continue };
        let plus = template.evaluate(&angles, Some((idx, FRAC_PI_2)));
        let minus = template.evaluate(&angles, Some((idx, -FRAC_PI_2)));
        let column: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| 0.5 * (p - m)).collect();
        match template.binding(slot).expect("validated template binds every slot") {
            SlotBinding::Theta(i) => grad_theta.add_column(i, &column),
            SlotBinding::Encoding(j) => grad_enc.add_column(j, &column),
        }
    }
    Ok(ShiftGradients { outputs: template.evaluate(&angles, None), theta: grad_theta, encodings: grad_enc })
}
