use serde::{Deserialize, Serialize};

use super::gate::Gate;
use super::state::StateVector;
use crate::error::{Error, Result};

/// Where a slot's angle comes from when the template is run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotBinding {
    /// Index into the trainable parameter vector.
    Theta(usize),
    /// Index into the encoding-angle vector.
    Encoding(usize),
}

/// An ordered gate list whose rotation angles are read from slots.
///
/// `trainable_slots[i]` receives `theta[i]` and `encoding_slots[j]` receives
/// `encodings[j]`. Several gates may read the same slot; that is how weights
/// are shared across translated copies of a block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitTemplate {
    n_qubits: usize,
    gates: Vec<Gate>,
    trainable_slots: Vec<usize>,
    encoding_slots: Vec<usize>,
}

impl CircuitTemplate {
    pub fn new(
        n_qubits: usize,
        gates: Vec<Gate>,
        trainable_slots: Vec<usize>,
        encoding_slots: Vec<usize>,
    ) -> Result<Self> {
        if !(1..=StateVector::MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::Config(format!("template register size {n_qubits} unsupported")));
        }
        let template = Self { n_qubits, gates, trainable_slots, encoding_slots };
        for gate in &template.gates {
            gate.check(n_qubits)?;
            if let Some(slot) = gate.slot() {
                let bound = template.trainable_slots.iter().filter(|&&s| s == slot).count()
                    + template.encoding_slots.iter().filter(|&&s| s == slot).count();
                if bound != 1 {
                    return Err(Error::Config(format!(
                        "slot {slot} must be bound exactly once, found {bound} bindings"
                    )));
                }
            }
        }
        let mut all: Vec<usize> = template.trainable_slots.iter().chain(&template.encoding_slots).copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("slot bound more than once".into()));
        }
        Ok(template)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn trainable_slots(&self) -> &[usize] {
        &self.trainable_slots
    }

    pub fn encoding_slots(&self) -> &[usize] {
        &self.encoding_slots
    }

    pub fn binding(&self, slot: usize) -> Option<SlotBinding> {
        if let Some(i) = self.trainable_slots.iter().position(|&s| s == slot) {
            return Some(SlotBinding::Theta(i));
        }
        self.encoding_slots.iter().position(|&s| s == slot).map(SlotBinding::Encoding)
    }

    /// Resolves every slot to its angle for the given inputs.
    pub(crate) fn slot_angles(&self, theta: &[f64], encodings: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.trainable_slots.len() {
            return Err(Error::Argument(format!(
                "expected {} trainable angles, got {}",
                self.trainable_slots.len(),
                theta.len()
            )));
        }
        if encodings.len() != self.encoding_slots.len() {
            return Err(Error::Argument(format!(
                "expected {} encoding angles, got {}",
                self.encoding_slots.len(),
                encodings.len()
            )));
        }
        let n_slots = self.trainable_slots.iter().chain(&self.encoding_slots).max().map_or(0, |m| m + 1);
        let mut angles = vec![0.0; n_slots];
        for (&slot, &value) in self.trainable_slots.iter().zip(theta) {
            angles[slot] = value;
        }
        for (&slot, &value) in self.encoding_slots.iter().zip(encodings) {
            angles[slot] = value;
        }
        Ok(angles)
    }

    /// Runs from |0...0>, optionally offsetting the angle of one gate.
    pub(crate) fn evaluate(&self, slot_angles: &[f64], shift: Option<(usize, f64)>) -> Vec<f64> {
        let mut state = StateVector::new(self.n_qubits).expect("validated register size");
        for (idx, gate) in self.gates.iter().enumerate() {
            let mut angle = gate.slot().map_or(0.0, |s| slot_angles[s]);
            if let Some((g, delta)) = shift {
                if g == idx {
                    angle += delta;
                }
            }
            state.apply_unchecked(gate, angle);
        }
        state.expectation_z_all()
    }
}

/// Exact per-qubit <Z> after running `template` from |0...0>.
pub fn run_circuit(template: &CircuitTemplate, theta: &[f64], encodings: &[f64]) -> Result<Vec<f64>> {
    let angles = template.slot_angles(theta, encodings)?;
    Ok(template.evaluate(&angles, None))
}
