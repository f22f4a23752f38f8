use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{CircuitTemplate, Gate};

/// Trainable angles per layer, independent of register size.
pub const THETA_LEN: usize = 4;

/// How input values enter the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncodingBasis {
    /// `RY(angle)` on |0>.
    Y,
    /// `H` then `RZ(angle)`; with `closing_h` an extra `H` follows.
    X { closing_h: bool },
}

impl EncodingBasis {
    pub fn for_layer(layer_index: usize) -> Self {
        if layer_index == 1 {
            EncodingBasis::Y
        } else {
            EncodingBasis::X { closing_h: false }
        }
    }
}

#[derive(Clone, Copy)]
enum Block {
    // RX(theta1) (x) RZ(theta2), then CNOT.
    U1,
    // RX(theta3) (x) RY(theta4), then CNOT.
    U2,
}

impl Block {
    fn push(self, gates: &mut Vec<Gate>, a: usize, b: usize) {
        match self {
            Block::U1 => {
                gates.push(Gate::Rx { qubit: a, slot: 0 });
                gates.push(Gate::Rz { qubit: b, slot: 1 });
            }
            Block::U2 => {
                gates.push(Gate::Rx { qubit: a, slot: 2 });
                gates.push(Gate::Ry { qubit: b, slot: 3 });
            }
        }
        gates.push(Gate::Cnot { control: a, target: b });
    }
}

// Even brick (c0,c1),(c2,c3),... then odd brick (c1,c2),(c3,c4),...; no wrap.
fn brick_pairs(chain: &[usize]) -> Vec<(usize, usize)> {
    let even = chain.chunks_exact(2).map(|p| (p[0], p[1]));
    let odd = chain[1..].chunks_exact(2).map(|p| (p[0], p[1]));
    even.chain(odd).collect()
}

/// The QuFeX circuit for a 4- or 8-qubit register.
///
/// Layout: encoding on every qubit; first block over the brick pairs of the
/// full chain; CZ pooling from each odd qubit onto its lower even neighbour
/// (both kept); second block over the brick pairs of the even sub-chain.
/// Layer 1 uses U1 then U2, layer 2 swaps them. Slots 0..4 hold theta, slots
/// 4.. hold the per-qubit encoding angles.
pub fn build_template(n_qubits: usize, layer_index: usize) -> Result<CircuitTemplate> {
    build_template_with(n_qubits, layer_index, EncodingBasis::for_layer(layer_index))
}

pub fn build_template_with(n_qubits: usize, layer_index: usize, basis: EncodingBasis) -> Result<CircuitTemplate> {
    if !matches!(n_qubits, 4 | 8) {
        return Err(Error::Config(format!("QuFeX supports 4 or 8 qubits, got {n_qubits}")));
    }
    let (first, second) = match layer_index {
        1 => (Block::U1, Block::U2),
        2 => (Block::U2, Block::U1),
        _ => return Err(Error::Config(format!("QuFeX layer index must be 1 or 2, got {layer_index}"))),
    };

    let mut gates = Vec::new();
    for q in 0..n_qubits {
        let slot = THETA_LEN + q;
        match basis {
            EncodingBasis::Y => gates.push(Gate::Ry { qubit: q, slot }),
            EncodingBasis::X { closing_h } => {
                gates.push(Gate::H { qubit: q });
                gates.push(Gate::Rz { qubit: q, slot });
                if closing_h {
                    gates.push(Gate::H { qubit: q });
                }
            }
        }
    }

    let chain: Vec<usize> = (0..n_qubits).collect();
    for (a, b) in brick_pairs(&chain) {
        first.push(&mut gates, a, b);
    }
    for q in (1..n_qubits).step_by(2) {
        gates.push(Gate::Cz { control: q, target: q - 1 });
    }
    let evens: Vec<usize> = (0..n_qubits).step_by(2).collect();
    for (a, b) in brick_pairs(&evens) {
        second.push(&mut gates, a, b);
    }

    CircuitTemplate::new(n_qubits, gates, (0..THETA_LEN).collect(), (THETA_LEN..THETA_LEN + n_qubits).collect())
}
