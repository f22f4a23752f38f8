use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    H,
    Cnot,
    Cz,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }
}

/// One gate of a circuit. Rotations carry the slot their angle is read from
/// when the gate is part of a [`CircuitTemplate`](super::CircuitTemplate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    Rx { qubit: usize, slot: usize },
    Ry { qubit: usize, slot: usize },
    Rz { qubit: usize, slot: usize },
    H { qubit: usize },
    Cnot { control: usize, target: usize },
    Cz { control: usize, target: usize },
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::Rx { .. } => GateKind::Rx,
            Gate::Ry { .. } => GateKind::Ry,
            Gate::Rz { .. } => GateKind::Rz,
            Gate::H { .. } => GateKind::H,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Cz { .. } => GateKind::Cz,
        }
    }

    pub fn slot(&self) -> Option<usize> {
        match *self {
            Gate::Rx { slot, .. } | Gate::Ry { slot, .. } | Gate::Rz { slot, .. } => Some(slot),
            _ => None,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rx { qubit, .. } | Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } | Gate::H { qubit } => {
                vec![qubit]
            }
            Gate::Cnot { control, target } | Gate::Cz { control, target } => vec![control, target],
        }
    }

    pub(crate) fn check(&self, n_qubits: usize) -> Result<()> {
        let qubits = self.qubits();
        if let Some(&q) = qubits.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::Index(format!("{:?} addresses qubit {q} on a {n_qubits}-qubit register", self.kind())));
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(Error::Index(format!("{:?} control and target are both qubit {}", self.kind(), qubits[0])));
        }
        Ok(())
    }
}
