//! Dense statevector simulation for small circuits.
//!
//! Qubit 0 is the least-significant bit of the basis index, so the basis
//! state |q_{n-1} ... q_1 q_0> lives at index `sum_q q_q << q`.

mod circuit;
mod gate;
mod gradient;
mod state;

pub use circuit::{run_circuit, CircuitTemplate, SlotBinding};
pub use gate::{Gate, GateKind};
pub use gradient::{param_shift_grad, Jacobian, ShiftGradients};
pub use state::{new_state, StateVector};
