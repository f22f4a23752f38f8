use num_complex::Complex64;

use super::gate::Gate;
use crate::error::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Amplitudes of an `n_qubits` register, `2^n_qubits` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

/// |0...0> on `n_qubits` qubits.
pub fn new_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::new(n_qubits)
}

impl StateVector {
    pub const MAX_QUBITS: usize = 12;

    pub fn new(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    /// Computational basis state with the given index.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if !(1..=Self::MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::Config(format!("register size must be 1..={}, got {n_qubits}", Self::MAX_QUBITS)));
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Index(format!("basis index {index} out of range for {n_qubits} qubits")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies `gate` in place. `angle` must be given for rotations and only
    /// for rotations.
    pub fn apply_gate(&mut self, gate: &Gate, angle: Option<f64>) -> Result<()> {
        gate.check(self.n_qubits)?;
        match (gate.kind().is_rotation(), angle) {
            (true, None) => {
                return Err(Error::Argument(format!("{:?} needs an angle", gate.kind())));
            }
            (false, Some(_)) => {
                return Err(Error::Argument(format!("{:?} takes no angle", gate.kind())));
            }
            _ => {}
        }
        self.apply_unchecked(gate, angle.unwrap_or(0.0));
        Ok(())
    }

    /// Gate application for pre-validated templates.
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate, angle: f64) {
        let i = Complex64::i();
        match *gate {
            Gate::Rx { qubit, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let (c, mis) = (Complex64::new(c, 0.0), -i * s);
                self.apply_single(qubit, [[c, mis], [mis, c]]);
            }
            Gate::Ry { qubit, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                self.apply_single(
                    qubit,
                    [
                        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                    ],
                );
            }
            Gate::Rz { qubit, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let zero = Complex64::new(0.0, 0.0);
                self.apply_single(qubit, [[Complex64::new(c, -s), zero], [zero, Complex64::new(c, s)]]);
            }
            Gate::H { qubit } => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                self.apply_single(qubit, [[h, h], [h, -h]]);
            }
            Gate::Cnot { control, target } => {
                let (cbit, tbit) = (1usize << control, 1usize << target);
                for idx in 0..self.amplitudes.len() {
                    if idx & cbit != 0 && idx & tbit == 0 {
                        self.amplitudes.swap(idx, idx | tbit);
                    }
                }
            }
            Gate::Cz { control, target } => {
                let mask = (1usize << control) | (1usize << target);
                for amp in self.amplitudes.iter_mut().enumerate().filter(|(idx, _)| idx & mask == mask).map(|(_, a)| a)
                {
                    *amp = -*amp;
                }
            }
        }
    }

    // Pairs amplitudes whose indices differ only in bit `qubit`.
    fn apply_single(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let stride = 1usize << qubit;
        for block in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = m[0][0] * x0 + m[0][1] * x1;
                *a1 = m[1][0] * x0 + m[1][1] * x1;
            }
        }
    }

    /// <Z> on `qubit`: +|a|^2 where the qubit's bit is 0, -|a|^2 where it is 1.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::Index(format!("qubit {qubit} out of range for {} qubits", self.n_qubits)));
        }
        Ok(self.expectation_z_unchecked(qubit))
    }

    pub(crate) fn expectation_z_unchecked(&self, qubit: usize) -> f64 {
        let bit = 1usize << qubit;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(idx, a)| if idx & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    pub(crate) fn expectation_z_all(&self) -> Vec<f64> {
        (0..self.n_qubits).map(|q| self.expectation_z_unchecked(q)).collect()
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn amps_re(state: &StateVector) -> Vec<f64> {
        state.amplitudes().iter().map(|a| a.re).collect()
    }

    #[test]
    fn new_state_is_all_zeros_ket() {
        assert_eq!(amps_re(&new_state(1).unwrap()), vec![1.0, 0.0]);
        assert_eq!(amps_re(&new_state(2).unwrap()), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(new_state(13), Err(Error::Config(_))));
        assert!(matches!(new_state(0), Err(Error::Config(_))));
    }

    #[test]
    fn ry_half_pi_gives_equal_superposition() {
        let mut s = new_state(1).unwrap();
        s.apply_gate(&Gate::Ry { qubit: 0, slot: 0 }, Some(FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amplitudes()[1].re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.expectation_z(0).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        // |10> in (q0 q1) order: control qubit 0 is 1, index 0b01.
        let mut s = StateVector::basis(2, 0b01).unwrap();
        s.apply_gate(&Gate::Cnot { control: 0, target: 1 }, None).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b11).unwrap());
    }

    #[test]
    fn cz_negates_11() {
        let mut s = StateVector::basis(2, 0b11).unwrap();
        s.apply_gate(&Gate::Cz { control: 0, target: 1 }, None).unwrap();
        assert_eq!(s.amplitudes()[3].re, -1.0);
    }

    #[test]
    fn expectation_examples() {
        let s = new_state(1).unwrap();
        assert_eq!(s.expectation_z(0).unwrap(), 1.0);
        let mut s = new_state(1).unwrap();
        s.apply_gate(&Gate::Ry { qubit: 0, slot: 0 }, Some(PI)).unwrap();
        assert_abs_diff_eq!(s.expectation_z(0).unwrap(), -1.0, epsilon = 1e-15);
        assert!(matches!(s.expectation_z(1), Err(Error::Index(_))));
    }

    #[test]
    fn malformed_gates_are_rejected() {
        let mut s = new_state(2).unwrap();
        assert!(matches!(s.apply_gate(&Gate::H { qubit: 2 }, None), Err(Error::Index(_))));
        assert!(matches!(s.apply_gate(&Gate::Cz { control: 1, target: 1 }, None), Err(Error::Index(_))));
        assert!(matches!(s.apply_gate(&Gate::Rx { qubit: 0, slot: 0 }, None), Err(Error::Argument(_))));
        assert!(matches!(s.apply_gate(&Gate::H { qubit: 0 }, Some(1.0)), Err(Error::Argument(_))));
    }

    fn arb_gate(n: usize) -> impl Strategy<Value = (Gate, f64)> {
        let q = 0..n;
        (0..6u8, q.clone(), q, -10.0..10.0f64).prop_filter_map("distinct pair", move |(k, a, b, t)| {
            let gate = match k {
                0 => Gate::Rx { qubit: a, slot: 0 },
                1 => Gate::Ry { qubit: a, slot: 0 },
                2 => Gate::Rz { qubit: a, slot: 0 },
                3 => Gate::H { qubit: a },
                4 if a != b => Gate::Cnot { control: a, target: b },
                5 if a != b => Gate::Cz { control: a, target: b },
                _ => return None,
            };
            Some((gate, t))
        })
    }

    proptest! {
        #[test]
        fn gates_preserve_norm(gates in proptest::collection::vec(arb_gate(4), 1..60)) {
            let mut s = new_state(4).unwrap();
            for (g, t) in &gates {
                let angle = g.kind().is_rotation().then_some(*t);
                s.apply_gate(g, angle).unwrap();
                prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            }
            for q in 0..4 {
                let z = s.expectation_z(q).unwrap();
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&z));
            }
        }
    }
}
