//! Test-only oracles, written independently of the library's kernels.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use qunet::qsim::{CircuitTemplate, Gate, SlotBinding};

type Mat = Vec<Vec<C>>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn eye(d: usize) -> Mat {
    (0..d).map(|i| (0..d).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect()).collect()
}

fn kron(a: &Mat, b: &Mat) -> Mat {
    let (da, db) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); da * db]; da * db];
    for ia in 0..da {
        for ja in 0..da {
            for ib in 0..db {
                for jb in 0..db {
                    out[ia * db + ib][ja * db + jb] = a[ia][ja] * b[ib][jb];
                }
            }
        }
    }
    out
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let d = a.len();
    let mut out = vec![vec![c(0.0, 0.0); d]; d];
    for i in 0..d {
        for k in 0..d {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

/// `factors[q]` acts on qubit `q`; qubit 0 is the least significant index bit,
/// so it is the rightmost Kronecker factor.
fn lift(n: usize, factors: &[(usize, Mat)]) -> Mat {
    let mut out = vec![vec![c(1.0, 0.0)]];
    for q in (0..n).rev() {
        let f = factors.iter().find(|(k, _)| *k == q).map_or_else(|| eye(2), |(_, m)| m.clone());
        out = kron(&out, &f);
    }
    out
}

fn controlled(n: usize, control: usize, target: usize, u: Mat) -> Mat {
    let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
    let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
    add(&lift(n, &[(control, p0)]), &lift(n, &[(control, p1), (target, u)]))
}

pub fn gate_matrix(n: usize, gate: &Gate, angle: f64) -> Mat {
    let (co, si) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match *gate {
        Gate::Rx { qubit, .. } => {
            lift(n, &[(qubit, vec![vec![c(co, 0.0), c(0.0, -si)], vec![c(0.0, -si), c(co, 0.0)]])])
        }
        Gate::Ry { qubit, .. } => {
            lift(n, &[(qubit, vec![vec![c(co, 0.0), c(-si, 0.0)], vec![c(si, 0.0), c(co, 0.0)]])])
        }
        Gate::Rz { qubit, .. } => {
            lift(n, &[(qubit, vec![vec![c(co, -si), c(0.0, 0.0)], vec![c(0.0, 0.0), c(co, si)]])])
        }
        Gate::H { qubit } => lift(n, &[(qubit, vec![vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]])]),
        Gate::Cnot { control, target } => {
            controlled(n, control, target, vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]])
        }
        Gate::Cz { control, target } => {
            controlled(n, control, target, vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]])
        }
    }
}

/// `<Z_q>` for every qubit from the product of dense gate unitaries applied
/// to `|0...0>`.
pub fn dense_expectations(template: &CircuitTemplate, theta: &[f64], encodings: &[f64]) -> Vec<f64> {
    let n = template.n_qubits();
    let mut u = eye(1 << n);
    for gate in template.gates() {
        let angle = gate.slot().map_or(0.0, |s| match template.binding(s).expect("bound slot") {
            SlotBinding::Theta(i) => theta[i],
            SlotBinding::Encoding(j) => encodings[j],
        });
        u = matmul(&gate_matrix(n, gate, angle), &u);
    }
    (0..n).map(|q| (0..1 << n).map(|i| u[i][0].norm_sqr() * if (i >> q) & 1 == 1 { -1.0 } else { 1.0 }).sum()).collect()
}

/// Type-7 quantile written out longhand: `h = (n - 1) p`, interpolate between
/// the order statistics around `h`.
pub fn quantile_oracle(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() as f64 - 1.0) * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
