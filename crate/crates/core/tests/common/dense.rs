//! Dense complex matrices over at most a handful of qubits. Every gate is
//! built from Pauli products, independently of the strided kernels.

#![allow(dead_code)]

use num_complex::Complex64 as C;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P {
    I,
    X,
    Y,
    Z,
}

fn pauli_entry(p: P, row: usize, col: usize) -> C {
    let (z, o, i) = (C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 1.0));
    match (p, row, col) {
        (P::I, r, c) => if r == c { o } else { z },
        (P::X, r, c) => if r != c { o } else { z },
        (P::Y, 0, 1) => -i,
        (P::Y, 1, 0) => i,
        (P::Y, _, _) => z,
        (P::Z, 0, 0) => o,
        (P::Z, 1, 1) => -o,
        (P::Z, _, _) => z,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub dim: usize,
    pub data: Vec<C>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        let dim = 1 << n;
        Self { dim, data: vec![C::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(n: usize) -> Self {
        pauli(n, &[])
    }

    pub fn at(&self, r: usize, c: usize) -> C {
        self.data[r * self.dim + c]
    }

    pub fn scale(&self, s: C) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { dim: self.dim, data }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.dim;
        let mut data = vec![C::new(0.0, 0.0); d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.at(r, k);
                if a == C::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..d {
                    data[r * d + c] += a * other.at(k, c);
                }
            }
        }
        Self { dim: d, data }
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        (0..self.dim).map(|r| (0..self.dim).map(|c| self.at(r, c) * v[c]).sum()).collect()
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut data = vec![C::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                data[c * d + r] = self.at(r, c).conj();
            }
        }
        Self { dim: d, data }
    }
}

/// Tensor product of single-qubit Paulis; qubit `q` is bit `q` of the index.
pub fn pauli(n: usize, factors: &[(usize, P)]) -> Mat {
    let mut m = Mat::zeros(n);
    let dim = m.dim;
    for r in 0..dim {
        for c in 0..dim {
            let mut v = C::new(1.0, 0.0);
            for q in 0..n {
                let p = factors.iter().find(|f| f.0 == q).map_or(P::I, |f| f.1);
                v *= pauli_entry(p, (r >> q) & 1, (c >> q) & 1);
            }
            m.data[r * dim + c] = v;
        }
    }
    m
}

/// `exp(-i angle P / 2)` for a Pauli product `P`.
pub fn rotation(n: usize, factors: &[(usize, P)], angle: f64) -> Mat {
    let (s, c) = (0.5 * angle).sin_cos();
    Mat::identity(n).scale(C::new(c, 0.0)).add(&pauli(n, factors).scale(C::new(0.0, -s)))
}

pub fn ry(n: usize, q: usize, theta: f64) -> Mat {
    rotation(n, &[(q, P::Y)], theta)
}

pub fn h(n: usize, q: usize) -> Mat {
    pauli(n, &[(q, P::X)]).add(&pauli(n, &[(q, P::Z)])).scale(C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
}

pub fn cnot(n: usize, control: usize, target: usize) -> Mat {
    let half = C::new(0.5, 0.0);
    let id = Mat::identity(n);
    let zc = pauli(n, &[(control, P::Z)]);
    let p0 = id.add(&zc).scale(half);
    let p1 = id.add(&zc.scale(C::new(-1.0, 0.0))).scale(half);
    p0.add(&p1.mul(&pauli(n, &[(target, P::X)])))
}

pub fn cz(n: usize, i: usize, j: usize) -> Mat {
    let half = C::new(0.5, 0.0);
    Mat::identity(n)
        .add(&pauli(n, &[(i, P::Z)]))
        .add(&pauli(n, &[(j, P::Z)]))
        .add(&pauli(n, &[(i, P::Z), (j, P::Z)]).scale(C::new(-1.0, 0.0)))
        .scale(half)
}

/// `exp(-i (theta1 Z_i Y_j + theta0 Y_i Z_j) / 2)`; the generators commute.
pub fn yz(n: usize, i: usize, j: usize, theta0: f64, theta1: f64) -> Mat {
    rotation(n, &[(i, P::Z), (j, P::Y)], theta1).mul(&rotation(n, &[(i, P::Y), (j, P::Z)], theta0))
}

/// Unnormalized `exp(-tau Z_i Z_j)`.
pub fn ite_zz(n: usize, i: usize, j: usize, tau: f64) -> Mat {
    Mat::identity(n)
        .scale(C::new(tau.cosh(), 0.0))
        .add(&pauli(n, &[(i, P::Z), (j, P::Z)]).scale(C::new(-tau.sinh(), 0.0)))
}

/// Unnormalized `exp(-tau Z_q)`.
pub fn ite_z(n: usize, q: usize, tau: f64) -> Mat {
    Mat::identity(n)
        .scale(C::new(tau.cosh(), 0.0))
        .add(&pauli(n, &[(q, P::Z)]).scale(C::new(-tau.sinh(), 0.0)))
}

pub fn complexify(amps: &[f64]) -> Vec<C> {
    amps.iter().map(|&a| C::new(a, 0.0)).collect()
}

pub fn inner(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn expectation(m: &Mat, v: &[C]) -> C {
    inner(v, &m.apply(v))
}

/// Largest `|a_k - b_k|`, requiring the imaginary parts of `a` to vanish.
pub fn max_diff(a: &[C], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, &y)| (x.re - y).abs().max(x.im.abs())).fold(0.0, f64::max)
}

pub fn normalize(v: &[C]) -> Vec<C> {
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}
