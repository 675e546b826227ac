//! Real-amplitude statevector engine.
//!
//! Every gate used by the ansätze here (H, R_y, CNOT, CZ, the YZ pair gate)
//! and the imaginary-time factor `exp(-tau z_i z_j)` maps real states to real
//! states, so amplitudes are stored as `f64`. Basis index bit `q` is qubit `q`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand_distr::{Binomial, Distribution};

use crate::error::{invalid, Error, Result};
use crate::qubo::{OptimalSet, DEFAULT_QUBIT_CAP};

/// Single-qubit Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Product of at most two single-qubit Paulis on distinct qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliString {
    factors: Vec<(usize, Axis)>,
}

impl PauliString {
    pub fn new(factors: Vec<(usize, Axis)>) -> Result<Self> {
        if factors.len() > 2 {
            return Err(invalid(format!(
                "Pauli strings are limited to 2 factors, got {}",
                factors.len()
            )));
        }
        if factors.len() == 2 && factors[0].0 == factors[1].0 {
            return Err(invalid(format!(
                "Pauli factors must act on distinct qubits, got {} twice",
                factors[0].0
            )));
        }
        Ok(Self { factors })
    }

    pub fn identity() -> Self {
        Self { factors: vec![] }
    }

    pub fn single(q: usize, axis: Axis) -> Self {
        Self {
            factors: vec![(q, axis)],
        }
    }

    pub fn pair(i: usize, a: Axis, j: usize, b: Axis) -> Result<Self> {
        Self::new(vec![(i, a), (j, b)])
    }

    pub fn factors(&self) -> &[(usize, Axis)] {
        &self.factors
    }

    fn y_count(&self) -> usize {
        self.factors.iter().filter(|f| f.1 == Axis::Y).count()
    }
}

/// A normalized real statevector over `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    n: usize,
    amps: Vec<f64>,
}

fn check_size(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::ResourceLimit {
            what: "statevector",
            requested: n,
            cap,
        });
    }
    Ok(())
}

impl State {
    /// `|+>^n`.
    pub fn plus(n: usize) -> Result<Self> {
        Self::plus_with_cap(n, DEFAULT_QUBIT_CAP)
    }

    pub fn plus_with_cap(n: usize, cap: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("need at least 2 qubits, got {n}")));
        }
        check_size(n, cap)?;
        let dim = 1usize << n;
        Ok(Self {
            n,
            amps: vec![(dim as f64).sqrt().recip(); dim],
        })
    }

    /// Computational basis state `|k>`.
    pub fn basis(n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("need at least 1 qubit"));
        }
        check_size(n, DEFAULT_QUBIT_CAP)?;
        if k >> n != 0 {
            return Err(invalid(format!("basis index {k} out of range for {n} qubits")));
        }
        let mut amps = vec![0.0; 1 << n];
        amps[k] = 1.0;
        Ok(Self { n, amps })
    }

    /// Wraps arbitrary amplitudes, normalizing them.
    pub fn from_amplitudes(amps: Vec<f64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(invalid(format!("amplitude count {len} is not a power of two >= 2")));
        }
        let n = len.trailing_zeros() as usize;
        check_size(n, DEFAULT_QUBIT_CAP)?;
        let mut s = Self { n, amps };
        let norm = s.norm_sqr();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(invalid("amplitudes must have a finite, non-zero norm"));
        }
        s.scale(norm.sqrt().recip());
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        pairwise_sum(&self.amps, |a| a * a)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a * a).collect()
    }

    /// Resets to `|+>^n` without reallocating.
    pub fn reset_plus(&mut self) {
        let v = (self.dim() as f64).sqrt().recip();
        self.amps.fill(v);
    }

    fn scale(&mut self, factor: f64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(invalid(format!("qubit {q} out of range for {} qubits", self.n)));
        }
        Ok(())
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(invalid(format!("two-qubit operation needs distinct qubits, got {i} twice")));
        }
        Ok(())
    }

    /// Applies `f(a0, a1)` to every amplitude pair differing in bit `q`.
    #[inline]
    fn for_pairs(&mut self, q: usize, mut f: impl FnMut(&mut f64, &mut f64)) {
        let stride = 1usize << q;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a0, a1);
            }
        }
    }

    /// Applies `f` to each group of four amplitudes `(00, 01, 10, 11)` where
    /// the first label bit is qubit `i` and the second is qubit `j`.
    #[inline]
    fn for_quads(&mut self, i: usize, j: usize, mut f: impl FnMut(&mut [f64; 4])) {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let bi = 1usize << i;
        let bj = 1usize << j;
        let (lo_len, hi_len) = (1usize << lo, 1usize << hi);
        let dim = self.amps.len();
        let amps = &mut self.amps;
        let mut quad = [0.0; 4];
        // bases are the indices with both bits clear
        for outer in (0..dim).step_by(hi_len << 1) {
            for mid in (outer..outer + hi_len).step_by(lo_len << 1) {
                for base in mid..mid + lo_len {
                    let idx = [base, base | bj, base | bi, base | bi | bj];
                    for (slot, &k) in quad.iter_mut().zip(&idx) {
                        *slot = amps[k];
                    }
                    f(&mut quad);
                    for (slot, &k) in quad.iter().zip(&idx) {
                        amps[k] = *slot;
                    }
                }
            }
        }
    }

    /// `R_y(theta) = exp(-i theta Y / 2)`.
    pub fn apply_ry(&mut self, q: usize, theta: f64) -> Result<()> {
        self.check_qubit(q)?;
        let (s, c) = (0.5 * theta).sin_cos();
        self.for_pairs(q, |a0, a1| {
            let (x, y) = (*a0, *a1);
            *a0 = c * x - s * y;
            *a1 = s * x + c * y;
        });
        Ok(())
    }

    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        self.for_pairs(q, |a0, a1| {
            let (x, y) = (*a0, *a1);
            *a0 = r * (x + y);
            *a1 = r * (x - y);
        });
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_pair(control, target)?;
        self.for_quads(control, target, |g| g.swap(2, 3));
        Ok(())
    }

    pub fn apply_cz(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_pair(i, j)?;
        self.for_quads(i, j, |g| g[3] = -g[3]);
        Ok(())
    }

    /// `exp(-i (theta1 Z_i Y_j + theta0 Y_i Z_j) / 2)`.
    ///
    /// On the subspace where `Z_j = z`, the `theta0` factor is `R_y(z theta0)`
    /// on qubit `i`; likewise the `theta1` factor is `R_y(z_i theta1)` on `j`.
    /// The two generators commute; the `theta0` factor is applied first.
    pub fn apply_yz_pair(&mut self, i: usize, j: usize, theta0: f64, theta1: f64) -> Result<()> {
        self.check_pair(i, j)?;
        let (s0, c0) = (0.5 * theta0).sin_cos();
        let (s1, c1) = (0.5 * theta1).sin_cos();
        self.for_quads(i, j, |g| {
            // theta0: rotate bit i; sign +1 where bit j = 0, -1 where bit j = 1.
            let (a00, a10) = (g[0], g[2]);
            g[0] = c0 * a00 - s0 * a10;
            g[2] = s0 * a00 + c0 * a10;
            let (a01, a11) = (g[1], g[3]);
            g[1] = c0 * a01 + s0 * a11;
            g[3] = -s0 * a01 + c0 * a11;
            // theta1: rotate bit j; sign +1 where bit i = 0, -1 where bit i = 1.
            let (a00, a01) = (g[0], g[1]);
            g[0] = c1 * a00 - s1 * a01;
            g[1] = s1 * a00 + c1 * a01;
            let (a10, a11) = (g[2], g[3]);
            g[2] = c1 * a10 + s1 * a11;
            g[3] = -s1 * a10 + c1 * a11;
        });
        Ok(())
    }

    /// Same gate with the two commuting factors applied in the opposite order.
    pub fn apply_yz_pair_reversed(
        &mut self,
        i: usize,
        j: usize,
        theta0: f64,
        theta1: f64,
    ) -> Result<()> {
        self.apply_yz_pair(i, j, 0.0, theta1)?;
        self.apply_yz_pair(i, j, theta0, 0.0)
    }

    /// Multiplies every amplitude by `exp(-tau_tilde z_i z_j)` and renormalizes.
    pub fn apply_ite_zz(&mut self, i: usize, j: usize, tau_tilde: f64) -> Result<()> {
        self.check_pair(i, j)?;
        let aligned = (-tau_tilde).exp();
        let anti = tau_tilde.exp();
        self.for_quads(i, j, |g| {
            g[0] *= aligned;
            g[1] *= anti;
            g[2] *= anti;
            g[3] *= aligned;
        });
        self.renormalize()
    }

    /// Multiplies every amplitude by `exp(-tau_h z_q)` and renormalizes.
    pub fn apply_ite_z(&mut self, q: usize, tau_h: f64) -> Result<()> {
        self.check_qubit(q)?;
        let (up, down) = ((-tau_h).exp(), tau_h.exp());
        self.for_pairs(q, |a0, a1| {
            *a0 *= up;
            *a1 *= down;
        });
        self.renormalize()
    }

    fn renormalize(&mut self) -> Result<()> {
        let norm = self.norm_sqr();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(invalid("imaginary-time factor underflowed or overflowed the state norm"));
        }
        self.scale(norm.sqrt().recip());
        Ok(())
    }

    /// Exact `<psi|P|psi>`. Strings with an odd number of `Y` factors are
    /// purely imaginary operators and have zero expectation on real states.
    pub fn expect_pauli(&self, p: &PauliString) -> Result<f64> {
        for &(q, _) in p.factors() {
            self.check_qubit(q)?;
        }
        if p.y_count() % 2 == 1 {
            return Ok(0.0);
        }
        let mut flip = 0usize;
        let mut zmask = 0usize;
        for &(q, axis) in p.factors() {
            match axis {
                Axis::X => flip |= 1 << q,
                Axis::Y => {
                    flip |= 1 << q;
                    zmask |= 1 << q;
                }
                Axis::Z => zmask |= 1 << q,
            }
        }
        // Y|b> = i z_b |1-b>; two Y factors contribute i^2 = -1.
        let global = if p.y_count() == 2 { -1.0 } else { 1.0 };
        let amps = &self.amps;
        let sum = pairwise_sum_indexed(amps.len(), |k| {
            let sign = if (k & zmask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            amps[k ^ flip] * sign * amps[k]
        });
        Ok(global * sum)
    }

    /// Multinomial sample of `shots` computational-basis measurements.
    pub fn sample_counts<R: rand::Rng + ?Sized>(
        &self,
        shots: u64,
        rng: &mut R,
    ) -> Result<BTreeMap<usize, u64>> {
        if shots == 0 {
            return Err(invalid("shots must be at least 1"));
        }
        let cumulative = self.cumulative_probabilities();
        Ok(sample_from_cumulative(&cumulative, shots, rng))
    }

    pub fn cumulative_probabilities(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.amps
            .iter()
            .map(|a| {
                acc += a * a;
                acc
            })
            .collect()
    }

    /// Finite-shot estimate of `<P>`: the `+1` outcome count is drawn from
    /// `Binomial(shots, (1 + <P>) / 2)`, which is the exact outcome
    /// distribution of measuring `P` in its eigenbasis.
    pub fn shot_pauli_estimate<R: rand::Rng + ?Sized>(
        &self,
        p: &PauliString,
        shots: u64,
        rng: &mut R,
    ) -> Result<f64> {
        if shots == 0 {
            return Err(invalid("shots must be at least 1"));
        }
        if p.factors().is_empty() {
            return Err(invalid("cannot estimate the identity string"));
        }
        let exact = self.expect_pauli(p)?;
        let p_plus = (0.5 * (1.0 + exact)).clamp(0.0, 1.0);
        let plus = Binomial::new(shots, p_plus)
            .map_err(|e| invalid(format!("binomial draw: {e}")))?
            .sample(rng);
        Ok((2.0 * plus as f64 - shots as f64) / shots as f64)
    }

    /// Probability mass on the optimal basis states.
    pub fn fidelity(&self, optimal: &OptimalSet) -> Result<f64> {
        if optimal.n != self.n {
            return Err(invalid(format!(
                "optimal set is for {} qubits, state has {}",
                optimal.n, self.n
            )));
        }
        Ok(optimal.states.iter().map(|&k| self.amps[k] * self.amps[k]).sum())
    }

    /// Little-endian dump: `n` as u64 followed by the `2^n` amplitudes.
    pub fn write_le(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for a in &self.amps {
            w.write_all(&a.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_le(mut r: impl Read) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        if n == 0 || n > DEFAULT_QUBIT_CAP {
            return Err(invalid(format!("dump declares {n} qubits")));
        }
        let mut amps = Vec::with_capacity(1 << n);
        for _ in 0..1usize << n {
            r.read_exact(&mut word)?;
            amps.push(f64::from_le_bytes(word));
        }
        Ok(Self { n, amps })
    }
}

/// Draws `shots` indices from a cumulative distribution by inverse transform.
pub fn sample_from_cumulative<R: rand::Rng + ?Sized>(
    cumulative: &[f64],
    shots: u64,
    rng: &mut R,
) -> BTreeMap<usize, u64> {
    let total = *cumulative.last().expect("non-empty distribution");
    let last = cumulative.len() - 1;
    let mut draws: Vec<f64> = (0..shots).map(|_| rng.random::<f64>() * total).collect();
    draws.sort_unstable_by(f64::total_cmp);
    // one merge pass: the first k with cumulative[k] > u, as partition_point would give
    let mut counts = BTreeMap::new();
    let mut k = 0;
    for u in draws {
        while k < last && cumulative[k] <= u {
            k += 1;
        }
        *counts.entry(k).or_insert(0) += 1;
    }
    counts
}

const PAIRWISE_BLOCK: usize = 128;

/// Pairwise (tree) summation of `f(x)` over a slice.
pub fn pairwise_sum(xs: &[f64], f: impl Fn(f64) -> f64 + Copy) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().map(|&x| f(x)).sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid], f) + pairwise_sum(&xs[mid..], f)
}

fn pairwise_sum_indexed(len: usize, f: impl Fn(usize) -> f64 + Copy) -> f64 {
    fn go(lo: usize, hi: usize, f: impl Fn(usize) -> f64 + Copy) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            return (lo..hi).map(f).sum();
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, len, f)
}
