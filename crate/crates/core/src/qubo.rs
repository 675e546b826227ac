//! Random QUBO instances in Ising form, energies, and the exhaustive optimum.
//!
//! Spin convention: bit `i` of a basis index is qubit `i`, and its spin is
//! `z_i = 1 - 2 * bit_i`, so `|0>` carries `z = +1` and `|1>` carries `z = -1`.
//! The energy of basis state `k` is `sum_i h_i z_i + sum_{i<j} J_ij z_i z_j`.
//! The constant offset of the binary-to-spin substitution is not stored.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;

/// Largest qubit count for which dense tables and states are allocated by default.
pub const DEFAULT_QUBIT_CAP: usize = 26;

/// Decimal places kept by the instance generator.
pub const COEFFICIENT_DECIMALS: u32 = 4;

const SCALE: f64 = 1e4;

pub const INSTANCE_FORMAT_VERSION: u32 = 1;

/// One coupling `J_ij` with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// An Ising-form QUBO instance.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboInstance {
    n: usize,
    seed: u64,
    h: Vec<f64>,
    couplings: Vec<Coupling>,
    // Coefficients as integer multiples of 1e-4 when every coefficient is one.
    quantized: Option<Quantized>,
}

#[derive(Debug, Clone, PartialEq)]
struct Quantized {
    h: Vec<i64>,
    j: Vec<i64>,
}

impl QuboInstance {
    /// Builds an instance from explicit coefficients. Couplings are sorted into
    /// lexicographic order; duplicates and `i >= j` pairs are rejected.
    pub fn new(n: usize, seed: u64, h: Vec<f64>, couplings: Vec<Coupling>) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("instance needs at least 2 vertices, got {n}")));
        }
        if h.len() != n {
            return Err(invalid(format!("expected {n} linear terms, got {}", h.len())));
        }
        if let Some(v) = h.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite linear coefficient {v}")));
        }
        let mut couplings = couplings;
        for c in &couplings {
            if c.i >= c.j || c.j >= n {
                return Err(invalid(format!(
                    "coupling ({}, {}) must satisfy i < j < {n}",
                    c.i, c.j
                )));
            }
            if !c.value.is_finite() {
                return Err(invalid(format!("non-finite coupling on ({}, {})", c.i, c.j)));
            }
        }
        couplings.sort_by_key(|c| (c.i, c.j));
        if let Some(w) = couplings.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(invalid(format!("duplicate coupling ({}, {})", w[0].i, w[0].j)));
        }
        let quantized = quantize(&h, &couplings);
        Ok(Self {
            n,
            seed,
            h,
            couplings,
            quantized,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Couplings in lexicographic `(i, j)` order.
    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.couplings.iter().map(|c| (c.i, c.j))
    }

    /// `J_ij` for an unordered pair, zero when the pair carries no coupling.
    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        self.couplings
            .binary_search_by_key(&(i, j), |c| (c.i, c.j))
            .map(|k| self.couplings[k].value)
            .unwrap_or(0.0)
    }

    /// True when every coefficient is an exact multiple of 1e-4, in which case
    /// energies are accumulated in integers and ties are exact.
    pub fn is_quantized(&self) -> bool {
        self.quantized.is_some()
    }

    /// Same instance with all linear terms negated.
    pub fn with_negated_fields(&self) -> Self {
        let h = self.h.iter().map(|v| -v).collect();
        Self::new(self.n, self.seed, h, self.couplings.clone()).expect("negation keeps validity")
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            format_version: Some(INSTANCE_FORMAT_VERSION),
            n: self.n,
            seed: self.seed,
            coefficient_precision: Some(format!("{COEFFICIENT_DECIMALS} decimal places")),
            h: self.h.clone(),
            j: self.couplings.iter().map(|c| (c.i, c.j, c.value)).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if let Some(v) = file.format_version {
            if v > INSTANCE_FORMAT_VERSION {
                return Err(invalid(format!("unsupported instance format_version {v}")));
            }
        }
        let couplings = file
            .j
            .into_iter()
            .map(|(i, j, value)| Coupling { i, j, value })
            .collect();
        Self::new(file.n, file.seed, file.h, couplings)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// On-disk instance layout.
#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format_version: Option<u32>,
    n: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coefficient_precision: Option<String>,
    h: Vec<f64>,
    j: Vec<(usize, usize, f64)>,
}

fn quantize(h: &[f64], couplings: &[Coupling]) -> Option<Quantized> {
    fn q(v: f64) -> Option<i64> {
        let scaled = v * SCALE;
        let r = scaled.round();
        ((scaled - r).abs() < 1e-6 && r.abs() < 1e15).then_some(r as i64)
    }
    let h = h.iter().map(|&v| q(v)).collect::<Option<Vec<_>>>()?;
    let j = couplings.iter().map(|c| q(c.value)).collect::<Option<Vec<_>>>()?;
    Some(Quantized { h, j })
}

/// Rounds to four decimal places, ties away from zero.
pub fn round_coefficient(v: f64) -> f64 {
    (v * SCALE).round() / SCALE
}

/// Complete-graph instance with coefficients uniform on [-1, 1], rounded to
/// four decimals. Draw order: `h_0..h_{n-1}`, then couplings in
/// lexicographic pair order.
pub fn generate_instance(n: usize, seed: u64) -> Result<QuboInstance> {
    if n < 2 {
        return Err(invalid(format!("instance needs at least 2 vertices, got {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut draw = || round_coefficient(rng.random_range(-1.0..=1.0));
    let h: Vec<f64> = (0..n).map(|_| draw()).collect();
    let mut couplings = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            couplings.push(Coupling { i, j, value: draw() });
        }
    }
    QuboInstance::new(n, seed, h, couplings)
}

#[inline]
pub fn spin(basis_index: usize, qubit: usize) -> f64 {
    1.0 - 2.0 * ((basis_index >> qubit) & 1) as f64
}

/// Energy of one computational basis state.
pub fn energy(instance: &QuboInstance, basis_index: usize) -> Result<f64> {
    let n = instance.n;
    if n >= usize::BITS as usize || basis_index >> n != 0 {
        return Err(invalid(format!(
            "basis index {basis_index} out of range for {n} qubits"
        )));
    }
    let z = |q: usize| 1 - 2 * ((basis_index >> q) & 1) as i64;
    if let Some(qz) = &instance.quantized {
        let mut acc: i64 = qz.h.iter().enumerate().map(|(i, &h)| h * z(i)).sum();
        for (c, &jv) in instance.couplings.iter().zip(&qz.j) {
            acc += jv * z(c.i) * z(c.j);
        }
        return Ok(acc as f64 / SCALE);
    }
    let mut acc: f64 = instance
        .h
        .iter()
        .enumerate()
        .map(|(i, &h)| h * z(i) as f64)
        .sum();
    for c in &instance.couplings {
        acc += c.value * (z(c.i) * z(c.j)) as f64;
    }
    Ok(acc)
}

fn check_cap(n: usize, cap: usize, what: &'static str) -> Result<()> {
    if n > cap {
        return Err(Error::ResourceLimit {
            what,
            requested: n,
            cap,
        });
    }
    Ok(())
}

/// Energies of all `2^n` basis states plus their ascending-energy order.
#[derive(Debug, Clone)]
pub struct EnergyTable {
    n: usize,
    energies: Vec<f64>,
    order: Vec<u32>,
}

impl EnergyTable {
    pub fn new(instance: &QuboInstance) -> Result<Self> {
        Self::with_cap(instance, DEFAULT_QUBIT_CAP)
    }

    pub fn with_cap(instance: &QuboInstance, cap: usize) -> Result<Self> {
        check_cap(instance.n, cap, "energy table")?;
        let energies = match &instance.quantized {
            Some(q) => {
                let int = incremental_table(instance, &q.h, |c_idx| q.j[c_idx]);
                int.into_iter().map(|e| e as f64 / SCALE).collect()
            }
            None => incremental_table(instance, &instance.h, |c_idx| {
                instance.couplings[c_idx].value
            }),
        };
        let mut order: Vec<u32> = (0..energies.len() as u32).collect();
        order.sort_by(|&a, &b| energies[a as usize].total_cmp(&energies[b as usize]));
        Ok(Self {
            n: instance.n,
            energies,
            order,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Basis indices sorted by ascending energy; ties keep index order.
    pub fn ascending(&self) -> &[u32] {
        &self.order
    }

    pub fn min_energy(&self) -> f64 {
        self.energies[self.order[0] as usize]
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

impl std::ops::Index<usize> for EnergyTable {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.energies[k]
    }
}

/// Builds the table by flipping the highest set bit: with `b` the top bit of
/// `k` and `k' = k ^ (1 << b)`, `E(k) = E(k') - 2 (h_b + sum_j J_bj z_j(k'))`.
/// Every bit above `b` is zero in `k'`, so those spins are `+1`.
fn incremental_table<T>(instance: &QuboInstance, h: &[T], jv: impl Fn(usize) -> T) -> Vec<T>
where
    T: Copy
        + Default
        + std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>
        + std::iter::Sum<T>,
{
    let n = instance.n;
    // Dense symmetric coupling matrix.
    let mut dense = vec![T::default(); n * n];
    for (idx, c) in instance.couplings.iter().enumerate() {
        dense[c.i * n + c.j] = jv(idx);
        dense[c.j * n + c.i] = jv(idx);
    }
    let upper: Vec<T> = (0..n)
        .map(|b| (b + 1..n).map(|j| dense[b * n + j]).sum())
        .collect();
    let mut table = vec![T::default(); 1 << n];
    table[0] = h.iter().copied().sum::<T>() + dense_upper_sum(&dense, n);
    for b in 0..n {
        let base = 1usize << b;
        let row = &dense[b * n..b * n + b];
        for low in 0..base {
            let mut field = h[b] + upper[b];
            for (j, &jbj) in row.iter().enumerate() {
                field = if (low >> j) & 1 == 0 { field + jbj } else { field - jbj };
            }
            table[base | low] = table[low] - (field + field);
        }
    }
    table
}

fn dense_upper_sum<T>(dense: &[T], n: usize) -> T
where
    T: Copy + std::iter::Sum<T>,
{
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| dense[i * n + j])
        .sum()
}

/// Exact minimum energy together with every basis state attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSet {
    pub n: usize,
    pub min_energy: f64,
    pub states: Vec<usize>,
}

impl OptimalSet {
    pub fn contains(&self, k: usize) -> bool {
        self.states.binary_search(&k).is_ok()
    }
}

/// Exhaustive scan returning the minimum and all of its arg-minima.
pub fn brute_force_solve(instance: &QuboInstance) -> Result<OptimalSet> {
    let table = EnergyTable::new(instance)?;
    Ok(optimal_set(&table))
}

/// Optimal set read off a precomputed table.
pub fn optimal_set(table: &EnergyTable) -> OptimalSet {
    let min_energy = table.min_energy();
    let mut states: Vec<usize> = table
        .ascending()
        .iter()
        .map(|&k| k as usize)
        .take_while(|&k| table[k] == min_energy)
        .collect();
    states.sort_unstable();
    OptimalSet {
        n: table.n(),
        min_energy,
        states,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_qubit() -> QuboInstance {
        QuboInstance::new(
            2,
            0,
            vec![0.5, -0.3],
            vec![Coupling {
                i: 0,
                j: 1,
                value: 0.2,
            }],
        )
        .unwrap()
    }

    #[test]
    fn two_qubit_energies_match_hand_enumeration() {
        let inst = two_qubit();
        // |q1 q0>: index 0 = |00>, 1 = bit0 set, 2 = bit1 set, 3 = both.
        let expected = [0.4, -1.0, 0.6, 0.0];
        for (k, e) in expected.iter().enumerate() {
            assert!((energy(&inst, k).unwrap() - e).abs() < 1e-12, "k={k}");
        }
        let table = EnergyTable::new(&inst).unwrap();
        assert_eq!(table.len(), 4);
        for (k, e) in expected.iter().enumerate() {
            assert!((table[k] - e).abs() < 1e-12);
        }
        let opt = brute_force_solve(&inst).unwrap();
        assert_eq!(opt.states, vec![1]);
        assert!((opt.min_energy + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_hamiltonian_is_fully_degenerate() {
        let inst = QuboInstance::new(
            3,
            0,
            vec![0.0; 3],
            vec![
                Coupling { i: 0, j: 1, value: 0.0 },
                Coupling { i: 0, j: 2, value: 0.0 },
                Coupling { i: 1, j: 2, value: 0.0 },
            ],
        )
        .unwrap();
        for k in 0..8 {
            assert_eq!(energy(&inst, k).unwrap(), 0.0);
        }
        let opt = brute_force_solve(&inst).unwrap();
        assert_eq!(opt.min_energy, 0.0);
        assert_eq!(opt.states, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn generator_shape_and_precision() {
        let inst = generate_instance(2, 11).unwrap();
        assert_eq!(inst.h().len(), 2);
        assert_eq!(inst.couplings().len(), 1);
        let inst = generate_instance(12, 11).unwrap();
        assert_eq!(inst.h().len(), 12);
        assert_eq!(inst.couplings().len(), 66);
        assert!(inst.is_quantized());
        let all = inst.h().iter().chain(inst.couplings().iter().map(|c| &c.value));
        for &v in all {
            assert!((-1.0..=1.0).contains(&v));
            let scaled = v * 1e4;
            assert!((scaled - scaled.round()).abs() < 1e-7, "{v} has more than 4 decimals");
        }
        let pairs: Vec<_> = inst.edges().collect();
        let mut sorted = pairs.clone();
        sorted.sort();
        assert_eq!(pairs, sorted);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_instance(9, 42).unwrap();
        let b = generate_instance(9, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_ne!(a, generate_instance(9, 43).unwrap());
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_coefficient(0.123_45), 0.1235);
        assert_eq!(round_coefficient(-0.123_45), -0.1235);
        assert_eq!(round_coefficient(1.0), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(generate_instance(1, 0), Err(Error::InvalidArgument(_))));
        let inst = two_qubit();
        assert!(matches!(energy(&inst, 4), Err(Error::InvalidArgument(_))));
        let dup = vec![
            Coupling { i: 0, j: 1, value: 0.1 },
            Coupling { i: 0, j: 1, value: 0.2 },
        ];
        assert!(QuboInstance::new(2, 0, vec![0.0; 2], dup).is_err());
        let backwards = vec![Coupling { i: 1, j: 0, value: 0.1 }];
        assert!(QuboInstance::new(2, 0, vec![0.0; 2], backwards).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        let inst = generate_instance(6, 1).unwrap();
        assert!(matches!(
            EnergyTable::with_cap(&inst, 5),
            Err(Error::ResourceLimit { requested: 6, cap: 5, .. })
        ));
    }

    #[test]
    fn json_roundtrip_and_canonical_order() {
        let inst = generate_instance(5, 3).unwrap();
        let back = QuboInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(inst, back);
        let text = r#"{"n": 3, "seed": 9, "h": [0.1, 0.2, 0.3],
                       "j": [[1, 2, 0.5], [0, 1, -0.25]]}"#;
        let loaded = QuboInstance::from_json(text).unwrap();
        assert_eq!(loaded.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(loaded.coupling(2, 1), 0.5);
        assert_eq!(loaded.coupling(0, 2), 0.0);
    }

    #[test]
    fn unquantized_instances_use_float_path() {
        let inst = QuboInstance::new(
            2,
            0,
            vec![0.123_456_7, -0.3],
            vec![Coupling { i: 0, j: 1, value: 0.2 }],
        )
        .unwrap();
        assert!(!inst.is_quantized());
        let table = EnergyTable::new(&inst).unwrap();
        for k in 0..4 {
            assert!((table[k] - energy(&inst, k).unwrap()).abs() < 1e-12);
        }
    }
}
