//! Conditional value at risk of measured energies.
//!
//! The sampled estimator averages the lowest `ceil(alpha * S)` energies of `S`
//! shots. The exact variant is its `S -> inf` limit: the probability mass of
//! the lowest-energy basis states is accumulated up to `alpha`, the boundary
//! energy level taking a fractional weight.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::qubo::EnergyTable;
use crate::statevector::State;

/// Shots per cost evaluation, or the exact infinite-shot limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shots {
    Exact,
    Finite(u64),
}

impl Shots {
    pub fn count(self) -> Option<u64> {
        match self {
            Shots::Exact => None,
            Shots::Finite(s) => Some(s),
        }
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => f.write_str("exact"),
            Shots::Finite(s) => write!(f, "{s}"),
        }
    }
}

impl std::str::FromStr for Shots {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("exact") {
            return Ok(Shots::Exact);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(invalid(format!("shots must be a positive integer or \"exact\", got {s:?}"))),
            Ok(v) => Ok(Shots::Finite(v)),
        }
    }
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => s.serialize_str("exact"),
            Shots::Finite(v) => s.serialize_u64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("shots must be at least 1")),
            Raw::Count(v) => Ok(Shots::Finite(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvarEstimate {
    pub value: f64,
    pub alpha: f64,
    pub shots: Shots,
    /// Present only for finite shots with a tail of at least two samples.
    pub std_error: Option<f64>,
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// `ceil(alpha * S)`, clamped to `[1, S]`. Products within 1e-9 of an integer
/// are treated as that integer so that e.g. `0.01 * 10000` gives 100.
pub fn tail_size(alpha: f64, shots: u64) -> usize {
    let x = alpha * shots as f64;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (k as u64).clamp(1, shots.max(1)) as usize
}

/// Sampled CVaR from measurement counts.
pub fn cvar_sampled(
    counts: &BTreeMap<usize, u64>,
    table: &EnergyTable,
    alpha: f64,
) -> Result<CvarEstimate> {
    check_alpha(alpha)?;
    let shots: u64 = counts.values().sum();
    if shots == 0 {
        return Err(invalid("counts are empty"));
    }
    let mut levels = Vec::with_capacity(counts.len());
    for (&k, &c) in counts {
        if k >= table.len() {
            return Err(invalid(format!("sampled index {k} outside the energy table")));
        }
        levels.push((table[k], c));
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = tail_size(alpha, shots);
    let mut tail = Vec::with_capacity(k);
    for (e, c) in levels {
        let take = (c as usize).min(k - tail.len());
        tail.extend(std::iter::repeat_n(e, take));
        if tail.len() == k {
            break;
        }
    }
    let value = tail.iter().sum::<f64>() / k as f64;
    let std_error = (k >= 2).then(|| std_error_about(&tail, value));
    Ok(CvarEstimate {
        value,
        alpha,
        shots: Shots::Finite(shots),
        std_error,
    })
}

/// Standard error of the tail mean over the lowest `ceil(alpha * S)` energies.
pub fn cvar_std_error(sorted_tail: &[f64], alpha: f64, shots: u64) -> Result<f64> {
    check_alpha(alpha)?;
    let k = tail_size(alpha, shots);
    if sorted_tail.len() != k {
        return Err(invalid(format!(
            "tail holds {} energies but ceil(alpha * S) = {k}",
            sorted_tail.len()
        )));
    }
    if k < 2 {
        return Err(Error::UndefinedEstimate(k));
    }
    let mean = sorted_tail.iter().sum::<f64>() / k as f64;
    Ok(std_error_about(sorted_tail, mean))
}

fn std_error_about(tail: &[f64], cvar: f64) -> f64 {
    let k = tail.len() as f64;
    let ss: f64 = tail.iter().map(|e| (e - cvar).powi(2)).sum();
    (ss / (k * (k - 1.0))).sqrt()
}

/// Exact CVaR of a state. Equal-energy basis states are merged into a single
/// level before the alpha cut, so the value does not depend on tie order.
pub fn cvar_exact(state: &State, table: &EnergyTable, alpha: f64) -> Result<CvarEstimate> {
    check_alpha(alpha)?;
    if state.n() != table.n() {
        return Err(invalid(format!(
            "state has {} qubits, energy table {}",
            state.n(),
            table.n()
        )));
    }
    let amps = state.amplitudes();
    let order = table.ascending();
    let mut mass = 0.0;
    let mut weighted = 0.0;
    let mut pos = 0;
    while pos < order.len() && mass < alpha {
        let level = table[order[pos] as usize];
        let mut level_mass = 0.0;
        while pos < order.len() && table[order[pos] as usize] == level {
            let a = amps[order[pos] as usize];
            level_mass += a * a;
            pos += 1;
        }
        let take = level_mass.min(alpha - mass);
        weighted += take * level;
        mass += take;
    }
    Ok(CvarEstimate {
        value: weighted / mass,
        alpha,
        shots: Shots::Exact,
        std_error: None,
    })
}
