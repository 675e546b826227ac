//! Warm-start parameters that make the SIA mimic imaginary time evolution.
//!
//! The walk follows the circuit's gate order. Each two-qubit block is chosen
//! to maximize `<psi| exp(-t Z_i Z_j) U(p0, p1) |psi>` on the running state,
//! with `t = tau * J_ij`. On real states this overlap is the bilinear form
//! `(cos u, sin u) M (cos v, sin v)^T` with `u = p1 / 2`, `v = p0 / 2` and
//!
//! ```text
//! M = [[ cosh t - sinh t <ZZ>,   sinh t <X_i>               ],
//!      [ sinh t <X_j>,          -(cosh t <XX> + sinh t <YY>) ]]
//! ```
//!
//! whose maximum is the largest singular value of `M`. The `Z Y` and `Y Z`
//! expectations that would enter an imaginary part vanish on real states.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ansatz::{Circuit, GateKind};
use crate::error::{invalid, Error, Result};
use crate::qubo::QuboInstance;
use crate::rng::{stream, Rng};
use crate::statevector::{Axis, PauliString, State};

pub const DEFAULT_TAU: f64 = 0.2;
pub const DEFAULT_SHOTS_PER_PAULI: u64 = 1000;

/// Singular values closer than this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStartMode {
    MeasuringExact,
    MeasuringShots,
    Approximation,
}

impl WarmStartMode {
    pub fn name(self) -> &'static str {
        match self {
            WarmStartMode::MeasuringExact => "measuring_exact",
            WarmStartMode::MeasuringShots => "measuring_shots",
            WarmStartMode::Approximation => "approximation",
        }
    }
}

impl fmt::Display for WarmStartMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WarmStartMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "measuring_exact" | "exact" => Ok(WarmStartMode::MeasuringExact),
            "measuring_shots" | "shots" => Ok(WarmStartMode::MeasuringShots),
            "approximation" | "approx" => Ok(WarmStartMode::Approximation),
            _ => Err(invalid(format!("unknown warm-start mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WarmStartConfig {
    pub tau: f64,
    pub mode: WarmStartMode,
    pub shots_per_pauli: u64,
    pub seed: u64,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            mode: WarmStartMode::MeasuringExact,
            shots_per_pauli: DEFAULT_SHOTS_PER_PAULI,
            seed: 0,
        }
    }
}

impl WarmStartConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if self.mode == WarmStartMode::MeasuringShots && self.shots_per_pauli == 0 {
            return Err(invalid("shots_per_pauli must be at least 1"));
        }
        Ok(())
    }
}

/// How the running-state expectations are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measurement {
    Exact,
    Shots(u64),
}

/// The five two-qubit expectations entering the overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairExpectations {
    pub zz: f64,
    pub x_i: f64,
    pub x_j: f64,
    pub xx: f64,
    pub yy: f64,
}

impl PairExpectations {
    /// Values on `|+>^n`.
    pub fn plus() -> Self {
        Self { zz: 0.0, x_i: 1.0, x_j: 1.0, xx: 1.0, yy: 0.0 }
    }

    pub fn measure(
        state: &State,
        i: usize,
        j: usize,
        how: Measurement,
        rng: &mut Rng,
    ) -> Result<Self> {
        let strings = [
            PauliString::pair(i, Axis::Z, j, Axis::Z)?,
            PauliString::single(i, Axis::X),
            PauliString::single(j, Axis::X),
            PauliString::pair(i, Axis::X, j, Axis::X)?,
            PauliString::pair(i, Axis::Y, j, Axis::Y)?,
        ];
        let mut v = [0.0; 5];
        for (slot, p) in v.iter_mut().zip(&strings) {
            *slot = match how {
                Measurement::Exact => state.expect_pauli(p)?,
                Measurement::Shots(s) => state.shot_pauli_estimate(p, s, rng)?,
            };
        }
        Ok(Self { zz: v[0], x_i: v[1], x_j: v[2], xx: v[3], yy: v[4] })
    }

    /// Largest absolute deviation from another set.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            self.zz - other.zz,
            self.x_i - other.x_i,
            self.x_j - other.x_j,
            self.xx - other.xx,
            self.yy - other.yy,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Entries of the 2x2 matrix `[[a, b], [c, d]]` of the overlap bilinear form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl OverlapCoeffs {
    pub fn from_expectations(e: &PairExpectations, tau_tilde: f64) -> Self {
        let (ch, sh) = (tau_tilde.cosh(), tau_tilde.sinh());
        Self {
            a: ch - sh * e.zz,
            b: sh * e.x_i,
            c: sh * e.x_j,
            d: -(ch * e.xx + sh * e.yy),
        }
    }

    /// Overlap at pair-gate angles `(theta0, theta1)`.
    pub fn evaluate(&self, theta0: f64, theta1: f64) -> f64 {
        let (su, cu) = (0.5 * theta1).sin_cos();
        let (sv, cv) = (0.5 * theta0).sin_cos();
        cu * (self.a * cv + self.b * sv) + su * (self.c * cv + self.d * sv)
    }

    fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d].iter().all(|x| x.is_finite())
    }
}

pub fn overlap_coeffs(
    state: &State,
    i: usize,
    j: usize,
    tau_tilde: f64,
    how: Measurement,
    rng: &mut Rng,
) -> Result<OverlapCoeffs> {
    let e = PairExpectations::measure(state, i, j, how, rng)?;
    Ok(OverlapCoeffs::from_expectations(&e, tau_tilde))
}

/// Maximizer of the overlap, as `(theta0, theta1, f_max)`.
///
/// `x^T M y` over unit vectors peaks at the top singular value. The left
/// vector maximizes `x^T M M^T x`, whose argmax angle is closed form; the
/// right vector is then `M^T x` normalized. Of the two sign choices the one
/// with the smaller `theta0^2 + theta1^2` is kept, so angles lie in
/// `(-2 pi, 2 pi]`. With degenerate singular values `M` is a scaled rotation
/// or reflection and the minimal-norm maximizer splits the angle evenly.
pub fn maximize_overlap(m: &OverlapCoeffs) -> (f64, f64, f64) {
    use std::f64::consts::PI;
    let OverlapCoeffs { a, b, c, d } = *m;
    // M M^T = [[p, q], [q, r]]
    let p = a * a + b * b;
    let q = a * c + b * d;
    let r = c * c + d * d;
    let half_gap = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    let mid = 0.5 * (p + r);
    let s_max = (mid + half_gap).sqrt();
    let s_min = (mid - half_gap).max(0.0).sqrt();
    if s_max - s_min <= DEGENERACY_TOL * s_max.max(1.0) {
        if s_max == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let phi = c.atan2(a);
        let (u, v) = if a * d - b * c < 0.0 {
            (0.5 * phi, 0.5 * phi)
        } else {
            (0.5 * phi, -0.5 * phi)
        };
        return (2.0 * v, 2.0 * u, m.evaluate(2.0 * v, 2.0 * u));
    }
    let u = 0.5 * (2.0 * q).atan2(p - r);
    let (su, cu) = u.sin_cos();
    let y1 = a * cu + c * su;
    let y2 = b * cu + d * su;
    let v = y2.atan2(y1);
    // (u, v) and (u + pi, v + pi) give the same value
    let u_alt = if u > 0.0 { u - PI } else { u + PI };
    let v_alt = if v > 0.0 { v - PI } else { v + PI };
    let (u, v) = if u_alt * u_alt + v_alt * v_alt < u * u + v * v {
        (u_alt, v_alt)
    } else {
        (u, v)
    };
    (2.0 * v, 2.0 * u, s_max)
}

/// Closed-form angle with `R_y(theta)|+> = exp(-tau h Z)|+> / norm`.
pub fn single_qubit_angle(h: f64, tau: f64) -> f64 {
    2.0 * (-(-2.0 * tau * h).exp()).atan() + std::f64::consts::FRAC_PI_2
}

/// Maximizer of `<psi| exp(-tau h Z) R_y(theta) |psi>`, which equals
/// `cos(theta/2) (cosh - sinh <Z>) + sin(theta/2) sinh <X>` on real states.
/// Returns `(theta, overlap)`.
pub fn single_qubit_overlap_max(tau_h: f64, z: f64, x: f64) -> (f64, f64) {
    let a = tau_h.cosh() - tau_h.sinh() * z;
    let b = tau_h.sinh() * x;
    (2.0 * b.atan2(a), a.hypot(b))
}

/// One two-qubit block of the walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeStep {
    pub layer: usize,
    pub i: usize,
    pub j: usize,
    pub theta0: f64,
    pub theta1: f64,
    pub f_max: f64,
    /// Expectations used for this block (measured or plugged in).
    pub expectations: PairExpectations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartResult {
    pub mode: WarmStartMode,
    pub tau: f64,
    pub layers: usize,
    pub params: Vec<f64>,
    pub per_edge: Vec<EdgeStep>,
}

impl WarmStartResult {
    /// Largest deviation of any used expectation from its `|+>^n` value.
    pub fn max_plus_deviation(&self) -> f64 {
        let plus = PairExpectations::plus();
        self.per_edge
            .iter()
            .map(|s| s.expectations.max_abs_diff(&plus))
            .fold(0.0, f64::max)
    }
}

fn check_supported(circuit: &Circuit, instance: &QuboInstance) -> Result<()> {
    if circuit.kind != crate::ansatz::AnsatzKind::SiaYz {
        return Err(Error::UnsupportedAnsatz(format!(
            "warm start needs an sia_yz circuit, got {}",
            circuit.kind
        )));
    }
    if circuit.n != instance.n() {
        return Err(invalid(format!(
            "circuit has {} qubits, instance {}",
            circuit.n,
            instance.n()
        )));
    }
    Ok(())
}

/// Runs the warm-start walk in any mode.
pub fn warm_start(
    instance: &QuboInstance,
    circuit: &Circuit,
    config: &WarmStartConfig,
) -> Result<WarmStartResult> {
    match config.mode {
        WarmStartMode::Approximation => warm_start_approx(instance, circuit, config),
        _ => warm_start_measuring(instance, circuit, config),
    }
}

/// Sequential overlap maximization on the running state.
pub fn warm_start_measuring(
    instance: &QuboInstance,
    circuit: &Circuit,
    config: &WarmStartConfig,
) -> Result<WarmStartResult> {
    config.validate()?;
    check_supported(circuit, instance)?;
    let how = match config.mode {
        WarmStartMode::MeasuringExact => Measurement::Exact,
        WarmStartMode::MeasuringShots => Measurement::Shots(config.shots_per_pauli),
        WarmStartMode::Approximation => {
            return Err(invalid("approximation mode does not measure the running state"))
        }
    };
    let mut state = State::plus(circuit.n)?;
    let mut params = vec![0.0; circuit.param_count];
    let mut per_edge = Vec::new();
    let h = instance.h();
    for (step, gate) in circuit.gates.iter().enumerate() {
        let mut rng = stream(config.seed, step as u64);
        match gate.kind {
            GateKind::H => {}
            GateKind::Ry => {
                let q = gate.qubits[0];
                let theta = if gate.layer <= 1 {
                    single_qubit_angle(h[q], config.tau)
                } else {
                    let (z, x) = single_expectations(&state, q, how, &mut rng)?;
                    single_qubit_overlap_max(config.tau * h[q], z, x).0
                };
                params[gate.slots[0]] = theta;
                state.apply_ry(q, theta)?;
            }
            GateKind::YzPair => {
                let (i, j) = (gate.qubits[0], gate.qubits[1]);
                let tau_tilde = config.tau * instance.coupling(i, j);
                let e = PairExpectations::measure(&state, i, j, how, &mut rng)?;
                let coeffs = OverlapCoeffs::from_expectations(&e, tau_tilde);
                if !coeffs.is_finite() {
                    return Err(invalid(format!("overlap coefficients overflow on edge ({i}, {j})")));
                }
                let (theta0, theta1, f_max) = maximize_overlap(&coeffs);
                params[gate.slots[0]] = theta0;
                params[gate.slots[1]] = theta1;
                state.apply_yz_pair(i, j, theta0, theta1)?;
                per_edge.push(EdgeStep {
                    layer: gate.layer,
                    i,
                    j,
                    theta0,
                    theta1,
                    f_max,
                    expectations: e,
                });
            }
            GateKind::Cnot | GateKind::Cz => unreachable!("sia circuits hold no fixed two-qubit gates"),
        }
    }
    Ok(WarmStartResult {
        mode: config.mode,
        tau: config.tau,
        layers: circuit.layers,
        params,
        per_edge,
    })
}

fn single_expectations(
    state: &State,
    q: usize,
    how: Measurement,
    rng: &mut Rng,
) -> Result<(f64, f64)> {
    let z = PauliString::single(q, Axis::Z);
    let x = PauliString::single(q, Axis::X);
    Ok(match how {
        Measurement::Exact => (state.expect_pauli(&z)?, state.expect_pauli(&x)?),
        Measurement::Shots(s) => (
            state.shot_pauli_estimate(&z, s, rng)?,
            state.shot_pauli_estimate(&x, s, rng)?,
        ),
    })
}

/// The same walk with every expectation replaced by its `|+>^n` value. No
/// state is evolved.
pub fn warm_start_approx(
    instance: &QuboInstance,
    circuit: &Circuit,
    config: &WarmStartConfig,
) -> Result<WarmStartResult> {
    config.validate()?;
    check_supported(circuit, instance)?;
    let plus = PairExpectations::plus();
    let h = instance.h();
    let mut params = vec![0.0; circuit.param_count];
    let mut per_edge = Vec::new();
    for gate in &circuit.gates {
        match gate.kind {
            GateKind::Ry => {
                let q = gate.qubits[0];
                params[gate.slots[0]] = if gate.layer <= 1 {
                    single_qubit_angle(h[q], config.tau)
                } else {
                    single_qubit_overlap_max(config.tau * h[q], 0.0, 1.0).0
                };
            }
            GateKind::YzPair => {
                let (i, j) = (gate.qubits[0], gate.qubits[1]);
                let coeffs =
                    OverlapCoeffs::from_expectations(&plus, config.tau * instance.coupling(i, j));
                let (theta0, theta1, f_max) = maximize_overlap(&coeffs);
                params[gate.slots[0]] = theta0;
                params[gate.slots[1]] = theta1;
                per_edge.push(EdgeStep {
                    layer: gate.layer,
                    i,
                    j,
                    theta0,
                    theta1,
                    f_max,
                    expectations: plus,
                });
            }
            _ => {}
        }
    }
    Ok(WarmStartResult {
        mode: config.mode,
        tau: config.tau,
        layers: circuit.layers,
        params,
        per_edge,
    })
}
