//! Barren-plateau diagnostics: cost concentration over random parameters and
//! the mean squared gradient at a given point.
//!
//! `Var(C - E[C])` equals `Var(C)`, so the concentration is reported as the
//! plain unbiased sample variance of the costs.

use std::f64::consts::PI;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzSpec, Circuit};
use crate::cvar::cvar_exact;
use crate::error::{invalid, Result};
use crate::rng::stream;
use crate::statevector::State;
use crate::vqe::Problem;

pub const DEFAULT_SAMPLES: usize = 2000;
pub const DEFAULT_FD_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsResult {
    pub n: usize,
    pub layers: usize,
    pub alpha: f64,
    pub sample_count: usize,
    pub mean_cost: f64,
    pub var_delta_c: f64,
}

/// Unbiased sample variance, two-pass in index order.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Exact CVaR of a circuit at a parameter vector.
pub fn exact_cost(problem: &Problem, circuit: &Circuit, params: &[f64], alpha: f64, buf: &mut State) -> Result<f64> {
    circuit.prepare_into(params, buf)?;
    Ok(cvar_exact(buf, &problem.table, alpha)?.value)
}

/// Costs at `samples` parameter vectors drawn uniformly from `[-pi, pi]`.
/// Sample `k` uses stream `k` of `seed`, so the result does not depend on
/// the thread count.
pub fn sampled_costs(
    problem: &Problem,
    spec: &AnsatzSpec,
    samples: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    crate::cvar::check_alpha(alpha)?;
    if samples == 0 {
        return Err(invalid("need at least one parameter sample"));
    }
    let circuit = spec.build(&problem.instance)?;
    let n = circuit.n;
    (0..samples)
        .into_par_iter()
        .map_init(
            || State::plus(n),
            |buf, k| {
                let buf = buf.as_mut().map_err(|e| invalid(e.to_string()))?;
                let mut rng = stream(seed, k as u64);
                let params: Vec<f64> =
                    (0..circuit.param_count).map(|_| rng.random_range(-PI..=PI)).collect();
                exact_cost(problem, &circuit, &params, alpha, buf)
            },
        )
        .collect()
}

pub fn cost_concentration(
    problem: &Problem,
    spec: &AnsatzSpec,
    samples: usize,
    alpha: f64,
    seed: u64,
) -> Result<DiagnosticsResult> {
    let costs = sampled_costs(problem, spec, samples, alpha, seed)?;
    Ok(DiagnosticsResult {
        n: problem.n(),
        layers: spec.layers,
        alpha,
        sample_count: samples,
        mean_cost: costs.iter().sum::<f64>() / costs.len() as f64,
        var_delta_c: sample_variance(&costs),
    })
}

/// `(1/dim) sum_i (dC/dtheta_i)^2` by central differences.
pub fn mean_squared_gradient(
    f: impl Fn(&[f64]) -> Result<f64> + Sync,
    params: &[f64],
    step: f64,
) -> Result<f64> {
    if step.is_nan() || step <= 0.0 {
        return Err(invalid(format!("finite-difference step must be positive, got {step}")));
    }
    if params.is_empty() {
        return Err(invalid("gradient of a zero-dimensional function"));
    }
    let partials: Vec<f64> = (0..params.len())
        .into_par_iter()
        .map(|i| {
            let mut x = params.to_vec();
            x[i] = params[i] + step;
            let up = f(&x)?;
            x[i] = params[i] - step;
            let down = f(&x)?;
            Ok((up - down) / (2.0 * step))
        })
        .collect::<Result<_>>()?;
    Ok(partials.iter().map(|g| g * g).sum::<f64>() / params.len() as f64)
}

/// Mean squared gradient of the exact CVaR.
pub fn gradient_magnitude(
    problem: &Problem,
    circuit: &Circuit,
    params: &[f64],
    alpha: f64,
    fd_step: f64,
) -> Result<f64> {
    crate::cvar::check_alpha(alpha)?;
    if params.len() != circuit.param_count {
        return Err(invalid(format!(
            "expected {} parameters, got {}",
            circuit.param_count,
            params.len()
        )));
    }
    mean_squared_gradient(
        |x| {
            let mut buf = State::plus(circuit.n)?;
            exact_cost(problem, circuit, x, alpha, &mut buf)
        },
        params,
        fd_step,
    )
}

/// One CSV row of a diagnostics sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub n: usize,
    pub layers: usize,
    /// Two-qubit depth on all-to-all hardware, `2 n L`.
    pub depth: usize,
    pub alpha: f64,
    pub instance_seed: u64,
    pub var_delta_c: f64,
    pub g: Option<f64>,
    pub sample_count: usize,
    pub fd_step: f64,
}
