//! Derivative-free minimization. The default backend is Powell's COBYLA as
//! translated from NLopt by the `cobyla` crate, used without constraints.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Budget counted in objective evaluations.
    pub max_iterations: usize,
    pub initial_trust_radius: f64,
    pub final_trust_radius: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            initial_trust_radius: 1.0,
            final_trust_radius: 1e-4,
        }
    }
}

impl OptimizerOptions {
    pub fn with_budget(max_iterations: usize) -> Self {
        Self { max_iterations, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if !(self.final_trust_radius > 0.0 && self.final_trust_radius < self.initial_trust_radius)
        {
            return Err(invalid(format!(
                "trust radii must satisfy 0 < final < initial, got {} and {}",
                self.final_trust_radius, self.initial_trust_radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub params: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub trace: Vec<Evaluation>,
    pub status: String,
}

/// Anything that minimizes a fallible objective from a starting point.
pub trait Minimizer {
    fn minimize(
        &self,
        objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
        x0: &[f64],
    ) -> Result<Minimum>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cobyla {
    pub options: OptimizerOptions,
}

struct Book<'a> {
    objective: &'a mut dyn FnMut(&[f64]) -> Result<f64>,
    trace: Vec<Evaluation>,
    failure: Option<Error>,
}

impl Minimizer for Cobyla {
    fn minimize(
        &self,
        objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
        x0: &[f64],
    ) -> Result<Minimum> {
        let opts = self.options;
        opts.validate()?;
        if x0.is_empty() {
            return Err(invalid("cannot optimize over zero parameters"));
        }
        if x0.iter().any(|x| !x.is_finite()) {
            return Err(invalid("starting point is not finite"));
        }
        let book = RefCell::new(Book {
            objective,
            trace: Vec::with_capacity(opts.max_iterations),
            failure: None,
        });
        let f = |x: &[f64], _: &mut ()| -> f64 {
            let mut b = book.borrow_mut();
            // After a failure the remaining calls are cheap no-ops returning
            // a finite value; huge values stall the trust-region updates.
            let fallback = b.trace.last().map_or(0.0, |e| e.value);
            if b.failure.is_some() || b.trace.len() >= opts.max_iterations {
                return fallback;
            }
            let evaluation = b.trace.len() + 1;
            match (b.objective)(x) {
                Ok(v) if v.is_finite() => {
                    b.trace.push(Evaluation { params: x.to_vec(), value: v });
                    v
                }
                Ok(v) => {
                    b.failure = Some(Error::NonFiniteObjective {
                        value: v,
                        evaluation,
                        params: x.to_vec(),
                    });
                    fallback
                }
                Err(e) => {
                    b.failure = Some(e);
                    fallback
                }
            }
        };
        let bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); x0.len()];
        let stop = cobyla::StopTols {
            xtol_abs: vec![opts.final_trust_radius; x0.len()],
            ..Default::default()
        };
        let no_constraints: &[fn(&[f64], &mut ()) -> f64] = &[];
        let status = match cobyla::minimize(
            f,
            x0,
            &bounds,
            no_constraints,
            (),
            opts.max_iterations,
            cobyla::RhoBeg::All(opts.initial_trust_radius),
            Some(stop),
        ) {
            Ok((s, _, _)) => format!("{s:?}"),
            Err((s, _, _)) => format!("{s:?}"),
        };
        let book = book.into_inner();
        if let Some(e) = book.failure {
            return Err(e);
        }
        let trace = book.trace;
        let best = trace
            .iter()
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .ok_or_else(|| invalid("optimizer made no evaluations"))?;
        Ok(Minimum {
            best_params: best.params.clone(),
            best_value: best.value,
            evaluations: trace.len(),
            status,
            trace,
        })
    }
}

/// COBYLA with the given options.
pub fn minimize(
    objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x0: &[f64],
    options: OptimizerOptions,
) -> Result<Minimum> {
    Cobyla { options }.minimize(objective, x0)
}
