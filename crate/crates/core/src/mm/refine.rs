use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::{objective, CostSpec, POWER_FLOOR};
use crate::manifold::{ArrayGeometry, DoaVector};

use super::gtrs::solve_gtrs;
use super::surrogate::{surrogate_system, PairCoefficients, SurrogateSystem};

pub const DEFAULT_MAX_ITERS: usize = 30;
pub const DEFAULT_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Quadratic surrogate, minimized exactly by the trust-region solver.
    Quadratic,
    /// Linear surrogate, closed-form normalized update.
    Linear,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Quadratic => "quadratic",
            Variant::Linear => "linear",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadratic" | "quad" => Ok(Variant::Quadratic),
            "linear" | "lin" => Ok(Variant::Linear),
            _ => Err(Error::UnknownName { kind: "variant", name: s.to_string() }),
        }
    }
}

/// `(v − Dq̂ + Cq̂) / ‖v − Dq̂ + Cq̂‖`, or `q̂` itself when the numerator vanishes.
pub fn linear_update(system: &SurrogateSystem, q_hat: &DoaVector) -> DoaVector {
    let qh = q_hat.as_vector();
    let g = system.v - system.d * qh + system.c * qh;
    let n = g.norm();
    let size = system.v.norm() + system.d.norm() + system.c.abs();
    if !n.is_finite() || n <= 1e-15 * size || n == 0.0 {
        return *q_hat;
    }
    DoaVector::from_unit(g / n)
}

/// One MM step at a time over a fixed cost.
#[derive(Debug, Clone)]
pub struct Refiner<'a> {
    spec: &'a CostSpec,
    geometry: &'a ArrayGeometry,
    coeffs: PairCoefficients,
    variant: Variant,
}

impl<'a> Refiner<'a> {
    pub fn new(spec: &'a CostSpec, geometry: &'a ArrayGeometry, variant: Variant) -> Self {
        Refiner { spec, geometry, coeffs: PairCoefficients::new(spec, geometry), variant }
    }

    pub fn coefficients(&self) -> &PairCoefficients {
        &self.coeffs
    }

    pub fn system(&self, q_hat: &DoaVector) -> SurrogateSystem {
        surrogate_system(self.spec, &self.coeffs, q_hat)
    }

    pub fn step(&self, q_hat: &DoaVector) -> DoaVector {
        let system = self.system(q_hat);
        match self.variant {
            Variant::Quadratic => solve_gtrs(&system.d, &system.v).q,
            Variant::Linear => linear_update(&system, q_hat),
        }
    }

    pub fn objective(&self, q: &DoaVector) -> f64 {
        objective(self.spec, self.geometry, q)
    }
}

/// Iterates and cost values of one refinement run.
#[derive(Debug, Clone)]
pub struct RefinementTrace {
    pub iterates: Vec<DoaVector>,
    pub objectives: Vec<f64>,
    pub variant: Variant,
    /// Iteration at which the stopping rule fired.
    pub converged_at: Option<usize>,
}

impl RefinementTrace {
    pub fn final_doa(&self) -> DoaVector {
        *self.iterates.last().expect("trace holds the starting point")
    }

    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().expect("trace holds the starting point")
    }

    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }

    /// Iterate after `t` steps, holding the last one once the run stopped.
    pub fn at(&self, t: usize) -> DoaVector {
        self.iterates[t.min(self.iterates.len() - 1)]
    }

    /// Largest increase between consecutive objectives, relative to the
    /// earlier value. Non-positive for a monotone trace.
    pub fn worst_relative_increase(&self) -> f64 {
        self.objectives
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(POWER_FLOOR))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs up to `max_iters` MM steps from `q0`.
///
/// Stops early once the relative decrease of the cost is below `rel_tol` on
/// two consecutive iterations; `rel_tol <= 0` runs all `max_iters` steps.
pub fn refine(
    spec: &CostSpec,
    geometry: &ArrayGeometry,
    q0: DoaVector,
    variant: Variant,
    max_iters: usize,
    rel_tol: f64,
) -> RefinementTrace {
    refine_observed(spec, geometry, q0, variant, max_iters, rel_tol, |_, _| {})
}

/// [`refine`] calling `observe(t, q_t)` after each completed step.
pub fn refine_observed(
    spec: &CostSpec,
    geometry: &ArrayGeometry,
    q0: DoaVector,
    variant: Variant,
    max_iters: usize,
    rel_tol: f64,
    mut observe: impl FnMut(usize, &DoaVector),
) -> RefinementTrace {
    let refiner = Refiner::new(spec, geometry, variant);
    let mut iterates = vec![q0];
    let mut objectives = vec![refiner.objective(&q0)];
    let mut converged_at = None;
    let mut small_steps = 0;

    for t in 1..=max_iters {
        let q = refiner.step(iterates.last().unwrap());
        let value = refiner.objective(&q);
        let prev = *objectives.last().unwrap();
        iterates.push(q);
        objectives.push(value);
        observe(t, &q);

        if rel_tol > 0.0 {
            let decrease = (prev - value) / prev.abs().max(POWER_FLOOR);
            small_steps = if decrease < rel_tol { small_steps + 1 } else { 0 };
            if small_steps >= 2 {
                converged_at = Some(t);
                break;
            }
        }
    }
    RefinementTrace { iterates, objectives, variant, converged_at }
}
