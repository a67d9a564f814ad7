//! ADAM, a dense SQP solver for small equality/inequality programs, and the
//! penalty wrapper built on top of it.

pub mod adam;
pub mod nlp;
pub mod penalty;

pub use adam::{adam_minimize, AdamConfig};
pub use nlp::{solve_nlp, NlpProblem, NlpSettings};
pub use penalty::{penalty_minimize, PenaltyProblem};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub x: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub constraint_violation_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Multipliers with `∇f = J_Eᵀ y_E + J_Iᵀ y_I`, `y_I ≥ 0`; empty for ADAM.
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
}

impl OptResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&f64::NAN)
    }
}
