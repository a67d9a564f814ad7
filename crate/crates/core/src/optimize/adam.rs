use serde::{Deserialize, Serialize};

use super::OptResult;
use crate::error::{Error, Result};

/// Consecutive objective failures tolerated before giving up.
const MAX_FAILURES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 250,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid ADAM settings {self:?}")))
        }
    }
}

/// Bias-corrected ADAM for exactly `config.epochs` updates.
///
/// `value_and_grad` is evaluated once per epoch. If it fails at a new
/// iterate, the step is undone and the learning rate halved; three failures
/// in a row abort with the last error.
pub fn adam_minimize(
    mut value_and_grad: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    x0: &[f64],
    config: &AdamConfig,
) -> Result<OptResult> {
    config.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut lr = config.learning_rate;
    let mut trace = Vec::with_capacity(config.epochs + 1);

    let (mut f, mut g) = value_and_grad(&x)?;
    let mut epoch = 0;
    let mut failures = 0;
    while epoch < config.epochs {
        if !f.is_finite() || g.iter().any(|gi| !gi.is_finite()) {
            return Err(Error::NonFiniteGradient(epoch));
        }
        trace.push(f);
        let t = (epoch + 1) as i32;
        let (c1, c2) = (1.0 - config.beta1.powi(t), 1.0 - config.beta2.powi(t));
        let (m_prev, v_prev, x_prev) = (m.clone(), v.clone(), x.clone());
        for i in 0..n {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            x[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + config.eps);
        }
        match value_and_grad(&x) {
            Ok((fv, gv)) => {
                f = fv;
                g = gv;
                failures = 0;
                epoch += 1;
            }
            Err(e) => {
                failures += 1;
                if failures >= MAX_FAILURES {
                    return Err(e);
                }
                trace.pop();
                m = m_prev;
                v = v_prev;
                x = x_prev;
                lr *= 0.5;
            }
        }
    }
    trace.push(f);
    Ok(OptResult {
        x,
        constraint_violation_trace: vec![0.0; trace.len()],
        objective_trace: trace,
        converged: true,
        iterations: config.epochs,
        eq_multipliers: vec![],
        ineq_multipliers: vec![],
    })
}
