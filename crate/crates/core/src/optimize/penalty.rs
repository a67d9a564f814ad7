//! Penalty wrapper: minimizes `objective(x) + α·penalty(x)` with the SQP
//! machinery as an unconstrained Newton method.

use nalgebra::{DMatrix, DVector};

use super::nlp::{solve_nlp, NlpProblem, NlpSettings};
use super::OptResult;
use crate::error::{Error, Result};

pub trait PenaltyProblem {
    fn dim(&self) -> usize;

    /// `(f, ∇f, ∇²f)`; without a Hessian the whole composite is differenced.
    fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>, Option<DMatrix<f64>>)>;

    /// `(P, ∇P)`.
    fn penalty(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
}

struct Composite<'a> {
    inner: &'a dyn PenaltyProblem,
    alpha: f64,
}

impl Composite<'_> {
    fn gradient(&self, x: &DVector<f64>, with_objective: bool) -> Result<DVector<f64>> {
        let (_, gp) = self.inner.penalty(x)?;
        if with_objective {
            let (_, g, _) = self.inner.objective(x)?;
            Ok(g + self.alpha * gp)
        } else {
            Ok(self.alpha * gp)
        }
    }

    /// Central differences of a gradient, symmetrized.
    fn fd_hessian(&self, x: &DVector<f64>, with_objective: bool) -> Result<DMatrix<f64>> {
        let n = x.len();
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            let step = 1e-6 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let col = (self.gradient(&xp, with_objective)? - self.gradient(&xm, with_objective)?) / (2.0 * step);
            h.set_column(j, &col);
        }
        Ok(0.5 * (&h + h.transpose()))
    }
}

impl NlpProblem for Composite<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (f, g, _) = self.inner.objective(x)?;
        let (p, gp) = self.inner.penalty(x)?;
        Ok((f + self.alpha * p, g + self.alpha * gp))
    }

    fn lagrangian_hessian(
        &self,
        x: &DVector<f64>,
        _y_eq: &DVector<f64>,
        _y_ineq: &DVector<f64>,
    ) -> Option<Result<DMatrix<f64>>> {
        let h = (|| match self.inner.objective(x)?.2 {
            Some(ho) => Ok(ho + self.fd_hessian(x, false)?),
            None => self.fd_hessian(x, true),
        })();
        Some(h)
    }
}

/// Minimizes `objective + α·penalty` from `x0`.
pub fn penalty_minimize(
    problem: &dyn PenaltyProblem,
    alpha: f64,
    x0: &DVector<f64>,
    settings: &NlpSettings,
) -> Result<OptResult> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty weight must be positive, got {alpha}")));
    }
    solve_nlp(&Composite { inner: problem, alpha }, x0, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Toy;
    impl PenaltyProblem for Toy {
        fn dim(&self) -> usize {
            1
        }
        fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
            Ok((x[0] * x[0], DVector::from_element(1, 2.0 * x[0]), Some(DMatrix::from_element(1, 1, 2.0))))
        }
        fn penalty(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
            Ok(((x[0] - 1.0).powi(2), DVector::from_element(1, 2.0 * (x[0] - 1.0))))
        }
    }

    #[test]
    fn large_weight_drives_toward_penalty_minimizer() {
        let mut prev = 0.0;
        for alpha in [1.0, 10.0, 100.0, 1e4] {
            let r = penalty_minimize(&Toy, alpha, &DVector::from_element(1, -3.0), &NlpSettings::default()).unwrap();
            assert!(r.converged);
            assert!((r.x[0] - alpha / (1.0 + alpha)).abs() < 1e-8);
            assert!(r.x[0] > prev);
            prev = r.x[0];
        }
        assert!((prev - 1.0).abs() < 1e-3);
    }

    /// Log-well objective like the beam program: `log(½x² + 1e-12) + α(x-y)² + (y-2)²`.
    struct LogWell;
    impl PenaltyProblem for LogWell {
        fn dim(&self) -> usize {
            2
        }
        fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
            let q = 0.5 * x[0] * x[0] + 1e-12;
            let g = DVector::from_vec(vec![x[0] / q, 0.0]);
            let h = DMatrix::from_row_slice(2, 2, &[1.0 / q - x[0] * x[0] / (q * q), 0.0, 0.0, 0.0]);
            Ok((q.ln(), g, Some(h)))
        }
        fn penalty(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
            let f = (x[1] - 2.0).powi(2) + 0.1 * x[0] * x[0];
            Ok((f, DVector::from_vec(vec![0.2 * x[0], 2.0 * (x[1] - 2.0)])))
        }
    }

    #[test]
    fn log_guard_keeps_origin_finite() {
        let r = penalty_minimize(&LogWell, 100.0, &DVector::from_vec(vec![0.0, 0.5]), &NlpSettings::default()).unwrap();
        assert!(r.objective_trace.iter().all(|v| v.is_finite()));
        assert!(r.x[0].abs() < 1e-5, "{:?}", r.x);
        assert!((r.x[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn non_positive_weight_rejected() {
        assert!(penalty_minimize(&Toy, 0.0, &DVector::zeros(1), &NlpSettings::default()).is_err());
    }
}
