//! The SQP solver on a small program with one equality and two
//! inequalities, one of them active at the solution.

use ecfm::optimize::{solve_nlp, NlpProblem, NlpSettings};
use nalgebra::{DMatrix, DVector};

/// min (x-2)² + (y-1)²  s.t.  x + y = 2,  x ≥ 0,  1.2 - x ≥ 0.
struct Program;

impl NlpProblem for Program {
    fn dim(&self) -> usize {
        2
    }

    fn objective(&self, x: &DVector<f64>) -> ecfm::Result<(f64, DVector<f64>)> {
        let f = (x[0] - 2.0).powi(2) + (x[1] - 1.0).powi(2);
        Ok((f, DVector::from_vec(vec![2.0 * (x[0] - 2.0), 2.0 * (x[1] - 1.0)])))
    }

    fn equalities(&self, x: &DVector<f64>) -> ecfm::Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((DVector::from_element(1, x[0] + x[1] - 2.0), DMatrix::from_row_slice(1, 2, &[1.0, 1.0])))
    }

    fn inequalities(&self, x: &DVector<f64>) -> ecfm::Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((
            DVector::from_vec(vec![x[0], 1.2 - x[0]]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]),
        ))
    }
}

fn main() -> ecfm::Result<()> {
    let r = solve_nlp(&Program, &DVector::from_vec(vec![0.0, 0.0]), &NlpSettings::default())?;
    println!("x = {:.6?} in {} iterations (converged {})", r.x, r.iterations, r.converged);
    println!("equality multiplier {:.4?}, inequality multipliers {:.4?}", r.eq_multipliers, r.ineq_multipliers);
    Ok(())
}
