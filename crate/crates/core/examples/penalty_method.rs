//! Penalty wrapper: a log-barrier style objective plus a weighted quadratic
//! penalty, minimized by the SQP machinery without constraints.

use ecfm::optimize::{penalty_minimize, NlpSettings, PenaltyProblem};
use nalgebra::{DMatrix, DVector};

/// `log(½‖x‖² + 1) + α·½(x₀ - 3)²`.
struct Toy;

impl PenaltyProblem for Toy {
    fn dim(&self) -> usize {
        2
    }

    fn objective(&self, x: &DVector<f64>) -> ecfm::Result<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
        let q = 0.5 * x.norm_squared() + 1.0;
        let h = DMatrix::identity(2, 2) / q - x * x.transpose() / (q * q);
        Ok((q.ln(), x / q, Some(h)))
    }

    fn penalty(&self, x: &DVector<f64>) -> ecfm::Result<(f64, DVector<f64>)> {
        Ok((0.5 * (x[0] - 3.0).powi(2), DVector::from_vec(vec![x[0] - 3.0, 0.0])))
    }
}

fn main() -> ecfm::Result<()> {
    for alpha in [0.1, 1.0, 100.0] {
        let r = penalty_minimize(&Toy, alpha, &DVector::from_vec(vec![0.5, 0.5]), &NlpSettings::default())?;
        println!("alpha {alpha:>5}: x = {:.5?} ({} iterations)", r.x, r.iterations);
    }
    Ok(())
}
