//! Newton's method, backward-Euler marching and the augmented
//! constraint-force solves.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{panel_breaks, BasisFamily};
use crate::error::{Error, Result};
use crate::linalg::LuFactor;
use crate::operators::{
    residual_burgers, residual_burgers_jac, residual_kpp, residual_kpp_jac, DiscreteOperatorSet, Tabulation,
};

/// Number of consecutive residual increases that counts as divergence.
const DIVERGENCE_STREAK: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_final: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || steps == 0 {
            return Err(Error::InvalidArgument(format!(
                "time grid needs T > 0 and P >= 1, got T = {t_final}, P = {steps}"
            )));
        }
        Ok(Self { t_final, steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// `t_p = pΔt` for `p = 0..=P`.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|p| p as f64 * self.dt()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Plain Newton iteration `x ← x - J(x)⁻¹ R(x)` until `‖R‖ < tol`.
pub fn newton_solve(
    mut residual_fn: impl FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    mut jacobian_fn: impl FnMut(&DVector<f64>) -> Result<DMatrix<f64>>,
    initial_guess: DVector<f64>,
    config: &NewtonConfig,
) -> Result<NewtonReport> {
    let mut x = initial_guess;
    let mut r = residual_fn(&x)?;
    let mut norm = r.norm();
    let mut growth = 0;
    for it in 0..config.max_iters {
        if norm < config.tol {
            return Ok(NewtonReport {
                x,
                iterations: it,
                residual: norm,
            });
        }
        if !norm.is_finite() {
            return Err(Error::Diverged {
                iterations: it,
                residual: norm,
            });
        }
        let dx = LuFactor::new(jacobian_fn(&x)?)?.solve(&r)?;
        x -= dx;
        r = residual_fn(&x)?;
        let next = r.norm();
        growth = if next > norm { growth + 1 } else { 0 };
        norm = next;
        if growth >= DIVERGENCE_STREAK {
            return Err(Error::Diverged {
                iterations: it + 1,
                residual: norm,
            });
        }
    }
    if norm < config.tol {
        return Ok(NewtonReport {
            x,
            iterations: config.max_iters,
            residual: norm,
        });
    }
    Err(Error::MaxItersExceeded {
        iterations: config.max_iters,
        residual: norm,
    })
}

/// Solution coefficients `θ_0 … θ_P` and, for constraint-force runs, `λ_0 … λ_P`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub theta: Vec<DVector<f64>>,
    pub lambda: Option<Vec<DVector<f64>>>,
    pub newton_iterations: Vec<usize>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.theta.len() - 1
    }

    /// `𝓜θ_t` stacked as a `C × (P+1)` matrix.
    pub fn measure(&self, measurement: &DMatrix<f64>) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.theta.iter().map(|t| measurement * t).collect();
        DMatrix::from_columns(&cols)
    }
}

/// L² projection: solves `M θ₀ = b` with `b_i = ∫ u₀ f_i dx`.
pub fn project_initial_condition(basis: &BasisFamily, u0: impl Fn(f64) -> f64) -> Result<DVector<f64>> {
    let tab = Tabulation::new(basis, &panel_breaks(basis.count().max(8), &[]), 0)?;
    LuFactor::new(tab.gram(0, 0, |_| 1.0))?.solve(&tab.project(u0))
}

fn annotate(step: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::StepFailed {
        step,
        source: Box::new(e),
    }
}

pub fn march_burgers_standard(
    ops: &DiscreteOperatorSet,
    grid: &TimeGrid,
    eps: [f64; 2],
    theta0: &DVector<f64>,
    config: &NewtonConfig,
) -> Result<Trajectory> {
    let dt = grid.dt();
    let mut theta = Vec::with_capacity(grid.steps + 1);
    let mut iters = Vec::with_capacity(grid.steps);
    theta.push(theta0.clone());
    for step in 1..=grid.steps {
        let prev = theta[step - 1].clone();
        let rep = newton_solve(
            |t| residual_burgers(ops, t, &prev, dt, eps, step, None),
            |t| Ok(residual_burgers_jac(ops, t, dt, eps)),
            prev.clone(),
            config,
        )
        .map_err(annotate(step))?;
        iters.push(rep.iterations);
        theta.push(rep.x);
    }
    Ok(Trajectory {
        theta,
        lambda: None,
        newton_iterations: iters,
    })
}

fn as_augmented_failure(e: Error) -> Error {
    match e {
        Error::SingularJacobian { pivot, threshold } => Error::SingularAugmentedSystem(format!(
            "pivot {pivot:.3e} below threshold {threshold:.3e}"
        )),
        other => other,
    }
}

/// `[[J, -Γ], [𝓜, 0]]`.
pub fn augmented_jacobian(jac: &DMatrix<f64>, constraint: &DMatrix<f64>, measurement: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, c) = (jac.nrows(), constraint.ncols());
    let mut a = DMatrix::zeros(n + c, n + c);
    a.view_mut((0, 0), (n, n)).copy_from(jac);
    a.view_mut((0, n), (n, c)).copy_from(&(-constraint));
    a.view_mut((n, 0), (c, n)).copy_from(measurement);
    a
}

/// Marches `θ` and `λ` jointly so that `𝓜θ_t = v_t` at every step.
pub fn march_burgers_ecfm(
    ops: &DiscreteOperatorSet,
    grid: &TimeGrid,
    eps: [f64; 2],
    theta0: &DVector<f64>,
    data: &DMatrix<f64>,
    config: &NewtonConfig,
) -> Result<Trajectory> {
    let (n, c) = (ops.basis_size(), ops.constraint_count());
    if data.nrows() != c || data.ncols() != grid.steps + 1 {
        return Err(Error::DimensionMismatch(format!(
            "data is {}x{}, expected {}x{}",
            data.nrows(),
            data.ncols(),
            c,
            grid.steps + 1
        )));
    }
    if c > n {
        return Err(Error::SingularAugmentedSystem(format!("{c} constraints on {n} unknowns")));
    }
    let mismatch = (&ops.measurement * theta0 - data.column(0)).amax();
    if mismatch > 10.0 * config.tol {
        return Err(Error::InconsistentInitialData(mismatch));
    }
    let dt = grid.dt();
    let mut theta = vec![theta0.clone()];
    let mut lambda = vec![DVector::zeros(c)];
    let mut iters = Vec::with_capacity(grid.steps);
    for step in 1..=grid.steps {
        let prev = theta[step - 1].clone();
        let v = data.column(step).into_owned();
        let mut z0 = DVector::zeros(n + c);
        z0.rows_mut(0, n).copy_from(&prev);
        z0.rows_mut(n, c).copy_from(&lambda[step - 1]);
        let rep = newton_solve(
            |z| {
                let th = z.rows(0, n).into_owned();
                let lam = z.rows(n, c).into_owned();
                let r1 = residual_burgers(ops, &th, &prev, dt, eps, step, Some(&lam))?;
                let r2 = &ops.measurement * &th - &v;
                Ok(DVector::from_iterator(n + c, r1.iter().chain(r2.iter()).copied()))
            },
            |z| {
                let th = z.rows(0, n).into_owned();
                Ok(augmented_jacobian(
                    &residual_burgers_jac(ops, &th, dt, eps),
                    &ops.constraint,
                    &ops.measurement,
                ))
            },
            z0,
            config,
        )
        .map_err(as_augmented_failure)
        .map_err(annotate(step))?;
        iters.push(rep.iterations);
        theta.push(rep.x.rows(0, n).into_owned());
        lambda.push(rep.x.rows(n, c).into_owned());
    }
    Ok(Trajectory {
        theta,
        lambda: Some(lambda),
        newton_iterations: iters,
    })
}

/// Static Fisher-KPP equilibrium for given source coefficients and forces.
pub fn solve_kpp_equilibrium(
    ops: &DiscreteOperatorSet,
    eps: &DVector<f64>,
    lambda: Option<&DVector<f64>>,
    theta_guess: DVector<f64>,
    config: &NewtonConfig,
) -> Result<DVector<f64>> {
    newton_solve(
        |t| residual_kpp(ops, t, eps, lambda),
        |t| Ok(residual_kpp_jac(ops, t)),
        theta_guess,
        config,
    )
    .map(|r| r.x)
}
