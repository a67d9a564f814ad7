//! Forward (tangent) sensitivities of the Burgers trajectories with respect
//! to `ε = (ε₁, ε₂)`, and the objective gradients assembled from them.

use std::f64::consts::LN_10;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::LuFactor;
use crate::operators::{residual_burgers_jac, DiscreteOperatorSet};
use crate::solvers::{augmented_jacobian, TimeGrid, Trajectory};

/// `dtheta[t]` is `N × 2` with columns `∂θ_t/∂ε₁`, `∂θ_t/∂ε₂`; `dlambda[t]` is `C × 2`.
#[derive(Clone, Debug)]
pub struct SensitivityTrajectory {
    pub dtheta: Vec<DMatrix<f64>>,
    pub dlambda: Option<Vec<DMatrix<f64>>>,
}

/// `-∂R/∂ε` at step `step`: `[ln10·10^(-ε₁)·Kθ, F(t)]`.
fn parameter_forcing(ops: &DiscreteOperatorSet, theta: &DVector<f64>, eps: [f64; 2], step: usize) -> DMatrix<f64> {
    let nu = 10f64.powf(-eps[0]);
    let c1 = LN_10 * nu * (&ops.stiffness * theta);
    DMatrix::from_columns(&[c1, ops.source.column(step).into_owned()])
}

fn check_trajectory(traj: &Trajectory, grid: &TimeGrid) -> Result<()> {
    if traj.theta.len() != grid.steps + 1 {
        return Err(Error::DimensionMismatch(format!(
            "trajectory has {} states for {} steps",
            traj.theta.len(),
            grid.steps
        )));
    }
    Ok(())
}

fn step_failed(step: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::StepFailed {
        step,
        source: Box::new(e),
    }
}

/// `J(θ_{t+1}) ∂θ_{t+1}/∂ε = (M/Δt) ∂θ_t/∂ε - ∂R/∂ε`.
pub fn march_sensitivity_standard(
    ops: &DiscreteOperatorSet,
    grid: &TimeGrid,
    eps: [f64; 2],
    traj: &Trajectory,
) -> Result<SensitivityTrajectory> {
    check_trajectory(traj, grid)?;
    let dt = grid.dt();
    let n = ops.basis_size();
    let mut dtheta = vec![DMatrix::zeros(n, 2)];
    for step in 1..=grid.steps {
        let th = &traj.theta[step];
        let rhs = &ops.mass / dt * &dtheta[step - 1] + parameter_forcing(ops, th, eps, step);
        let lu = LuFactor::new(residual_burgers_jac(ops, th, dt, eps)).map_err(step_failed(step))?;
        dtheta.push(lu.solve_matrix(&rhs).map_err(step_failed(step))?);
    }
    Ok(SensitivityTrajectory { dtheta, dlambda: None })
}

/// Augmented tangent system `[[J, -Γ], [𝓜, 0]] [∂θ; ∂λ] = [(M/Δt)∂θ_t - ∂R/∂ε; 0]`.
pub fn march_sensitivity_ecfm(
    ops: &DiscreteOperatorSet,
    grid: &TimeGrid,
    eps: [f64; 2],
    traj: &Trajectory,
) -> Result<SensitivityTrajectory> {
    check_trajectory(traj, grid)?;
    let dt = grid.dt();
    let (n, c) = (ops.basis_size(), ops.constraint_count());
    let mut dtheta = vec![DMatrix::zeros(n, 2)];
    let mut dlambda = vec![DMatrix::zeros(c, 2)];
    for step in 1..=grid.steps {
        let th = &traj.theta[step];
        let top = &ops.mass / dt * &dtheta[step - 1] + parameter_forcing(ops, th, eps, step);
        let mut rhs = DMatrix::zeros(n + c, 2);
        rhs.view_mut((0, 0), (n, 2)).copy_from(&top);
        let a = augmented_jacobian(&residual_burgers_jac(ops, th, dt, eps), &ops.constraint, &ops.measurement);
        let lu = LuFactor::new(a)
            .map_err(|e| match e {
                Error::SingularJacobian { pivot, threshold } => Error::SingularAugmentedSystem(format!(
                    "tangent pivot {pivot:.3e} below threshold {threshold:.3e}"
                )),
                other => other,
            })
            .map_err(step_failed(step))?;
        let x = lu.solve_matrix(&rhs).map_err(step_failed(step))?;
        dtheta.push(x.rows(0, n).into_owned());
        dlambda.push(x.rows(n, c).into_owned());
    }
    Ok(SensitivityTrajectory {
        dtheta,
        dlambda: Some(dlambda),
    })
}

/// `z^INV = Δt/2 Σ_{t=1}^P ‖𝓜θ_t - v_t‖²`.
pub fn objective_standard(traj: &Trajectory, measurement: &DMatrix<f64>, data: &DMatrix<f64>, dt: f64) -> f64 {
    0.5 * dt
        * (1..traj.theta.len())
            .map(|t| (measurement * &traj.theta[t] - data.column(t)).norm_squared())
            .sum::<f64>()
}

/// `z^ECFM = Δt/2 Σ_{t=1}^P ‖λ_t‖²`; zero for trajectories without forces.
pub fn objective_ecfm(traj: &Trajectory, dt: f64) -> f64 {
    traj.lambda
        .as_ref()
        .map(|l| 0.5 * dt * l.iter().skip(1).map(|v| v.norm_squared()).sum::<f64>())
        .unwrap_or(0.0)
}

/// `Δt Σ_t (𝓜θ_t - v_t)ᵀ 𝓜 ∂θ_t/∂ε`.
pub fn grad_objective_standard(
    traj: &Trajectory,
    sens: &SensitivityTrajectory,
    measurement: &DMatrix<f64>,
    data: &DMatrix<f64>,
    dt: f64,
) -> [f64; 2] {
    let mut g = DVector::zeros(2);
    for t in 1..traj.theta.len() {
        let miss = measurement * &traj.theta[t] - data.column(t);
        g += (measurement * &sens.dtheta[t]).transpose() * miss;
    }
    [dt * g[0], dt * g[1]]
}

/// `Δt Σ_t λ_tᵀ ∂λ_t/∂ε`.
pub fn grad_objective_ecfm(traj: &Trajectory, sens: &SensitivityTrajectory, dt: f64) -> Result<[f64; 2]> {
    let (Some(lam), Some(dlam)) = (traj.lambda.as_ref(), sens.dlambda.as_ref()) else {
        return Err(Error::InvalidArgument("constraint-force gradient needs λ and ∂λ/∂ε".into()));
    };
    let mut g = DVector::zeros(2);
    for t in 1..lam.len() {
        g += dlam[t].transpose() * &lam[t];
    }
    Ok([dt * g[0], dt * g[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisFamily;
    use crate::linalg::Tensor3;
    use crate::operators::assemble_burgers;
    use crate::solvers::{march_burgers_ecfm, march_burgers_standard, project_initial_condition, NewtonConfig};
    use std::f64::consts::PI;

    const TIGHT: NewtonConfig = NewtonConfig {
        tol: 1e-11,
        max_iters: 50,
    };

    fn setup(n: usize, p: usize) -> (DiscreteOperatorSet, TimeGrid, DVector<f64>) {
        let grid = TimeGrid::new(2.0, p).unwrap();
        let ops = assemble_burgers(
            &BasisFamily::Sine1D { count: n },
            &BasisFamily::Hat1D { half_width: 0.2 },
            &[0.2, 0.4, 0.6, 0.8],
            |x, t| (2.0 * PI * x).sin() * (2.0 * PI * t).sin(),
            &grid,
        )
        .unwrap();
        let th0 = project_initial_condition(&BasisFamily::Sine1D { count: n }, |x| (2.0 * PI * x).sin()).unwrap();
        (ops, grid, th0)
    }

    #[test]
    fn pure_mass_dynamics_ignore_viscosity() {
        let (mut ops, grid, th0) = setup(6, 10);
        ops.stiffness = DMatrix::zeros(6, 6);
        ops.advection = Tensor3::zeros(6, 6, 6);
        let tr = march_burgers_standard(&ops, &grid, [1.5, 1.0], &th0, &TIGHT).unwrap();
        let s = march_sensitivity_standard(&ops, &grid, [1.5, 1.0], &tr).unwrap();
        assert!(s.dtheta.iter().all(|d| d.column(0).amax() == 0.0));
    }

    #[test]
    fn linear_source_sensitivity_is_unit_source_trajectory() {
        let (mut ops, grid, _) = setup(6, 10);
        ops.advection = Tensor3::zeros(6, 6, 6);
        let eps = [1.2, 0.7];
        let th0 = DVector::from_fn(6, |i, _| 0.1 * i as f64);
        let tr = march_burgers_standard(&ops, &grid, eps, &th0, &TIGHT).unwrap();
        let s = march_sensitivity_standard(&ops, &grid, eps, &tr).unwrap();
        let unit = march_burgers_standard(&ops, &grid, [eps[0], 1.0], &DVector::zeros(6), &TIGHT).unwrap();
        for (d, u) in s.dtheta.iter().zip(&unit.theta) {
            assert!((d.column(1) - u).amax() < 1e-9);
        }
    }

    #[test]
    fn standard_sensitivity_matches_finite_differences() {
        let (ops, grid, th0) = setup(16, 40);
        let eps = [1.6, 0.9];
        let tr = march_burgers_standard(&ops, &grid, eps, &th0, &TIGHT).unwrap();
        let s = march_sensitivity_standard(&ops, &grid, eps, &tr).unwrap();
        let d = 1e-4;
        for k in 0..2 {
            let mut ep = eps;
            let mut em = eps;
            ep[k] += d;
            em[k] -= d;
            let p = march_burgers_standard(&ops, &grid, ep, &th0, &TIGHT).unwrap();
            let m = march_burgers_standard(&ops, &grid, em, &th0, &TIGHT).unwrap();
            let fd = (&p.theta[40] - &m.theta[40]) / (2.0 * d);
            let an = s.dtheta[40].column(k);
            assert!((&fd - an).norm() <= 1e-3 * fd.norm(), "{k}");
        }
    }

    #[test]
    fn ecfm_sensitivity_satisfies_constraint_and_finite_differences() {
        let (ops, grid, th0) = setup(16, 40);
        let data = march_burgers_standard(&ops, &grid, [1.75, 1.0], &th0, &TIGHT)
            .unwrap()
            .measure(&ops.measurement);
        for eps in [[1.75, 1.0], [1.5, 0.8]] {
            let tr = march_burgers_ecfm(&ops, &grid, eps, &th0, &data, &TIGHT).unwrap();
            let s = march_sensitivity_ecfm(&ops, &grid, eps, &tr).unwrap();
            for d in &s.dtheta {
                assert!((&ops.measurement * d).amax() < 1e-10);
            }
            let dl = s.dlambda.as_ref().unwrap();
            let h = 1e-4;
            for k in 0..2 {
                let mut ep = eps;
                let mut em = eps;
                ep[k] += h;
                em[k] -= h;
                let lp = march_burgers_ecfm(&ops, &grid, ep, &th0, &data, &TIGHT).unwrap().lambda.unwrap();
                let lm = march_burgers_ecfm(&ops, &grid, em, &th0, &data, &TIGHT).unwrap().lambda.unwrap();
                for t in [10, 25, 40] {
                    let fd = (&lp[t] - &lm[t]) / (2.0 * h);
                    assert!((&fd - dl[t].column(k)).norm() <= 1e-3 * fd.norm().max(1e-8), "{eps:?} {k} {t}");
                }
            }
        }
    }

    #[test]
    fn ecfm_without_constraints_degenerates_to_standard() {
        let (mut ops, grid, th0) = setup(8, 10);
        ops.constraint = DMatrix::zeros(8, 0);
        ops.measurement = DMatrix::zeros(0, 8);
        let eps = [1.4, 1.1];
        let tr = march_burgers_standard(&ops, &grid, eps, &th0, &TIGHT).unwrap();
        let data = DMatrix::zeros(0, 11);
        let ec = march_burgers_ecfm(&ops, &grid, eps, &th0, &data, &TIGHT).unwrap();
        let a = march_sensitivity_standard(&ops, &grid, eps, &tr).unwrap();
        let b = march_sensitivity_ecfm(&ops, &grid, eps, &ec).unwrap();
        for (x, y) in a.dtheta.iter().zip(&b.dtheta) {
            assert!((x - y).amax() < 1e-10);
        }
    }

    #[test]
    fn gradients_match_objective_finite_differences() {
        let (ops, grid, th0) = setup(16, 40);
        let dt = grid.dt();
        let data = march_burgers_standard(&ops, &grid, [1.75, 1.0], &th0, &TIGHT)
            .unwrap()
            .measure(&ops.measurement);
        let eps = [1.4, 0.7];
        let zinv = |e: [f64; 2]| {
            let tr = march_burgers_standard(&ops, &grid, e, &th0, &TIGHT).unwrap();
            objective_standard(&tr, &ops.measurement, &data, dt)
        };
        let zec = |e: [f64; 2]| {
            let tr = march_burgers_ecfm(&ops, &grid, e, &th0, &data, &TIGHT).unwrap();
            objective_ecfm(&tr, dt)
        };
        let tr = march_burgers_standard(&ops, &grid, eps, &th0, &TIGHT).unwrap();
        let s = march_sensitivity_standard(&ops, &grid, eps, &tr).unwrap();
        let g_inv = grad_objective_standard(&tr, &s, &ops.measurement, &data, dt);
        let tr = march_burgers_ecfm(&ops, &grid, eps, &th0, &data, &TIGHT).unwrap();
        let s = march_sensitivity_ecfm(&ops, &grid, eps, &tr).unwrap();
        let g_ec = grad_objective_ecfm(&tr, &s, dt).unwrap();
        let h = 1e-4;
        for k in 0..2 {
            let mut ep = eps;
            let mut em = eps;
            ep[k] += h;
            em[k] -= h;
            let fd = (zinv(ep) - zinv(em)) / (2.0 * h);
            assert!((fd - g_inv[k]).abs() <= 1e-3 * fd.abs(), "inv {k}: {fd} {}", g_inv[k]);
            let fd = (zec(ep) - zec(em)) / (2.0 * h);
            assert!((fd - g_ec[k]).abs() <= 1e-3 * fd.abs(), "ecfm {k}: {fd} {}", g_ec[k]);
        }
    }

    #[test]
    fn gradients_vanish_at_consistent_fit() {
        let (ops, grid, th0) = setup(10, 20);
        let dt = grid.dt();
        let tr = march_burgers_standard(&ops, &grid, [1.75, 1.0], &th0, &TIGHT).unwrap();
        let data = tr.measure(&ops.measurement);
        let s = march_sensitivity_standard(&ops, &grid, [1.75, 1.0], &tr).unwrap();
        let g = grad_objective_standard(&tr, &s, &ops.measurement, &data, dt);
        assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
        // the explicit Δt factor scales the gradient linearly
        let off = data.map(|v| v + 0.1);
        let g1 = grad_objective_standard(&tr, &s, &ops.measurement, &off, dt);
        let g2 = grad_objective_standard(&tr, &s, &ops.measurement, &off, 2.0 * dt);
        assert!((g2[1] - 2.0 * g1[1]).abs() < 1e-12 * g1[1].abs());
    }

    #[test]
    fn linear_ecfm_gradient_sign_follows_source_mismatch() {
        let (mut ops, grid, th0) = setup(10, 20);
        ops.advection = Tensor3::zeros(10, 10, 10);
        let dt = grid.dt();
        let grad_at = |truth: f64| {
            let data = march_burgers_standard(&ops, &grid, [1.5, truth], &th0, &TIGHT)
                .unwrap()
                .measure(&ops.measurement);
            let tr = march_burgers_ecfm(&ops, &grid, [1.5, 1.0], &th0, &data, &TIGHT).unwrap();
            let s = march_sensitivity_ecfm(&ops, &grid, [1.5, 1.0], &tr).unwrap();
            grad_objective_ecfm(&tr, &s, dt).unwrap()[1]
        };
        assert!(grad_at(1.3) < 0.0);
        assert!(grad_at(0.7) > 0.0);
    }
}
