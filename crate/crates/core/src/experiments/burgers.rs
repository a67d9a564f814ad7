//! Viscous Burgers with unknown viscosity exponent and source scale.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use super::{hessian_condition, ExperimentConfig, ExperimentKind, ExperimentReport, RunOutput};
use crate::basis::BasisFamily;
use crate::error::Result;
use crate::io::CsvTable;
use crate::operators::{assemble_burgers, DiscreteOperatorSet};
use crate::optimize::adam_minimize;
use crate::sensitivity::{
    grad_objective_ecfm, grad_objective_standard, march_sensitivity_ecfm, march_sensitivity_standard, objective_ecfm,
    objective_standard,
};
use crate::solvers::{march_burgers_ecfm, march_burgers_standard, project_initial_condition, NewtonConfig, TimeGrid};

/// Relative step of the finite-difference Hessian at the optimum.
pub const HESSIAN_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formulation {
    Standard,
    Ecfm,
}

impl Formulation {
    pub fn of(kind: ExperimentKind) -> Self {
        if kind == ExperimentKind::BurgersEcfm {
            Self::Ecfm
        } else {
            Self::Standard
        }
    }
}

pub fn initial_condition(x: f64) -> f64 {
    (TAU * x).sin()
}

pub fn source(x: f64, t: f64) -> f64 {
    (TAU * x).sin() * (TAU * t).sin()
}

/// `ν = 10^(-ε₁)`.
pub fn viscosity(eps1: f64) -> f64 {
    10f64.powf(-eps1)
}

pub struct BurgersSetup {
    pub ops: DiscreteOperatorSet,
    pub grid: TimeGrid,
    pub theta0: DVector<f64>,
    pub points: Vec<f64>,
    pub truth: [f64; 2],
    pub newton: NewtonConfig,
}

impl BurgersSetup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let d = &config.discretization;
        let basis = BasisFamily::Sine1D { count: d.basis_count };
        let grid = TimeGrid::new(d.t_final, d.time_steps)?;
        let c = d.measurement_count;
        let points: Vec<f64> = (1..=c).map(|i| i as f64 / (c + 1) as f64).collect();
        let ops = assemble_burgers(
            &basis,
            &BasisFamily::Hat1D {
                half_width: config.physics.hat_half_width,
            },
            &points,
            source,
            &grid,
        )?;
        Ok(Self {
            theta0: project_initial_condition(&basis, initial_condition)?,
            ops,
            grid,
            points,
            truth: [config.physics.eps_truth[0], config.physics.eps_truth[1]],
            newton: config.optimizer.newton,
        })
    }

    /// `𝓜θ_t` of the truth solve at every time node, C×(P+1).
    pub fn generate_data(&self) -> Result<DMatrix<f64>> {
        let traj = march_burgers_standard(&self.ops, &self.grid, self.truth, &self.theta0, &self.newton)?;
        Ok(traj.measure(&self.ops.measurement))
    }

    pub fn objective(&self, data: &DMatrix<f64>, eps: [f64; 2], form: Formulation) -> Result<f64> {
        let dt = self.grid.dt();
        Ok(match form {
            Formulation::Standard => {
                let traj = march_burgers_standard(&self.ops, &self.grid, eps, &self.theta0, &self.newton)?;
                objective_standard(&traj, &self.ops.measurement, data, dt)
            }
            Formulation::Ecfm => {
                let traj = march_burgers_ecfm(&self.ops, &self.grid, eps, &self.theta0, data, &self.newton)?;
                objective_ecfm(&traj, dt)
            }
        })
    }

    pub fn objective_and_gradient(&self, data: &DMatrix<f64>, eps: [f64; 2], form: Formulation) -> Result<(f64, [f64; 2])> {
        let dt = self.grid.dt();
        match form {
            Formulation::Standard => {
                let traj = march_burgers_standard(&self.ops, &self.grid, eps, &self.theta0, &self.newton)?;
                let sens = march_sensitivity_standard(&self.ops, &self.grid, eps, &traj)?;
                Ok((
                    objective_standard(&traj, &self.ops.measurement, data, dt),
                    grad_objective_standard(&traj, &sens, &self.ops.measurement, data, dt),
                ))
            }
            Formulation::Ecfm => {
                let traj = march_burgers_ecfm(&self.ops, &self.grid, eps, &self.theta0, data, &self.newton)?;
                let sens = march_sensitivity_ecfm(&self.ops, &self.grid, eps, &traj)?;
                Ok((objective_ecfm(&traj, dt), grad_objective_ecfm(&traj, &sens, dt)?))
            }
        }
    }
}

pub fn data_table(setup: &BurgersSetup, data: &DMatrix<f64>) -> Result<CsvTable> {
    CsvTable::from_matrix("t", &setup.grid.nodes(), "v", &data.transpose())
}

pub fn run_burgers(config: &ExperimentConfig) -> Result<RunOutput> {
    let setup = BurgersSetup::new(config)?;
    let data = setup.generate_data()?;
    let form = Formulation::of(config.experiment);
    let opt = adam_minimize(
        |x| {
            let (f, g) = setup.objective_and_gradient(&data, [x[0], x[1]], form)?;
            Ok((f, g.to_vec()))
        },
        &config.optimizer.initial,
        &config.optimizer.adam,
    )?;
    let eps = [opt.x[0], opt.x[1]];
    let cond = hessian_condition(|x| setup.objective(&data, [x[0], x[1]], form), &opt.x, HESSIAN_STEP)?;

    let mut metrics = BTreeMap::new();
    metrics.insert("eps1_error".into(), (eps[0] - setup.truth[0]).abs());
    metrics.insert("eps2_error".into(), (eps[1] - setup.truth[1]).abs());
    metrics.insert("viscosity".into(), viscosity(eps[0]));
    metrics.insert("final_objective".into(), opt.final_objective());

    let mut tables = vec![("data.csv".to_string(), data_table(&setup, &data)?)];
    let mut trace = CsvTable::new(&["epoch", "objective"]);
    for (k, f) in opt.objective_trace.iter().enumerate() {
        trace.push(vec![k as f64, *f])?;
    }
    tables.push(("trace.csv".into(), trace));

    let mut forces = vec![];
    if form == Formulation::Ecfm {
        let traj = march_burgers_ecfm(&setup.ops, &setup.grid, eps, &setup.theta0, &data, &setup.newton)?;
        let lam = traj.lambda.unwrap_or_default();
        let c = setup.points.len();
        let m = DMatrix::from_fn(lam.len(), c, |t, i| lam[t][i]);
        forces = m.row(m.nrows() - 1).iter().copied().collect();
        tables.push(("forces.csv".into(), CsvTable::from_matrix("t", &setup.grid.nodes(), "lambda", &m)?));
    }

    Ok(RunOutput {
        report: ExperimentReport {
            experiment: config.experiment,
            config: config.clone(),
            recovered_params: opt.x.clone(),
            objective_trace: opt.objective_trace.clone(),
            constraint_violation_trace: opt.constraint_violation_trace.clone(),
            final_constraint_forces: forces,
            error_metrics: metrics,
            hessian_condition: Some(cond),
            converged: opt.converged,
            iterations: opt.iterations,
            flags: vec![],
            wall_time: 0.0,
        },
        tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(kind);
        c.discretization.basis_count = 12;
        c.discretization.time_steps = 20;
        c
    }

    #[test]
    fn data_starts_at_the_initial_condition() {
        let s = BurgersSetup::new(&ExperimentConfig::defaults(ExperimentKind::BurgersInv)).unwrap();
        let d = s.generate_data().unwrap();
        for (i, x) in [0.2, 0.4, 0.6, 0.8].iter().enumerate() {
            assert!((d[(i, 0)] - (TAU * x).sin()).abs() < 1e-12);
        }
        assert!((viscosity(1.75) - 1.78e-2).abs() < 5e-5);
    }

    #[test]
    fn truth_is_a_zero_of_both_objectives() {
        for kind in [ExperimentKind::BurgersInv, ExperimentKind::BurgersEcfm] {
            let s = BurgersSetup::new(&small(kind)).unwrap();
            let d = s.generate_data().unwrap();
            let z = s.objective(&d, s.truth, Formulation::of(kind)).unwrap();
            assert!(z <= 1e-10, "{kind:?}: {z}");
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        for kind in [ExperimentKind::BurgersInv, ExperimentKind::BurgersEcfm] {
            let s = BurgersSetup::new(&small(kind)).unwrap();
            let d = s.generate_data().unwrap();
            let form = Formulation::of(kind);
            let e = [1.4, 0.7];
            let (_, g) = s.objective_and_gradient(&d, e, form).unwrap();
            for k in 0..2 {
                let h = 1e-5;
                let mut ep = e;
                let mut em = e;
                ep[k] += h;
                em[k] -= h;
                let fd = (s.objective(&d, ep, form).unwrap() - s.objective(&d, em, form).unwrap()) / (2.0 * h);
                assert!((g[k] - fd).abs() <= 1e-4 * fd.abs().max(1e-8), "{kind:?} {k}: {} vs {fd}", g[k]);
            }
        }
    }

    #[test]
    fn regenerated_data_is_bit_identical() {
        let c = small(ExperimentKind::BurgersInv);
        let a = BurgersSetup::new(&c).unwrap().generate_data().unwrap();
        let b = BurgersSetup::new(&c).unwrap().generate_data().unwrap();
        assert_eq!(a, b);
    }
}
