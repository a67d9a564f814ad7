//! Static Fisher-KPP with a misspecified sine-series source and noisy
//! point measurements.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{ExperimentConfig, ExperimentKind, ExperimentReport, RunOutput};
use crate::basis::BasisFamily;
use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::operators::{assemble_kpp, kpp_source_vector, residual_kpp, residual_kpp_jac, DiscreteOperatorSet};
use crate::optimize::{solve_nlp, NlpProblem};
use crate::solvers::{newton_solve, solve_kpp_equilibrium, NewtonConfig};
use crate::stats::{confidence_bounds, sample_moments, sample_noise, ConfidenceBounds, NoiseModel};

/// Cells per axis of the midpoint grid used for field and source errors.
pub const EVAL_GRID: usize = 200;

/// Edges of the inner square carrying the truth source.
pub const SQUARE: [f64; 2] = [0.25, 0.75];

const TRUTH_NEWTON: NewtonConfig = NewtonConfig {
    tol: 1e-11,
    max_iters: 50,
};

#[derive(Clone, Debug)]
pub enum TruthSource {
    /// `level` on the inner square, zero elsewhere.
    Square { level: f64 },
    /// Coefficients on the source basis; the model is then consistent.
    Sines(DVector<f64>),
}

pub struct KppSetup {
    pub ops: DiscreteOperatorSet,
    pub per_axis: usize,
    pub source_per_axis: usize,
    pub points: Vec<[f64; 2]>,
    pub rbf_width: f64,
    pub truth: TruthSource,
    pub truth_theta: DVector<f64>,
    pub newton: NewtonConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KppData {
    pub values: DVector<f64>,
    /// `𝓜θ` of the truth solve, before noise.
    pub clean: DVector<f64>,
}

fn grid_points(per_axis: usize) -> Vec<[f64; 2]> {
    let h = 1.0 / (per_axis + 1) as f64;
    (1..=per_axis)
        .flat_map(|i| (1..=per_axis).map(move |j| [i as f64 * h, j as f64 * h]))
        .collect()
}

/// `S[(q, a)] = sin((a+1)π x_q)`.
fn sine_table(xs: &[f64], count: usize) -> DMatrix<f64> {
    DMatrix::from_fn(xs.len(), count, |q, a| ((a + 1) as f64 * PI * xs[q]).sin())
}

fn midpoints() -> Vec<f64> {
    (0..EVAL_GRID).map(|k| (k as f64 + 0.5) / EVAL_GRID as f64).collect()
}

/// Coefficient vector reshaped so that `S Θ Sᵀ` is the field on a grid.
fn coefficient_matrix(theta: &DVector<f64>, per_axis: usize) -> DMatrix<f64> {
    DMatrix::from_fn(per_axis, per_axis, |a, b| theta[a * per_axis + b])
}

fn l1(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

impl KppSetup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        Self::with_truth(
            config,
            TruthSource::Square {
                level: config.physics.source_level,
            },
        )
    }

    pub fn with_truth(config: &ExperimentConfig, truth: TruthSource) -> Result<Self> {
        let d = &config.discretization;
        let (p, ps) = (d.basis_count, d.source_count);
        let basis = BasisFamily::TensorSine2D { per_axis: p };
        let points = grid_points(d.measurement_count);
        let coords: Vec<Vec<f64>> = points.iter().map(|c| c.to_vec()).collect();
        let ops = assemble_kpp(
            &basis,
            &BasisFamily::TensorSine2D { per_axis: ps },
            &BasisFamily::GaussianRbf {
                width: config.physics.rbf_width,
            },
            &coords,
            config.physics.diffusion,
        )?;
        let force = match &truth {
            TruthSource::Square { level } => {
                let level = *level;
                let inside = |x: f64| (SQUARE[0]..=SQUARE[1]).contains(&x);
                kpp_source_vector(&basis, move |x, y| if inside(x) && inside(y) { level } else { 0.0 }, &SQUARE)?
            }
            TruthSource::Sines(eps) => {
                if eps.len() != ps * ps {
                    return Err(Error::DimensionMismatch(format!(
                        "{} source coefficients for {} source modes",
                        eps.len(),
                        ps * ps
                    )));
                }
                &ops.source * eps
            }
        };
        let zero = DVector::zeros(ops.source.ncols());
        let truth_theta = newton_solve(
            |t| Ok(residual_kpp(&ops, t, &zero, None)? - &force),
            |t| Ok(residual_kpp_jac(&ops, t)),
            DVector::zeros(p * p),
            &TRUTH_NEWTON,
        )?
        .x;
        Ok(Self {
            ops,
            per_axis: p,
            source_per_axis: ps,
            points,
            rbf_width: config.physics.rbf_width,
            truth,
            truth_theta,
            newton: config.optimizer.newton,
        })
    }

    pub fn with_data(config: &ExperimentConfig) -> Result<(Self, KppData)> {
        let setup = Self::new(config)?;
        let data = setup.measure(config.noise.sigma, config.noise.seed);
        Ok((setup, data))
    }

    pub fn measure(&self, sigma: f64, seed: u64) -> KppData {
        let clean = &self.ops.measurement * &self.truth_theta;
        let noise = sample_noise(&NoiseModel { sigma, seed }, clean.len());
        KppData {
            values: &clean + DVector::from_vec(noise),
            clean,
        }
    }

    pub fn source_count(&self) -> usize {
        self.ops.source.ncols()
    }

    pub fn basis_size(&self) -> usize {
        self.ops.basis_size()
    }

    /// Least-squares θ from the data, least-squares ε from the residual of
    /// that θ, then θ from a forward solve at that ε.
    pub fn initial_guess(&self, data: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let lsq = |a: &DMatrix<f64>, b: &DVector<f64>| {
            a.clone()
                .svd(true, true)
                .solve(b, 1e-12)
                .map_err(|e| Error::LinearAlgebraFailure(e.to_string()))
        };
        let theta_fit = lsq(&self.ops.measurement, data)?;
        let zero = DVector::zeros(self.source_count());
        let load = residual_kpp(&self.ops, &theta_fit, &zero, None)?;
        let eps = lsq(&self.ops.source, &load)?;
        let theta = solve_kpp_equilibrium(&self.ops, &eps, None, theta_fit, &self.newton)?;
        Ok((eps, theta))
    }

    /// Solution field on the midpoint grid, rows along `x₁`.
    pub fn field(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let s = sine_table(&midpoints(), self.per_axis);
        &s * coefficient_matrix(theta, self.per_axis) * s.transpose()
    }

    /// `b(x; ε)` on the midpoint grid.
    pub fn source_field(&self, eps: &DVector<f64>) -> DMatrix<f64> {
        let s = sine_table(&midpoints(), self.source_per_axis);
        &s * coefficient_matrix(eps, self.source_per_axis) * s.transpose()
    }

    /// `Σ λ_i Γ(x - x_i)` on the midpoint grid.
    pub fn force_field(&self, lambda: &DVector<f64>) -> DMatrix<f64> {
        let xs = midpoints();
        let w = self.rbf_width;
        let mut out = DMatrix::zeros(xs.len(), xs.len());
        for (c, l) in self.points.iter().zip(lambda.iter()) {
            let gx = DVector::from_fn(xs.len(), |q, _| (-w * (xs[q] - c[0]).powi(2)).exp());
            let gy = DVector::from_fn(xs.len(), |q, _| (-w * (xs[q] - c[1]).powi(2)).exp());
            out += (l * w / PI) * &gx * gy.transpose();
        }
        out
    }

    pub fn truth_source_field(&self) -> DMatrix<f64> {
        match &self.truth {
            TruthSource::Square { level } => {
                let xs = midpoints();
                let inside = |x: f64| (SQUARE[0]..=SQUARE[1]).contains(&x);
                DMatrix::from_fn(xs.len(), xs.len(), |i, j| {
                    if inside(xs[i]) && inside(xs[j]) {
                        *level
                    } else {
                        0.0
                    }
                })
            }
            TruthSource::Sines(eps) => self.source_field(eps),
        }
    }

    /// `∫|u - w| / ∫|u|` on the midpoint grid.
    pub fn field_error(&self, theta: &DVector<f64>) -> f64 {
        let u = self.field(&self.truth_theta);
        l1(&(&u - self.field(theta))) / l1(&u)
    }
}

pub fn data_table(setup: &KppSetup, data: &KppData) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["x1", "x2", "value", "clean"]);
    for (k, p) in setup.points.iter().enumerate() {
        t.push(vec![p[0], p[1], data.values[k], data.clean[k]])?;
    }
    Ok(t)
}

/// `min ½‖𝓜θ - v‖²` s.t. `R(θ; ε) = 0`, over `x = (ε, θ)`.
pub struct KppInverse<'a> {
    pub setup: &'a KppSetup,
    pub data: &'a DVector<f64>,
}

impl KppInverse<'_> {
    fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let m = self.setup.source_count();
        (x.rows(0, m).into_owned(), x.rows(m, x.len() - m).into_owned())
    }
}

impl NlpProblem for KppInverse<'_> {
    fn dim(&self) -> usize {
        self.setup.source_count() + self.setup.basis_size()
    }

    fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (_, theta) = self.split(x);
        let meas = &self.setup.ops.measurement;
        let e = meas * &theta - self.data;
        let mut g = DVector::zeros(x.len());
        g.rows_mut(self.setup.source_count(), theta.len())
            .copy_from(&(meas.transpose() * &e));
        Ok((0.5 * e.norm_squared(), g))
    }

    fn equalities(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (eps, theta) = self.split(x);
        let ops = &self.setup.ops;
        let (m, n) = (eps.len(), theta.len());
        let mut j = DMatrix::zeros(n, m + n);
        j.view_mut((0, 0), (n, m)).copy_from(&(-&ops.source));
        j.view_mut((0, m), (n, n)).copy_from(&residual_kpp_jac(ops, &theta));
        Ok((residual_kpp(ops, &theta, &eps, None)?, j))
    }

    fn lagrangian_hessian(&self, x: &DVector<f64>, y_eq: &DVector<f64>, _y: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        let m = self.setup.source_count();
        let n = self.setup.basis_size();
        let meas = &self.setup.ops.measurement;
        let mut h = DMatrix::zeros(x.len(), x.len());
        let block = meas.transpose() * meas - self.setup.ops.advection.weighted_hessian(y_eq);
        h.view_mut((m, m), (n, n)).copy_from(&block);
        Some(Ok(h))
    }
}

/// `min ½‖λ‖²` s.t. `R̃(λ, θ; ε) = 0` and the sample mean and variance of
/// the discrepancy inside their confidence bands, over `x = (ε, λ, θ)`.
///
/// The inequalities are divided by the standard deviation of the sample
/// mean and by `σ²` so all four are of order one.
pub struct KppEcfm<'a> {
    pub setup: &'a KppSetup,
    pub data: &'a DVector<f64>,
    pub bounds: ConfidenceBounds,
    pub sigma: f64,
}

pub const INEQUALITY_NAMES: [&str; 4] = ["mean >= l1", "mean <= l2", "variance >= p1", "variance <= p2"];

impl KppEcfm<'_> {
    fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let m = self.setup.source_count();
        let c = self.setup.points.len();
        let n = self.setup.basis_size();
        (
            x.rows(0, m).into_owned(),
            x.rows(m, c).into_owned(),
            x.rows(m + c, n).into_owned(),
        )
    }

    fn scales(&self) -> (f64, f64) {
        let c = self.setup.points.len() as f64;
        (c.sqrt() / self.sigma, 1.0 / (self.sigma * self.sigma))
    }

    /// `∇²_θ` of the sample variance, `2𝓜ᵀ(I - 11ᵀ/C)𝓜/(C-1)`.
    fn variance_hessian(&self) -> DMatrix<f64> {
        let meas = &self.setup.ops.measurement;
        let c = meas.nrows() as f64;
        let col_sum = meas.row_sum();
        (meas.transpose() * meas - col_sum.transpose() * &col_sum / c) * (2.0 / (c - 1.0))
    }
}

impl NlpProblem for KppEcfm<'_> {
    fn dim(&self) -> usize {
        self.setup.source_count() + self.setup.points.len() + self.setup.basis_size()
    }

    fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (eps, lambda, _) = self.split(x);
        let mut g = DVector::zeros(x.len());
        g.rows_mut(eps.len(), lambda.len()).copy_from(&lambda);
        Ok((0.5 * lambda.norm_squared(), g))
    }

    fn equalities(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (eps, lambda, theta) = self.split(x);
        let ops = &self.setup.ops;
        let (m, c, n) = (eps.len(), lambda.len(), theta.len());
        let mut j = DMatrix::zeros(n, m + c + n);
        j.view_mut((0, 0), (n, m)).copy_from(&(-&ops.source));
        j.view_mut((0, m), (n, c)).copy_from(&(-&ops.constraint));
        j.view_mut((0, m + c), (n, n)).copy_from(&residual_kpp_jac(ops, &theta));
        Ok((residual_kpp(ops, &theta, &eps, Some(&lambda))?, j))
    }

    fn inequalities(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (eps, lambda, theta) = self.split(x);
        let meas = &self.setup.ops.measurement;
        let e = meas * &theta - self.data;
        let (mean, var) = sample_moments(e.as_slice())?;
        let c = e.len() as f64;
        let d_mean = meas.row_sum() / c;
        let centered = e.add_scalar(-mean);
        let d_var = centered.transpose() * meas * (2.0 / (c - 1.0));
        let (sm, sv) = self.scales();
        let b = &self.bounds;
        let vals = DVector::from_vec(vec![
            sm * (mean - b.l1),
            sm * (b.l2 - mean),
            sv * (var - b.p1),
            sv * (b.p2 - var),
        ]);
        let off = eps.len() + lambda.len();
        let mut j = DMatrix::zeros(4, x.len());
        for (row, s, d) in [(0, sm, &d_mean), (1, -sm, &d_mean), (2, sv, &d_var), (3, -sv, &d_var)] {
            j.view_mut((row, off), (1, theta.len())).copy_from(&(d * s));
        }
        Ok((vals, j))
    }

    fn lagrangian_hessian(&self, x: &DVector<f64>, y_eq: &DVector<f64>, y_ineq: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        let m = self.setup.source_count();
        let c = self.setup.points.len();
        let n = self.setup.basis_size();
        let (_, sv) = self.scales();
        let mut h = DMatrix::zeros(x.len(), x.len());
        for i in 0..c {
            h[(m + i, m + i)] = 1.0;
        }
        let var_weight = if y_ineq.len() == 4 { sv * (y_ineq[2] - y_ineq[3]) } else { 0.0 };
        let block = -self.setup.ops.advection.weighted_hessian(y_eq) - self.variance_hessian() * var_weight;
        h.view_mut((m + c, m + c), (n, n)).copy_from(&block);
        Some(Ok(h))
    }
}

fn name_constraints(e: Error) -> Error {
    match e {
        Error::Infeasible(msg) => {
            let mut msg = msg;
            for (k, name) in INEQUALITY_NAMES.iter().enumerate() {
                msg = msg.replace(&format!("ineq[{k}]"), name);
            }
            Error::Infeasible(msg.replace("eq[", "equilibrium["))
        }
        other => other,
    }
}

pub fn run_kpp(config: &ExperimentConfig) -> Result<RunOutput> {
    let (setup, data) = KppSetup::with_data(config)?;
    run_kpp_with(config, &setup, &data)
}

/// Solves either program against given data; `config.experiment` picks it.
pub fn run_kpp_with(config: &ExperimentConfig, setup: &KppSetup, data: &KppData) -> Result<RunOutput> {
    let sigma = config.noise.sigma;
    let c = setup.points.len();
    let bounds = if sigma > 0.0 {
        Some(confidence_bounds(sigma, c, config.noise.alpha)?)
    } else {
        None
    };
    let (eps0, theta0) = setup.initial_guess(&data.values)?;
    let (m, n) = (setup.source_count(), setup.basis_size());
    let ecfm = config.experiment == ExperimentKind::KppEcfm;

    let opt = if ecfm {
        let bounds = bounds.ok_or_else(|| Error::Config("kpp_ecfm needs sigma > 0".into()))?;
        let problem = KppEcfm {
            setup,
            data: &data.values,
            bounds,
            sigma,
        };
        let mut x0 = DVector::zeros(problem.dim());
        x0.rows_mut(0, m).copy_from(&eps0);
        x0.rows_mut(m + c, n).copy_from(&theta0);
        solve_nlp(&problem, &x0, &config.optimizer.nlp).map_err(name_constraints)?
    } else {
        let problem = KppInverse {
            setup,
            data: &data.values,
        };
        let mut x0 = DVector::zeros(problem.dim());
        x0.rows_mut(0, m).copy_from(&eps0);
        x0.rows_mut(m, n).copy_from(&theta0);
        solve_nlp(&problem, &x0, &config.optimizer.nlp).map_err(name_constraints)?
    };

    let x = DVector::from_vec(opt.x.clone());
    let eps = x.rows(0, m).into_owned();
    let lambda = if ecfm { x.rows(m, c).into_owned() } else { DVector::zeros(c) };
    let theta = x.rows(x.len() - n, n).into_owned();

    let e = &setup.ops.measurement * &theta - &data.values;
    let (mean, var) = sample_moments(e.as_slice())?;
    let residual = residual_kpp(&setup.ops, &theta, &eps, ecfm.then_some(&lambda))?;

    let truth_src = setup.truth_source_field();
    let b = setup.source_field(&eps);
    let forces = setup.force_field(&lambda);
    let src_norm = l1(&truth_src).max(f64::MIN_POSITIVE);

    let mut metrics = BTreeMap::new();
    metrics.insert("field_error".into(), setup.field_error(&theta));
    metrics.insert("source_error".into(), l1(&(&b - &truth_src)) / src_norm);
    metrics.insert("discrepancy_mean".into(), mean);
    metrics.insert("discrepancy_variance".into(), var);
    metrics.insert("equilibrium_residual".into(), residual.norm());
    metrics.insert("final_objective".into(), opt.final_objective());
    metrics.insert("lambda_norm".into(), lambda.norm());
    metrics.insert("data_norm".into(), data.values.norm());
    if ecfm {
        metrics.insert("source_plus_forces_error".into(), l1(&(&b + &forces - &truth_src)) / src_norm);
    }
    let mut flags = vec![];
    if let Some(bd) = bounds {
        for (k, v) in [("l1", bd.l1), ("l2", bd.l2), ("p1", bd.p1), ("p2", bd.p2)] {
            metrics.insert(format!("bound_{k}"), v);
        }
        let tol = config.optimizer.nlp.feasibility_tol;
        let inside = mean >= bd.l1 - tol && mean <= bd.l2 + tol && var >= bd.p1 - tol && var <= bd.p2 + tol;
        if !inside {
            flags.push("discrepancy moments outside their confidence band".into());
        }
    }
    if !opt.converged {
        flags.push("nlp stopped at the iteration limit before stationarity".into());
    }

    let xs = midpoints();
    let u = setup.field(&setup.truth_theta);
    let w = setup.field(&theta);
    let mut field = CsvTable::new(&["x1", "x2", "truth", "recovered", "source", "recovered_source", "forces"]);
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            field.push(vec![xs[i], xs[j], u[(i, j)], w[(i, j)], truth_src[(i, j)], b[(i, j)], forces[(i, j)]])?;
        }
    }
    let mut disc = CsvTable::new(&["x1", "x2", "discrepancy", "lambda"]);
    for (k, p) in setup.points.iter().enumerate() {
        disc.push(vec![p[0], p[1], e[k], lambda[k]])?;
    }
    let mut trace = CsvTable::new(&["iteration", "objective", "violation"]);
    for (k, (f, v)) in opt.objective_trace.iter().zip(&opt.constraint_violation_trace).enumerate() {
        trace.push(vec![k as f64, *f, *v])?;
    }

    Ok(RunOutput {
        report: ExperimentReport {
            experiment: config.experiment,
            config: config.clone(),
            recovered_params: eps.iter().copied().collect(),
            objective_trace: opt.objective_trace.clone(),
            constraint_violation_trace: opt.constraint_violation_trace.clone(),
            final_constraint_forces: if ecfm { lambda.iter().copied().collect() } else { vec![] },
            error_metrics: metrics,
            hessian_condition: None,
            converged: opt.converged,
            iterations: opt.iterations,
            flags,
            wall_time: 0.0,
        },
        tables: vec![
            ("data.csv".into(), data_table(setup, data)?),
            ("field.csv".into(), field),
            ("discrepancy.csv".into(), disc),
            ("trace.csv".into(), trace),
        ],
    })
}
