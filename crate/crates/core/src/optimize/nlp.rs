//! Dense SQP for `min f(x)` s.t. `c_E(x) = 0`, `c_I(x) ≥ 0`.
//!
//! Each iteration solves the quadratic subproblem on the full KKT system.
//! The equality block is factorized once; inequality working sets are
//! enumerated through a Schur complement, which is exact for the handful
//! of inequalities this crate needs. Steps are globalized with an ℓ1 merit
//! line search and a second-order correction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::OptResult;
use crate::error::{Error, Result};
use crate::linalg::LuFactor;

/// Upper limit on enumerated inequality working sets (`2^MAX_INEQUALITIES`).
const MAX_INEQUALITIES: usize = 12;

pub trait NlpProblem {
    fn dim(&self) -> usize;

    /// `(f, ∇f)`.
    fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)>;

    /// `(c_E, J_E)`.
    fn equalities(&self, _x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((DVector::zeros(0), DMatrix::zeros(0, self.dim())))
    }

    /// `(c_I, J_I)`, feasible when `c_I ≥ 0`.
    fn inequalities(&self, _x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((DVector::zeros(0), DMatrix::zeros(0, self.dim())))
    }

    /// Hessian of `f - y_Eᵀc_E - y_Iᵀc_I`; `None` selects damped BFGS.
    fn lagrangian_hessian(
        &self,
        _x: &DVector<f64>,
        _y_eq: &DVector<f64>,
        _y_ineq: &DVector<f64>,
    ) -> Option<Result<DMatrix<f64>>> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlpSettings {
    /// Stationarity tolerance, relative to `1 + |f|`.
    pub stationarity_tol: f64,
    pub feasibility_tol: f64,
    pub max_iters: usize,
}

impl Default for NlpSettings {
    fn default() -> Self {
        Self {
            stationarity_tol: 1e-6,
            feasibility_tol: 1e-8,
            max_iters: 200,
        }
    }
}

struct Eval {
    f: f64,
    g: DVector<f64>,
    ce: DVector<f64>,
    je: DMatrix<f64>,
    ci: DVector<f64>,
    ji: DMatrix<f64>,
}

impl Eval {
    fn at(p: &dyn NlpProblem, x: &DVector<f64>) -> Result<Self> {
        let (f, g) = p.objective(x)?;
        let (ce, je) = p.equalities(x)?;
        let (ci, ji) = p.inequalities(x)?;
        let n = x.len();
        if g.len() != n || je.ncols() != n || ji.ncols() != n || je.nrows() != ce.len() || ji.nrows() != ci.len() {
            return Err(Error::DimensionMismatch("problem callbacks disagree on dimensions".into()));
        }
        Ok(Self { f, g, ce, je, ci, ji })
    }

    fn violation(&self) -> f64 {
        let e = self.ce.amax();
        let i = self.ci.iter().fold(0.0f64, |m, c| m.max(-c));
        e.max(i)
    }

    fn l1_violation(&self) -> f64 {
        self.ce.iter().map(|c| c.abs()).sum::<f64>() + self.ci.iter().map(|c| (-c).max(0.0)).sum::<f64>()
    }

    fn merit(&self, rho: f64) -> f64 {
        self.f + rho * self.l1_violation()
    }

    fn is_finite(&self) -> bool {
        self.f.is_finite() && self.ce.iter().all(|v| v.is_finite()) && self.ci.iter().all(|v| v.is_finite())
    }

    /// `∇f - J_Eᵀy_E - J_Iᵀy_I`.
    fn lagrangian_gradient(&self, ye: &DVector<f64>, yi: &DVector<f64>) -> DVector<f64> {
        &self.g - self.je.transpose() * ye - self.ji.transpose() * yi
    }
}

struct QpStep {
    d: DVector<f64>,
    ye: DVector<f64>,
    yi: DVector<f64>,
    working: Vec<usize>,
}

/// Equality-constrained QP plus working-set enumeration over the inequalities.
fn solve_qp(h: &DMatrix<f64>, ev: &Eval, feas_tol: f64) -> Result<QpStep> {
    let n = ev.g.len();
    let (me, mi) = (ev.ce.len(), ev.ci.len());
    if mi > MAX_INEQUALITIES {
        return Err(Error::InvalidArgument(format!(
            "{mi} inequality constraints exceed the enumeration limit {MAX_INEQUALITIES}"
        )));
    }
    let scale = h.amax().max(1.0);
    let mut last_err = None;
    for shift in [0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0] {
        let delta = shift * scale;
        let mut k0 = DMatrix::zeros(n + me, n + me);
        k0.view_mut((0, 0), (n, n)).copy_from(h);
        for i in 0..n {
            k0[(i, i)] += delta;
        }
        k0.view_mut((0, n), (n, me)).copy_from(&(-ev.je.transpose()));
        k0.view_mut((n, 0), (me, n)).copy_from(&ev.je);
        let lu = match LuFactor::new(k0) {
            Ok(lu) => lu,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let mut rhs = DVector::zeros(n + me);
        rhs.rows_mut(0, n).copy_from(&(-&ev.g));
        rhs.rows_mut(n, me).copy_from(&(-&ev.ce));
        let base = lu.solve(&rhs)?;
        let mut cols = DMatrix::zeros(n + me, mi);
        cols.view_mut((0, 0), (n, mi)).copy_from(&ev.ji.transpose());
        let u = lu.solve_matrix(&cols)?;
        let d0 = base.rows(0, n).into_owned();
        let jd0 = &ev.ji * &d0;
        let s_full = &ev.ji * u.rows(0, n);

        // best valid working set, else the least-bad one
        let mut best: Option<(f64, f64, QpStep)> = None;
        for mask in 0u32..(1u32 << mi) {
            let w: Vec<usize> = (0..mi).filter(|a| mask & (1 << a) != 0).collect();
            let yw = if w.is_empty() {
                DVector::zeros(0)
            } else {
                let s = DMatrix::from_fn(w.len(), w.len(), |r, c| s_full[(w[r], w[c])]);
                let r = DVector::from_fn(w.len(), |r, _| -ev.ci[w[r]] - jd0[w[r]]);
                match s.lu().solve(&r) {
                    Some(y) if y.iter().all(|v| v.is_finite()) => y,
                    _ => continue,
                }
            };
            let mut sol = base.clone();
            for (k, a) in w.iter().enumerate() {
                sol += u.column(*a) * yw[k];
            }
            let d = sol.rows(0, n).into_owned();
            let lin = &ev.ci + &ev.ji * &d;
            let mut bad = 0.0f64;
            for a in 0..mi {
                if !w.contains(&a) {
                    bad = bad.max(-lin[a] - feas_tol);
                }
            }
            let ymax = yw.amax().max(1.0);
            for y in yw.iter() {
                bad = bad.max(-y - 1e-10 * ymax);
            }
            let q = ev.g.dot(&d) + 0.5 * d.dot(&(h * &d));
            let mut yi = DVector::zeros(mi);
            for (k, a) in w.iter().enumerate() {
                yi[*a] = yw[k];
            }
            let step = QpStep {
                d,
                ye: sol.rows(n, me).into_owned(),
                yi,
                working: w,
            };
            let better = match &best {
                None => true,
                Some((b, bq, _)) => {
                    let (bad0, b0) = (bad.max(0.0), b.max(0.0));
                    bad0 < b0 || (bad0 == b0 && q < *bq)
                }
            };
            if better {
                best = Some((bad, q, step));
            }
        }
        let Some((_, _, step)) = best else {
            last_err = Some(Error::LinearAlgebraFailure("no solvable working set".into()));
            continue;
        };
        // inertia-free curvature test on the step itself
        let dd = step.d.norm_squared();
        let curv = step.d.dot(&(h * &step.d)) + delta * dd;
        if dd > 0.0 && curv < 1e-12 * scale * dd && shift < 1.0 {
            continue;
        }
        return Ok(step);
    }
    Err(last_err.unwrap_or_else(|| Error::LinearAlgebraFailure("QP regularization exhausted".into())))
}

fn second_order_correction(ev_trial: &Eval, ev: &Eval, working: &[usize]) -> Option<DVector<f64>> {
    let rows = ev.ce.len() + working.len();
    if rows == 0 {
        return None;
    }
    let n = ev.g.len();
    let mut a = DMatrix::zeros(rows, n);
    let mut c = DVector::zeros(rows);
    a.view_mut((0, 0), (ev.ce.len(), n)).copy_from(&ev.je);
    c.rows_mut(0, ev.ce.len()).copy_from(&ev_trial.ce);
    for (k, w) in working.iter().enumerate() {
        a.row_mut(ev.ce.len() + k).copy_from(&ev.ji.row(*w));
        c[ev.ce.len() + k] = ev_trial.ci[*w];
    }
    let aat = &a * a.transpose();
    let z = aat.lu().solve(&c)?;
    Some(-(a.transpose() * z))
}

/// Finds a KKT point: stationarity `≤ tol·(1 + |f|)`, equalities within the
/// feasibility tolerance, inequalities `≥ -tol`, nonnegative multipliers and
/// complementarity.
///
/// Returns `Infeasible` when the iteration budget runs out without a
/// feasible point; a feasible but not yet stationary point is returned with
/// `converged = false`.
pub fn solve_nlp(problem: &dyn NlpProblem, x0: &DVector<f64>, settings: &NlpSettings) -> Result<OptResult> {
    let n = problem.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!("x0 has length {}, problem has {n}", x0.len())));
    }
    let mut x = x0.clone();
    let mut ev = Eval::at(problem, &x)?;
    if !ev.is_finite() || ev.g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient(0));
    }
    let mut ye = DVector::zeros(ev.ce.len());
    let mut yi = DVector::zeros(ev.ci.len());
    let mut bfgs = DMatrix::identity(n, n);
    let mut rho = 1.0f64;
    let mut f_trace = vec![];
    let mut v_trace = vec![];

    for iter in 0..settings.max_iters {
        f_trace.push(ev.f);
        v_trace.push(ev.violation());

        let h = match problem.lagrangian_hessian(&x, &ye, &yi) {
            Some(h) => h?,
            None => bfgs.clone(),
        };
        let step = solve_qp(&h, &ev, settings.feasibility_tol)?;

        let stat = ev.lagrangian_gradient(&step.ye, &step.yi).amax();
        let comp = step.yi.iter().zip(ev.ci.iter()).map(|(y, c)| (y * c).abs()).fold(0.0, f64::max);
        let tol = settings.stationarity_tol * (1.0 + ev.f.abs());
        let dual_ok = step.yi.iter().all(|y| *y >= -tol);
        if stat <= tol && ev.violation() <= settings.feasibility_tol && dual_ok && comp <= tol {
            return Ok(OptResult {
                x: x.iter().copied().collect(),
                objective_trace: f_trace,
                constraint_violation_trace: v_trace,
                converged: true,
                iterations: iter,
                eq_multipliers: step.ye.iter().copied().collect(),
                ineq_multipliers: step.yi.iter().copied().collect(),
            });
        }

        let ymax = step.ye.amax().max(step.yi.amax());
        if rho < 1.1 * ymax {
            rho = 2.0 * ymax;
        }
        let phi0 = ev.merit(rho);
        let dphi = ev.g.dot(&step.d) - rho * ev.l1_violation();
        let mut alpha = 1.0;
        let mut accepted: Option<(DVector<f64>, Eval)> = None;
        while alpha > 1e-12 {
            let xt = &x + alpha * &step.d;
            if let Ok(et) = Eval::at(problem, &xt) {
                if et.is_finite() && et.merit(rho) <= phi0 + 1e-4 * alpha * dphi.min(0.0) {
                    accepted = Some((xt, et));
                    break;
                }
                if alpha == 1.0 {
                    if let Some(corr) = second_order_correction(&et, &ev, &step.working) {
                        let xs = &xt + corr;
                        if let Ok(es) = Eval::at(problem, &xs) {
                            if es.is_finite() && es.merit(rho) <= phi0 + 1e-4 * dphi.min(0.0) {
                                accepted = Some((xs, es));
                                break;
                            }
                        }
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((xn, en)) = accepted else {
            // no acceptable step: stop and report the current point
            break;
        };

        if problem.lagrangian_hessian(&x, &ye, &yi).is_none() {
            let s = &xn - &x;
            let yv = en.lagrangian_gradient(&step.ye, &step.yi) - ev.lagrangian_gradient(&step.ye, &step.yi);
            let bs = &bfgs * &s;
            let sbs = s.dot(&bs);
            let sy = s.dot(&yv);
            if sbs > 0.0 {
                // Powell damping keeps the update positive definite
                let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
                let r = theta * &yv + (1.0 - theta) * &bs;
                let sr = s.dot(&r);
                if sr > 0.0 {
                    bfgs += &r * r.transpose() / sr - &bs * bs.transpose() / sbs;
                }
            }
        }
        x = xn;
        ev = en;
        ye = step.ye;
        yi = step.yi;
    }

    f_trace.push(ev.f);
    v_trace.push(ev.violation());
    if ev.violation() > settings.feasibility_tol {
        let mut which = vec![];
        for (k, c) in ev.ce.iter().enumerate() {
            if c.abs() > settings.feasibility_tol {
                which.push(format!("eq[{k}]={c:.3e}"));
            }
        }
        for (k, c) in ev.ci.iter().enumerate() {
            if *c < -settings.feasibility_tol {
                which.push(format!("ineq[{k}]={c:.3e}"));
            }
        }
        which.truncate(8);
        return Err(Error::Infeasible(which.join(", ")));
    }
    Ok(OptResult {
        x: x.iter().copied().collect(),
        objective_trace: f_trace,
        constraint_violation_trace: v_trace,
        converged: false,
        iterations: settings.max_iters,
        eq_multipliers: ye.iter().copied().collect(),
        ineq_multipliers: yi.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Bounded;
    impl NlpProblem for Bounded {
        fn dim(&self) -> usize {
            1
        }
        fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
            Ok((x[0] * x[0], DVector::from_element(1, 2.0 * x[0])))
        }
        fn inequalities(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
            Ok((DVector::from_element(1, x[0] - 1.0), DMatrix::from_element(1, 1, 1.0)))
        }
    }

    #[test]
    fn active_bound_with_multiplier_two() {
        let r = solve_nlp(&Bounded, &DVector::from_element(1, 3.0), &NlpSettings::default()).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(r.ineq_multipliers[0], 2.0, epsilon = 1e-6);
        let r = solve_nlp(&Bounded, &DVector::from_element(1, -4.0), &NlpSettings::default()).unwrap();
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-8);
    }

    struct Line;
    impl NlpProblem for Line {
        fn dim(&self) -> usize {
            2
        }
        fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
            Ok((x.norm_squared(), 2.0 * x))
        }
        fn equalities(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
            Ok((DVector::from_element(1, x[0] + x[1] - 1.0), DMatrix::from_row_slice(1, 2, &[1.0, 1.0])))
        }
    }

    #[test]
    fn equality_constrained_symmetric_point() {
        let r = solve_nlp(&Line, &DVector::from_vec(vec![4.0, -2.0]), &NlpSettings::default()).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.x[0], 0.5, epsilon = 1e-8);
        assert_relative_eq!(r.x[1], 0.5, epsilon = 1e-8);
        assert_eq!(r.objective_trace.len(), r.constraint_violation_trace.len());
    }

    /// `min ‖x‖²` with `a ≤ mean(x) ≤ b`.
    struct MeanBand {
        n: usize,
        a: f64,
        b: f64,
    }
    impl NlpProblem for MeanBand {
        fn dim(&self) -> usize {
            self.n
        }
        fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
            Ok((x.norm_squared(), 2.0 * x))
        }
        fn inequalities(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
            let m = x.mean();
            let g = 1.0 / self.n as f64;
            let mut j = DMatrix::from_element(2, self.n, g);
            j.row_mut(1).scale_mut(-1.0);
            Ok((DVector::from_vec(vec![m - self.a, self.b - m]), j))
        }
    }

    #[test]
    fn mean_band_pins_every_component_to_lower_bound() {
        let p = MeanBand { n: 5, a: 0.3, b: 0.8 };
        let r = solve_nlp(&p, &DVector::from_fn(5, |i, _| i as f64 - 1.0), &NlpSettings::default()).unwrap();
        for v in &r.x {
            assert_relative_eq!(*v, 0.3, epsilon = 1e-8);
        }
        // grid search oracle at n = 2
        let p = MeanBand { n: 2, a: 0.3, b: 0.8 };
        let r = solve_nlp(&p, &DVector::from_vec(vec![2.0, 0.0]), &NlpSettings::default()).unwrap();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=400 {
            for j in 0..=400 {
                let (x, y) = (i as f64 / 400.0, j as f64 / 400.0);
                let m = 0.5 * (x + y);
                if (0.3..=0.8).contains(&m) && x * x + y * y < best.0 {
                    best = (x * x + y * y, x, y);
                }
            }
        }
        assert!((r.x[0] - best.1).abs() < 5e-3 && (r.x[1] - best.2).abs() < 5e-3);
    }

    struct Rosen;
    impl NlpProblem for Rosen {
        fn dim(&self) -> usize {
            2
        }
        fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
            Ok((f, g))
        }
        fn inequalities(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
            // stay inside the disc of radius √1.5
            Ok((
                DVector::from_element(1, 1.5 - x.norm_squared()),
                DMatrix::from_row_slice(1, 2, &[-2.0 * x[0], -2.0 * x[1]]),
            ))
        }
    }

    #[test]
    fn bfgs_path_solves_constrained_rosenbrock() {
        let r = solve_nlp(
            &Rosen,
            &DVector::from_vec(vec![-1.0, 0.5]),
            &NlpSettings {
                max_iters: 500,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.converged, "{:?}", r.x);
        // the optimum sits on the circle; scan it by angle
        let f = |a: f64, b: f64| (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let best = (0..200_000)
            .map(|k| std::f64::consts::TAU * k as f64 / 200_000.0)
            .map(|t| (1.5f64.sqrt() * t.cos(), 1.5f64.sqrt() * t.sin()))
            .min_by(|p, q| f(p.0, p.1).total_cmp(&f(q.0, q.1)))
            .unwrap();
        assert!((r.x[0] - best.0).abs() < 1e-4 && (r.x[1] - best.1).abs() < 1e-4, "{:?} {best:?}", r.x);
    }

    struct Empty;
    impl NlpProblem for Empty {
        fn dim(&self) -> usize {
            1
        }
        fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
            Ok((x[0], DVector::from_element(1, 1.0)))
        }
        fn inequalities(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
            // x ≥ 1 and x ≤ 0 cannot both hold
            Ok((
                DVector::from_vec(vec![x[0] - 1.0, -x[0]]),
                DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            ))
        }
    }

    #[test]
    fn contradictory_constraints_are_infeasible() {
        let r = solve_nlp(
            &Empty,
            &DVector::from_element(1, 0.5),
            &NlpSettings {
                max_iters: 30,
                ..Default::default()
            },
        );
        assert!(matches!(r, Err(Error::Infeasible(_)) | Err(Error::LinearAlgebraFailure(_))), "{r:?}");
    }
}
