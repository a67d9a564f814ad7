//! Stochastic Galerkin projection of the random beam onto shifted Legendre
//! polynomials, prediction moments, the Gaussian pseudo-likelihood and its
//! sensitivities.
//!
//! Coefficients are flattened as `j·M + k` (spatial `j`, stochastic `k`).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::quadrature::gauss_legendre_interval;
use crate::basis::{eval_basis, BasisFamily};
use crate::error::{Error, Result};
use crate::linalg::{min_symmetric_eigenvalue, LuFactor};
use crate::operators::BeamOperatorSet;

/// Variance floor of the pseudo-likelihood.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// `∫Ψ_k`, `∫Ψ_kΨ_q` and `∫ωΨ_kΨ_q` over `ω ~ U(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticGramian {
    pub g0: DVector<f64>,
    pub g2: DMatrix<f64>,
    pub g1: DMatrix<f64>,
}

impl StochasticGramian {
    pub fn shifted_legendre(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("stochastic basis needs at least one mode".into()));
        }
        let family = BasisFamily::ShiftedLegendre { count: m };
        // exact for polynomials of degree 2m - 1 + 2
        let (nodes, weights) = gauss_legendre_interval(m + 2, 0.0, 1.0);
        let mut g0 = DVector::zeros(m);
        let mut g2 = DMatrix::zeros(m, m);
        let mut g1 = DMatrix::zeros(m, m);
        for (w, q) in nodes.iter().zip(&weights) {
            let psi = legendre_row(&family, m, *w)?;
            g0 += *q * &psi;
            g2 += *q * &psi * psi.transpose();
            g1 += *q * *w * &psi * psi.transpose();
        }
        Ok(Self { g0, g2, g1 })
    }

    pub fn modes(&self) -> usize {
        self.g0.len()
    }
}

fn legendre_row(family: &BasisFamily, m: usize, omega: f64) -> Result<DVector<f64>> {
    let mut v = DVector::zeros(m);
    for k in 0..m {
        v[k] = eval_basis(family, k + 1, &[omega])?;
    }
    Ok(v)
}

/// `(Ψ_1(ω), …, Ψ_M(ω))`.
pub fn legendre_values(m: usize, omega: f64) -> Result<DVector<f64>> {
    legendre_row(&BasisFamily::ShiftedLegendre { count: m }, m, omega)
}

/// `Θ`, N×M.
#[derive(Clone, Debug, PartialEq)]
pub struct PceCoefficients {
    pub theta: DMatrix<f64>,
}

impl PceCoefficients {
    fn from_flat(v: &DVector<f64>, n: usize, m: usize) -> Self {
        Self {
            theta: DMatrix::from_fn(n, m, |j, k| v[j * m + k]),
        }
    }

    /// Spatial coefficients at one realization.
    pub fn at(&self, omega: f64) -> Result<DVector<f64>> {
        Ok(&self.theta * legendre_values(self.theta.ncols(), omega)?)
    }
}

/// Replicated measurements `v_ij` at `C` points.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementReplicates {
    pub points: Vec<f64>,
    /// C×D.
    pub values: DMatrix<f64>,
}

impl MeasurementReplicates {
    pub fn new(points: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != points.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} replicate rows",
                points.len(),
                values.nrows()
            )));
        }
        if values.ncols() < 2 {
            return Err(Error::InvalidArgument("at least two replicates are needed per point".into()));
        }
        Ok(Self { points, values })
    }
}

/// Fails with `SingularJacobian` when `K^B(ω) - εK^G - K^BC` is not positive
/// definite for some `ω ∈ [0, 1]`. The operator is affine in `ω`, so the two
/// end points decide.
fn check_unbuckled(ops: &BeamOperatorSet, eps: f64) -> Result<()> {
    for w in [0.0, 1.0] {
        let k = ops.effective(w, eps);
        let sym = 0.5 * (&k + k.transpose());
        if sym.clone().cholesky().is_none() {
            return Err(Error::SingularJacobian {
                pivot: min_symmetric_eigenvalue(&sym),
                threshold: 0.0,
            });
        }
    }
    Ok(())
}

/// Block operator `(K^B0 - εK^G - K^BC)⊗G2 + K^B1⊗G1` and rhs `(F + Γλ)⊗G0`.
pub fn assemble_stochastic_galerkin(
    ops: &BeamOperatorSet,
    gram: &StochasticGramian,
    eps: f64,
    lambda: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if lambda.len() != ops.constraint.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "λ has length {}, expected {}",
            lambda.len(),
            ops.constraint.ncols()
        )));
    }
    let k0 = &ops.bending0 - eps * &ops.geometric - &ops.boundary;
    let a = k0.kronecker(&gram.g2) + ops.bending1.kronecker(&gram.g1);
    let f = &ops.load + &ops.constraint * lambda;
    let rhs = DVector::from_column_slice(f.kronecker(&gram.g0).as_slice());
    Ok((a, rhs))
}

/// Factorized stochastic Galerkin system at one `ε`.
pub struct StochasticSystem {
    lu: LuFactor,
    pub eps: f64,
    n: usize,
    m: usize,
}

impl StochasticSystem {
    pub fn new(ops: &BeamOperatorSet, gram: &StochasticGramian, eps: f64) -> Result<Self> {
        check_unbuckled(ops, eps)?;
        let (a, _) = assemble_stochastic_galerkin(ops, gram, eps, &DVector::zeros(ops.constraint.ncols()))?;
        Ok(Self {
            lu: LuFactor::new(a)?,
            eps,
            n: ops.basis_size(),
            m: gram.modes(),
        })
    }

    fn solve_flat(&self, rhs: &DVector<f64>) -> Result<PceCoefficients> {
        Ok(PceCoefficients::from_flat(&self.lu.solve(rhs)?, self.n, self.m))
    }

    pub fn solve(&self, ops: &BeamOperatorSet, gram: &StochasticGramian, lambda: &DVector<f64>) -> Result<PceCoefficients> {
        let f = &ops.load + &ops.constraint * lambda;
        self.solve_flat(&DVector::from_column_slice(f.kronecker(&gram.g0).as_slice()))
    }
}

pub fn solve_stochastic(
    ops: &BeamOperatorSet,
    gram: &StochasticGramian,
    eps: f64,
    lambda: &DVector<f64>,
) -> Result<(PceCoefficients, StochasticSystem)> {
    let sys = StochasticSystem::new(ops, gram, eps)?;
    let theta = sys.solve(ops, gram, lambda)?;
    Ok((theta, sys))
}

/// Deterministic solve `(K^B(ω) - βK^G - K^BC)θ = F + Γλ`, rejecting
/// buckled configurations.
pub fn solve_pointwise(ops: &BeamOperatorSet, omega: f64, beta: f64, lambda: &DVector<f64>) -> Result<DVector<f64>> {
    let k = ops.effective(omega, beta);
    let sym = 0.5 * (&k + k.transpose());
    if sym.cholesky().is_none() {
        let sym = 0.5 * (&k + k.transpose());
        return Err(Error::SingularJacobian {
            pivot: min_symmetric_eigenvalue(&sym),
            threshold: 0.0,
        });
    }
    LuFactor::new(k)?.solve(&(&ops.load + &ops.constraint * lambda))
}

/// `(μ, σ²)` of `𝓜θ(ω)` at each measurement point.
pub fn moments(
    theta: &PceCoefficients,
    measurement: &DMatrix<f64>,
    gram: &StochasticGramian,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let p = measurement * &theta.theta;
    let mu = &p * &gram.g0;
    let second = (&p * &gram.g2).component_mul(&p).column_sum();
    let mut var = second - mu.component_mul(&mu);
    for (i, v) in var.iter_mut().enumerate() {
        let scale = mu[i].powi(2).max(1.0);
        if *v < -1e-12 * scale {
            return Err(Error::NegativeVariance(*v));
        }
        *v = v.max(0.0);
    }
    Ok((mu, var))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoLikelihood {
    pub value: f64,
    /// `∂Λ/∂μ_i`.
    pub d_mean: Vec<f64>,
    /// `∂Λ/∂σ²_i`; zero where the variance sits on the floor.
    pub d_variance: Vec<f64>,
    /// Points whose variance was raised to the floor.
    pub floored: Vec<usize>,
}

/// `Λ = Σ_i Σ_j ½log 2πσ_i² + (v_ij - μ_i)²/(2σ_i²)`.
pub fn pseudo_log_likelihood(
    mu: &DVector<f64>,
    var: &DVector<f64>,
    data: &MeasurementReplicates,
) -> Result<PseudoLikelihood> {
    let c = data.values.nrows();
    if mu.len() != c || var.len() != c {
        return Err(Error::DimensionMismatch(format!(
            "moments have length {}/{}, data has {c} points",
            mu.len(),
            var.len()
        )));
    }
    let d = data.values.ncols() as f64;
    let mut out = PseudoLikelihood {
        value: 0.0,
        d_mean: vec![0.0; c],
        d_variance: vec![0.0; c],
        floored: vec![],
    };
    for i in 0..c {
        let mut s2 = var[i];
        let at_floor = s2 <= VARIANCE_FLOOR;
        if at_floor {
            s2 = VARIANCE_FLOOR;
            out.floored.push(i);
        }
        let r = data.values.row(i).add_scalar(-mu[i]);
        let ss = r.norm_squared();
        out.value += 0.5 * d * (std::f64::consts::TAU * s2).ln() + ss / (2.0 * s2);
        out.d_mean[i] = -r.sum() / s2;
        if !at_floor {
            out.d_variance[i] = 0.5 * d / s2 - ss / (2.0 * s2 * s2);
        }
    }
    Ok(out)
}

/// `∂Θ/∂λ_q` for every constraint column and `∂Θ/∂ε`.
#[derive(Clone, Debug)]
pub struct StochasticSensitivity {
    pub d_lambda: Vec<DMatrix<f64>>,
    pub d_eps: DMatrix<f64>,
}

pub fn stochastic_sensitivity(
    system: &StochasticSystem,
    ops: &BeamOperatorSet,
    gram: &StochasticGramian,
    theta: &PceCoefficients,
) -> Result<StochasticSensitivity> {
    let mut d_lambda = Vec::with_capacity(ops.constraint.ncols());
    for q in 0..ops.constraint.ncols() {
        let col = ops.constraint.column(q).into_owned();
        let rhs = DVector::from_column_slice(col.kronecker(&gram.g0).as_slice());
        d_lambda.push(system.solve_flat(&rhs)?.theta);
    }
    // d/dε of the block operator is -K^G⊗G2
    let action = &ops.geometric * &theta.theta * &gram.g2;
    let flat = DVector::from_fn(system.n * system.m, |r, _| action[(r / system.m, r % system.m)]);
    let d_eps = system.solve_flat(&flat)?.theta;
    Ok(StochasticSensitivity { d_lambda, d_eps })
}

/// `(∂μ/∂p, ∂σ²/∂p)` for a coefficient derivative `∂Θ/∂p`.
pub fn moment_derivatives(
    theta: &PceCoefficients,
    d_theta: &DMatrix<f64>,
    measurement: &DMatrix<f64>,
    gram: &StochasticGramian,
) -> (DVector<f64>, DVector<f64>) {
    let p = measurement * &theta.theta;
    let dp = measurement * d_theta;
    let mu = &p * &gram.g0;
    let dmu = &dp * &gram.g0;
    let dvar = 2.0 * (&p * &gram.g2).component_mul(&dp).column_sum() - 2.0 * mu.component_mul(&dmu);
    (dmu, dvar)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLikelihoodGradient {
    pub likelihood: PseudoLikelihood,
    pub d_lambda: DVector<f64>,
    pub d_eps: f64,
}

/// `Λ` and its gradient with respect to `(λ, ε)`.
pub fn grad_pseudo_likelihood(
    theta: &PceCoefficients,
    gram: &StochasticGramian,
    measurement: &DMatrix<f64>,
    data: &MeasurementReplicates,
    sens: &StochasticSensitivity,
) -> Result<PseudoLikelihoodGradient> {
    let (mu, var) = moments(theta, measurement, gram)?;
    let like = pseudo_log_likelihood(&mu, &var, data)?;
    let chain = |dt: &DMatrix<f64>| {
        let (dmu, dvar) = moment_derivatives(theta, dt, measurement, gram);
        (0..mu.len())
            .map(|i| like.d_mean[i] * dmu[i] + like.d_variance[i] * dvar[i])
            .sum::<f64>()
    };
    let d_lambda = DVector::from_iterator(sens.d_lambda.len(), sens.d_lambda.iter().map(chain));
    let d_eps = chain(&sens.d_eps);
    Ok(PseudoLikelihoodGradient {
        likelihood: like,
        d_lambda,
        d_eps,
    })
}

/// Smallest `β > 0` at which `K^B(ω) - βK^G - K^BC` loses definiteness.
pub fn critical_load(ops: &BeamOperatorSet, omega: f64) -> Result<f64> {
    let min_eig = |b: f64| {
        let k = ops.effective(omega, b);
        min_symmetric_eigenvalue(&(0.5 * (&k + k.transpose())))
    };
    if min_eig(0.0) <= 0.0 {
        return Err(Error::InvalidArgument(format!("unloaded beam is not stable at ω = {omega}")));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while min_eig(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidArgument("no buckling load found".into()));
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if min_eig(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `H₀` giving `critical_load(ω) = target`; the load is linear in `H₀`.
pub fn calibrate_h0(build: impl Fn(f64) -> Result<BeamOperatorSet>, target: f64, omega: f64) -> Result<f64> {
    let unit = critical_load(&build(1.0)?, omega)?;
    let h0 = target / unit;
    let check = critical_load(&build(h0)?, omega)?;
    if (check - target).abs() > 1e-8 * target {
        return Err(Error::InvalidArgument(format!(
            "critical load is not linear in H0: {check} vs {target}"
        )));
    }
    Ok(h0)
}
