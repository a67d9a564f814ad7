//! Galerkin operator assembly and the discrete residuals built from it.

use nalgebra::{DMatrix, DVector};

use crate::basis::{
    composite_gauss, eval_basis, eval_basis_partial, eval_constraint_shape, panel_breaks, tensor_modes, BasisFamily,
};
use crate::error::{Error, Result};
use crate::linalg::Tensor3;
use crate::solvers::TimeGrid;

/// Gauss points per panel for every 1D assembly.
pub const POINTS_PER_PANEL: usize = 16;

/// Assembled operators of one Burgers or Fisher-KPP problem instance.
///
/// `source` holds `F_i(t_p)` at every time node `p = 0..=P` for Burgers and
/// `F_iα = ∫ f_i f_α` for Fisher-KPP.
#[derive(Clone, Debug)]
pub struct DiscreteOperatorSet {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub advection: Tensor3,
    pub constraint: DMatrix<f64>,
    pub source: DMatrix<f64>,
    pub measurement: DMatrix<f64>,
}

impl DiscreteOperatorSet {
    pub fn basis_size(&self) -> usize {
        self.mass.nrows()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraint.ncols()
    }
}

/// Basis values and derivatives sampled on a 1D composite Gauss rule.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `derivs[m][(q, i)] = f_{i+1}^{(m)}(x_q)`.
    pub derivs: Vec<DMatrix<f64>>,
}

impl Tabulation {
    pub fn new(family: &BasisFamily, breaks: &[f64], max_order: usize) -> Result<Self> {
        let (nodes, weights) = composite_gauss(breaks, POINTS_PER_PANEL);
        let n = family.count();
        let derivs = (0..=max_order)
            .map(|m| {
                let mut d = DMatrix::zeros(nodes.len(), n);
                for (q, x) in nodes.iter().enumerate() {
                    for i in 0..n {
                        d[(q, i)] = eval_basis_partial(family, i + 1, &[*x], 0, m)?;
                    }
                }
                Ok(d)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nodes, weights, derivs })
    }

    /// `∫ g(x) f_i^{(a)} f_j^{(b)} dx`.
    pub fn gram(&self, a: usize, b: usize, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.nodes.len(), self.derivs[a].ncols(), |q, i| {
            self.weights[q] * g(self.nodes[q]) * self.derivs[a][(q, i)]
        });
        scaled.transpose() * &self.derivs[b]
    }

    /// `∫ g(x) f_i dx` for each basis member.
    pub fn project(&self, g: impl Fn(f64) -> f64) -> DVector<f64> {
        let w = DVector::from_fn(self.nodes.len(), |q, _| self.weights[q] * g(self.nodes[q]));
        self.derivs[0].transpose() * w
    }
}

fn measurement_matrix(family: &BasisFamily, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = family.count();
    let mut m = DMatrix::zeros(points.len(), n);
    for (r, p) in points.iter().enumerate() {
        for i in 0..n {
            m[(r, i)] = eval_basis(family, i + 1, p)?;
        }
        if m.row(r).amax() < 1e-12 {
            return Err(Error::ZeroMeasurementRow {
                index: r,
                coord: p.clone(),
            });
        }
    }
    Ok(m)
}

fn check_interior(points: &[Vec<f64>]) -> Result<()> {
    for (index, p) in points.iter().enumerate() {
        if p.iter().any(|c| *c <= 0.0 || *c >= 1.0) {
            return Err(Error::ZeroMeasurementRow { index, coord: p.clone() });
        }
    }
    Ok(())
}

/// Break points aligned with hat kinks so no panel straddles one.
fn hat_breaks(panels: usize, constraint: &BasisFamily, centers: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut kinks: Vec<f64> = extra.to_vec();
    if let BasisFamily::Hat1D { half_width } = *constraint {
        for c in centers {
            kinks.extend([c - half_width, *c, c + half_width]);
        }
    }
    panel_breaks(panels, &kinks)
}

fn constraint_matrix_1d(tab: &Tabulation, constraint: &BasisFamily, centers: &[f64]) -> Result<DMatrix<f64>> {
    let mut g = DMatrix::zeros(tab.derivs[0].ncols(), centers.len());
    for (j, c) in centers.iter().enumerate() {
        let shape = tab
            .nodes
            .iter()
            .map(|x| eval_constraint_shape(constraint, &[*c], &[*x]))
            .collect::<Result<Vec<_>>>()?;
        let mut col = DVector::zeros(tab.derivs[0].ncols());
        for (q, s) in shape.iter().enumerate() {
            if *s != 0.0 {
                let ws = tab.weights[q] * s;
                for i in 0..col.len() {
                    col[i] += ws * tab.derivs[0][(q, i)];
                }
            }
        }
        g.set_column(j, &col);
    }
    Ok(g)
}

/// Burgers operators: `M_ij = ∫f_i f_j`, `K_ij = ∫f_i' f_j'`,
/// `A_ijk = ∫ f_j f_k' f_i`, hat constraint forces and the sampled source.
pub fn assemble_burgers(
    basis: &BasisFamily,
    constraint: &BasisFamily,
    measure_points: &[f64],
    source_fn: impl Fn(f64, f64) -> f64,
    grid: &TimeGrid,
) -> Result<DiscreteOperatorSet> {
    if !matches!(basis, BasisFamily::Sine1D { .. }) {
        return Err(Error::InvalidArgument(format!("Burgers needs Sine1D, got {}", basis.name())));
    }
    if !matches!(constraint, BasisFamily::Hat1D { .. }) {
        return Err(Error::NotAConstraintFamily(constraint.name()));
    }
    let points: Vec<Vec<f64>> = measure_points.iter().map(|x| vec![*x]).collect();
    check_interior(&points)?;
    let n = basis.count();
    let tab = Tabulation::new(basis, &hat_breaks(n.max(4), constraint, measure_points, &[]), 1)?;

    let mass = tab.gram(0, 0, |_| 1.0);
    let stiffness = tab.gram(1, 1, |_| 1.0);
    let (v, d) = (&tab.derivs[0], &tab.derivs[1]);
    let mut advection = Tensor3::zeros(n, n, n);
    for q in 0..tab.nodes.len() {
        let w = tab.weights[q];
        for i in 0..n {
            let wi = w * v[(q, i)];
            for j in 0..n {
                let wij = wi * v[(q, j)];
                for k in 0..n {
                    let idx = advection.get(i, j, k) + wij * d[(q, k)];
                    advection.set(i, j, k, idx);
                }
            }
        }
    }

    let times = grid.nodes();
    let mut source = DMatrix::zeros(n, times.len());
    for (p, t) in times.iter().enumerate() {
        source.set_column(p, &tab.project(|x| source_fn(x, *t)));
    }

    Ok(DiscreteOperatorSet {
        mass,
        stiffness,
        advection,
        constraint: constraint_matrix_1d(&tab, constraint, measure_points)?,
        source,
        measurement: measurement_matrix(basis, &points)?,
    })
}

/// 1D sine factors `∫ sin(aπx) sin(bπx)`, `∫ a b π² cos cos`, and triple products.
struct SineFactors {
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    triple: Tensor3,
}

impl SineFactors {
    fn new(per_axis: usize) -> Result<Self> {
        let family = BasisFamily::Sine1D { count: per_axis };
        let tab = Tabulation::new(&family, &panel_breaks(per_axis.max(8), &[]), 1)?;
        let v = &tab.derivs[0];
        let triple = Tensor3::from_fn(per_axis, per_axis, per_axis, |a, b, c| {
            (0..tab.nodes.len())
                .map(|q| tab.weights[q] * v[(q, a)] * v[(q, b)] * v[(q, c)])
                .sum()
        });
        Ok(Self {
            mass: tab.gram(0, 0, |_| 1.0),
            stiffness: tab.gram(1, 1, |_| 1.0),
            triple,
        })
    }
}

/// Fisher-KPP operators on tensor sines. `stiffness` carries the diffusion
/// coefficient `mu`; `mass` is the reaction term with unit rate.
pub fn assemble_kpp(
    basis: &BasisFamily,
    source_basis: &BasisFamily,
    constraint: &BasisFamily,
    measure_points: &[Vec<f64>],
    mu: f64,
) -> Result<DiscreteOperatorSet> {
    let (BasisFamily::TensorSine2D { per_axis: p }, BasisFamily::TensorSine2D { per_axis: ps }) = (*basis, *source_basis)
    else {
        return Err(Error::InvalidArgument("Fisher-KPP needs TensorSine2D solution and source bases".into()));
    };
    let BasisFamily::GaussianRbf { width } = *constraint else {
        return Err(Error::NotAConstraintFamily(constraint.name()));
    };
    check_interior(measure_points)?;
    let n = p * p;
    let big = p.max(ps);
    let f = SineFactors::new(big)?;
    let modes = |per: usize, i: usize| {
        let (a, b) = tensor_modes(per, i + 1);
        (a - 1, b - 1)
    };

    let mass = DMatrix::from_fn(n, n, |i, j| {
        let ((a, b), (c, d)) = (modes(p, i), modes(p, j));
        f.mass[(a, c)] * f.mass[(b, d)]
    });
    let stiffness = DMatrix::from_fn(n, n, |i, j| {
        let ((a, b), (c, d)) = (modes(p, i), modes(p, j));
        mu * (f.stiffness[(a, c)] * f.mass[(b, d)] + f.mass[(a, c)] * f.stiffness[(b, d)])
    });
    let advection = Tensor3::from_fn(n, n, n, |i, j, k| {
        let ((a, b), (c, d), (e, g)) = (modes(p, i), modes(p, j), modes(p, k));
        f.triple.get(a, c, e) * f.triple.get(b, d, g)
    });
    let source = DMatrix::from_fn(n, ps * ps, |i, al| {
        let ((a, b), (c, d)) = (modes(p, i), modes(ps, al));
        f.mass[(a, c)] * f.mass[(b, d)]
    });

    // the RBF factorizes: (ω/π) e^{-ω(x-cx)²} e^{-ω(y-cy)²}
    let rbf_tab = Tabulation::new(&BasisFamily::Sine1D { count: p }, &panel_breaks(64, &[]), 0)?;
    let gauss_1d = |c: f64| rbf_tab.project(|x| (-width * (x - c) * (x - c)).exp());
    let mut constraint_m = DMatrix::zeros(n, measure_points.len());
    for (q, c) in measure_points.iter().enumerate() {
        let (gx, gy) = (gauss_1d(c[0]), gauss_1d(c[1]));
        for i in 0..n {
            let (a, b) = modes(p, i);
            constraint_m[(i, q)] = width / std::f64::consts::PI * gx[a] * gy[b];
        }
    }

    Ok(DiscreteOperatorSet {
        mass,
        stiffness,
        advection,
        constraint: constraint_m,
        source,
        measurement: measurement_matrix(basis, measure_points)?,
    })
}

/// `∫ s(x) f_i(x) dx` over the unit square for a tensor-sine basis, with
/// panel breaks at the given coordinates on both axes so discontinuities
/// aligned with them are integrated exactly up to quadrature order.
pub fn kpp_source_vector(basis: &BasisFamily, s: impl Fn(f64, f64) -> f64, breaks: &[f64]) -> Result<DVector<f64>> {
    let BasisFamily::TensorSine2D { per_axis: p } = *basis else {
        return Err(Error::InvalidArgument("source vector needs TensorSine2D".into()));
    };
    let tab = Tabulation::new(&BasisFamily::Sine1D { count: p }, &panel_breaks(p.max(8), breaks), 0)?;
    let q = tab.nodes.len();
    let v = &tab.derivs[0];
    // S_ab = Σ_qr w_q w_r s(x_q, y_r) sin(aπx_q) sin(bπy_r)
    let smat = DMatrix::from_fn(q, q, |i, j| tab.weights[i] * tab.weights[j] * s(tab.nodes[i], tab.nodes[j]));
    let coeff = v.transpose() * smat * v;
    Ok(DVector::from_fn(p * p, |i, _| {
        let (a, b) = tensor_modes(p, i + 1);
        coeff[(a - 1, b - 1)]
    }))
}

/// Beam operators; bending stiffness is stored as the affine pair
/// `K^B(ω) = bending0 + ω·bending1`.
#[derive(Clone, Debug)]
pub struct BeamOperatorSet {
    pub bending0: DMatrix<f64>,
    pub bending1: DMatrix<f64>,
    pub geometric: DMatrix<f64>,
    pub boundary: DMatrix<f64>,
    pub load: DVector<f64>,
    pub constraint: DMatrix<f64>,
    pub measurement: DMatrix<f64>,
    pub h0: f64,
}

impl BeamOperatorSet {
    pub fn bending(&self, omega: f64) -> DMatrix<f64> {
        &self.bending0 + omega * &self.bending1
    }

    /// `K^B(ω) - β K^G - K^BC`.
    pub fn effective(&self, omega: f64, beta: f64) -> DMatrix<f64> {
        self.bending(omega) - beta * &self.geometric - &self.boundary
    }

    pub fn basis_size(&self) -> usize {
        self.geometric.nrows()
    }
}

/// Stiffness field `H₀(2ω|x - ½| + 1 - ω)`.
pub fn defect_stiffness(h0: f64) -> impl Fn(f64, f64) -> f64 + Copy {
    move |x, w| h0 * (2.0 * w * (x - 0.5).abs() + 1.0 - w)
}

pub fn assemble_beam(
    basis: &BasisFamily,
    stiffness_fn: impl Fn(f64, f64) -> f64,
    h0: f64,
    load_fn: impl Fn(f64) -> f64,
    constraint: &BasisFamily,
    measure_points: &[f64],
) -> Result<BeamOperatorSet> {
    if !matches!(basis, BasisFamily::ClampedBeamSine { .. }) {
        return Err(Error::InvalidArgument(format!("beam needs ClampedBeamSine, got {}", basis.name())));
    }
    for w in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let h1 = stiffness_fn(1.0, w);
        if (h1 - h0).abs() > 1e-12 * h0.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "stiffness at the right end must equal H0 = {h0} for every ω, got {h1} at ω = {w}"
            )));
        }
    }
    let points: Vec<Vec<f64>> = measure_points.iter().map(|x| vec![*x]).collect();
    check_interior(&points)?;
    let n = basis.count();
    let tab = Tabulation::new(basis, &hat_breaks(n.max(8), constraint, measure_points, &[0.5]), 2)?;

    let bending_at = |w: f64| tab.gram(2, 2, |x| stiffness_fn(x, w));
    let bending0 = bending_at(0.0);
    let bending1 = bending_at(1.0) - &bending0;
    let mid = bending_at(0.5);
    let affine = &bending0 + 0.5 * &bending1;
    if (&mid - &affine).amax() > 1e-10 * mid.amax().max(1e-300) {
        return Err(Error::InvalidArgument("bending stiffness must be affine in ω".into()));
    }

    let mut boundary = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            boundary[(i, j)] =
                h0 * eval_basis_partial(basis, i + 1, &[1.0], 0, 2)? * eval_basis_partial(basis, j + 1, &[1.0], 0, 1)?;
        }
    }

    Ok(BeamOperatorSet {
        bending0,
        bending1,
        geometric: tab.gram(1, 1, |_| 1.0),
        boundary,
        load: tab.project(load_fn),
        constraint: constraint_matrix_1d(&tab, constraint, measure_points)?,
        measurement: measurement_matrix(basis, &points)?,
        h0,
    })
}

fn check_len(what: &str, v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!("{what} has length {}, expected {n}", v.len())));
    }
    Ok(())
}

/// Backward-Euler Burgers residual; `step` indexes the time node of `θ_next`.
#[allow(clippy::too_many_arguments)]
pub fn residual_burgers(
    ops: &DiscreteOperatorSet,
    theta_next: &DVector<f64>,
    theta_prev: &DVector<f64>,
    dt: f64,
    eps: [f64; 2],
    step: usize,
    lambda_next: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let n = ops.basis_size();
    check_len("θ_next", theta_next, n)?;
    check_len("θ_prev", theta_prev, n)?;
    if step >= ops.source.ncols() {
        return Err(Error::DimensionMismatch(format!("time step {step} beyond the sampled source")));
    }
    let nu = 10f64.powf(-eps[0]);
    let mut r = &ops.mass * (theta_next - theta_prev) / dt + nu * (&ops.stiffness * theta_next)
        + ops.advection.contract(theta_next, theta_next)
        - eps[1] * ops.source.column(step);
    if let Some(l) = lambda_next {
        check_len("λ", l, ops.constraint_count())?;
        r -= &ops.constraint * l;
    }
    Ok(r)
}

/// `∂R/∂θ_next = M/Δt + 10^(-ε₁) K + A:(·⊗θ) + A:(θ⊗·)`.
pub fn residual_burgers_jac(ops: &DiscreteOperatorSet, theta_next: &DVector<f64>, dt: f64, eps: [f64; 2]) -> DMatrix<f64> {
    &ops.mass / dt + 10f64.powf(-eps[0]) * &ops.stiffness + ops.advection.quadratic_jacobian(theta_next)
}

/// `(K - M)θ + A:θθ - Fε - Γλ`.
pub fn residual_kpp(
    ops: &DiscreteOperatorSet,
    theta: &DVector<f64>,
    eps: &DVector<f64>,
    lambda: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    check_len("θ", theta, ops.basis_size())?;
    check_len("ε", eps, ops.source.ncols())?;
    let mut r = (&ops.stiffness - &ops.mass) * theta + ops.advection.contract(theta, theta) - &ops.source * eps;
    if let Some(l) = lambda {
        check_len("λ", l, ops.constraint_count())?;
        r -= &ops.constraint * l;
    }
    Ok(r)
}

/// `∂R/∂θ`; the other partials are `-F` and `-Γ`.
pub fn residual_kpp_jac(ops: &DiscreteOperatorSet, theta: &DVector<f64>) -> DMatrix<f64> {
    &ops.stiffness - &ops.mass + ops.advection.quadratic_jacobian(theta)
}
