//! Dense linear algebra shared by the solvers: a pivot-checked LU wrapper,
//! a rank-3 tensor with the contractions the Galerkin residuals need, and a
//! few symmetric-matrix utilities.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is declared singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Maximum absolute row sum.
pub fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU factorization with partial pivoting that refuses near-singular input.
#[derive(Clone, Debug)]
pub struct LuFactor {
    lu: LU<f64, Dyn, Dyn>,
    dim: usize,
}

impl LuFactor {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "LU of a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let dim = a.nrows();
        let norm = inf_norm(&a);
        let threshold = PIVOT_TOLERANCE * norm;
        if !norm.is_finite() {
            return Err(Error::LinearAlgebraFailure("non-finite matrix entries".into()));
        }
        let lu = a.lu();
        let u = lu.u();
        let pivot = (0..dim).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if dim > 0 && (norm == 0.0 || pivot <= threshold) {
            return Err(Error::SingularJacobian {
                pivot: if dim == 0 { 0.0 } else { pivot },
                threshold,
            });
        }
        Ok(Self { lu, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} for a {}-dimensional system",
                b.len(),
                self.dim
            )));
        }
        self.lu
            .solve(b)
            .ok_or_else(|| Error::LinearAlgebraFailure("LU solve failed".into()))
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "rhs with {} rows for a {}-dimensional system",
                b.nrows(),
                self.dim
            )));
        }
        self.lu
            .solve(b)
            .ok_or_else(|| Error::LinearAlgebraFailure("LU solve failed".into()))
    }
}

/// Dense rank-3 tensor stored row-major in `(i, j, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n0: usize, n1: usize, n2: usize) -> Self {
        Self {
            dims: [n0, n1, n2],
            data: vec![0.0; n0 * n1 * n2],
        }
    }

    pub fn from_fn(n0: usize, n1: usize, n2: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n0, n1, n2);
        for i in 0..n0 {
            for j in 0..n1 {
                for k in 0..n2 {
                    t.data[(i * n1 + j) * n2 + k] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = (i * self.dims[1] + j) * self.dims[2] + k;
        self.data[idx] = v;
    }

    /// Slice `A[i, :, :]` as a row-major `n1 x n2` block.
    #[inline]
    fn slab(&self, i: usize) -> &[f64] {
        let len = self.dims[1] * self.dims[2];
        &self.data[i * len..(i + 1) * len]
    }

    /// `out_i = A_ijk u_j v_k`.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let [n0, n1, n2] = self.dims;
        debug_assert_eq!(u.len(), n1);
        debug_assert_eq!(v.len(), n2);
        DVector::from_fn(n0, |i, _| {
            let slab = self.slab(i);
            let mut acc = 0.0;
            for j in 0..n1 {
                let uj = u[j];
                if uj == 0.0 {
                    continue;
                }
                let row = &slab[j * n2..(j + 1) * n2];
                let mut inner = 0.0;
                for (a, vk) in row.iter().zip(v.iter()) {
                    inner += a * vk;
                }
                acc += uj * inner;
            }
            acc
        })
    }

    /// Jacobian of `theta -> A : (theta ⊗ theta)`: `J_im = A_imk θ_k + A_ijm θ_j`.
    /// The two slots are kept distinct; `A` need not be symmetric in `(j, k)`.
    pub fn quadratic_jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let [n0, n1, n2] = self.dims;
        debug_assert_eq!(n1, n2);
        let mut jac = DMatrix::zeros(n0, n1);
        for i in 0..n0 {
            let slab = self.slab(i);
            for j in 0..n1 {
                let row = &slab[j * n2..(j + 1) * n2];
                let mut first = 0.0;
                let tj = theta[j];
                for (k, a) in row.iter().enumerate() {
                    first += a * theta[k];
                    jac[(i, k)] += a * tj;
                }
                jac[(i, j)] += first;
            }
        }
        jac
    }

    /// `H_jk = Σ_i w_i (A_ijk + A_ikj)`, the Hessian of `w · (A : θ⊗θ)`.
    pub fn weighted_hessian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let [n0, n1, n2] = self.dims;
        debug_assert_eq!(n1, n2);
        let mut h = DMatrix::zeros(n1, n2);
        for i in 0..n0 {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            let slab = self.slab(i);
            for j in 0..n1 {
                for k in 0..n2 {
                    h[(j, k)] += wi * slab[j * n2 + k];
                }
            }
        }
        let ht = h.transpose();
        h + ht
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (a + a.transpose());
    sym.symmetric_eigen().eigenvalues.min()
}

/// Ratio of largest to smallest eigenvalue magnitude of a symmetric matrix.
pub fn symmetric_condition_number(a: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (a + a.transpose());
    let eig = sym.symmetric_eigen().eigenvalues;
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    max / min
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lu_rejects_singular_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(LuFactor::new(a), Err(Error::SingularJacobian { .. })));
    }

    #[test]
    fn lu_solves_small_system() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let lu = LuFactor::new(a.clone()).unwrap();
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = lu.solve(&b).unwrap();
        assert_relative_eq!(a * x, b, epsilon = 1e-14);
    }

    #[test]
    fn tensor_jacobian_matches_finite_difference() {
        let n = 4;
        let t = Tensor3::from_fn(n, n, n, |i, j, k| ((i + 2 * j + 3 * k) as f64).sin());
        let theta = DVector::from_fn(n, |i, _| 0.3 * i as f64 - 0.4);
        let jac = t.quadratic_jacobian(&theta);
        let h = 1e-6;
        for m in 0..n {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[m] += h;
            tm[m] -= h;
            let fd = (t.contract(&tp, &tp) - t.contract(&tm, &tm)) / (2.0 * h);
            for i in 0..n {
                assert_relative_eq!(jac[(i, m)], fd[i], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn weighted_hessian_is_second_derivative() {
        let n = 3;
        let t = Tensor3::from_fn(n, n, n, |i, j, k| (1 + i * 9 + j * 3 + k) as f64);
        let w = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let h = t.weighted_hessian(&w);
        // w · A:θθ is quadratic, so its Hessian is exact for any θ
        let f = |th: &DVector<f64>| w.dot(&t.contract(th, th));
        let e = |i: usize| DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
        for a in 0..n {
            for b in 0..n {
                let fd = f(&(e(a) + e(b))) - f(&e(a)) - f(&e(b));
                assert_relative_eq!(h[(a, b)], fd, epsilon = 1e-10);
            }
        }
    }
}
