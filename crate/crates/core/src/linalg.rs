//! Small dense linear-algebra helpers: exponentials of Hermitian 4×4
//! generators with their Fréchet derivative, and a row-major square complex
//! matrix used for density matrices.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};

use crate::{C64, Error, Result};

pub type Mat4 = Matrix4<C64>;

/// Eigenvalue gaps below this are treated as degenerate in the divided
/// difference of `exp(-iλ)`.
pub const DEGENERATE_GAP: f64 = 1e-12;

/// Divided difference of `f(x) = exp(-ix)` at `a`, `b`.
///
/// Written as `-i e^{-i(a+b)/2} sinc((a-b)/2)` so that nearly equal
/// eigenvalues do not cancel catastrophically.
#[inline]
pub fn exp_divided_difference(a: f64, b: f64) -> C64 {
    let gap = a - b;
    let mid = C64::from_polar(1.0, -0.5 * (a + b));
    if gap.abs() < DEGENERATE_GAP {
        // limit: f'(a) = -i e^{-ia}
        return C64::new(0.0, -1.0) * C64::from_polar(1.0, -a);
    }
    let x = 0.5 * gap;
    C64::new(0.0, -1.0) * mid * (x.sin() / x)
}

/// `exp(-iA)` for Hermitian `A` and its derivative along the Hermitian
/// direction `dA`, both through the eigendecomposition of `A`.
pub fn expm_neg_i_with_frechet(a: &Mat4, da: &Mat4) -> (Mat4, Mat4) {
    let eig = SymmetricEigen::new(*a);
    let v = eig.eigenvectors;
    let lam = eig.eigenvalues;
    let vh = v.adjoint();

    let phases = Mat4::from_diagonal(&lam.map(|l| C64::from_polar(1.0, -l)));
    let u = v * phases * vh;

    let mut m = vh * da * v;
    for k in 0..4 {
        for l in 0..4 {
            m[(k, l)] *= exp_divided_difference(lam[k], lam[l]);
        }
    }
    (u, v * m * vh)
}

/// `exp(-iA)` for Hermitian `A`.
pub fn expm_neg_i(a: &Mat4) -> Mat4 {
    let eig = SymmetricEigen::new(*a);
    let phases = Mat4::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, -l)));
    eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// Square complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        DenseMatrix { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(DenseMatrix { dim, data })
    }

    /// `|u⟩⟨v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        let dim = u.len();
        let mut data = Vec::with_capacity(dim * dim);
        for ui in u {
            data.extend(v.iter().map(|vj| ui * vj.conj()));
        }
        DenseMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal_re(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    /// `max |M_ij - conj(M_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                err = err.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `max |A_ij - B_ij|`.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `self ← self + s·other`.
    pub fn add_scaled(&mut self, s: f64, other: &DenseMatrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn scaled(&self, s: f64) -> DenseMatrix {
        DenseMatrix { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and
    /// eigenvectors as columns.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        let eig = SymmetricEigen::new(self.to_nalgebra());
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.dim, self.dim, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let eig = SymmetricEigen::new(self.to_nalgebra());
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Taylor series with scaling and squaring; independent of the
    /// eigendecomposition path.
    fn expm_taylor(a: &Mat4) -> Mat4 {
        let minus_i = c(0.0, -1.0);
        let norm = a.iter().map(|x| x.norm()).sum::<f64>();
        let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
        let x = a.map(|v| v * minus_i / 2f64.powi(squarings));
        let mut term = Mat4::identity();
        let mut sum = Mat4::identity();
        for k in 1..30 {
            term = term * x / c(k as f64, 0.0);
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn sample_hermitian(seed: f64) -> Mat4 {
        let mut m = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let x = (seed * (1.0 + i as f64) * (2.0 + j as f64)).sin();
                let y = (seed * (3.0 + i as f64 * j as f64)).cos();
                m[(i, j)] = c(x, if i == j { 0.0 } else { y });
            }
        }
        (m + m.adjoint()).map(|v| v * 0.5)
    }

    #[test]
    fn exponential_matches_taylor_series() {
        for seed in [0.3, 1.7, 2.9] {
            let a = sample_hermitian(seed);
            let diff = (expm_neg_i(&a) - expm_taylor(&a)).iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "diff {diff}");
        }
    }

    #[test]
    fn frechet_matches_central_difference() {
        let a = sample_hermitian(0.7);
        let da = sample_hermitian(2.2);
        let (_, du) = expm_neg_i_with_frechet(&a, &da);
        let h = 1e-5;
        let fd = (expm_taylor(&(a + da.map(|v| v * h))) - expm_taylor(&(a - da.map(|v| v * h))))
            .map(|v| v / (2.0 * h));
        let diff = (du - fd).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "diff {diff}");
    }

    #[test]
    fn frechet_with_degenerate_spectrum() {
        // A = diag(1, 1, -2, 0.5): first two eigenvalues coincide
        let a = Mat4::from_diagonal(&nalgebra::Vector4::new(c(1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0), c(0.5, 0.0)));
        let da = sample_hermitian(1.1);
        let (_, du) = expm_neg_i_with_frechet(&a, &da);
        let h = 1e-5;
        let fd = (expm_taylor(&(a + da.map(|v| v * h))) - expm_taylor(&(a - da.map(|v| v * h))))
            .map(|v| v / (2.0 * h));
        let diff = (du - fd).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "diff {diff}");
    }

    #[test]
    fn divided_difference_is_continuous_across_branch() {
        let a = 0.37;
        let limit = exp_divided_difference(a, a);
        let near = exp_divided_difference(a + 2e-12, a);
        assert!((limit - near).norm() < 1e-11);
        let far = exp_divided_difference(1.3, 0.2);
        let naive = (C64::from_polar(1.0, -1.3) - C64::from_polar(1.0, -0.2)) / 1.1;
        assert!((far - naive).norm() < 1e-14);
    }

    #[test]
    fn dense_matrix_basics() {
        let u = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let m = DenseMatrix::outer(&u, &u);
        assert_eq!(m[(0, 1)], c(0.0, -1.0));
        assert_eq!(m.trace(), c(2.0, 0.0));
        assert_eq!(m.hermiticity_error(), 0.0);
        let (vals, _) = m.hermitian_eigen();
        assert!((vals[0]).abs() < 1e-14 && (vals[1] - 2.0).abs() < 1e-14);
        assert!(DenseMatrix::from_row_major(2, vec![c(0.0, 0.0); 3]).is_err());
    }
}
