//! Dense complex-Hermitian kernels and the trace-constrained PSD projection.
//!
//! Everything the solvers touch is a Hermitian matrix: transmit covariances,
//! interference covariances, auxiliary receive variables, multipliers, and
//! gradients. This module owns the validated [`HermitianMatrix`] wrapper,
//! eigendecomposition, positive-definite log-determinants and solves, and
//! the Euclidean projection onto a per-cell trace-budgeted PSD set.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMat = DMatrix<Complex64>;

/// Max absolute deviation from `A = A^H` accepted by [`HermitianMatrix::new`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-8;

/// Hermitian part `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Largest entrywise deviation `|a_ij - conj(a_ji)|`.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    let (rows, cols) = a.shape();
    let mut dev: f64 = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Real inner product `Re tr(A^H B)` of two same-shape complex matrices.
///
/// Restricted to Hermitian arguments this is `Re tr(A B)`, the inner product
/// under which all gradients in this crate are defined.
pub fn real_inner(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Squared Frobenius norm, the sum of squared entry moduli.
pub fn frob_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Complex matrix scaled by a real factor.
pub fn scale(a: &CMat, factor: f64) -> CMat {
    a * Complex64::new(factor, 0.0)
}

/// A square complex matrix guaranteed Hermitian at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    /// Accepts a square matrix whose deviation from Hermitian symmetry is at
    /// most [`HERMITIAN_TOLERANCE`], storing the symmetrized `(A + A^H)/2`.
    /// Larger deviations are rejected: they indicate a structurally wrong
    /// input rather than floating-point noise.
    pub fn new(a: CMat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::ShapeMismatch {
                what: "HermitianMatrix".into(),
                expected: "square".into(),
                found: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        let deviation = hermitian_deviation(&a);
        if deviation > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian {
                deviation,
                tolerance: HERMITIAN_TOLERANCE,
            });
        }
        Ok(Self(hermitian_part(&a)))
    }

    /// Symmetrizes unconditionally. For matrices Hermitian by construction
    /// (sums of `H X H^H` terms, gradients) where the deviation is rounding
    /// noise by design.
    pub fn symmetrize(a: CMat) -> Self {
        assert!(a.is_square(), "HermitianMatrix requires a square matrix");
        Self(hermitian_part(&a))
    }

    /// Identity of the given dimension.
    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n, n))
    }

    /// Zero matrix of the given dimension.
    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMat::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    /// Trace; exactly real for a Hermitian matrix.
    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        frob_sq(&self.0).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(scale(&self.0, factor))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    /// Eigendecomposition with eigenvalues in ascending order.
    pub fn eig(&self) -> EigenDecomposition {
        EigenDecomposition::of(self)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().values[0]
    }

    /// True when the smallest eigenvalue is at least `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }
}

/// Eigendecomposition `A = V diag(values) V^H` of a Hermitian matrix.
///
/// Eigenvalues are real and ascending; `vectors` is unitary.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl EigenDecomposition {
    pub fn of(a: &HermitianMatrix) -> Self {
        let se = a.0.clone().symmetric_eigen();
        let n = se.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
        let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let mut vectors = CMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &se.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    /// Rebuilds `V diag(values) V^H`.
    pub fn reconstruct(&self) -> CMat {
        let mut scaled_v = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let col = scaled_v.column(j) * Complex64::new(v, 0.0);
            scaled_v.set_column(j, &col);
        }
        scaled_v * self.vectors.adjoint()
    }

    /// Rebuilds with the provided eigenvalues in place of the stored ones.
    pub fn reconstruct_with(&self, values: &[f64]) -> CMat {
        assert_eq!(values.len(), self.values.len());
        let n = values.len();
        let mut scaled_v = self.vectors.clone();
        for j in 0..n {
            let col = scaled_v.column(j) * Complex64::new(values[j], 0.0);
            scaled_v.set_column(j, &col);
        }
        scaled_v * self.vectors.adjoint()
    }
}

fn cholesky_of(a: &HermitianMatrix, context: &str) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    Cholesky::new(a.0.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        context: context.to_string(),
    })
}

/// Log-determinant of a positive-definite Hermitian matrix, in nats.
///
/// Computed from the Cholesky factor rather than from eigenvalues.
pub fn logdet(a: &HermitianMatrix) -> Result<f64> {
    let chol = cholesky_of(a, "logdet")?;
    let l = chol.l();
    let mut acc = 0.0;
    for i in 0..a.dim() {
        acc += l[(i, i)].re.ln();
    }
    Ok(2.0 * acc)
}

/// Solves `A X = B` for positive-definite Hermitian `A`.
pub fn solve_pd(a: &HermitianMatrix, b: &CMat) -> Result<CMat> {
    if b.nrows() != a.dim() {
        return Err(Error::ShapeMismatch {
            what: "solve_pd rhs".into(),
            expected: format!("{} rows", a.dim()),
            found: format!("{} rows", b.nrows()),
        });
    }
    let chol = cholesky_of(a, "solve_pd")?;
    Ok(chol.solve(b))
}

/// Inverse of a positive-definite Hermitian matrix, symmetrized.
pub fn inv_pd(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let inv = solve_pd(a, &CMat::identity(a.dim(), a.dim()))?;
    Ok(HermitianMatrix::symmetrize(inv))
}

/// Euclidean projection of a real vector onto `{x >= 0, sum(x) <= budget}`.
///
/// Negative entries clip to zero; if the clipped sum still exceeds the
/// budget, a common shift `theta >= 0` with `sum(max(x - theta, 0)) = budget`
/// is found exactly by a sorted breakpoint scan.
pub fn project_nonneg_sum(values: &[f64], budget: f64) -> Vec<f64> {
    assert!(budget > 0.0, "budget must be positive");
    let clipped_sum: f64 = values.iter().filter(|&&v| v > 0.0).sum();
    if clipped_sum <= budget {
        return values.iter().map(|&v| v.max(0.0)).collect();
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        prefix += v;
        let candidate = (prefix - budget) / (k + 1) as f64;
        let next = sorted.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
        if candidate >= next {
            theta = candidate;
            break;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Frobenius projection of a cell's covariance list onto
/// `{X_i Hermitian, X_i >= 0, sum_i tr(X_i) <= power}`.
///
/// Each matrix keeps its own eigenvectors; the concatenated eigenvalue
/// vector is projected jointly because the trace budget couples the users.
pub fn project_cell(xs: &[HermitianMatrix], power: f64) -> Result<Vec<HermitianMatrix>> {
    if power <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "cell power budget must be positive, got {power}"
        )));
    }
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let eigs: Vec<EigenDecomposition> = xs.iter().map(|x| x.eig()).collect();
    let all_values: Vec<f64> = eigs.iter().flat_map(|e| e.values.iter().copied()).collect();
    let projected = project_nonneg_sum(&all_values, power);
    let mut out = Vec::with_capacity(xs.len());
    let mut offset = 0;
    for e in &eigs {
        let n = e.values.len();
        let vals = &projected[offset..offset + n];
        offset += n;
        out.push(HermitianMatrix::symmetrize(e.reconstruct_with(vals)));
    }
    Ok(out)
}
