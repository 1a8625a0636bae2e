//! Dense complex linear algebra for small Hermitian operators.
//!
//! Storage is a thin newtype over `nalgebra::DMatrix<Complex64>`; the
//! Hermitian eigensolver is nalgebra's `SymmetricEigen`, re-sorted so that
//! eigenvalues come out in descending order. Everything above this module
//! speaks in terms of [`ComplexMatrix`], [`Ket`] and [`DensityMatrix`].

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{QcurError, Result};

pub type C64 = Complex64;

/// Maximum tolerated `|m_ij - conj(m_ji)|` for an operator to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Maximum tolerated deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-9;
/// Eigenvalues in `[-CLIP_TOL, 0)` are clipped to zero; anything lower is rejected.
pub const CLIP_TOL: f64 = 1e-9;
/// Relative rank cutoff: eigenvalues `<= RANK_CUTOFF * lambda_max` count as zero.
pub const RANK_CUTOFF: f64 = 1e-9;
/// Norm tolerance for kets.
pub const KET_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(QcurError::invalid("matrix dimensions must be positive"));
        }
        if entries.len() != rows * cols {
            return Err(QcurError::Dimension {
                expected: rows * cols,
                got: entries.len(),
            });
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let cols = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != cols) {
            return Err(QcurError::invalid("ragged rows"));
        }
        let entries = rows.iter().flat_map(|row| row.iter().map(|&x| c(x, 0.0))).collect();
        Self::new(r, cols, entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::from_element(rows, cols, ZERO))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| if i == j { c(diag[i], 0.0) } else { ZERO }))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_inner(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.0[(i, j)] = v;
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn diag_real(&self) -> Vec<f64> {
        (0..self.rows().min(self.cols())).map(|i| self.0[(i, i)].re).collect()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.0.shape(), other.0.shape(), "shape mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                err = err.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// `(m + m†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * c(0.5, 0.0))
    }

    /// `self * other * self†`.
    pub fn conjugate(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0 * self.0.adjoint())
    }

    pub fn kron(&self, other: &Self) -> Self {
        kron(self, other)
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        let n = self.rows();
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..self.cols() {
                acc += self.0[(i, k)] * other.0[(k, i)];
            }
        }
        acc
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self.0[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

/// Sums a non-empty slice of equally shaped matrices.
pub fn sum_matrices(ms: &[ComplexMatrix]) -> Option<ComplexMatrix> {
    let (first, rest) = ms.split_first()?;
    Some(rest.iter().fold(first.clone(), |acc, m| &acc + m))
}

pub mod pauli {
    use super::{c, ComplexMatrix, ONE, ZERO};

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::new(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap()
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::new(2, 2, vec![ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]).unwrap()
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_diag(&[1.0, -1.0])
    }

    /// `sigma_1, sigma_2, sigma_3 = X, Y, Z`.
    pub fn all() -> [ComplexMatrix; 3] {
        [x(), y(), z()]
    }
}

/// Unit-norm state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amplitudes: Vec<C64>,
}

impl Ket {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(QcurError::invalid("ket must have positive dimension"));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > KET_TOL {
            return Err(QcurError::invalid(format!("ket norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes the given amplitudes.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(QcurError::invalid("cannot normalize a zero vector"));
        }
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|z| z / norm).collect(),
        })
    }

    /// Computational basis vector `|i>`.
    pub fn basis(dim: usize, i: usize) -> Self {
        assert!(i < dim, "basis index out of range");
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[i] = ONE;
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn kron(&self, other: &Ket) -> Ket {
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ket { amplitudes }
    }

    /// `|self><self|`.
    pub fn projector(&self) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| self.amplitudes[i] * self.amplitudes[j].conj())
    }

    /// `<self| m |self>`, real part.
    pub fn expectation(&self, m: &ComplexMatrix) -> f64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            let ai = self.amplitudes[i].conj();
            for j in 0..n {
                acc += ai * m.get(i, j) * self.amplitudes[j];
            }
        }
        acc.re
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the same order as `values`.
    pub vectors: ComplexMatrix,
}

impl Eigh {
    /// `V diag(f(lambda)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let v = &self.vectors.0;
        let mut out = DMatrix::from_element(n, n, ZERO);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            let col = v.column(k);
            for i in 0..n {
                let vi = col[i] * w;
                for j in 0..n {
                    out[(i, j)] += vi * col[j].conj();
                }
            }
        }
        ComplexMatrix(out)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|x| x)
    }

    /// Threshold below which eigenvalues count as zero.
    pub fn rank_threshold(&self) -> f64 {
        let max = self.values.first().copied().unwrap_or(0.0).max(0.0);
        RANK_CUTOFF * max
    }
}

pub fn eigh(m: &ComplexMatrix) -> Result<Eigh> {
    if !m.is_square() {
        return Err(QcurError::invalid("eigh requires a square matrix"));
    }
    let herr = m.hermiticity_error();
    if herr > HERMITIAN_TOL {
        return Err(QcurError::invalid(format!(
            "matrix is not Hermitian (deviation {herr:.3e})"
        )));
    }
    Ok(eigh_unchecked(m))
}

/// Eigendecomposition of the Hermitian part of `m`, no tolerance check.
pub(crate) fn eigh_unchecked(m: &ComplexMatrix) -> Eigh {
    let n = m.rows();
    if n == 1 {
        return Eigh {
            values: vec![m.get(0, 0).re],
            vectors: ComplexMatrix::identity(1),
        };
    }
    let h = m.hermitian_part();
    let eig = SymmetricEigen::new(h.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Eigh {
        values,
        vectors: ComplexMatrix(vectors),
    }
}

/// Eigenvalues only, descending.
pub(crate) fn eigvals_unchecked(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.rows();
    if n == 1 {
        return vec![m.get(0, 0).re];
    }
    if n == 2 {
        // closed form, avoids the iterative solver on the hot path
        let a = m.get(0, 0).re;
        let d = m.get(1, 1).re;
        let b = (m.get(0, 1) + m.get(1, 0).conj()) * 0.5;
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        return vec![mean + rad, mean - rad];
    }
    let mut vals: Vec<f64> = m.hermitian_part().0.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// `V diag(f(lambda)) V†` for Hermitian `m`.
///
/// `f` returning a non-finite value at some eigenvalue is a domain error.
pub fn mat_func(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let e = eigh(m)?;
    for &lam in &e.values {
        let y = f(lam);
        if !y.is_finite() {
            return Err(QcurError::Domain(format!(
                "function undefined at eigenvalue {lam:.3e}"
            )));
        }
    }
    Ok(e.reconstruct_with(f))
}

/// Like [`mat_func`], but eigenvalues at or below the rank cutoff map to zero
/// (support-restricted evaluation, e.g. pseudo-inverses).
pub fn mat_func_on_support(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let e = eigh(m)?;
    let thr = e.rank_threshold();
    let g = |lam: f64| if lam <= thr { 0.0 } else { f(lam) };
    for &lam in &e.values {
        if !g(lam).is_finite() {
            return Err(QcurError::Domain(format!(
                "function undefined at eigenvalue {lam:.3e}"
            )));
        }
    }
    Ok(e.reconstruct_with(g))
}

/// Principal square root of a PSD matrix; small negative eigenvalues clip to zero.
pub fn sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    mat_func(m, |x| x.max(0.0).sqrt())
}

/// Moore-Penrose inverse square root, restricted to the support of `rho`.
pub fn pinv_sqrt(rho: &DensityMatrix) -> ComplexMatrix {
    pinv_sqrt_matrix(rho.matrix()).expect("density matrix is Hermitian")
}

pub(crate) fn pinv_sqrt_matrix(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    mat_func_on_support(m, |x| 1.0 / x.sqrt())
}

/// Projector onto the support of a PSD matrix.
pub fn support_projector(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    mat_func_on_support(m, |_| 1.0)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

/// Which subsystem survives a partial trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

pub fn partial_trace(m: &ComplexMatrix, dims: (usize, usize), keep: Keep) -> Result<ComplexMatrix> {
    let (da, db) = dims;
    let n = da * db;
    if !m.is_square() || m.rows() != n {
        return Err(QcurError::Dimension {
            expected: n,
            got: m.rows(),
        });
    }
    let out = match keep {
        Keep::A => ComplexMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| m.get(i * db + k, j * db + k)).sum()
        }),
        Keep::B => ComplexMatrix::from_fn(db, db, |i, j| {
            (0..da).map(|k| m.get(k * db + i, k * db + j)).sum()
        }),
    };
    Ok(out)
}

/// Exchanges the two tensor factors: `SWAP (A⊗B) SWAP† = B⊗A`.
pub fn swap_subsystems(m: &ComplexMatrix, dims: (usize, usize)) -> Result<ComplexMatrix> {
    let (da, db) = dims;
    let n = da * db;
    if !m.is_square() || m.rows() != n {
        return Err(QcurError::Dimension {
            expected: n,
            got: m.rows(),
        });
    }
    // index (a, b) -> a * db + b maps to (b, a) -> b * da + a
    let perm = |idx: usize| {
        let (a, b) = (idx / db, idx % db);
        b * da + a
    };
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(perm(i), perm(j), m.get(i, j));
        }
    }
    Ok(out)
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates `m` as a state.
    ///
    /// Eigenvalues in `[-CLIP_TOL, 0)` are clipped and the spectrum
    /// renormalized; anything more negative is rejected.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(QcurError::invalid("density matrix must be square"));
        }
        let herr = m.hermiticity_error();
        if herr > HERMITIAN_TOL {
            return Err(QcurError::invalid(format!(
                "density matrix is not Hermitian (deviation {herr:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QcurError::invalid(format!(
                "density matrix trace {:.12} is not 1",
                tr.re
            )));
        }
        let h = m.hermitian_part();
        let vals = eigvals_unchecked(&h);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -CLIP_TOL {
            return Err(QcurError::invalid(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        if min < 0.0 {
            return Ok(Self::clipped(&h));
        }
        Ok(Self { matrix: h })
    }

    /// Projects a Hermitian matrix with positive trace onto the state space by
    /// zeroing every negative eigenvalue and renormalizing.
    ///
    /// Intended for matrices transcribed from printed tables, where rounding
    /// of the entries leaves eigenvalues well below the clipping tolerance.
    pub fn project_psd(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(QcurError::invalid("density matrix must be square"));
        }
        let herr = m.hermiticity_error();
        if herr > 1e-6 {
            return Err(QcurError::invalid(format!(
                "matrix is not Hermitian (deviation {herr:.3e})"
            )));
        }
        let e = eigh_unchecked(m);
        let total: f64 = e.values.iter().map(|x| x.max(0.0)).sum();
        if total <= 0.0 {
            return Err(QcurError::invalid("matrix has no positive spectrum"));
        }
        Ok(Self {
            matrix: e.reconstruct_with(|x| x.max(0.0) / total).hermitian_part(),
        })
    }

    fn clipped(h: &ComplexMatrix) -> Self {
        let e = eigh_unchecked(h);
        let total: f64 = e.values.iter().map(|x| x.max(0.0)).sum();
        Self {
            matrix: e.reconstruct_with(|x| x.max(0.0) / total).hermitian_part(),
        }
    }

    /// Wraps a matrix already known to be a state up to rounding.
    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        Self {
            matrix: m.hermitian_part(),
        }
    }

    pub fn from_pure(ket: &Ket) -> Self {
        Self {
            matrix: ket.projector(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_diag(probs))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Spectrum, descending, with tiny negatives clipped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvals_unchecked(&self.matrix)
            .into_iter()
            .map(|x| x.max(0.0))
            .collect()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).re
    }

    /// `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        if self.dim() != other.dim() {
            return Err(QcurError::Dimension {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(QcurError::invalid(format!("mixing weight {w} outside [0, 1]")));
        }
        Ok(Self::from_trusted(
            &self.matrix.scale(w) + &other.matrix.scale(1.0 - w),
        ))
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self::from_trusted(kron(&self.matrix, &other.matrix))
    }

    pub fn partial_trace(&self, dims: (usize, usize), keep: Keep) -> Result<DensityMatrix> {
        partial_trace(&self.matrix, dims, keep).map(Self::from_trusted)
    }

    /// `U rho U†`.
    pub fn conjugated_by(&self, u: &ComplexMatrix) -> DensityMatrix {
        Self::from_trusted(u.conjugate(&self.matrix))
    }
}

pub fn bures_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(QcurError::Dimension {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    let sr = sqrt_psd(rho.matrix())?;
    let inner = (&(&sr * sigma.matrix()) * &sr).hermitian_part();
    let root_trace: f64 = eigvals_unchecked(&inner).iter().map(|x| x.max(0.0).sqrt()).sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}
