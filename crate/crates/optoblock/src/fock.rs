//! Sparse operator algebra on truncated Fock spaces and their tensor products.
//!
//! Tensor ordering convention: **mode 0 is the slowest-varying index**
//! (row-major Kronecker). The basis state `|n_0, n_1, ..., n_{k-1}>` maps to
//! the flat index `((n_0 * d_1 + n_1) * d_2 + n_2) * ...`. Every module in
//! this crate assumes that convention; do not mix in column-major embeddings.
//!
//! Operators are stored as CSR sparse matrices with sorted column indices,
//! so entry ordering is deterministic and snapshots are bit-stable.
//! Operators are immutable after construction and safe to share across
//! threads.

use num_complex::Complex64;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

/// Ordered list of per-mode truncation dimensions of a tensor-product
/// Fock space. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HilbertSpec {
    mode_dims: Vec<usize>,
}

impl HilbertSpec {
    /// A multi-mode space. Every mode needs at least two levels.
    pub fn new(mode_dims: &[usize]) -> Result<Self> {
        if mode_dims.is_empty() {
            return Err(Error::InvalidParameter("space needs at least one mode".into()));
        }
        for &d in mode_dims {
            if d < 2 {
                return Err(Error::InvalidDimension { dim: d });
            }
        }
        Ok(Self { mode_dims: mode_dims.to_vec() })
    }

    /// A single truncated mode.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(&[dim])
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn n_modes(&self) -> usize {
        self.mode_dims.len()
    }

    /// Total dimension: the product of the per-mode dimensions.
    pub fn dim(&self) -> usize {
        self.mode_dims.iter().product()
    }

    /// Flat index of the basis state with the given per-mode occupations
    /// (mode 0 slowest).
    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes(),
                actual: occupations.len(),
            });
        }
        let mut idx = 0;
        for (k, (&n, &d)) in occupations.iter().zip(&self.mode_dims).enumerate() {
            if n >= d {
                return Err(Error::InvalidParameter(format!(
                    "occupation {n} exceeds cutoff {d} on mode {k}"
                )));
            }
            idx = idx * d + n;
        }
        Ok(idx)
    }

    /// Per-mode occupations of the basis state at a flat index.
    pub fn occupations_of(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0usize; self.n_modes()];
        for k in (0..self.n_modes()).rev() {
            occ[k] = index % self.mode_dims[k];
            index /= self.mode_dims[k];
        }
        occ
    }
}

/// Sparse complex operator on a declared Hilbert space.
///
/// Entries are dimensionless or in units of gamma_c, as declared by the
/// builder that produced them. Operators may only be combined when their
/// `HilbertSpec`s are identical.
#[derive(Debug, Clone)]
pub struct Operator {
    space: HilbertSpec,
    entries: CsMat<Complex64>,
}

impl Operator {
    /// Wrap a CSR matrix, checking that its shape matches the space.
    pub fn from_csr(space: HilbertSpec, entries: CsMat<Complex64>) -> Result<Self> {
        let d = space.dim();
        if entries.rows() != d || entries.cols() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: entries.rows() });
        }
        let entries = if entries.is_csr() { entries } else { entries.to_csr() };
        Ok(Self { space, entries })
    }

    /// Build from (row, col, value) triplets.
    pub fn from_triplets(space: HilbertSpec, triplets: &[(usize, usize, Complex64)]) -> Result<Self> {
        let d = space.dim();
        let mut tri = TriMat::new((d, d));
        for &(i, j, v) in triplets {
            if i >= d || j >= d {
                return Err(Error::DimensionMismatch { expected: d, actual: i.max(j) + 1 });
            }
            tri.add_triplet(i, j, v);
        }
        Ok(Self { space, entries: tri.to_csr() })
    }

    /// The zero operator.
    pub fn zero(space: HilbertSpec) -> Self {
        let d = space.dim();
        Self { space, entries: CsMat::zero((d, d)) }
    }

    /// The identity operator.
    pub fn identity(space: HilbertSpec) -> Self {
        let d = space.dim();
        let entries: CsMat<Complex64> = CsMat::eye(d);
        Self { space, entries }
    }

    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn nnz(&self) -> usize {
        self.entries.nnz()
    }

    pub fn entries(&self) -> &CsMat<Complex64> {
        &self.entries
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch {
                left: self.space.mode_dims.clone(),
                right: other.space.mode_dims.clone(),
            });
        }
        Ok(())
    }

    /// Conjugate transpose. `adjoint(adjoint(A)) == A` exactly.
    pub fn adjoint(&self) -> Self {
        let entries = self.entries.transpose_view().to_csr().map(|v| v.conj());
        Self { space: self.space.clone(), entries }
    }

    /// Scalar multiple.
    pub fn scale(&self, z: Complex64) -> Self {
        Self { space: self.space.clone(), entries: self.entries.map(|v| v * z) }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self { space: self.space.clone(), entries: &self.entries + &other.entries })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        let neg = other.entries.map(|v| -v);
        Ok(Self { space: self.space.clone(), entries: &self.entries + &neg })
    }

    /// Matrix product `self * other`.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self { space: self.space.clone(), entries: &self.entries * &other.entries })
    }

    /// `sum_k coeff_k * op_k`, all on one space.
    pub fn linear_combination(terms: &[(Complex64, &Operator)]) -> Result<Self> {
        let (first_c, first_op) = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty linear combination".into()))?;
        let mut acc = first_op.scale(*first_c);
        for (c, op) in &terms[1..] {
            acc = acc.try_add(&op.scale(*c))?;
        }
        Ok(acc)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(a: &Self, b: &Self) -> Result<Self> {
        a.try_mul(b)?.try_sub(&b.try_mul(a)?)
    }

    /// Largest entry magnitude (0 for the empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.entries.data().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Max entrywise deviation from the adjoint; 0 for exactly Hermitian
    /// operators.
    pub fn hermiticity_error(&self) -> f64 {
        self.try_sub(&self.adjoint()).expect("same space").max_abs()
    }

    /// `tr(O rho)` for a dense column-major matrix on the same space.
    pub fn expectation(&self, rho_col_major: &[Complex64]) -> Complex64 {
        let d = self.dim();
        debug_assert_eq!(rho_col_major.len(), d * d);
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, row) in self.entries.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                // tr(O rho) = sum_ij O_ij rho_ji
                acc += v * rho_col_major[j + d * i];
            }
        }
        acc
    }

    /// Dense product `O * M` with a column-major matrix.
    pub fn mul_dense(&self, m: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        debug_assert_eq!(m.len(), d * d);
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for (i, row) in self.entries.outer_iterator().enumerate() {
            for (k, &v) in row.iter() {
                for j in 0..d {
                    out[i + d * j] += v * m[k + d * j];
                }
            }
        }
        out
    }

    /// Dense product `M * O` with a column-major matrix.
    pub fn dense_mul(&self, m: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        debug_assert_eq!(m.len(), d * d);
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for (k, row) in self.entries.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                for i in 0..d {
                    out[i + d * j] += m[i + d * k] * v;
                }
            }
        }
        out
    }

    /// Apply to a dense column vector.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let mut out = vec![Complex64::new(0.0, 0.0); d];
        for (i, row) in self.entries.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                out[i] += v * x[j];
            }
        }
        out
    }

    /// Dense column-major copy of the entries.
    pub fn to_dense_col_major(&self) -> Vec<Complex64> {
        let d = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for (i, row) in self.entries.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                out[i + d * j] = v;
            }
        }
        out
    }
}

/// Bosonic annihilation operator on a single truncated mode:
/// `<n-1| a |n> = sqrt(n)`.
pub fn annihilation(dim: usize) -> Result<Operator> {
    let space = HilbertSpec::single(dim)?;
    let mut tri = TriMat::new((dim, dim));
    for n in 1..dim {
        tri.add_triplet(n - 1, n, Complex64::new((n as f64).sqrt(), 0.0));
    }
    Ok(Operator { space, entries: tri.to_csr() })
}

/// Bosonic creation operator, `adjoint(annihilation)`.
pub fn creation(dim: usize) -> Result<Operator> {
    Ok(annihilation(dim)?.adjoint())
}

/// Number operator `a^dag a` with diagonal (0, 1, ..., dim-1).
pub fn number(dim: usize) -> Result<Operator> {
    let space = HilbertSpec::single(dim)?;
    let mut tri = TriMat::new((dim, dim));
    for n in 1..dim {
        tri.add_triplet(n, n, Complex64::new(n as f64, 0.0));
    }
    Ok(Operator { space, entries: tri.to_csr() })
}

/// Dimensionless position quadrature `q = (b^dag + b)/sqrt(2)`.
pub fn quadrature_q(dim: usize) -> Result<Operator> {
    let b = annihilation(dim)?;
    let inv_sqrt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    b.adjoint().try_add(&b).map(|op| op.scale(inv_sqrt2))
}

/// Dimensionless momentum quadrature `p = i (b^dag - b)/sqrt(2)`.
pub fn quadrature_p(dim: usize) -> Result<Operator> {
    let b = annihilation(dim)?;
    let i_inv_sqrt2 = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    b.adjoint().try_sub(&b).map(|op| op.scale(i_inv_sqrt2))
}

/// Place a single-mode operator at `mode_index` of a tensor-product space,
/// acting as the identity on every other factor.
///
/// Operators embedded at different mode indices commute exactly, and
/// `nnz(embed(op)) = nnz(op) * prod(other mode dims)`.
pub fn embed(op: &Operator, space: &HilbertSpec, mode_index: usize) -> Result<Operator> {
    if mode_index >= space.n_modes() {
        return Err(Error::ModeIndexOutOfRange { index: mode_index, n_modes: space.n_modes() });
    }
    let d_mode = space.mode_dims()[mode_index];
    if op.space.n_modes() != 1 || op.dim() != d_mode {
        return Err(Error::DimensionMismatch { expected: d_mode, actual: op.dim() });
    }
    let before: usize = space.mode_dims()[..mode_index].iter().product();
    let after: usize = space.mode_dims()[mode_index + 1..].iter().product();
    let eye_before: CsMat<Complex64> = CsMat::eye(before);
    let eye_after: CsMat<Complex64> = CsMat::eye(after);
    let left = sprs::kronecker_product(eye_before.view(), op.entries.view());
    let full = sprs::kronecker_product(left.view(), eye_after.view());
    Ok(Operator { space: space.clone(), entries: full.to_csr() })
}
