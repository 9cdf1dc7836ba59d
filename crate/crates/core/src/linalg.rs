//! Dense complex matrix helpers: vec/vech/unvec, Kronecker products, the
//! duplication matrix, guarded linear solves and the leading singular pair.
//!
//! All vectorisations are column-major. `vech` stacks the lower triangle
//! column by column, so entry `(i, j)` with `i >= j` (0-based) lands at
//! [`vech_index`]`(i, j, d) = j*d + i - j*(j+1)/2`. Every solver in the crate
//! relies on this ordering.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub use nalgebra::Complex;

#[allow(non_camel_case_types)]
pub type c64 = Complex<f64>;
pub type CMatrix = DMatrix<c64>;
pub type CVector = DVector<c64>;

/// Linear systems whose 1-norm condition estimate exceeds this are refused.
pub const CONDITION_LIMIT: f64 = 1e12;

#[inline]
pub fn c(re: f64, im: f64) -> c64 {
    Complex::new(re, im)
}

/// Column-major matrix from entries, rejecting NaN/Inf.
pub fn matrix_from_column_major(rows: usize, cols: usize, entries: &[c64]) -> Result<CMatrix> {
    if entries.len() != rows * cols {
        return Err(Error::InvalidArgument(format!(
            "{} entries for a {rows}x{cols} matrix",
            entries.len()
        )));
    }
    let m = CMatrix::from_column_slice(rows, cols, entries);
    ensure_finite(&m)?;
    Ok(m)
}

pub fn ensure_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("matrix has non-finite entries".into()))
    }
}

pub fn vec(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

pub fn unvec(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(Error::InvalidArgument(format!(
            "cannot unvec length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

#[inline]
pub fn vech_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of lower-triangular entry `(i, j)`, `i >= j`, inside `vech`.
#[inline]
pub fn vech_index(i: usize, j: usize, d: usize) -> usize {
    debug_assert!(i >= j && i < d);
    j * d + i - j * (j + 1) / 2
}

pub fn vech(a: &CMatrix) -> Result<CVector> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::InvalidArgument(format!(
            "vech needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut out = Vec::with_capacity(vech_len(d));
    for j in 0..d {
        for i in j..d {
            out.push(a[(i, j)]);
        }
    }
    Ok(CVector::from_vec(out))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra * rb, ca * cb);
    for ja in 0..ca {
        for ia in 0..ra {
            let s = a[(ia, ja)];
            if s == c64::default() {
                continue;
            }
            for jb in 0..cb {
                for ib in 0..rb {
                    out[(ia * rb + ib, ja * cb + jb)] = s * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Duplication matrix `D_d` stored by columns: column `c` (the `vech`
/// position of `(i, j)`) has unit entries at the `vec` positions of `(i, j)`
/// and `(j, i)`, which coincide on the diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicationMatrix {
    order: usize,
    columns: Vec<(usize, Option<usize>)>,
}

impl DuplicationMatrix {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "duplication matrix order must be >= 1".into(),
            ));
        }
        let d = order;
        let mut columns = Vec::with_capacity(vech_len(d));
        for j in 0..d {
            for i in j..d {
                let lower = j * d + i;
                let upper = (i != j).then_some(i * d + j);
                columns.push((lower, upper));
            }
        }
        Ok(Self { order, columns })
    }

    /// Dense construction by summing `u_ij vec(T_ij)^T` over `1 <= j <= i <= d`
    /// (1-based), where `u_ij` selects entry `(j-1)d + i - j(j-1)/2`.
    pub fn by_outer_products(order: usize) -> Result<DMatrix<f64>> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "duplication matrix order must be >= 1".into(),
            ));
        }
        let d = order;
        let n = vech_len(d);
        let mut transposed = DMatrix::<f64>::zeros(n, d * d);
        for i in 1..=d {
            for j in 1..=i {
                let mut u = DVector::<f64>::zeros(n);
                u[(j - 1) * d + i - j * (j - 1) / 2 - 1] = 1.0;
                let mut t = DMatrix::<f64>::zeros(d, d);
                t[(i - 1, j - 1)] = 1.0;
                t[(j - 1, i - 1)] = 1.0;
                let vec_t = DVector::from_column_slice(t.as_slice());
                transposed += &u * vec_t.transpose();
            }
        }
        Ok(transposed.transpose())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nrows(&self) -> usize {
        self.order * self.order
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    /// `vec` positions holding a one in column `c`.
    pub fn column(&self, c: usize) -> (usize, Option<usize>) {
        self.columns[c]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for (c, &(lo, up)) in self.columns.iter().enumerate() {
            m[(lo, c)] = 1.0;
            if let Some(up) = up {
                m[(up, c)] = 1.0;
            }
        }
        m
    }

    /// `D_d θ`, i.e. `vec` of the symmetric matrix whose `vech` is `θ`.
    pub fn apply(&self, theta: &CVector) -> Result<CVector> {
        if theta.len() != self.ncols() {
            return Err(Error::InvalidArgument(format!(
                "vector of length {} does not match D_{} ({} columns)",
                theta.len(),
                self.order,
                self.ncols()
            )));
        }
        let mut out = CVector::zeros(self.nrows());
        for (c, &(lo, up)) in self.columns.iter().enumerate() {
            out[lo] = theta[c];
            if let Some(up) = up {
                out[up] = theta[c];
            }
        }
        Ok(out)
    }

    /// `unvec(D_d θ)`.
    pub fn symmetric_from(&self, theta: &CVector) -> Result<CMatrix> {
        unvec(&self.apply(theta)?, self.order, self.order)
    }

    /// `R · D_d` for a matrix with `d²` columns.
    pub fn right_apply(&self, r: &CMatrix) -> Result<CMatrix> {
        if r.ncols() != self.nrows() {
            return Err(Error::InvalidArgument(format!(
                "matrix with {} columns cannot multiply D_{}",
                r.ncols(),
                self.order
            )));
        }
        let mut out = CMatrix::zeros(r.nrows(), self.ncols());
        for (c, &(lo, up)) in self.columns.iter().enumerate() {
            let mut col = out.column_mut(c);
            col += r.column(lo);
            if let Some(up) = up {
                col += r.column(up);
            }
        }
        Ok(out)
    }
}

fn norm1(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse through partial-pivoting LU, refused when the 1-norm condition
/// estimate exceeds [`CONDITION_LIMIT`].
pub fn inverse_guarded(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::InvalidArgument(format!(
            "cannot invert a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let inv = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularMatrix { cond: f64::INFINITY })?;
    let cond = norm1(a) * norm1(&inv);
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::SingularMatrix { cond });
    }
    Ok(inv)
}

/// Solves `A X = B` with the same guard as [`inverse_guarded`].
pub fn solve_guarded(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::InvalidArgument("dimension mismatch in solve".into()));
    }
    Ok(inverse_guarded(a)? * b)
}

/// Rotates `v` so that its first entry with magnitude above 1e-12 is real and
/// nonnegative.
pub fn normalize_phase(v: &mut CVector) {
    if let Some(z) = v.iter().copied().find(|z| z.norm() > 1e-12) {
        let rot = z.conj() / z.norm();
        for e in v.iter_mut() {
            *e *= rot;
        }
    }
}

/// Unit-norm right singular vector for the largest singular value, with the
/// canonical phase of [`normalize_phase`], and that singular value.
pub fn leading_right_singular_vector(a: &CMatrix) -> Result<(CVector, f64)> {
    ensure_nonzero(a)?;
    if a.nrows() < a.ncols() {
        let gram = a * a.adjoint();
        return leading_right_singular_vector_with_gram(a, &gram);
    }
    let svd = SVD::try_new(a.clone(), false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Degenerate("SVD did not converge".into()))?;
    let (k, sigma) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    let v_t = svd.v_t.expect("v_t requested");
    let mut v: CVector = v_t.row(k).adjoint();
    let n = v.norm();
    v /= c(n, 0.0);
    normalize_phase(&mut v);
    Ok((v, sigma))
}

/// Same as [`leading_right_singular_vector`] when `gram = A Aᴴ` is already
/// known; the top eigenvector `u` of the Gram matrix gives `v = Aᴴu / σ`.
pub fn leading_right_singular_vector_with_gram(
    a: &CMatrix,
    gram: &CMatrix,
) -> Result<(CVector, f64)> {
    if gram.nrows() != a.nrows() || !gram.is_square() {
        return Err(Error::InvalidArgument("Gram matrix shape mismatch".into()));
    }
    let eig = SymmetricEigen::try_new(gram.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Degenerate("eigen-decomposition did not converge".into()))?;
    let (k, lambda) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    if lambda <= 0.0 {
        return Err(Error::Degenerate("operator is zero".into()));
    }
    let u = eig.eigenvectors.column(k).into_owned();
    let mut v: CVector = a.adjoint() * u;
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::Degenerate("operator is zero".into()));
    }
    v /= c(n, 0.0);
    normalize_phase(&mut v);
    // ‖A v‖ is more accurate than sqrt(λ) when λ is tiny relative to ‖A‖².
    let sigma = (a * &v).norm();
    Ok((v, sigma))
}

fn ensure_nonzero(a: &CMatrix) -> Result<()> {
    if a.is_empty() || a.iter().all(|z| z.norm() == 0.0) {
        Err(Error::Degenerate("all-zero matrix has no leading singular vector".into()))
    } else {
        Ok(())
    }
}

/// Block-diagonal assembly of square blocks.
pub fn block_diagonal(blocks: &[CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    out
}
