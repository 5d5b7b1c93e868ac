//! Dense matrix primitives: the [`DataMatrix`] carrier, thin SVD with a fixed
//! sign convention, projection onto the column space of a design, and rank-k
//! truncation.
//!
//! The projection is kept as an orthonormal basis `U` (n × q) and applied as
//! `U (Uᵀ Y)`; the dense n × n projector is never formed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RrrError};

/// Default relative tolerance for numerical rank: `d_j > tol · d_1`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Dense real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(RrrError::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if rows * cols != entries.len() {
            return Err(RrrError::InvalidMatrix(format!(
                "{rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, &entries))
    }

    /// Wraps an nalgebra matrix after checking that every entry is finite.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(RrrError::InvalidMatrix("empty matrix".into()));
        }
        if let Some(pos) = m.iter().position(|x| !x.is_finite()) {
            return Err(RrrError::InvalidMatrix(format!(
                "non-finite entry at column-major offset {pos}"
            )));
        }
        Ok(DataMatrix(m))
    }

    /// Wraps a matrix known to be finite (results of arithmetic on finite inputs).
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        debug_assert!(m.iter().all(|x| x.is_finite()));
        DataMatrix(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DataMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        DataMatrix(DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        singular_values(self.as_matrix()).first().copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        DataMatrix(&self.0 * c)
    }

    pub fn add(&self, other: &DataMatrix) -> Result<Self> {
        check_same_shape(self, other)?;
        Ok(DataMatrix(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &DataMatrix) -> Result<Self> {
        check_same_shape(self, other)?;
        Ok(DataMatrix(&self.0 - &other.0))
    }

    pub fn matmul(&self, other: &DataMatrix) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(RrrError::ShapeError(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(DataMatrix(&self.0 * &other.0))
    }

    pub fn transpose(&self) -> Self {
        DataMatrix(self.0.transpose())
    }
}

fn check_same_shape(a: &DataMatrix, b: &DataMatrix) -> Result<()> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(RrrError::ShapeError(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// Thin singular value decomposition `M = U diag(d) Vᵀ`.
///
/// Singular values are nonincreasing. The first component of each left vector
/// whose magnitude exceeds a tiny threshold is made nonnegative, and the
/// matching right vector is flipped with it.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub singular_values: Vec<f64>,
    /// rows × min(rows, cols)
    pub left: DMatrix<f64>,
    /// cols × min(rows, cols)
    pub right: DMatrix<f64>,
}

impl SvdFactors {
    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.left.nrows()
    }

    pub fn cols(&self) -> usize {
        self.right.nrows()
    }

    /// Squared singular values, nonincreasing.
    pub fn squared(&self) -> Vec<f64> {
        self.singular_values.iter().map(|d| d * d).collect()
    }

    /// Rank-≤k reconstruction `Σ_{j≤k} d_j u_j v_jᵀ`; `k = 0` gives the zero matrix.
    pub fn truncate(&self, k: usize) -> Result<DataMatrix> {
        if k > self.len() {
            return Err(RrrError::RankOutOfRange {
                rank: k,
                max: self.len(),
            });
        }
        let mut out = DMatrix::zeros(self.rows(), self.cols());
        for j in 0..k {
            let d = self.singular_values[j];
            if d == 0.0 {
                continue;
            }
            let u = self.left.column(j);
            let v = self.right.column(j);
            out.ger(d, &u, &v, 1.0);
        }
        Ok(DataMatrix::from_trusted(out))
    }

    /// Full reconstruction.
    pub fn reconstruct(&self) -> DataMatrix {
        self.truncate(self.len()).expect("k = len is always in range")
    }
}

/// Thin SVD of `m`.
pub fn svd(m: &DataMatrix) -> Result<SvdFactors> {
    // DataMatrix is finite by construction, but a caller may have built one
    // through `new` with an already-checked matrix; keep the check cheap.
    if m.as_matrix().iter().any(|x| !x.is_finite()) {
        return Err(RrrError::InvalidMatrix("non-finite entry".into()));
    }
    Ok(svd_of(m.as_matrix()))
}

pub(crate) fn svd_of(m: &DMatrix<f64>) -> SvdFactors {
    let rows = m.nrows();
    let cols = m.ncols();
    let k = rows.min(cols);
    let decomposition = m.clone().svd(true, true);
    let u = decomposition.u.expect("left vectors requested");
    let v_t = decomposition.v_t.expect("right vectors requested");
    let values = decomposition.singular_values;

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut left = DMatrix::zeros(rows, k);
    let mut right = DMatrix::zeros(cols, k);
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut u_col = u.column(src).into_owned();
        let mut v_col: DVector<f64> = v_t.row(src).transpose();
        let scale = u_col.amax().max(f64::MIN_POSITIVE);
        if let Some(first) = u_col.iter().find(|x| x.abs() > 1e-12 * scale) {
            if *first < 0.0 {
                u_col.neg_mut();
                v_col.neg_mut();
            }
        }
        left.set_column(dst, &u_col);
        right.set_column(dst, &v_col);
        singular_values.push(values[src].max(0.0));
    }
    SvdFactors {
        singular_values,
        left,
        right,
    }
}

/// Singular values only, nonincreasing.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut d: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .map(|x| x.max(0.0))
        .collect();
    d.sort_by(|a, b| b.total_cmp(a));
    d
}

/// Orthonormal basis of the column space of a design matrix `X`.
#[derive(Debug, Clone)]
pub struct ProjectionOp {
    basis: DMatrix<f64>,
}

impl ProjectionOp {
    /// Identity projector on `R^n` (design `X = I_n`).
    pub fn identity(n: usize) -> Self {
        ProjectionOp {
            basis: DMatrix::identity(n, n),
        }
    }

    /// Rank-0 projector on `R^n`.
    pub fn null(n: usize) -> Self {
        ProjectionOp {
            basis: DMatrix::zeros(n, 0),
        }
    }

    /// Numerical rank `q` of the design.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Coordinates `Uᵀ Y` of the projection in the basis (q × m).
    pub fn coordinates(&self, y: &DataMatrix) -> Result<DMatrix<f64>> {
        if y.rows() != self.dim() {
            return Err(RrrError::ShapeError(format!(
                "projector acts on R^{}, Y has {} rows",
                self.dim(),
                y.rows()
            )));
        }
        Ok(self.basis.tr_mul(y.as_matrix()))
    }

    /// `P Y`.
    pub fn apply(&self, y: &DataMatrix) -> Result<DataMatrix> {
        let coords = self.coordinates(y)?;
        Ok(DataMatrix::from_trusted(&self.basis * coords))
    }

    /// Lifts coordinates back to `R^{n×m}`.
    pub(crate) fn lift(&self, coords: &DMatrix<f64>) -> DMatrix<f64> {
        &self.basis * coords
    }
}

/// Projection onto the leading left singular subspace of `x` with
/// `d_j(X) > rank_tol · d_1(X)`.
pub fn projection(x: &DataMatrix, rank_tol: f64) -> Result<ProjectionOp> {
    if !(rank_tol > 0.0) {
        return Err(RrrError::ConfigError(format!(
            "rank_tol must be positive, got {rank_tol}"
        )));
    }
    let f = svd(x)?;
    let d1 = f.singular_values.first().copied().unwrap_or(0.0);
    if d1 == 0.0 {
        return Err(RrrError::ZeroDesign);
    }
    let q = f.singular_values.iter().take_while(|&&d| d > rank_tol * d1).count();
    Ok(ProjectionOp {
        basis: f.left.columns(0, q).into_owned(),
    })
}

/// `P Y`, checking shapes.
pub fn project(p: &ProjectionOp, y: &DataMatrix) -> Result<DataMatrix> {
    p.apply(y)
}

/// Best rank-≤k approximation from precomputed factors.
pub fn truncate(f: &SvdFactors, k: usize) -> Result<DataMatrix> {
    f.truncate(k)
}

/// Number of singular values above `rank_tol · d_1`.
pub fn numerical_rank(m: &DataMatrix, rank_tol: f64) -> usize {
    let d = singular_values(m.as_matrix());
    let d1 = d.first().copied().unwrap_or(0.0);
    if d1 == 0.0 {
        return 0;
    }
    d.iter().filter(|&&x| x > rank_tol * d1).count()
}
