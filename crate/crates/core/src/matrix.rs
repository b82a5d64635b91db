//! Dense numerical primitives shared by every other module.
//!
//! Matrices are plain `nalgebra::DMatrix<f64>` values. Two wrappers carry
//! invariants that the rest of the crate relies on: [`OrthoBasis`] (a matrix
//! with orthonormal columns, possibly with zero columns) and [`SupportSet`]
//! (a set of entry positions of a fixed shape).
//!
//! Subspaces are always compared through their projectors, never through raw
//! columns, since singular vectors are only defined up to sign and rotation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Largest deviation of `QᵀQ` from the identity accepted for a basis.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Scalar soft-thresholding (shrinkage) operator.
#[inline]
pub fn soft_threshold(x: f64, eps: f64) -> f64 {
    if x > eps {
        x - eps
    } else if x < -eps {
        x + eps
    } else {
        0.0
    }
}

pub fn soft_threshold_matrix(m: &Mat, eps: f64) -> Mat {
    m.map(|x| soft_threshold(x, eps))
}

/// Entrywise sign with `sgn(0) = 0`.
pub fn sign(m: &Mat) -> Mat {
    m.map(|x| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn l1_norm(m: &Mat) -> f64 {
    m.iter().map(|x| x.abs()).sum()
}

/// Frobenius inner product `<A, B> = trace(AᵀB)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn ensure_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} contains non-finite entries"
        )))
    }
}

/// Horizontal concatenation `[a b]`.
pub fn hstack(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "cannot stack {} rows next to {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    Ok(out)
}

/// Cut-off below which a singular value is treated as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankFloor {
    /// Keep `s_i > c · max(n1, n2) · s_max`.
    Relative(f64),
    /// Keep `s_i > c`.
    Absolute(f64),
}

impl Default for RankFloor {
    fn default() -> Self {
        RankFloor::Relative(1e-12)
    }
}

impl RankFloor {
    pub fn threshold(&self, s_max: f64, rows: usize, cols: usize) -> f64 {
        match *self {
            RankFloor::Relative(c) => c * rows.max(cols) as f64 * s_max,
            RankFloor::Absolute(c) => c,
        }
    }
}

/// A matrix whose columns are orthonormal. Zero columns is a legal value and
/// stands for the trivial subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis {
    columns: Mat,
}

impl OrthoBasis {
    pub fn new(columns: Mat) -> Result<Self> {
        ensure_finite(&columns, "basis")?;
        if columns.ncols() > columns.nrows() {
            return Err(Error::Dimension(format!(
                "basis rank {} exceeds ambient dimension {}",
                columns.ncols(),
                columns.nrows()
            )));
        }
        let gram = columns.transpose() * &columns;
        let dev = (gram - Mat::identity(columns.ncols(), columns.ncols())).amax();
        if dev > ORTHONORMALITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "columns are not orthonormal (max |QᵀQ - I| = {dev:.3e})"
            )));
        }
        Ok(Self { columns })
    }

    /// Wraps columns already known to be orthonormal (SVD factors and the like).
    pub(crate) fn from_orthonormal(columns: Mat) -> Self {
        debug_assert!(columns.ncols() <= columns.nrows());
        Self { columns }
    }

    pub fn empty(ambient_dim: usize) -> Self {
        Self {
            columns: Mat::zeros(ambient_dim, 0),
        }
    }

    /// The first `rank` standard basis vectors of `R^ambient_dim`.
    pub fn standard(ambient_dim: usize, rank: usize) -> Result<Self> {
        if rank > ambient_dim {
            return Err(Error::Dimension(format!(
                "rank {rank} exceeds ambient dimension {ambient_dim}"
            )));
        }
        Ok(Self {
            columns: Mat::identity(ambient_dim, rank),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.rank() == 0
    }

    pub fn columns(&self) -> &Mat {
        &self.columns
    }

    pub fn into_columns(self) -> Mat {
        self.columns
    }

    /// `Q Qᵀ`, an `n × n` matrix.
    pub fn projector(&self) -> Mat {
        &self.columns * self.columns.transpose()
    }

    /// `Q Qᵀ M`.
    pub fn project(&self, m: &Mat) -> Mat {
        &self.columns * (self.columns.transpose() * m)
    }

    /// `(I - Q Qᵀ) M`.
    pub fn project_out(&self, m: &Mat) -> Mat {
        m - self.project(m)
    }

    /// Columns `start..end` as a new basis.
    pub fn select(&self, start: usize, end: usize) -> OrthoBasis {
        assert!(start <= end && end <= self.rank(), "column range out of bounds");
        Self::from_orthonormal(self.columns.columns(start, end - start).into_owned())
    }

    /// `[self other]`, which must again be orthonormal.
    pub fn concat(&self, other: &OrthoBasis) -> Result<OrthoBasis> {
        let stacked = hstack(&self.columns, &other.columns)?;
        OrthoBasis::new(stacked)
    }

    /// Frobenius distance between the two orthogonal projectors,
    /// `||P1 P1ᵀ - P2 P2ᵀ||_F`, computed without forming `n × n` matrices.
    pub fn projector_distance(&self, other: &OrthoBasis) -> f64 {
        assert_eq!(self.ambient_dim(), other.ambient_dim());
        let a = other.project_out(&self.columns).norm_squared();
        let b = self.project_out(&other.columns).norm_squared();
        (a + b).sqrt()
    }

    /// Largest squared row norm, `max_i ||Qᵀ e_i||²`.
    pub fn max_row_norm_sq(&self) -> f64 {
        self.columns
            .row_iter()
            .map(|row| row.norm_squared())
            .fold(0.0, f64::max)
    }
}

/// Reduced singular value decomposition truncated at a numerical rank.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: OrthoBasis,
    pub singular_values: Vec<f64>,
    pub v: OrthoBasis,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.columns().clone();
        for (k, s) in self.singular_values.iter().enumerate() {
            us.column_mut(k).scale_mut(*s);
        }
        us * self.v.columns().transpose()
    }
}

fn to_faer(m: &Mat) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Mat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full (untruncated) thin SVD with singular values sorted nonincreasing.
// nalgebra's SVD returns wrong factors for some rank-deficient inputs, which
// are the common case here, so the decomposition goes through faer.
fn thin_svd(m: &Mat) -> Result<(Mat, Vec<f64>, Mat)> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok((Mat::zeros(r, 0), Vec::new(), Mat::zeros(c, 0)));
    }
    let svd = to_faer(m).thin_svd().map_err(|e| Error::SvdFailure {
        context: format!("{r}x{c} matrix: {e:?}"),
    })?;
    let s = svd.S().column_vector();
    let values = (0..s.nrows()).map(|k| s[k]).collect();
    Ok((from_faer(svd.U()), values, from_faer(svd.V())))
}

pub fn svd(m: &Mat) -> Result<SvdResult> {
    svd_with_floor(m, RankFloor::default())
}

pub fn svd_with_floor(m: &Mat, floor: RankFloor) -> Result<SvdResult> {
    ensure_finite(m, "svd input")?;
    let (u, s, v) = thin_svd(m)?;
    let s_max = s.first().copied().unwrap_or(0.0);
    let cut = floor.threshold(s_max, m.nrows(), m.ncols());
    let rank = s.iter().take_while(|&&x| x > cut).count();
    Ok(SvdResult {
        u: OrthoBasis::from_orthonormal(u.columns(0, rank).into_owned()),
        singular_values: s[..rank].to_vec(),
        v: OrthoBasis::from_orthonormal(v.columns(0, rank).into_owned()),
    })
}

/// All `min(n1, n2)` singular values, nonincreasing. Cheaper than [`svd`].
pub fn singular_values(m: &Mat) -> Result<Vec<f64>> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(Vec::new());
    }
    to_faer(m).singular_values().map_err(|e| Error::SvdFailure {
        context: format!("{r}x{c} matrix (values only): {e:?}"),
    })
}

pub fn spectral_norm(m: &Mat) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Singular value thresholding `U diag(max(s - tau, 0)) Vᵀ`, together with the
/// rank of the result.
pub fn svt_with_rank(m: &Mat, tau: f64) -> Result<(Mat, usize)> {
    let (u, s, v) = thin_svd(m)?;
    let kept = s.iter().take_while(|&&x| x > tau).count();
    let mut us = u.columns(0, kept).into_owned();
    for k in 0..kept {
        us.column_mut(k).scale_mut(s[k] - tau);
    }
    Ok((us * v.columns(0, kept).transpose(), kept))
}

/// Proximal operator of `tau ||·||_*`.
pub fn svt(m: &Mat, tau: f64) -> Result<Mat> {
    svt_with_rank(m, tau).map(|(x, _)| x)
}

/// Orthonormal basis for the span of the left singular vectors of `a` whose
/// singular values exceed `tol`.
pub fn orthonormalize(a: &Mat, tol: f64) -> Result<OrthoBasis> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "orthonormalization tolerance must be positive, got {tol}"
        )));
    }
    Ok(svd_with_floor(a, RankFloor::Absolute(tol))?.u)
}

/// A set of entry positions `(row, col)` of an `n1 × n2` matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    rows: usize,
    cols: usize,
    // column-major membership, index = i + j * rows
    mask: Vec<bool>,
    len: usize,
}

impl SupportSet {
    pub fn new(
        rows: usize,
        cols: usize,
        indices: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut mask = vec![false; rows * cols];
        let mut len = 0;
        for (i, j) in indices {
            if i >= rows || j >= cols {
                return Err(Error::Dimension(format!(
                    "index ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            let slot = &mut mask[i + j * rows];
            if *slot {
                return Err(Error::InvalidParameter(format!("duplicate index ({i}, {j})")));
            }
            *slot = true;
            len += 1;
        }
        Ok(Self {
            rows,
            cols,
            mask,
            len,
        })
    }

    pub(crate) fn from_mask(rows: usize, cols: usize, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), rows * cols);
        let len = mask.iter().filter(|&&b| b).count();
        Self {
            rows,
            cols,
            mask,
            len,
        }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self::from_mask(rows, cols, vec![false; rows * cols])
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self::from_mask(rows, cols, vec![true; rows * cols])
    }

    /// Positions of the nonzero entries of `m`.
    pub fn nonzeros_of(m: &Mat) -> Self {
        Self::from_mask(m.nrows(), m.ncols(), m.iter().map(|&x| x != 0.0).collect())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.rows && j < self.cols && self.mask[i + j * self.rows]
    }

    /// Indices in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let rows = self.rows;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k % rows, k / rows))
    }

    pub fn complement(&self) -> Self {
        Self::from_mask(self.rows, self.cols, self.mask.iter().map(|b| !b).collect())
    }

    pub fn union(&self, other: &SupportSet) -> Result<Self> {
        self.check_same_shape(other)?;
        let mask = self
            .mask
            .iter()
            .zip(&other.mask)
            .map(|(a, b)| *a || *b)
            .collect();
        Ok(Self::from_mask(self.rows, self.cols, mask))
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.shape() == other.shape() && self.mask.iter().zip(&other.mask).all(|(a, b)| !a || *b)
    }

    /// Restriction of the set to column `j`, as row indices.
    pub fn column_rows(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.mask[j * self.rows..(j + 1) * self.rows]
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    fn check_same_shape(&self, other: &SupportSet) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "support shapes {:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    pub(crate) fn mask(&self) -> &[bool] {
        &self.mask
    }
}

/// `P_Ω M`: keeps the entries of `m` on `omega`, zeroes the rest.
pub fn project_support(m: &Mat, omega: &SupportSet) -> Result<Mat> {
    if m.shape() != omega.shape() {
        return Err(Error::Dimension(format!(
            "matrix {:?} vs support {:?}",
            m.shape(),
            omega.shape()
        )));
    }
    let mut out = m.clone();
    for (x, &keep) in out.iter_mut().zip(omega.mask()) {
        if !keep {
            *x = 0.0;
        }
    }
    Ok(out)
}

/// The space of matrices `A Lᵀ... ` spanned by a left basis `L` and a right
/// basis `R`: `{ L Xᵀ + Y Rᵀ }`. Its orthogonal complement is
/// `{ (I - L Lᵀ) M (I - R Rᵀ) }`.
#[derive(Debug, Clone)]
pub struct LowRankSpace {
    left: OrthoBasis,
    right: OrthoBasis,
}

impl LowRankSpace {
    pub fn new(left: OrthoBasis, right: OrthoBasis) -> Self {
        Self { left, right }
    }

    /// Left basis `[G U_new]`, right basis `V_new`.
    pub fn from_prior(g: &OrthoBasis, u_new: &OrthoBasis, v_new: &OrthoBasis) -> Result<Self> {
        if g.ambient_dim() != u_new.ambient_dim() {
            return Err(Error::Dimension(format!(
                "prior has {} rows, u_new has {}",
                g.ambient_dim(),
                u_new.ambient_dim()
            )));
        }
        Ok(Self::new(g.concat(u_new)?, v_new.clone()))
    }

    pub fn left(&self) -> &OrthoBasis {
        &self.left
    }

    pub fn right(&self) -> &OrthoBasis {
        &self.right
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.left.ambient_dim(), self.right.ambient_dim())
    }

    fn check(&self, m: &Mat) -> Result<()> {
        if m.shape() == self.shape() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "matrix {:?} vs space {:?}",
                m.shape(),
                self.shape()
            )))
        }
    }

    /// `(I - L Lᵀ) M (I - R Rᵀ)`.
    pub fn project_perp(&self, m: &Mat) -> Result<Mat> {
        self.check(m)?;
        let a = self.left.project_out(m);
        let ar = &a * self.right.columns();
        Ok(a - ar * self.right.columns().transpose())
    }

    pub fn project(&self, m: &Mat) -> Result<Mat> {
        Ok(m - self.project_perp(m)?)
    }
}

/// `P_Π M = M - (I - L Lᵀ) M (I - R Rᵀ)`.
pub fn project_pi(m: &Mat, left: &OrthoBasis, right: &OrthoBasis) -> Result<Mat> {
    LowRankSpace::new(left.clone(), right.clone()).project(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub operator: f64,
    pub frobenius: f64,
    pub l1: f64,
    pub linf: f64,
    pub nuclear: f64,
}

pub fn norms(m: &Mat) -> Result<Norms> {
    ensure_finite(m, "norm input")?;
    let s = singular_values(m)?;
    Ok(Norms {
        operator: s.first().copied().unwrap_or(0.0),
        frobenius: m.norm(),
        l1: l1_norm(m),
        linf: max_abs(m),
        nuclear: s.iter().sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn soft_threshold_cases() {
        assert!((soft_threshold(1.2, 0.5) - 0.7).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.3, 0.5), 0.0);
        for x in [-3.5, -1e-9, 0.0, 2.25] {
            assert_eq!(soft_threshold(x, 0.0), x);
        }
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
    }

    #[test]
    fn soft_threshold_matrix_cases() {
        let z = Mat::zeros(3, 4);
        assert_eq!(soft_threshold_matrix(&z, 0.7), z);

        let m = Mat::from_row_slice(2, 2, &[2.0, -2.0, 0.1, -0.1]);
        let expected = Mat::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]);
        assert_eq!(soft_threshold_matrix(&m, 1.0), expected);

        let m = random(5, 5, 3);
        let out = soft_threshold_matrix(&m, 0.3);
        for i in 0..5 {
            for j in 0..5 {
                let x = m[(i, j)];
                let want = if x > 0.3 {
                    x - 0.3
                } else if x < -0.3 {
                    x + 0.3
                } else {
                    0.0
                };
                assert_eq!(out[(i, j)], want);
            }
        }
    }

    #[test]
    fn svd_examples() {
        let s = svd(&Mat::identity(3, 3)).unwrap();
        assert_eq!(s.rank(), 3);
        for x in &s.singular_values {
            assert!((x - 1.0).abs() < 1e-14);
        }

        let d = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 0.0]));
        let s = svd(&d).unwrap();
        assert_eq!(s.rank(), 2);
        assert!((s.singular_values[0] - 3.0).abs() < 1e-14);
        assert!((s.singular_values[1] - 1.0).abs() < 1e-14);

        let prod = random(5, 2, 1) * random(2, 4, 2);
        let s = svd(&prod).unwrap();
        assert_eq!(s.rank(), 2);
        let rel = (s.reconstruct() - &prod).norm() / prod.norm();
        assert!(rel < 1e-12, "{rel}");
    }

    #[test]
    fn svd_zero_and_degenerate_shapes() {
        let s = svd(&Mat::zeros(4, 3)).unwrap();
        assert_eq!(s.rank(), 0);
        assert_eq!(s.u.ambient_dim(), 4);
        assert_eq!(s.v.ambient_dim(), 3);

        let row = Mat::from_row_slice(1, 3, &[3.0, 0.0, 4.0]);
        let s = svd(&row).unwrap();
        assert_eq!(s.rank(), 1);
        assert!((s.singular_values[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn svd_rejects_nonfinite() {
        let mut m = Mat::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(svd(&m).is_err());
    }

    #[test]
    fn svt_examples() {
        let d = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 0.2]));
        let out = svt(&d, 0.5).unwrap();
        let want = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.5, 0.5, 0.0]));
        assert!((out - want).amax() < 1e-14);

        let m = random(6, 4, 9);
        let out = svt(&m, 0.0).unwrap();
        assert!((out - &m).norm() / m.norm() < 1e-8);

        let s1 = spectral_norm(&m).unwrap();
        let (out, rank) = svt_with_rank(&m, s1 + 1.0).unwrap();
        assert_eq!(rank, 0);
        assert_eq!(out, Mat::zeros(6, 4));
    }

    #[test]
    fn svt_singular_values_are_shrunk() {
        let m = random(7, 5, 11);
        let tau = 0.4;
        let before = singular_values(&m).unwrap();
        let after = singular_values(&svt(&m, tau).unwrap()).unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert!((a - (b - tau).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn orthonormalize_examples() {
        let b = orthonormalize(&(Mat::identity(4, 4) * 2.0), 1e-10).unwrap();
        assert_eq!(b.rank(), 4);
        assert!((b.projector() - Mat::identity(4, 4)).amax() < 1e-14);

        let b = orthonormalize(&Mat::zeros(5, 3), 1e-10).unwrap();
        assert!(b.is_empty());

        // Projector-comparison oracle: P = A (AᵀA)⁻¹ Aᵀ.
        let a = random(8, 3, 21);
        let b = orthonormalize(&a, 1e-10).unwrap();
        assert_eq!(b.rank(), 3);
        let gram_inv = (a.transpose() * &a).try_inverse().unwrap();
        let p = &a * gram_inv * a.transpose();
        assert!((b.projector() - p).norm() < 1e-12);

        assert!(orthonormalize(&a, 0.0).is_err());
    }

    #[test]
    fn ortho_basis_validation() {
        assert!(OrthoBasis::new(Mat::from_row_slice(2, 1, &[1.0, 1.0])).is_err());
        assert!(OrthoBasis::new(Mat::identity(2, 3)).is_err());
        let b = OrthoBasis::new(Mat::identity(3, 2)).unwrap();
        assert_eq!(b.rank(), 2);
        assert_eq!(OrthoBasis::empty(5).projector(), Mat::zeros(5, 5));
    }

    #[test]
    fn projector_distance_matches_explicit() {
        let a = orthonormalize(&random(9, 3, 1), 1e-10).unwrap();
        let b = orthonormalize(&random(9, 2, 2), 1e-10).unwrap();
        let explicit = (a.projector() - b.projector()).norm();
        assert!((a.projector_distance(&b) - explicit).abs() < 1e-12);
        assert!(a.projector_distance(&a) < 1e-14);
    }

    #[test]
    fn support_set_basics() {
        assert!(SupportSet::new(2, 2, [(0, 0), (0, 0)]).is_err());
        assert!(SupportSet::new(2, 2, [(2, 0)]).is_err());
        let s = SupportSet::new(3, 2, [(0, 1), (2, 0)]).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.contains(2, 0) && !s.contains(1, 1));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![(2, 0), (0, 1)]);
        let c = s.complement();
        assert_eq!(c.len(), 4);
        assert_eq!(s.union(&c).unwrap(), SupportSet::full(3, 2));
        assert!(s.is_subset_of(&SupportSet::full(3, 2)));
        assert!(!c.is_subset_of(&s));
    }

    #[test]
    fn project_support_examples() {
        let m = random(4, 5, 5);
        let full = SupportSet::full(4, 5);
        assert_eq!(project_support(&m, &full).unwrap(), m);
        assert_eq!(
            project_support(&m, &SupportSet::empty(4, 5)).unwrap(),
            Mat::zeros(4, 5)
        );
        let omega = SupportSet::new(4, 5, [(0, 0), (1, 3), (3, 4)]).unwrap();
        let sum = project_support(&m, &omega).unwrap()
            + project_support(&m, &omega.complement()).unwrap();
        assert_eq!(sum, m);
        assert!(project_support(&m, &SupportSet::full(5, 4)).is_err());
    }

    #[test]
    fn project_pi_examples() {
        let m = random(3, 3, 8);
        let id = OrthoBasis::standard(3, 3).unwrap();
        let e = OrthoBasis::empty(3);
        assert!((project_pi(&m, &id, &e).unwrap() - &m).amax() < 1e-15);
        assert_eq!(project_pi(&m, &e, &e).unwrap(), Mat::zeros(3, 3));

        // Entrywise oracle for left = right = e1: P_Π M keeps row 0 and column 0.
        let e1 = OrthoBasis::standard(3, 1).unwrap();
        let p = project_pi(&m, &e1, &e1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == 0 || j == 0 { m[(i, j)] } else { 0.0 };
                assert!((p[(i, j)] - want).abs() < 1e-15);
            }
        }
        assert!(project_pi(&random(4, 3, 1), &e1, &e1).is_err());
    }

    #[test]
    fn norms_examples() {
        let d = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
        let n = norms(&d).unwrap();
        assert!((n.operator - 3.0).abs() < 1e-14);
        assert!((n.nuclear - 4.0).abs() < 1e-14);
        assert!((n.frobenius - 10f64.sqrt()).abs() < 1e-14);
        assert_eq!(n.l1, 4.0);
        assert_eq!(n.linf, 3.0);

        let z = norms(&Mat::zeros(3, 2)).unwrap();
        assert_eq!((z.operator, z.frobenius, z.l1, z.linf, z.nuclear), (0.0, 0.0, 0.0, 0.0, 0.0));

        let n = norms(&random(4, 4, 77)).unwrap();
        assert!(n.frobenius <= n.nuclear + 1e-12);
        assert!(n.operator <= n.frobenius + 1e-12);
    }

    #[test]
    fn duality_pairs() {
        let m = random(6, 5, 31);
        assert!((inner(&m, &sign(&m)) - l1_norm(&m)).abs() < 1e-10);
        let s = svd(&m).unwrap();
        let uv = s.u.columns() * s.v.columns().transpose();
        let nuc: f64 = s.singular_values.iter().sum();
        assert!((inner(&m, &uv) - nuc).abs() / nuc < 1e-8);
    }

    #[test]
    fn svt_is_the_nuclear_prox() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random(5, 4, 13);
        let tau = 0.3;
        let objective = |x: &Mat| -> f64 {
            let nuc: f64 = singular_values(x).unwrap().iter().sum();
            0.5 * (x - &m).norm_squared() + tau * nuc
        };
        let x = svt(&m, tau).unwrap();
        let best = objective(&x);
        for _ in 0..1000 {
            let scale = 10f64.powf(rng.random_range(-4.0..0.0));
            let p = Mat::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0)) * scale;
            assert!(objective(&(&x + p)) >= best - 1e-8);
        }
    }

    #[test]
    fn operations_are_deterministic() {
        let m = random(12, 7, 4);
        let a = svt(&m, 0.2).unwrap();
        let b = svt(&m, 0.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn svd_of_rank_deficient_products() {
        // the failure mode that ruled out nalgebra's SVD
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..200u64 {
            let (n1, n2, r) = (rng.random_range(1..50), rng.random_range(1..50), rng.random_range(0..6));
            let m = random(n1, r, 2 * k) * random(r, n2, 2 * k + 1);
            let (u, s, v) = thin_svd(&m).unwrap();
            let mut us = u.clone();
            for (q, x) in s.iter().enumerate() {
                us.column_mut(q).scale_mut(*x);
            }
            assert!((us * v.transpose() - &m).norm() <= 1e-12 * (1.0 + m.norm()));
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
            let dec = svd(&m).unwrap();
            assert!(dec.u.rank() <= r);
            assert!((dec.reconstruct() - &m).norm() <= 1e-10 * (1.0 + m.norm()));
        }
    }
}
