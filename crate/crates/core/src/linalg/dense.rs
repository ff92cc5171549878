//! Dense complex linear algebra on top of `faer`.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub type ComplexMatrix = Mat<c64>;

/// Default relative tolerance for eigensolver residuals.
pub const EIG_TOL: f64 = 1e-10;
/// Default tolerance for iterative linear solves.
pub const SOLVE_TOL: f64 = 1e-9;
/// Default floor below which a Hermitian matrix is not treated as positive definite.
pub const PD_FLOOR: f64 = 1e-12;

#[inline]
pub fn cplx(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> c64 {
    c64::new(re, 0.0)
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

/// `max |M - M^dagger|`.
pub fn hermitian_deviation(m: MatRef<'_, c64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows().saturating_sub(1)) {
            out = out.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    out
}

fn check_square(m: MatRef<'_, c64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what}: expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Rejects matrices whose anti-Hermitian part exceeds `1e-12 * max|M|`.
pub fn check_hermitian(m: MatRef<'_, c64>) -> Result<()> {
    check_square(m, "hermitian check")?;
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let deviation = hermitian_deviation(m);
    if deviation > 1e-12 * scale {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// `(M + M^dagger) / 2`.
pub fn hermitian_part(m: MatRef<'_, c64>) -> ComplexMatrix {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn identity(n: usize) -> ComplexMatrix {
    Mat::identity(n, n)
}

pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> ComplexMatrix {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = c64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Frobenius inner product `sum conj(a_ij) b_ij`.
pub fn inner(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}

pub fn frobenius(m: MatRef<'_, c64>) -> f64 {
    m.norm_l2()
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues ascending, eigenvectors as columns.
pub fn hermitian_eig(m: MatRef<'_, c64>) -> Result<(Vec<f64>, ComplexMatrix)> {
    check_hermitian(m)?;
    let sym = hermitian_part(m);
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("hermitian eigensolver: {e:?}")))?;
    let values = (0..m.nrows()).map(|i| evd.S().column_vector()[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: MatRef<'_, c64>, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let (values, vectors) = hermitian_eig(m)?;
    Ok(reassemble(&values, vectors.as_ref(), f))
}

fn reassemble(values: &[f64], u: MatRef<'_, c64>, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let n = u.nrows();
    let mut scaled = u.to_owned();
    for (j, &v) in values.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    &scaled * u.adjoint()
}

/// Inverse principal square root of a Hermitian positive-definite matrix.
pub fn inv_sqrt(m: MatRef<'_, c64>) -> Result<ComplexMatrix> {
    inv_sqrt_with_floor(m, PD_FLOOR)
}

pub fn inv_sqrt_with_floor(m: MatRef<'_, c64>, floor: f64) -> Result<ComplexMatrix> {
    let (values, vectors) = hermitian_eig(m)?;
    let min = values.first().copied().unwrap_or(1.0);
    if min < floor {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
            floor,
        });
    }
    Ok(reassemble(&values, vectors.as_ref(), |v| 1.0 / v.sqrt()))
}

/// `m^{-1/2}` restricted to eigenvalues above `rel_floor` times the largest; the
/// remaining directions are mapped to zero.
pub fn pinv_sqrt(m: MatRef<'_, c64>, rel_floor: f64) -> Result<ComplexMatrix> {
    let (values, vectors) = hermitian_eig(m)?;
    let max = values.last().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: max,
            floor: 0.0,
        });
    }
    let cut = rel_floor * max;
    Ok(reassemble(&values, vectors.as_ref(), |v| if v > cut { 1.0 / v.sqrt() } else { 0.0 }))
}

/// Principal square root of a Hermitian positive-semidefinite matrix; small negative
/// eigenvalues from roundoff are clamped to zero.
pub fn sqrt_psd(m: MatRef<'_, c64>) -> Result<ComplexMatrix> {
    hermitian_function(m, |v| v.max(0.0).sqrt())
}

pub fn inverse(m: MatRef<'_, c64>) -> Result<ComplexMatrix> {
    check_square(m, "inverse")?;
    let n = m.nrows();
    let lu = m.full_piv_lu();
    use faer::linalg::solvers::Solve;
    let inv = lu.solve(Mat::<c64>::identity(n, n));
    if inv.as_ref().norm_max().is_finite() {
        Ok(inv)
    } else {
        Err(Error::Decomposition("singular matrix".into()))
    }
}

/// Thin SVD `m = U diag(s) V^dagger`.
pub fn thin_svd(m: MatRef<'_, c64>) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Decomposition(format!("svd: {e:?}")))?;
    let k = m.nrows().min(m.ncols());
    let s = (0..k).map(|i| svd.S().column_vector()[i].re).collect();
    Ok((svd.U().to_owned(), s, svd.V().to_owned()))
}

/// Isometric factor of the polar decomposition `m = U P` (columns of `U` orthonormal
/// when `m` has at least as many rows as columns).
pub fn polar_isometry(m: MatRef<'_, c64>) -> Result<ComplexMatrix> {
    let (u, _, v) = thin_svd(m)?;
    Ok(&u * v.adjoint())
}

/// Orthonormal basis of the orthogonal complement of the column space of `w`.
///
/// `w` is `n x k` with numerical rank `k`; the result is `n x (n - k)`.
pub fn orthogonal_complement(w: MatRef<'_, c64>) -> Result<ComplexMatrix> {
    let n = w.nrows();
    let k = w.ncols();
    if k > n {
        return Err(Error::Dimension(format!(
            "orthogonal complement of {k} vectors in dimension {n}"
        )));
    }
    let svd = w
        .svd()
        .map_err(|e| Error::Decomposition(format!("svd: {e:?}")))?;
    let u = svd.U();
    Ok(Mat::from_fn(n, n - k, |i, j| u[(i, k + j)]))
}

/// Generalized Hermitian eigenproblem `H v = lambda G v` with `G` positive semidefinite.
///
/// Directions of `G` with eigenvalue below `null_tol * max eig(G)` are projected out
/// before solving, so the returned eigenvectors span only the retained subspace.
#[derive(Clone, Debug)]
pub struct GeneralizedEigenProblem {
    pub h: ComplexMatrix,
    pub g: ComplexMatrix,
    pub null_tol: f64,
}

#[derive(Clone, Debug)]
pub struct GeneralizedEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `G`-orthonormal eigenvectors as columns (`V^dagger G V = I`).
    pub vectors: ComplexMatrix,
    /// Dimension of the discarded null space of `G`.
    pub discarded: usize,
}

impl GeneralizedEigenProblem {
    pub fn new(h: ComplexMatrix, g: ComplexMatrix) -> Self {
        Self {
            h,
            g,
            null_tol: PD_FLOOR,
        }
    }

    pub fn with_null_tol(mut self, tol: f64) -> Self {
        self.null_tol = tol;
        self
    }

    pub fn solve(&self) -> Result<GeneralizedEigen> {
        generalized_eig(self)
    }
}

pub fn generalized_eig(p: &GeneralizedEigenProblem) -> Result<GeneralizedEigen> {
    let n = p.h.nrows();
    if p.g.nrows() != n || p.g.ncols() != n || p.h.ncols() != n {
        return Err(Error::Dimension(format!(
            "generalized eigenproblem: H is {}x{}, G is {}x{}",
            p.h.nrows(),
            p.h.ncols(),
            p.g.nrows(),
            p.g.ncols()
        )));
    }
    check_hermitian(p.h.as_ref())?;
    let (gvals, gvecs) = hermitian_eig(p.g.as_ref())?;
    let gmax = gvals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = p.null_tol * gmax.max(f64::MIN_POSITIVE);
    if let Some(&min) = gvals.first() {
        if min < -cut.max(1e-14 * gmax) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
                floor: -cut,
            });
        }
    }
    let kept: Vec<usize> = (0..n).filter(|&i| gvals[i] > cut).collect();
    let k = kept.len();
    // X = U_kept diag(1/sqrt(g)) maps the reduced problem back.
    let x = Mat::from_fn(n, k, |i, j| gvecs[(i, kept[j])] * (1.0 / gvals[kept[j]].sqrt()));
    let reduced = hermitian_part((x.adjoint() * &p.h * &x).as_ref());
    let (values, y) = hermitian_eig(reduced.as_ref())?;
    Ok(GeneralizedEigen {
        values,
        vectors: &x * &y,
        discarded: n - k,
    })
}
