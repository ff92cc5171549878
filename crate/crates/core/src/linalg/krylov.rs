//! Krylov-subspace solvers for linear maps on flat complex vectors.
//!
//! Left eigenvectors are paired with right ones through the bilinear form
//! `w . r = sum_i w_i r_i`, so a left eigenvector of `T` is a right eigenvector of
//! the plain transpose `T^T`.

use faer::{c64, Mat};

use super::dense::{self, cplx};
use crate::error::{Error, Result};

pub trait LinearMap: Sync {
    fn dim(&self) -> usize;
    /// `y = T x`
    fn apply(&self, x: &[c64], y: &mut [c64]);
    /// `y = T^T x`
    fn apply_transpose(&self, x: &[c64], y: &mut [c64]);
}

/// The transpose of a map.
pub struct Transposed<'a, M: ?Sized>(pub &'a M);

impl<M: LinearMap + ?Sized> LinearMap for Transposed<'_, M> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[c64], y: &mut [c64]) {
        self.0.apply_transpose(x, y)
    }
    fn apply_transpose(&self, x: &[c64], y: &mut [c64]) {
        self.0.apply(x, y)
    }
}

/// A dense matrix viewed as a map.
pub struct DenseMap(pub Mat<c64>);

impl LinearMap for DenseMap {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[c64], y: &mut [c64]) {
        let m = &self.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum();
        }
    }
    fn apply_transpose(&self, x: &[c64], y: &mut [c64]) {
        let m = &self.0;
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = (0..m.nrows()).map(|i| m[(i, j)] * x[i]).sum();
        }
    }
}

/// Materializes a map as a dense matrix, column by column.
pub fn to_dense(map: &dyn LinearMap) -> Mat<c64> {
    let n = map.dim();
    let mut out = Mat::zeros(n, n);
    let mut e = vec![c64::new(0.0, 0.0); n];
    let mut y = vec![c64::new(0.0, 0.0); n];
    for j in 0..n {
        e[j] = c64::new(1.0, 0.0);
        map.apply(&e, &mut y);
        for i in 0..n {
            out[(i, j)] = y[i];
        }
        e[j] = c64::new(0.0, 0.0);
    }
    out
}

pub fn dotu(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dotc(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(alpha: c64, x: &[c64], y: &mut [c64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: c64, x: &mut [c64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

fn normalized(x: &[c64]) -> Vec<c64> {
    let n = norm(x);
    x.iter().map(|v| v / n).collect()
}

/// Deterministic start vector with no special alignment.
fn default_start(n: usize) -> Vec<c64> {
    (0..n)
        .map(|i| {
            let t = i as f64 + 1.0;
            cplx(1.0 + 0.1 * (0.37 * t).sin(), 0.05 * (0.71 * t).cos())
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_restarts: usize,
    pub krylov_dim: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: dense::EIG_TOL,
            max_restarts: 200,
            krylov_dim: 24,
        }
    }
}

struct Factorization {
    basis: Vec<Vec<c64>>,
    h: Mat<c64>,
    k: usize,
    beta: f64,
}

fn arnoldi(op: &dyn Fn(&[c64], &mut [c64]), v0: &[c64], m: usize) -> Factorization {
    let n = v0.len();
    let m = m.min(n).max(1);
    let mut basis = vec![normalized(v0)];
    let mut h = Mat::<c64>::zeros(m + 1, m);
    let mut w = vec![c64::new(0.0, 0.0); n];
    let mut k = m;
    let mut beta = 0.0;
    for j in 0..m {
        op(&basis[j], &mut w);
        let wnorm = norm(&w);
        for _ in 0..2 {
            for i in 0..=j {
                let c = dotc(&basis[i], &w);
                h[(i, j)] += c;
                axpy(-c, &basis[i], &mut w);
            }
        }
        beta = norm(&w);
        h[(j + 1, j)] = cplx(beta, 0.0);
        if beta <= 1e-13 * wnorm.max(f64::MIN_POSITIVE) || j + 1 == n {
            k = j + 1;
            if beta <= 1e-13 * wnorm.max(f64::MIN_POSITIVE) {
                beta = 0.0;
            }
            break;
        }
        if j + 1 < m {
            basis.push(w.iter().map(|x| x / beta).collect());
        }
    }
    Factorization { basis, h, k, beta }
}

struct Ritz {
    value: c64,
    coeffs: Vec<c64>,
    estimate: f64,
}

fn ritz_pairs(f: &Factorization) -> Result<Vec<Ritz>> {
    let k = f.k;
    let hk = Mat::from_fn(k, k, |i, j| f.h[(i, j)]);
    let evd = hk
        .eigen()
        .map_err(|e| Error::Decomposition(format!("Hessenberg eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    Ok((0..k)
        .map(|i| {
            let coeffs: Vec<c64> = (0..k).map(|r| u[(r, i)]).collect();
            let cn = norm(&coeffs);
            let coeffs: Vec<c64> = coeffs.iter().map(|c| c / cn).collect();
            Ritz {
                value: s[i],
                estimate: f.beta * coeffs[k - 1].norm(),
                coeffs,
            }
        })
        .collect())
}

fn lift(f: &Factorization, coeffs: &[c64]) -> Vec<c64> {
    let n = f.basis[0].len();
    let mut out = vec![c64::new(0.0, 0.0); n];
    for (v, &c) in f.basis.iter().zip(coeffs) {
        axpy(c, v, &mut out);
    }
    out
}

fn residual(op: &dyn Fn(&[c64], &mut [c64]), x: &[c64], lambda: c64) -> f64 {
    let mut y = vec![c64::new(0.0, 0.0); x.len()];
    op(x, &mut y);
    axpy(-lambda, x, &mut y);
    norm(&y) / norm(x)
}

/// Restarted Arnoldi for the eigenvalue selected by `pick` among the Ritz values.
fn restarted_arnoldi(
    op: &dyn Fn(&[c64], &mut [c64]),
    v0: Vec<c64>,
    pick: &dyn Fn(&[Ritz]) -> usize,
    opts: &KrylovOptions,
    what: &'static str,
) -> Result<(c64, Vec<c64>, f64)> {
    let mut v = v0;
    let mut last = f64::INFINITY;
    for _ in 0..opts.max_restarts.max(1) {
        let f = arnoldi(op, &v, opts.krylov_dim);
        let ritz = ritz_pairs(&f)?;
        let chosen = &ritz[pick(&ritz)];
        let x = normalized(&lift(&f, &chosen.coeffs));
        let scale = chosen.value.norm().max(1.0);
        if chosen.estimate <= opts.tol * scale {
            let res = residual(op, &x, chosen.value);
            if res <= opts.tol * scale {
                return Ok((chosen.value, x, res));
            }
            last = res;
        } else {
            last = chosen.estimate;
        }
        v = x;
    }
    Err(Error::NoConvergence {
        what,
        iterations: opts.max_restarts,
        residual: last,
    })
}

fn largest_magnitude(r: &[Ritz]) -> usize {
    let mut best = 0;
    for (i, p) in r.iter().enumerate() {
        if p.value.norm() > r[best].value.norm() {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: c64,
    /// Unit-norm right eigenvector.
    pub right: Vec<c64>,
    /// Left eigenvector scaled so that `left . right = 1`.
    pub left: Vec<c64>,
    pub residual: f64,
}

/// Dominant eigenvalue with its biorthonormal left/right eigenvectors.
pub fn dominant_eigenpair(map: &dyn LinearMap, opts: &KrylovOptions) -> Result<Eigenpair> {
    dominant_eigenpair_from(map, None, None, opts)
}

/// As [`dominant_eigenpair`], seeding the right and left iterations with guesses.
pub fn dominant_eigenpair_from(
    map: &dyn LinearMap,
    right_guess: Option<&[c64]>,
    left_guess: Option<&[c64]>,
    opts: &KrylovOptions,
) -> Result<Eigenpair> {
    let n = map.dim();
    if n == 0 {
        return Err(Error::Dimension("empty map".into()));
    }
    let start = |g: Option<&[c64]>| match g {
        Some(g) if g.len() == n && norm(g) > 0.0 => g.to_vec(),
        _ => default_start(n),
    };
    let apply = |x: &[c64], y: &mut [c64]| map.apply(x, y);
    let (value, right, res_r) = restarted_arnoldi(
        &apply,
        start(right_guess),
        &largest_magnitude,
        opts,
        "dominant right eigenvector",
    )?;
    let apply_t = |x: &[c64], y: &mut [c64]| map.apply_transpose(x, y);
    let closest = |r: &[Ritz]| {
        let mut best = 0;
        for (i, p) in r.iter().enumerate() {
            if (p.value - value).norm() < (r[best].value - value).norm() {
                best = i;
            }
        }
        best
    };
    let (_, mut left, res_l) = restarted_arnoldi(
        &apply_t,
        start(left_guess),
        &closest,
        opts,
        "dominant left eigenvector",
    )?;
    let overlap = dotu(&left, &right);
    if overlap.norm() < 1e-12 {
        return Err(Error::Decomposition(
            "left and right dominant eigenvectors are orthogonal".into(),
        ));
    }
    scale(overlap.inv(), &mut left);
    Ok(Eigenpair {
        value,
        right,
        left,
        residual: res_r.max(res_l),
    })
}

/// The `m` eigenvalues of largest magnitude with right eigenvectors, by restarted
/// Arnoldi with a combined restart vector.
pub fn largest_eigenpairs(
    op: &dyn Fn(&[c64], &mut [c64]),
    n: usize,
    m: usize,
    opts: &KrylovOptions,
) -> Result<Vec<(c64, Vec<c64>)>> {
    let m = m.min(n);
    let kdim = opts.krylov_dim.max(2 * m + 20).min(n);
    let mut v = default_start(n);
    let mut last = f64::INFINITY;
    for _ in 0..opts.max_restarts.max(1) {
        let f = arnoldi(op, &v, kdim);
        let mut ritz = ritz_pairs(&f)?;
        ritz.sort_by(|a, b| b.value.norm().total_cmp(&a.value.norm()));
        let take = m.min(ritz.len());
        let scale = ritz[0].value.norm().max(f64::MIN_POSITIVE);
        last = ritz[..take]
            .iter()
            .map(|r| r.estimate)
            .fold(0.0, f64::max);
        let vectors: Vec<Vec<c64>> = ritz[..take]
            .iter()
            .map(|r| normalized(&lift(&f, &r.coeffs)))
            .collect();
        if last <= opts.tol * scale || f.k == n {
            return Ok(ritz[..take]
                .iter()
                .zip(vectors)
                .map(|(r, x)| (r.value, x))
                .collect());
        }
        v = vec![c64::new(0.0, 0.0); n];
        for x in &vectors {
            axpy(c64::new(1.0, 0.0), x, &mut v);
        }
    }
    Err(Error::NoConvergence {
        what: "Arnoldi eigenpairs",
        iterations: opts.max_restarts,
        residual: last,
    })
}

/// Restarted GMRES for `A x = b`.
pub fn gmres(
    op: &dyn Fn(&[c64], &mut [c64]),
    b: &[c64],
    x0: Option<&[c64]>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<Vec<c64>> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = match x0 {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![c64::new(0.0, 0.0); n],
    };
    if bnorm == 0.0 {
        return Ok(vec![c64::new(0.0, 0.0); n]);
    }
    let restart = restart.min(n).max(1);
    let mut r = vec![c64::new(0.0, 0.0); n];
    let mut w = vec![c64::new(0.0, 0.0); n];
    let mut iters = 0;
    let mut resid;
    loop {
        op(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        resid = beta;
        if beta <= tol * bnorm {
            return Ok(x);
        }
        if iters >= max_iter {
            break;
        }
        let mut basis: Vec<Vec<c64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = Mat::<c64>::zeros(restart + 1, restart);
        let mut cs = vec![0.0f64; restart];
        let mut sn = vec![c64::new(0.0, 0.0); restart];
        let mut g = vec![c64::new(0.0, 0.0); restart + 1];
        g[0] = cplx(beta, 0.0);
        let mut used = 0;
        for j in 0..restart {
            op(&basis[j], &mut w);
            iters += 1;
            for _ in 0..2 {
                for i in 0..=j {
                    let c = dotc(&basis[i], &w);
                    h[(i, j)] += c;
                    axpy(-c, &basis[i], &mut w);
                }
            }
            let hn = norm(&w);
            h[(j + 1, j)] = cplx(hn, 0.0);
            for i in 0..j {
                let a = h[(i, j)];
                let bb = h[(i + 1, j)];
                h[(i, j)] = a * cs[i] + sn[i] * bb;
                h[(i + 1, j)] = -sn[i].conj() * a + bb * cs[i];
            }
            let a = h[(j, j)];
            let bb = h[(j + 1, j)];
            let rho = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if rho == 0.0 {
                cs[j] = 1.0;
                sn[j] = c64::new(0.0, 0.0);
            } else if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = bb.conj() / rho;
            } else {
                cs[j] = a.norm() / rho;
                sn[j] = (a / a.norm()) * bb.conj() / rho;
            }
            h[(j, j)] = cs[j] * a + sn[j] * bb;
            h[(j + 1, j)] = c64::new(0.0, 0.0);
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] *= cs[j];
            used = j + 1;
            resid = g[j + 1].norm();
            if resid <= tol * bnorm || hn <= 1e-14 * bnorm || iters >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![c64::new(0.0, 0.0); used];
        for i in (0..used).rev() {
            let mut acc = g[i];
            for k in i + 1..used {
                acc -= h[(i, k)] * y[k];
            }
            y[i] = acc / h[(i, i)];
        }
        for (v, &c) in basis.iter().zip(&y) {
            axpy(c, v, &mut x);
        }
    }
    Err(Error::NoConvergence {
        what: "GMRES",
        iterations: iters,
        residual: resid / bnorm,
    })
}

/// Solves `(1 - T + r l^T) x = b - r (l . b)`, i.e. applies the reduced resolvent
/// `sum_{k>=2} (1 - lambda_k)^{-1} |r_k)(l_k|` to `b`. Requires `l . r = 1` and
/// `T r = r`, `l^T T = l^T`. The result satisfies `l . x = 0`.
pub fn deflated_solve(
    map: &dyn LinearMap,
    b: &[c64],
    left: &[c64],
    right: &[c64],
    x0: Option<&[c64]>,
    tol: f64,
) -> Result<Vec<c64>> {
    let n = map.dim();
    if b.len() != n || left.len() != n || right.len() != n {
        return Err(Error::Dimension(format!(
            "deflated solve: map dim {n}, rhs {}, left {}, right {}",
            b.len(),
            left.len(),
            right.len()
        )));
    }
    let mut rhs = b.to_vec();
    axpy(-dotu(left, b), right, &mut rhs);
    let op = |x: &[c64], y: &mut [c64]| {
        map.apply(x, y);
        let lx = dotu(left, x);
        for i in 0..x.len() {
            y[i] = x[i] - y[i] + right[i] * lx;
        }
    };
    let mut x = gmres(&op, &rhs, x0, tol, 40, 40 * 200)?;
    // remove roundoff drift along the deflated direction
    let lx = dotu(left, &x);
    axpy(-lx, right, &mut x);
    Ok(x)
}

/// Lowest eigenpair of a Hermitian map by restarted Lanczos with full
/// reorthogonalization.
pub fn lowest_eigenpair(
    op: &dyn Fn(&[c64], &mut [c64]),
    x0: &[c64],
    opts: &KrylovOptions,
) -> Result<(f64, Vec<c64>)> {
    let n = x0.len();
    let mut v = if norm(x0) > 0.0 {
        x0.to_vec()
    } else {
        default_start(n)
    };
    let mut last = f64::INFINITY;
    for _ in 0..opts.max_restarts.max(1) {
        let f = arnoldi(op, &v, opts.krylov_dim);
        let k = f.k;
        let t = Mat::from_fn(k, k, |i, j| (f.h[(i, j)] + f.h[(j, i)].conj()) * 0.5);
        let (vals, vecs) = dense::hermitian_eig(t.as_ref())?;
        let coeffs: Vec<c64> = (0..k).map(|i| vecs[(i, 0)]).collect();
        let x = normalized(&lift(&f, &coeffs));
        let theta = vals[0];
        let scale = theta.abs().max(1.0);
        let res = residual(op, &x, cplx(theta, 0.0));
        last = res;
        if res <= opts.tol * scale {
            return Ok((theta, x));
        }
        v = x;
    }
    Err(Error::NoConvergence {
        what: "Lanczos",
        iterations: opts.max_restarts,
        residual: last,
    })
}
