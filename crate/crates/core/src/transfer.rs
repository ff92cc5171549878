//! Transfer operators, operator transfer maps, spectral data and infinite boundary
//! environments.
//!
//! `T_X^Y` has ket tensor `X` and bra tensor `Y`. It acts on right vectors as
//! `M -> sum_s X^s M (Y^s)^dagger` and on left vectors as
//! `l -> sum_s (Y^s)^dagger l X^s`; the pairing is `(l|M) = Tr(l M)`.
//! Flattened right vectors are column-major `vec(M)`, left vectors `vec(l^T)`, so the
//! pairing becomes the plain bilinear dot product used by the Krylov layer.

use std::borrow::Cow;

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::dense::{self, hermitian_part, real, trace_product, ComplexMatrix};
use crate::linalg::krylov::{
    self, deflated_solve, dominant_eigenpair_from, KrylovOptions, LinearMap, Transposed,
};
use crate::mps::MpsTensor;

/// Column-major flattening.
pub fn flatten(m: MatRef<'_, c64>) -> Vec<c64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn unflatten(v: &[c64], rows: usize, cols: usize) -> ComplexMatrix {
    Mat::from_fn(rows, cols, |i, j| v[j * rows + i])
}

fn flatten_left(l: MatRef<'_, c64>) -> Vec<c64> {
    flatten(l.transpose())
}

fn unflatten_left(v: &[c64], rows: usize, cols: usize) -> ComplexMatrix {
    unflatten(v, cols, rows).transpose().to_owned()
}

/// `(l|M) = Tr(l M)`.
pub fn pair(l: MatRef<'_, c64>, m: MatRef<'_, c64>) -> c64 {
    trace_product(l, m)
}

#[derive(Clone, Debug)]
pub struct TransferOperator<'a> {
    ket: Cow<'a, MpsTensor>,
    bra: Cow<'a, MpsTensor>,
}

/// `T_ket^bra`.
pub fn transfer<'a>(bra: &'a MpsTensor, ket: &'a MpsTensor) -> Result<TransferOperator<'a>> {
    TransferOperator::new(Cow::Borrowed(ket), Cow::Borrowed(bra))
}

impl<'a> TransferOperator<'a> {
    fn new(ket: Cow<'a, MpsTensor>, bra: Cow<'a, MpsTensor>) -> Result<Self> {
        if ket.d() != bra.d() {
            return Err(Error::Dimension(format!(
                "transfer operator: ket has d={}, bra has d={}",
                ket.d(),
                bra.d()
            )));
        }
        Ok(Self { ket, bra })
    }

    pub fn ket(&self) -> &MpsTensor {
        &self.ket
    }

    pub fn bra(&self) -> &MpsTensor {
        &self.bra
    }

    /// `sum_s X^s M (Y^s)^dagger`
    pub fn apply_right(&self, m: MatRef<'_, c64>) -> ComplexMatrix {
        let mut out = Mat::<c64>::zeros(self.ket.dl(), self.bra.dl());
        for (x, y) in self.ket.mats().iter().zip(self.bra.mats()) {
            out += x * m * y.adjoint();
        }
        out
    }

    /// `sum_s (Y^s)^dagger l X^s`
    pub fn apply_left(&self, l: MatRef<'_, c64>) -> ComplexMatrix {
        let mut out = Mat::<c64>::zeros(self.bra.dr(), self.ket.dr());
        for (x, y) in self.ket.mats().iter().zip(self.bra.mats()) {
            out += y.adjoint() * l * x;
        }
        out
    }

    fn is_square(&self) -> bool {
        self.ket.dl() == self.ket.dr() && self.bra.dl() == self.bra.dr()
    }

    /// Materialized `D^2 x D^2` matrix acting on `vec(M)`.
    pub fn to_dense(&self) -> Result<ComplexMatrix> {
        self.require_square()?;
        Ok(krylov::to_dense(self))
    }

    fn require_square(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::Dimension(
                "transfer operator between different bond spaces".into(),
            ));
        }
        Ok(())
    }
}

impl LinearMap for TransferOperator<'_> {
    fn dim(&self) -> usize {
        self.ket.dr() * self.bra.dr()
    }
    fn apply(&self, x: &[c64], y: &mut [c64]) {
        let m = unflatten(x, self.ket.dr(), self.bra.dr());
        let r = self.apply_right(m.as_ref());
        y.copy_from_slice(&flatten(r.as_ref()));
    }
    fn apply_transpose(&self, x: &[c64], y: &mut [c64]) {
        let l = unflatten_left(x, self.bra.dl(), self.ket.dl());
        let r = self.apply_left(l.as_ref());
        y.copy_from_slice(&flatten_left(r.as_ref()));
    }
}

/// `J_h` for a two-site operator `h` with matrix elements `h[(s' d_Y + t'), (s d_Y + t)]`:
/// the transfer operator whose ket is `h` applied to the blocked ket pair `X Y` and
/// whose bra is the blocked bra pair `X' Y'`.
pub fn operator_transfer(
    h: MatRef<'_, c64>,
    x: &MpsTensor,
    y: &MpsTensor,
    xp: &MpsTensor,
    yp: &MpsTensor,
) -> Result<TransferOperator<'static>> {
    let ket = MpsTensor::block(x, y)?.apply_physical(h)?;
    let bra = MpsTensor::block(xp, yp)?;
    TransferOperator::new(Cow::Owned(ket), Cow::Owned(bra))
}

/// Single-site operator transfer `sum <s'|O|s> X^s (.) (X'^{s'})^dagger`.
pub fn site_operator_transfer(
    o: MatRef<'_, c64>,
    x: &MpsTensor,
    xp: &MpsTensor,
) -> Result<TransferOperator<'static>> {
    let ket = x.apply_physical(o)?;
    TransferOperator::new(Cow::Owned(ket), Cow::Owned(xp.clone()))
}

/// Normalized dominant fixed points `l`, `r` of `T_A^A` with `Tr(l r) = 1`.
#[derive(Clone, Debug)]
pub struct FixedPoints {
    pub left: ComplexMatrix,
    pub right: ComplexMatrix,
}

impl FixedPoints {
    pub fn identity_left(right: ComplexMatrix) -> Self {
        let n = right.nrows();
        Self {
            left: dense::identity(n),
            right,
        }
    }
}

/// Hermitian positive representative of an eigenvector known to be Hermitian up to phase.
fn hermitian_representative(m: &ComplexMatrix) -> ComplexMatrix {
    let tr = dense::trace(m.as_ref());
    let phase = if tr.norm() > 0.0 {
        tr.conj() / tr.norm()
    } else {
        real(1.0)
    };
    hermitian_part((m * faer::Scale(phase)).as_ref())
}

/// Dominant eigenvalue and fixed points of `T_A^A`.
pub fn fixed_points(a: &MpsTensor, tol: f64) -> Result<(c64, FixedPoints)> {
    fixed_points_from(a, None, tol)
}

pub fn fixed_points_from(
    a: &MpsTensor,
    guess: Option<&FixedPoints>,
    tol: f64,
) -> Result<(c64, FixedPoints)> {
    let t = transfer(a, a)?;
    t.require_square()?;
    let d = a.dr();
    let opts = KrylovOptions {
        tol,
        ..Default::default()
    };
    let rg = guess.map(|g| flatten(g.right.as_ref()));
    let lg = guess.map(|g| flatten_left(g.left.as_ref()));
    let pair_ = dominant_eigenpair_from(&t, rg.as_deref(), lg.as_deref(), &opts)?;
    let r = hermitian_representative(&unflatten(&pair_.right, d, d));
    let l = hermitian_representative(&unflatten_left(&pair_.left, d, d));
    let norm = pair(l.as_ref(), r.as_ref());
    let l = l * faer::Scale(norm.inv());
    Ok((pair_.value, FixedPoints { left: l, right: r }))
}

/// `x = sum_{k>=2} (1 - lambda_k)^{-1} |r_k)(l_k|b)`.
pub fn resolve_right(
    t: &TransferOperator<'_>,
    fp: &FixedPoints,
    b: MatRef<'_, c64>,
    guess: Option<MatRef<'_, c64>>,
    tol: f64,
) -> Result<ComplexMatrix> {
    t.require_square()?;
    let x0 = guess.map(flatten);
    let x = deflated_solve(
        t,
        &flatten(b),
        &flatten_left(fp.left.as_ref()),
        &flatten(fp.right.as_ref()),
        x0.as_deref(),
        tol,
    )?;
    Ok(unflatten(&x, b.nrows(), b.ncols()))
}

/// `(x| = (b| sum_{k>=2} (1 - lambda_k)^{-1} |r_k)(l_k|`.
pub fn resolve_left(
    t: &TransferOperator<'_>,
    fp: &FixedPoints,
    b: MatRef<'_, c64>,
    guess: Option<MatRef<'_, c64>>,
    tol: f64,
) -> Result<ComplexMatrix> {
    t.require_square()?;
    let x0 = guess.map(flatten_left);
    let x = deflated_solve(
        &Transposed(t),
        &flatten_left(b),
        &flatten(fp.right.as_ref()),
        &flatten_left(fp.left.as_ref()),
        x0.as_deref(),
        tol,
    )?;
    Ok(unflatten_left(&x, b.nrows(), b.ncols()))
}

#[derive(Clone, Debug)]
pub struct SpectralData {
    /// Sorted by descending magnitude.
    pub eigenvalues: Vec<c64>,
    pub right: Vec<ComplexMatrix>,
    /// Biorthonormal to `right` under `Tr(l_i r_j) = delta_ij`.
    pub left: Vec<ComplexMatrix>,
    /// `-1/ln|lambda_2|` in units of the tensor's cell; 0 when there is no second eigenvalue.
    pub xi: f64,
}

/// Correlation length from the subleading eigenvalue magnitude.
pub fn correlation_length(lambda2_abs: f64) -> f64 {
    -1.0 / lambda2_abs.ln()
}

/// Largest dimension handled by a full dense decomposition.
pub const DENSE_SPECTRUM_MAX: usize = 1024;

/// Leading `m` eigenpairs of a square transfer operator, no normalization check.
pub fn spectrum(t: &TransferOperator<'_>, m: usize) -> Result<SpectralData> {
    t.require_square()?;
    let n = t.dim();
    let (dk, db) = (t.ket().dr(), t.bra().dr());
    let (values, rights, lefts) = if n <= DENSE_SPECTRUM_MAX {
        dense_spectrum(t)?
    } else {
        arnoldi_spectrum(t, m)?
    };
    let m = m.min(values.len());
    let right: Vec<_> = rights[..m].iter().map(|v| unflatten(v, dk, db)).collect();
    let left: Vec<_> = lefts[..m].iter().map(|v| unflatten_left(v, db, dk)).collect();
    let xi = if values.len() < 2 {
        0.0
    } else {
        correlation_length(values[1].norm())
    };
    Ok(SpectralData {
        eigenvalues: values[..m].to_vec(),
        right,
        left,
        xi,
    })
}

/// As [`spectrum`], rejecting states whose dominant eigenvalue is not 1.
pub fn spectral_data(t: &TransferOperator<'_>, m: usize) -> Result<SpectralData> {
    let s = spectrum(t, m.max(2))?;
    let l1 = s.eigenvalues[0];
    if (l1 - real(1.0)).norm() > 1e-6 {
        return Err(Error::NotNormalized(l1.norm()));
    }
    Ok(s)
}

type Spectrum = (Vec<c64>, Vec<Vec<c64>>, Vec<Vec<c64>>);

fn dense_spectrum(t: &TransferOperator<'_>) -> Result<Spectrum> {
    let a = krylov::to_dense(t);
    let n = a.nrows();
    let evd = a
        .eigen()
        .map_err(|e| Error::Decomposition(format!("transfer eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U().to_owned();
    let uinv = dense::inverse(u.as_ref())?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].norm().total_cmp(&s[i].norm()));
    let values = order.iter().map(|&i| s[i]).collect();
    let rights = order
        .iter()
        .map(|&i| (0..n).map(|r| u[(r, i)]).collect())
        .collect();
    let lefts = order
        .iter()
        .map(|&i| (0..n).map(|c| uinv[(i, c)]).collect())
        .collect();
    Ok((values, rights, lefts))
}

fn arnoldi_spectrum(t: &TransferOperator<'_>, m: usize) -> Result<Spectrum> {
    let n = t.dim();
    let opts = KrylovOptions {
        tol: 1e-10,
        max_restarts: 500,
        krylov_dim: 60,
    };
    // request a margin so degenerate clusters are not cut
    let want = (m + 4).min(n);
    let right_op = |x: &[c64], y: &mut [c64]| t.apply(x, y);
    let left_op = |x: &[c64], y: &mut [c64]| t.apply_transpose(x, y);
    let rp = krylov::largest_eigenpairs(&right_op, n, want, &opts)?;
    let lp = krylov::largest_eigenpairs(&left_op, n, want, &opts)?;
    let mut keep = m.min(rp.len());
    let scale = rp[0].0.norm();
    while keep < rp.len() && (rp[keep].0.norm() - rp[keep - 1].0.norm()).abs() < 1e-6 * scale {
        keep += 1;
    }
    let values: Vec<c64> = rp[..keep].iter().map(|p| p.0).collect();
    let rights: Vec<Vec<c64>> = rp[..keep].iter().map(|p| p.1.clone()).collect();
    // match each right eigenvalue with the nearest unused left one
    let mut used = vec![false; lp.len()];
    let mut lefts = Vec::with_capacity(keep);
    for v in &values {
        let mut best = None;
        for (j, p) in lp.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (p.0 - v).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.ok_or_else(|| Error::Decomposition("missing left eigenvector".into()))?;
        used[j] = true;
        lefts.push(lp[j].1.clone());
    }
    // biorthonormalize: W' = W S^{-T} with S = W^T R
    let s = Mat::from_fn(keep, keep, |i, j| krylov::dotu(&lefts[i], &rights[j]));
    let sinv_t = dense::inverse(s.as_ref())?.transpose().to_owned();
    let lefts = (0..keep)
        .map(|j| {
            let mut out = vec![c64::new(0.0, 0.0); n];
            for k in 0..keep {
                krylov::axpy(sinv_t[(k, j)], &lefts[k], &mut out);
            }
            out
        })
        .collect();
    Ok((values, rights, lefts))
}

/// A uniform tensor together with its normalized fixed points.
#[derive(Clone, Debug)]
pub struct Channel {
    pub tensor: MpsTensor,
    pub fixed: FixedPoints,
}

impl Channel {
    pub fn transfer(&self) -> TransferOperator<'_> {
        TransferOperator {
            ket: Cow::Borrowed(&self.tensor),
            bra: Cow::Borrowed(&self.tensor),
        }
    }
}

/// Semi-infinite energy environments for a bond operator acting on two cells.
#[derive(Clone, Debug)]
pub struct BoundaryEnvironments {
    /// Left environment holding all bond terms left of a cut, origin-shifted.
    pub libc: ComplexMatrix,
    /// Right counterpart.
    pub ribc: ComplexMatrix,
    /// Energy per cell `(l|J_h|r)` subtracted from every bond term.
    pub energy_origin_shift: f64,
}

/// Energy per bond `(l|J_h^{AA}|r)` of a uniform channel.
pub fn bond_energy(ch: &Channel, h: MatRef<'_, c64>) -> Result<c64> {
    let j = operator_transfer(h, &ch.tensor, &ch.tensor, &ch.tensor, &ch.tensor)?;
    let jr = j.apply_right(ch.fixed.right.as_ref());
    Ok(pair(ch.fixed.left.as_ref(), jr.as_ref()))
}

/// LIBC from the left channel and RIBC from the right channel. Both channels must
/// describe the same state in different gauges.
pub fn boundary_environments(
    left: &Channel,
    right: &Channel,
    h: MatRef<'_, c64>,
    tol: f64,
) -> Result<BoundaryEnvironments> {
    boundary_environments_from(left, right, h, None, tol)
}

pub fn boundary_environments_from(
    left: &Channel,
    right: &Channel,
    h: MatRef<'_, c64>,
    guess: Option<&BoundaryEnvironments>,
    tol: f64,
) -> Result<BoundaryEnvironments> {
    let x = &left.tensor;
    let jl = operator_transfer(h, x, x, x, x)?;
    let e = pair(
        left.fixed.left.as_ref(),
        jl.apply_right(left.fixed.right.as_ref()).as_ref(),
    )
    .re;
    let bl = jl.apply_left(left.fixed.left.as_ref()) - &left.fixed.left * faer::Scale(real(e));
    let libc = resolve_left(
        &left.transfer(),
        &left.fixed,
        bl.as_ref(),
        guess.map(|g| g.libc.as_ref()),
        tol,
    )?;
    let y = &right.tensor;
    let jr = operator_transfer(h, y, y, y, y)?;
    let er = pair(
        right.fixed.left.as_ref(),
        jr.apply_right(right.fixed.right.as_ref()).as_ref(),
    )
    .re;
    let br = jr.apply_right(right.fixed.right.as_ref()) - &right.fixed.right * faer::Scale(real(er));
    let ribc = resolve_right(
        &right.transfer(),
        &right.fixed,
        br.as_ref(),
        guess.map(|g| g.ribc.as_ref()),
        tol,
    )?;
    Ok(BoundaryEnvironments {
        libc: hermitian_part(libc.as_ref()),
        ribc: hermitian_part(ribc.as_ref()),
        energy_origin_shift: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::max_abs;
    use crate::spin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Random tensor normalized so the dominant transfer eigenvalue is 1.
    pub(crate) fn random_normalized(d: usize, bond: usize, seed: u64) -> (MpsTensor, FixedPoints) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = MpsTensor::random(d, bond, bond, &mut rng);
        let (lam, _) = fixed_points(&a, 1e-13).unwrap();
        let a = a.scaled(real(1.0 / lam.norm().sqrt()));
        let (_, fp) = fixed_points(&a, 1e-13).unwrap();
        (a, fp)
    }

    #[test]
    fn right_and_left_actions_are_adjoint_under_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = MpsTensor::random(3, 4, 4, &mut rng);
        let y = MpsTensor::random(3, 4, 4, &mut rng);
        let t = transfer(&y, &x).unwrap();
        let m = MpsTensor::random(1, 4, 4, &mut rng).into_mats().remove(0);
        let l = MpsTensor::random(1, 4, 4, &mut rng).into_mats().remove(0);
        let a = pair(l.as_ref(), t.apply_right(m.as_ref()).as_ref());
        let b = pair(t.apply_left(l.as_ref()).as_ref(), m.as_ref());
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn index_convention_matches_elementwise_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = MpsTensor::random(2, 3, 3, &mut rng);
        let dense = transfer(&a, &a).unwrap().to_dense().unwrap();
        // (T)_{(a,a'),(b,b')} = sum_s A^s_{ab} conj(A^s_{a'b'}), vec index a + 3 a'
        for a0 in 0..3 {
            for a1 in 0..3 {
                for b0 in 0..3 {
                    for b1 in 0..3 {
                        let expect: c64 = (0..2)
                            .map(|s| a.mat(s)[(a0, b0)] * a.mat(s)[(a1, b1)].conj())
                            .sum();
                        let got = dense[(a0 + 3 * a1, b0 + 3 * b1)];
                        assert!((got - expect).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn rank_one_for_single_entry_tensor() {
        let mut a = MpsTensor::zeros(2, 2, 2);
        a.mats_mut()[1][(0, 1)] = real(1.0);
        let dense = transfer(&a, &a).unwrap().to_dense().unwrap();
        let (_, s, _) = dense::thin_svd(dense.as_ref()).unwrap();
        assert_eq!(s.iter().filter(|v| **v > 1e-12).count(), 1);
    }

    #[test]
    fn operator_transfer_identity_is_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = MpsTensor::random(2, 3, 3, &mut rng);
        let y = MpsTensor::random(2, 3, 3, &mut rng);
        let xp = MpsTensor::random(2, 3, 3, &mut rng);
        let yp = MpsTensor::random(2, 3, 3, &mut rng);
        let j = operator_transfer(dense::identity(4).as_ref(), &x, &y, &xp, &yp).unwrap();
        let m = MpsTensor::random(1, 3, 3, &mut rng).into_mats().remove(0);
        let tx = transfer(&xp, &x).unwrap();
        let ty = transfer(&yp, &y).unwrap();
        let expect = tx.apply_right(ty.apply_right(m.as_ref()).as_ref());
        assert!(max_abs((j.apply_right(m.as_ref()) - expect).as_ref()) < 1e-12);
        let zero = operator_transfer(Mat::<c64>::zeros(4, 4).as_ref(), &x, &y, &xp, &yp).unwrap();
        assert_eq!(max_abs(zero.apply_right(m.as_ref()).as_ref()), 0.0);
    }

    #[test]
    fn operator_transfer_matches_naive_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = 2;
        let bond = 4;
        let x = MpsTensor::random(d, bond, bond, &mut rng);
        let y = MpsTensor::random(d, bond, bond, &mut rng);
        let xp = MpsTensor::random(d, bond, bond, &mut rng);
        let yp = MpsTensor::random(d, bond, bond, &mut rng);
        let h = spin::heisenberg(1, 1);
        let j = operator_transfer(h.as_ref(), &x, &y, &xp, &yp).unwrap();
        let m = MpsTensor::random(1, bond, bond, &mut rng).into_mats().remove(0);
        let got = j.apply_right(m.as_ref());
        let mut naive = Mat::<c64>::zeros(bond, bond);
        for a in 0..bond {
            for ap in 0..bond {
                let mut acc = c64::new(0.0, 0.0);
                for s in 0..d {
                    for t in 0..d {
                        for sp in 0..d {
                            for tp in 0..d {
                                let hel = h[(sp * d + tp, s * d + t)];
                                if hel == c64::new(0.0, 0.0) {
                                    continue;
                                }
                                for b in 0..bond {
                                    for c in 0..bond {
                                        for bp in 0..bond {
                                            for cp in 0..bond {
                                                acc += hel
                                                    * x.mat(s)[(a, b)]
                                                    * y.mat(t)[(b, c)]
                                                    * m[(c, cp)]
                                                    * xp.mat(sp)[(ap, bp)].conj()
                                                    * yp.mat(tp)[(bp, cp)].conj();
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                naive[(a, ap)] = acc;
            }
        }
        assert!(max_abs((&got - &naive).as_ref()) < 1e-12 * max_abs(naive.as_ref()).max(1.0));
    }

    #[test]
    fn fixed_points_are_eigenvectors() {
        let (a, fp) = random_normalized(3, 5, 9);
        let t = transfer(&a, &a).unwrap();
        assert!(max_abs((t.apply_right(fp.right.as_ref()) - &fp.right).as_ref()) < 1e-10);
        assert!(max_abs((t.apply_left(fp.left.as_ref()) - &fp.left).as_ref()) < 1e-10);
        assert!((pair(fp.left.as_ref(), fp.right.as_ref()) - real(1.0)).norm() < 1e-12);
    }

    #[test]
    fn spectral_data_is_biorthonormal() {
        let (a, _) = random_normalized(2, 4, 10);
        let t = transfer(&a, &a).unwrap();
        let s = spectral_data(&t, 16).unwrap();
        assert!((s.eigenvalues[0] - real(1.0)).norm() < 1e-10);
        for i in 0..16 {
            for j in 0..16 {
                let v = pair(s.left[i].as_ref(), s.right[j].as_ref());
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - real(expect)).norm() < 1e-8, "{i} {j} {v}");
            }
        }
        assert!((s.xi - correlation_length(s.eigenvalues[1].norm())).abs() == 0.0);
    }

    #[test]
    fn arnoldi_path_agrees_with_dense() {
        let (a, _) = random_normalized(2, 6, 11);
        let t = transfer(&a, &a).unwrap();
        let (v, r, l) = dense_spectrum(&t).unwrap();
        let (va, ra, la) = arnoldi_spectrum(&t, 3).unwrap();
        for k in 0..3 {
            assert!((v[k].norm() - va[k].norm()).abs() < 1e-9);
        }
        // projectors agree on the non-degenerate leading pair
        let p = |r: &[c64], l: &[c64], x: &[c64]| -> Vec<c64> {
            let c = krylov::dotu(l, x);
            r.iter().map(|v| v * c).collect()
        };
        let x: Vec<c64> = (0..36).map(|i| real(i as f64 * 0.1 - 1.0)).collect();
        let d1 = p(&r[0], &l[0], &x);
        let d2 = p(&ra[0], &la[0], &x);
        let diff: Vec<c64> = d1.iter().zip(&d2).map(|(a, b)| a - b).collect();
        assert!(krylov::norm(&diff) < 1e-8);
    }

    #[test]
    fn unnormalized_state_rejected() {
        let (a, _) = random_normalized(2, 3, 12);
        let b = a.scaled(real(1.5));
        let t = transfer(&b, &b).unwrap();
        assert!(matches!(spectral_data(&t, 4), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn product_state_sentinel() {
        let a = MpsTensor::new(vec![Mat::from_fn(1, 1, |_, _| real(1.0)), Mat::zeros(1, 1)]).unwrap();
        let s = spectral_data(&transfer(&a, &a).unwrap(), 6).unwrap();
        assert_eq!(s.eigenvalues.len(), 1);
        assert_eq!(s.xi, 0.0);
    }

    /// Dense spectral-sum oracle for the boundary environments.
    fn dense_environments(ch: &Channel, h: MatRef<'_, c64>) -> (ComplexMatrix, ComplexMatrix) {
        let t = ch.transfer();
        let s = spectrum(&t, t.dim()).unwrap();
        let j = operator_transfer(h, &ch.tensor, &ch.tensor, &ch.tensor, &ch.tensor).unwrap();
        let e = pair(ch.fixed.left.as_ref(), j.apply_right(ch.fixed.right.as_ref()).as_ref());
        let bl = j.apply_left(ch.fixed.left.as_ref()) - &ch.fixed.left * faer::Scale(e);
        let br = j.apply_right(ch.fixed.right.as_ref()) - &ch.fixed.right * faer::Scale(e);
        let n = ch.tensor.dr();
        let mut libc = Mat::<c64>::zeros(n, n);
        let mut ribc = Mat::<c64>::zeros(n, n);
        for k in 1..s.eigenvalues.len() {
            let w = (real(1.0) - s.eigenvalues[k]).inv();
            libc += &s.left[k] * faer::Scale(pair(bl.as_ref(), s.right[k].as_ref()) * w);
            ribc += &s.right[k] * faer::Scale(pair(s.left[k].as_ref(), br.as_ref()) * w);
        }
        (libc, ribc)
    }

    #[test]
    fn environments_match_dense_spectral_sum() {
        for (seed, bond) in [(20u64, 3usize), (21, 5), (22, 8)] {
            let (a, fp) = random_normalized(2, bond, seed);
            let ch = Channel { tensor: a, fixed: fp };
            let h = spin::heisenberg(1, 1);
            let env = boundary_environments(&ch, &ch, h.as_ref(), 1e-12).unwrap();
            let (libc, ribc) = dense_environments(&ch, h.as_ref());
            // the solver returns the Hermitian part; the oracle is Hermitian up to roundoff
            assert!(max_abs((&env.libc - &libc).as_ref()) < 1e-9, "bond {bond}");
            assert!(max_abs((&env.ribc - &ribc).as_ref()) < 1e-9, "bond {bond}");
            assert!(pair(env.libc.as_ref(), ch.fixed.right.as_ref()).norm() < 1e-10);
            assert!(pair(ch.fixed.left.as_ref(), env.ribc.as_ref()).norm() < 1e-10);
        }
    }

    #[test]
    fn environments_vanish_for_zero_operator() {
        let (a, fp) = random_normalized(2, 4, 23);
        let ch = Channel { tensor: a, fixed: fp };
        let env = boundary_environments(&ch, &ch, Mat::<c64>::zeros(4, 4).as_ref(), 1e-12).unwrap();
        assert_eq!(max_abs(env.libc.as_ref()), 0.0);
        assert_eq!(max_abs(env.ribc.as_ref()), 0.0);
    }

    #[test]
    fn environments_are_linear_in_h() {
        let (a, fp) = random_normalized(2, 4, 24);
        let ch = Channel { tensor: a, fixed: fp };
        let h1 = spin::heisenberg(1, 1);
        let h2 = spin::embed(spin::sz(1).as_ref(), 0, &[2, 2]);
        let sum = &h1 + &h2 * faer::Scale(real(2.0));
        let e1 = boundary_environments(&ch, &ch, h1.as_ref(), 1e-12).unwrap();
        let e2 = boundary_environments(&ch, &ch, h2.as_ref(), 1e-12).unwrap();
        let es = boundary_environments(&ch, &ch, sum.as_ref(), 1e-12).unwrap();
        let lin = &e1.libc + &e2.libc * faer::Scale(real(2.0));
        assert!(max_abs((&es.libc - &lin).as_ref()) < 1e-9);
    }
}
