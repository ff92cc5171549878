//! Energies, gradients and effective site operators of a window state.
//!
//! Bonds are labelled by the cell to their right: bond `b` separates cells `b - 1`
//! and `b`. Every pair operator is shifted by the background energy per cell, so
//! the total energy of a window state is finite and equals the energy relative to
//! the uniform state (plus any extra per-pair offsets).

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg::dense::{check_hermitian, hermitian_part, identity, real, ComplexMatrix};
use crate::model::PairModel;
use crate::mps::MpsTensor;
use crate::transfer::{self, pair, BoundaryEnvironments};
use crate::window::{Background, WindowMps};

/// Cell-pair Hamiltonian on a window layout with its semi-infinite boundary terms.
#[derive(Clone)]
pub struct WindowHamiltonian {
    model: Arc<dyn PairModel>,
    background: Arc<Background>,
    boundary: BoundaryEnvironments,
    offsets: BTreeMap<isize, f64>,
}

impl std::fmt::Debug for WindowHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WindowHamiltonian")
            .field("e0", &self.boundary.energy_origin_shift)
            .field("offsets", &self.offsets)
            .finish()
    }
}

impl WindowHamiltonian {
    pub fn new(model: Arc<dyn PairModel>, background: Arc<Background>, tol: f64) -> Result<Self> {
        let h = model.pair_operator(&background.cell_dims, &background.cell_dims)?;
        check_hermitian(h.as_ref())?;
        let boundary = transfer::boundary_environments(&background.left, &background.right, h.as_ref(), tol)?;
        Ok(Self {
            model,
            background,
            boundary,
            offsets: BTreeMap::new(),
        })
    }

    /// Subtracts `e` from the pair operator on cells `(cell, cell + 1)`.
    pub fn with_offset(mut self, cell: isize, e: f64) -> Self {
        *self.offsets.entry(cell).or_insert(0.0) += e;
        self
    }

    /// Background energy per cell.
    pub fn e0(&self) -> f64 {
        self.boundary.energy_origin_shift
    }

    pub fn boundary(&self) -> &BoundaryEnvironments {
        &self.boundary
    }

    pub fn background(&self) -> &Arc<Background> {
        &self.background
    }

    pub fn model(&self) -> &Arc<dyn PairModel> {
        &self.model
    }

    /// Shifted pair operator on cells `(cell, cell + 1)` with the given layouts.
    pub fn pair_operator(&self, left: &[usize], right: &[usize], cell: isize) -> Result<ComplexMatrix> {
        let h = self.model.pair_operator(left, right)?;
        let shift = self.e0() + self.offsets.get(&cell).copied().unwrap_or(0.0);
        Ok(&h - identity(h.nrows()) * faer::Scale(real(shift)))
    }

    pub fn environments(&self, w: &WindowMps) -> Result<WindowEnvironments> {
        WindowEnvironments::new(self, w)
    }

    /// `<H - E_0> / <psi|psi>`.
    pub fn energy(&self, w: &WindowMps) -> Result<f64> {
        Ok(self.environments(w)?.energy())
    }
}

/// All environments of a window state needed for gradients over its cells.
#[derive(Clone, Debug)]
pub struct WindowEnvironments {
    lo: isize,
    hi: isize,
    /// `L[b]` for bonds `lo - 1 ..= hi + 1`.
    left: Vec<ComplexMatrix>,
    /// `R[b]` for bonds `lo ..= hi + 2`.
    right: Vec<ComplexMatrix>,
    /// Pairs ending left of bond `b`, for `b` in `lo ..= hi + 1`.
    energy_left: Vec<ComplexMatrix>,
    /// Pairs starting right of bond `b`, for `b` in `lo ..= hi + 1`.
    energy_right: Vec<ComplexMatrix>,
    /// Shifted pair operators on `(c, c + 1)` for `c` in `lo - 1 ..= hi`.
    pairs: Vec<ComplexMatrix>,
    norm: f64,
    energy: f64,
}

impl WindowEnvironments {
    pub fn new(ham: &WindowHamiltonian, w: &WindowMps) -> Result<Self> {
        let (lo, hi) = (w.offset, w.end());
        let n = (hi - lo + 1) as usize;
        let bg = &w.background;

        let pairs = (lo - 1..=hi)
            .map(|c| ham.pair_operator(w.cell_dims(c), w.cell_dims(c + 1), c))
            .collect::<Result<Vec<_>>>()?;
        let pair_at = |c: isize| &pairs[(c - lo + 1) as usize];
        let cell_t = |c: isize| transfer::transfer(w.cell_tensor(c), w.cell_tensor(c));

        // left[k] = L[lo - 1 + k]
        let mut left = Vec::with_capacity(n + 2);
        left.push(bg.left.fixed.left.clone());
        for c in lo - 1..=hi {
            let next = cell_t(c)?.apply_left(left.last().expect("seeded").as_ref());
            left.push(next);
        }
        let l_at = |b: isize| &left[(b - lo + 1) as usize];

        // right[k] = R[lo + k]
        let mut right = vec![Mat::<c64>::zeros(0, 0); n + 2];
        right[n + 1] = bg.right.fixed.right.clone();
        right[n] = bg.right.fixed.right.clone();
        for c in (lo..=hi).rev() {
            let k = (c - lo) as usize;
            right[k] = cell_t(c)?.apply_right(right[k + 1].as_ref());
        }
        let r_at = |b: isize| &right[(b - lo) as usize];

        let op_t = |c: isize| {
            let (x, y) = (w.cell_tensor(c), w.cell_tensor(c + 1));
            transfer::operator_transfer(pair_at(c).as_ref(), x, y, x, y)
        };

        let mut energy_left = Vec::with_capacity(n + 1);
        energy_left.push(ham.boundary.libc.clone());
        for b in lo..=hi {
            let prev = energy_left.last().expect("seeded");
            let mut next = cell_t(b)?.apply_left(prev.as_ref());
            next += op_t(b - 1)?.apply_left(l_at(b - 1).as_ref());
            energy_left.push(next);
        }

        let mut energy_right = vec![Mat::<c64>::zeros(0, 0); n + 1];
        energy_right[n] = ham.boundary.ribc.clone();
        for b in (lo..=hi).rev() {
            let k = (b - lo) as usize;
            let mut next = cell_t(b)?.apply_right(energy_right[k + 1].as_ref());
            next += op_t(b)?.apply_right(r_at(b + 2).as_ref());
            energy_right[k] = next;
        }

        let norm = pair(l_at(lo).as_ref(), r_at(lo).as_ref()).re;
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        let straddle = op_t(lo - 1)?.apply_right(r_at(lo + 1).as_ref());
        let total = pair(energy_left[0].as_ref(), r_at(lo).as_ref())
            + pair(l_at(lo).as_ref(), energy_right[0].as_ref())
            + pair(l_at(lo - 1).as_ref(), straddle.as_ref());

        Ok(Self {
            lo,
            hi,
            left,
            right,
            energy_left,
            energy_right,
            pairs,
            norm,
            energy: total.re / norm,
        })
    }

    /// Normalized energy relative to the background.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm
    }

    fn check_cell(&self, cell: isize) -> Result<()> {
        if cell < self.lo || cell > self.hi {
            return Err(Error::InvalidArgument(format!(
                "cell {cell} outside window {}..={}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Norm environment left of `cell`.
    pub fn left(&self, cell: isize) -> &ComplexMatrix {
        &self.left[(cell - self.lo + 1) as usize]
    }

    /// Norm environment right of `cell`, i.e. `R[cell + 1]`.
    pub fn right(&self, cell: isize) -> &ComplexMatrix {
        &self.right[(cell + 1 - self.lo) as usize]
    }

    /// Effective operators acting on the tensor of one window cell.
    pub fn site_operator(&self, w: &WindowMps, cell: isize) -> Result<SiteOperator> {
        self.check_cell(cell)?;
        let k = (cell - self.lo) as usize;
        let x = w.cell_tensor(cell - 1);
        let y = w.cell_tensor(cell + 1);
        let b = w.cell_tensor(cell);
        let (dx, d, dy) = (x.d(), b.d(), y.d());

        // pair (cell - 1, cell): m[t' d + t] = sum h[(s' t'), (s t)] X^{s'}† L X^s
        let h_left = &self.pairs[k];
        let l_prev = &self.left[k];
        let p: Vec<Vec<ComplexMatrix>> = (0..dx)
            .map(|sp| {
                let xl = x.mat(sp).adjoint() * l_prev;
                (0..dx).map(|s| &xl * x.mat(s)).collect()
            })
            .collect();
        let mut m = vec![Mat::<c64>::zeros(b.dl(), b.dl()); d * d];
        for tp in 0..d {
            for t in 0..d {
                let acc = &mut m[tp * d + t];
                for sp in 0..dx {
                    for s in 0..dx {
                        let c = h_left[(sp * d + tp, s * d + t)];
                        if c != c64::new(0.0, 0.0) {
                            *acc += &p[sp][s] * faer::Scale(c);
                        }
                    }
                }
            }
        }

        // pair (cell, cell + 1): n[s d + s'] = sum h[(s' t'), (s t)] Y^t R Y^{t'}†
        let h_right = &self.pairs[k + 1];
        let r_next = &self.right[k + 2];
        let q: Vec<Vec<ComplexMatrix>> = (0..dy)
            .map(|t| {
                let yr = y.mat(t) * r_next;
                (0..dy).map(|tp| &yr * y.mat(tp).adjoint()).collect()
            })
            .collect();
        let mut nmat = vec![Mat::<c64>::zeros(b.dr(), b.dr()); d * d];
        for s in 0..d {
            for sp in 0..d {
                let acc = &mut nmat[s * d + sp];
                for t in 0..dy {
                    for tp in 0..dy {
                        let c = h_right[(sp * dy + tp, s * dy + t)];
                        if c != c64::new(0.0, 0.0) {
                            *acc += &q[t][tp] * faer::Scale(c);
                        }
                    }
                }
            }
        }

        Ok(SiteOperator {
            d,
            dl: b.dl(),
            dr: b.dr(),
            el: self.energy_left[k].clone(),
            er: self.energy_right[k + 1].clone(),
            l: self.left[k + 1].clone(),
            r: self.right[k + 1].clone(),
            m,
            n: nmat,
        })
    }

    /// `dE/dB_i^*` before normalization, so that `<psi|H|psi> = sum Tr(B^s† G^s)`.
    pub fn gradient(&self, w: &WindowMps, cell: isize) -> Result<MpsTensor> {
        let op = self.site_operator(w, cell)?;
        Ok(op.apply(w.cell_tensor(cell)))
    }
}

/// `H_eff` and `N_eff` for the tensor of one cell with all other tensors fixed.
#[derive(Clone, Debug)]
pub struct SiteOperator {
    d: usize,
    dl: usize,
    dr: usize,
    el: ComplexMatrix,
    er: ComplexMatrix,
    pub l: ComplexMatrix,
    pub r: ComplexMatrix,
    m: Vec<ComplexMatrix>,
    n: Vec<ComplexMatrix>,
}

impl SiteOperator {
    pub fn dim(&self) -> usize {
        self.d * self.dl * self.dr
    }

    pub fn apply(&self, x: &MpsTensor) -> MpsTensor {
        let d = self.d;
        let xr: Vec<ComplexMatrix> = (0..d).map(|t| x.mat(t) * &self.r).collect();
        let lx: Vec<ComplexMatrix> = (0..d).map(|s| &self.l * x.mat(s)).collect();
        let mats = (0..d)
            .map(|sp| {
                let mut g = &self.el * &xr[sp] + &lx[sp] * &self.er;
                for t in 0..d {
                    g += &self.m[sp * d + t] * &xr[t];
                    g += &lx[t] * &self.n[t * d + sp];
                }
                g
            })
            .collect();
        MpsTensor::new(mats).expect("shapes preserved")
    }

    pub fn apply_norm(&self, x: &MpsTensor) -> MpsTensor {
        MpsTensor::new((0..self.d).map(|s| &self.l * x.mat(s) * &self.r).collect()).expect("shapes preserved")
    }

    /// Dense `(H_eff, N_eff)` on vectors ordered by [`tensor_to_vector`].
    pub fn dense(&self) -> (ComplexMatrix, ComplexMatrix) {
        let n = self.dim();
        let mut h = Mat::<c64>::zeros(n, n);
        let mut g = Mat::<c64>::zeros(n, n);
        let mut e = vec![c64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = c64::new(1.0, 0.0);
            let x = vector_to_tensor(&e, self.d, self.dl, self.dr);
            e[j] = c64::new(0.0, 0.0);
            let hx = tensor_to_vector(&self.apply(&x));
            let gx = tensor_to_vector(&self.apply_norm(&x));
            for i in 0..n {
                h[(i, j)] = hx[i];
                g[(i, j)] = gx[i];
            }
        }
        (hermitian_part(h.as_ref()), hermitian_part(g.as_ref()))
    }
}

/// Flattening `s * D_l * D_r + b * D_l + a`.
pub fn tensor_to_vector(t: &MpsTensor) -> Vec<c64> {
    t.mats().iter().flat_map(|m| transfer::flatten(m.as_ref())).collect()
}

pub fn vector_to_tensor(v: &[c64], d: usize, dl: usize, dr: usize) -> MpsTensor {
    MpsTensor::new(
        (0..d)
            .map(|s| transfer::unflatten(&v[s * dl * dr..(s + 1) * dl * dr], dl, dr))
            .collect(),
    )
    .expect("nonzero physical dimension")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aklt;
    use crate::model::BondModel;
    use crate::spin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn aklt_hamiltonian() -> WindowHamiltonian {
        let h = spin::heisenberg(2, 2);
        let model = BondModel {
            bonds: vec![(3, 3, h.clone())],
        };
        WindowHamiltonian::new(Arc::new(model), aklt::background(), 1e-12).unwrap()
    }

    fn random_window(bg: &Arc<Background>, n: usize, seed: u64) -> WindowMps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = (0..n).map(|_| MpsTensor::random(3, 2, 2, &mut rng)).collect();
        let mut w = WindowMps::new(bg.clone(), tensors, vec![vec![3]; n], -1, -1).unwrap();
        w.normalize();
        w
    }

    #[test]
    fn background_window_has_zero_energy() {
        let ham = aklt_hamiltonian();
        let bg = ham.background().clone();
        let w = WindowMps::new(bg.clone(), vec![bg.left.tensor.clone(); 3], vec![vec![3]; 3], -1, -1).unwrap();
        assert!(ham.energy(&w).unwrap().abs() < 1e-12);
        // Heisenberg bond energy of AKLT: -4/3 per site
        assert!((ham.e0() + 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn site_operator_reproduces_energy_everywhere() {
        let ham = aklt_hamiltonian();
        let w = random_window(ham.background(), 4, 11);
        let env = ham.environments(&w).unwrap();
        for cell in w.offset..=w.end() {
            let op = env.site_operator(&w, cell).unwrap();
            let b = w.cell_tensor(cell);
            let e = b.inner(&op.apply(b));
            let n = b.inner(&op.apply_norm(b));
            assert!((e.re / n.re - env.energy()).abs() < 1e-10, "cell {cell}");
            assert!((n.re - env.norm_sq()).abs() < 1e-10);
            let (h, g) = op.dense();
            assert!(crate::linalg::dense::hermitian_deviation(h.as_ref()) < 1e-12);
            assert!(crate::linalg::dense::hermitian_deviation(g.as_ref()) < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let ham = aklt_hamiltonian();
        let w = random_window(ham.background(), 3, 5);
        let env = ham.environments(&w).unwrap();
        let cell = 0;
        let g = env.gradient(&w, cell).unwrap();
        let total = |w: &WindowMps| {
            let e = ham.environments(w).unwrap();
            e.energy() * e.norm_sq()
        };
        let eps = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dir = MpsTensor::random(3, 2, 2, &mut rng);
        let mut wp = w.clone();
        let k = (cell - w.offset) as usize;
        wp.tensors[k] = w.tensors[k].add_scaled(real(eps), &dir);
        let mut wm = w.clone();
        wm.tensors[k] = w.tensors[k].add_scaled(real(-eps), &dir);
        let fd = (total(&wp) - total(&wm)) / (2.0 * eps);
        let analytic = 2.0 * dir.inner(&g).re;
        assert!((fd - analytic).abs() < 1e-6 * analytic.abs().max(1.0), "{fd} {analytic}");
    }

    #[test]
    fn round_trip_vector_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = MpsTensor::random(2, 3, 4, &mut rng);
        let v = tensor_to_vector(&t);
        assert_eq!(vector_to_tensor(&v, 2, 3, 4), t);
    }
}
