//! Variational uniform MPS ground states for nearest-cell Hamiltonians.

use faer::{c64, Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::dense::{hermitian_deviation, polar_isometry, ComplexMatrix};
use crate::linalg::krylov::{lowest_eigenpair, KrylovOptions};
use crate::mps::MpsTensor;
use crate::transfer::{self, BoundaryEnvironments};
use crate::uniform::UniformMps;

#[derive(Clone, Debug, Serialize)]
pub struct VumpsOptions {
    pub bond: usize,
    /// Target for `max(|A_C - A_L C|, |A_C - C A_R|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for VumpsOptions {
    fn default() -> Self {
        Self {
            bond: 16,
            tol: 1e-8,
            max_iter: 500,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VumpsResult {
    pub state: UniformMps,
    /// Energy per cell.
    pub energy: f64,
    pub gradient: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `(energy, gradient)` after every outer step.
    pub history: Vec<(f64, f64)>,
}

/// Local projections of the pair Hamiltonian used by both effective problems.
struct Effective<'a> {
    h: MatRef<'a, c64>,
    d: usize,
    /// `sum h[(s't'),(st)] A_L^{s'}dag A_L^s`, indexed `t' * d + t`.
    left: Vec<ComplexMatrix>,
    /// `sum h[(s't'),(st)] A_R^t A_R^{t'}dag`, indexed `s * d + s'`.
    right: Vec<ComplexMatrix>,
    hl: ComplexMatrix,
    hr: ComplexMatrix,
}

impl<'a> Effective<'a> {
    fn new(h: MatRef<'a, c64>, st: &UniformMps, env: &BoundaryEnvironments) -> Self {
        let d = st.d();
        let n = st.bond();
        let mut left = vec![Mat::<c64>::zeros(n, n); d * d];
        let mut right = vec![Mat::<c64>::zeros(n, n); d * d];
        let prod_l: Vec<ComplexMatrix> = (0..d * d)
            .map(|k| st.al.mat(k / d).adjoint() * st.al.mat(k % d))
            .collect();
        let prod_r: Vec<ComplexMatrix> = (0..d * d)
            .map(|k| st.ar.mat(k / d) * st.ar.mat(k % d).adjoint())
            .collect();
        for sp in 0..d {
            for tp in 0..d {
                for s in 0..d {
                    for t in 0..d {
                        let c = h[(sp * d + tp, s * d + t)];
                        if c == c64::new(0.0, 0.0) {
                            continue;
                        }
                        left[tp * d + t] += &prod_l[sp * d + s] * faer::Scale(c);
                        right[s * d + sp] += &prod_r[t * d + tp] * faer::Scale(c);
                    }
                }
            }
        }
        Self {
            h,
            d,
            left,
            right,
            hl: env.libc.clone(),
            hr: env.ribc.clone(),
        }
    }

    fn apply_ac(&self, x: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let d = self.d;
        (0..d)
            .map(|sp| {
                let mut y = &self.hl * &x[sp] + &x[sp] * &self.hr;
                for t in 0..d {
                    y += &self.left[sp * d + t] * &x[t];
                    y += &x[t] * &self.right[t * d + sp];
                }
                y
            })
            .collect()
    }

    fn apply_c(&self, st: &UniformMps, c: MatRef<'_, c64>) -> ComplexMatrix {
        let d = self.d;
        let mut y = &self.hl * c + c * &self.hr;
        let q: Vec<ComplexMatrix> = (0..d * d)
            .map(|k| st.al.mat(k / d) * c * st.ar.mat(k % d))
            .collect();
        for sp in 0..d {
            for tp in 0..d {
                let mut r = Mat::<c64>::zeros(c.nrows(), c.ncols());
                for k in 0..d * d {
                    let w = self.h[(sp * d + tp, k)];
                    if w != c64::new(0.0, 0.0) {
                        r += &q[k] * faer::Scale(w);
                    }
                }
                y += st.al.mat(sp).adjoint() * r * st.ar.mat(tp).adjoint();
            }
        }
        y
    }
}

fn to_vec(ms: &[ComplexMatrix]) -> Vec<c64> {
    let mut v = Vec::new();
    for m in ms {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                v.push(m[(i, j)]);
            }
        }
    }
    v
}

fn from_vec(v: &[c64], count: usize, rows: usize, cols: usize) -> Vec<ComplexMatrix> {
    (0..count)
        .map(|k| Mat::from_fn(rows, cols, |i, j| v[k * rows * cols + j * rows + i]))
        .collect()
}

/// One VUMPS update of `(A_L, A_R, C)` given fresh environments.
fn update(h: MatRef<'_, c64>, st: &UniformMps, env: &BoundaryEnvironments, tol: f64) -> Result<UniformMps> {
    let eff = Effective::new(h, st, env);
    let (d, n) = (st.d(), st.bond());
    let opts = KrylovOptions {
        tol,
        max_restarts: 100,
        krylov_dim: 30,
    };
    let ac_op = |x: &[c64], y: &mut [c64]| {
        let out = to_vec(&eff.apply_ac(&from_vec(x, d, n, n)));
        y.copy_from_slice(&out);
    };
    let (_, ac_vec) = lowest_eigenpair(&ac_op, &to_vec(st.ac.mats()), &opts)?;
    let ac = MpsTensor::new(from_vec(&ac_vec, d, n, n))?;
    let c_op = |x: &[c64], y: &mut [c64]| {
        let c = &from_vec(x, 1, n, n)[0];
        y.copy_from_slice(&to_vec(&[eff.apply_c(st, c.as_ref())]));
    };
    let (_, c_vec) = lowest_eigenpair(&c_op, &to_vec(&[st.c.clone()]), &opts)?;
    let c = from_vec(&c_vec, 1, n, n).remove(0);
    let uc = polar_isometry(c.as_ref())?;
    let ul = polar_isometry(ac.stacked_rows().as_ref())?;
    let al = MpsTensor::from_stacked_rows((ul * uc.adjoint()).as_ref(), d)?;
    let ur = polar_isometry(ac.stacked_cols().as_ref())?;
    let ar = MpsTensor::from_stacked_cols((uc.adjoint() * ur).as_ref(), d)?;
    let next = UniformMps::from_parts_with_center(al, ar, c, Some(ac), st.cell_dims.clone())?;
    Ok(next)
}

/// VUMPS from a given starting state.
pub fn vumps_from(h: MatRef<'_, c64>, start: UniformMps, opts: &VumpsOptions) -> Result<VumpsResult> {
    if opts.tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let dev = hermitian_deviation(h);
    if dev > 1e-12 {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let d = start.d();
    if h.nrows() != d * d || h.ncols() != d * d {
        return Err(Error::Dimension(format!(
            "pair operator {}x{} for cell dimension {d}",
            h.nrows(),
            h.ncols()
        )));
    }
    let mut st = start;
    let mut gradient = 1.0f64;
    let mut env: Option<BoundaryEnvironments> = None;
    let mut history = Vec::new();
    let mut energy = f64::NAN;
    for it in 0..opts.max_iter {
        let inner = (gradient / 100.0).clamp(1e-12, 1e-6);
        let e = transfer::boundary_environments_from(
            &st.left_channel(),
            &st.right_channel(),
            h,
            env.as_ref(),
            inner,
        )?;
        let next = update(h, &st, &e, inner)?;
        env = Some(e);
        gradient = next.gauge_error();
        energy = next.energy_per_cell(h)?;
        history.push((energy, gradient));
        st = next;
        log::debug!("vumps step {it}: energy {energy:.14} gradient {gradient:.3e}");
        if gradient <= opts.tol {
            return Ok(VumpsResult {
                state: st,
                energy,
                gradient,
                iterations: it + 1,
                converged: true,
                history,
            });
        }
    }
    Ok(VumpsResult {
        state: st,
        energy,
        gradient,
        iterations: opts.max_iter,
        converged: false,
        history,
    })
}

/// VUMPS from a seeded random start. A run that exhausts `max_iter` is returned with
/// `converged = false`; [`VumpsResult::into_converged`] turns that into an error.
pub fn vumps(h: MatRef<'_, c64>, cell_dims: Vec<usize>, opts: &VumpsOptions) -> Result<VumpsResult> {
    if opts.bond < 2 {
        return Err(Error::InvalidArgument(format!("bond dimension {} < 2", opts.bond)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start = UniformMps::random(cell_dims, opts.bond, &mut rng, 1e-12)?;
    vumps_from(h, start, opts)
}

impl VumpsResult {
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                what: "VUMPS",
                iterations: self.iterations,
                residual: self.gradient,
            })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedReport {
    pub seeds: Vec<u64>,
    pub energies: Vec<f64>,
    pub gradients: Vec<f64>,
    pub converged: Vec<bool>,
    pub energy_spread: f64,
    /// Largest `1 - |<A|B>|` per cell between any two optimized states.
    pub fidelity_spread: f64,
    pub all_converged: bool,
    pub consistent: bool,
}

/// Per-cell fidelity `|lambda_1|` of the mixed transfer operator between two states.
pub fn fidelity_per_cell(a: &UniformMps, b: &UniformMps) -> Result<f64> {
    let t = transfer::transfer(&a.al, &b.al)?;
    let s = transfer::spectrum(&t, 1)?;
    Ok(s.eigenvalues[0].norm())
}

/// Independent runs from seeds `seed, seed+1, ...` compared pairwise.
pub fn multi_seed_consistency(
    h: MatRef<'_, c64>,
    cell_dims: Vec<usize>,
    opts: &VumpsOptions,
    n_seeds: usize,
) -> Result<SeedReport> {
    if n_seeds < 2 {
        return Err(Error::InvalidArgument("need at least two seeds".into()));
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|k| opts.seed + k).collect();
    let h = h.to_owned();
    let runs: Vec<Result<VumpsResult>> = seeds
        .par_iter()
        .map(|&seed| {
            vumps(
                h.as_ref(),
                cell_dims.clone(),
                &VumpsOptions {
                    seed,
                    ..opts.clone()
                },
            )
        })
        .collect();
    let runs: Vec<VumpsResult> = runs.into_iter().collect::<Result<_>>()?;
    let energies: Vec<f64> = runs.iter().map(|r| r.energy).collect();
    let emax = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let emin = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut fid = 0.0f64;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            fid = fid.max(1.0 - fidelity_per_cell(&runs[i].state, &runs[j].state)?);
        }
    }
    let all_converged = runs.iter().all(|r| r.converged);
    Ok(SeedReport {
        seeds,
        gradients: runs.iter().map(|r| r.gradient).collect(),
        converged: runs.iter().map(|r| r.converged).collect(),
        energies,
        energy_spread: emax - emin,
        fidelity_spread: fid,
        all_converged,
        consistent: all_converged && emax - emin < 10.0 * opts.tol,
    })
}
