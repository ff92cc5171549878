//! Exact AKLT states with spin-3/2 impurities and their effective spin-1/2 algebra.
//!
//! Bulk sites carry `S = 1` in the basis `(+1, 0, -1)`, impurities `S = 3/2` in
//! `(+3/2, +1/2, -1/2, -3/2)`. The bulk tensor is both left- and right-normalized with
//! fixed points `l_1 = I`, `r_1 = I/2`.

use std::sync::Arc;

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::dense::{cplx, identity, real, ComplexMatrix, GeneralizedEigenProblem};
use crate::mps::MpsTensor;
use crate::spin;
use crate::transfer::{self, pair, FixedPoints};
use crate::window::{Background, WindowMps};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    Up,
    Down,
}

impl Label {
    pub fn flipped(self) -> Self {
        match self {
            Label::Up => Label::Down,
            Label::Down => Label::Up,
        }
    }
}

fn pauli_plus() -> ComplexMatrix {
    Mat::from_fn(2, 2, |i, j| real(if (i, j) == (0, 1) { 1.0 } else { 0.0 }))
}

fn pauli_minus() -> ComplexMatrix {
    Mat::from_fn(2, 2, |i, j| real(if (i, j) == (1, 0) { 1.0 } else { 0.0 }))
}

fn pauli_z() -> ComplexMatrix {
    Mat::from_fn(2, 2, |i, j| {
        real(match (i, j) {
            (0, 0) => 1.0,
            (1, 1) => -1.0,
            _ => 0.0,
        })
    })
}

fn scaled(m: ComplexMatrix, x: f64) -> ComplexMatrix {
    m * faer::Scale(real(x))
}

/// `A^+ = sqrt(2/3) s^+`, `A^0 = -sqrt(1/3) s^z`, `A^- = -sqrt(2/3) s^-`.
pub fn bulk_tensor() -> MpsTensor {
    let a = (2.0f64 / 3.0).sqrt();
    let b = (1.0f64 / 3.0).sqrt();
    MpsTensor::new(vec![
        scaled(pauli_plus(), a),
        scaled(pauli_z(), -b),
        scaled(pauli_minus(), -a),
    ])
    .expect("fixed shapes")
}

pub fn impurity_tensor(label: Label) -> MpsTensor {
    let b = (1.0f64 / 3.0).sqrt();
    let zero = Mat::<c64>::zeros(2, 2);
    let mats = match label {
        Label::Up => vec![
            pauli_plus(),
            scaled(pauli_z(), -b),
            scaled(pauli_minus(), -b),
            zero,
        ],
        Label::Down => vec![
            zero,
            scaled(pauli_plus(), b),
            scaled(pauli_z(), -b),
            scaled(pauli_minus(), -1.0),
        ],
    };
    MpsTensor::new(mats).expect("fixed shapes")
}

pub fn bulk_fixed_points() -> FixedPoints {
    FixedPoints {
        left: identity(2),
        right: scaled(identity(2), 0.5),
    }
}

pub fn background() -> Arc<Background> {
    Arc::new(Background::symmetric(bulk_tensor(), bulk_fixed_points(), vec![3]).expect("fixed shapes"))
}

/// Infinite chain with impurities of the given labels at strictly increasing sites.
pub fn impurity_state(bg: &Arc<Background>, impurities: &[(isize, Label)]) -> Result<WindowMps> {
    if impurities.is_empty() {
        return Err(Error::InvalidArgument("no impurity positions".into()));
    }
    if impurities.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidArgument("impurity positions must increase".into()));
    }
    let first = impurities[0].0;
    let last = impurities[impurities.len() - 1].0;
    let mut tensors = Vec::new();
    let mut dims = Vec::new();
    let mut next = impurities.iter().peekable();
    for site in first..=last {
        match next.peek() {
            Some(&&(p, label)) if p == site => {
                tensors.push(impurity_tensor(label));
                dims.push(vec![4]);
                next.next();
            }
            _ => {
                tensors.push(bg.left.tensor.clone());
                dims.push(vec![3]);
            }
        }
    }
    WindowMps::new(bg.clone(), tensors, dims, first, first)
}

/// The `2^k` states of the degenerate manifold in lexicographic order, first spin
/// most significant and `Up` before `Down`.
pub fn manifold_basis(bg: &Arc<Background>, positions: &[isize]) -> Result<Vec<WindowMps>> {
    let k = positions.len();
    (0..1usize << k)
        .map(|bits| {
            let imps: Vec<(isize, Label)> = positions
                .iter()
                .enumerate()
                .map(|(j, &p)| {
                    let down = (bits >> (k - 1 - j)) & 1 == 1;
                    (p, if down { Label::Down } else { Label::Up })
                })
                .collect();
            impurity_state(bg, &imps)
        })
        .collect()
}

/// `<up|S^z_i|up>` for one impurity at the origin.
pub fn single_impurity_profile(i: isize) -> f64 {
    if i == 0 {
        5.0 / 6.0
    } else {
        2.0 / 3.0 * (-1.0f64 / 3.0).powi(i.unsigned_abs() as i32)
    }
}

/// Bulk profile `<S^z_i>` at distance `i >= 1` from an up edge.
pub fn edge_profile(i: isize) -> Result<f64> {
    if i < 1 {
        return Err(Error::InvalidArgument(format!("edge profile needs i >= 1, got {i}")));
    }
    Ok(-2.0 * (-1.0f64 / 3.0).powi(i as i32))
}

/// `(-1/3)^{L+1}`.
pub fn delta(l: usize) -> f64 {
    (-1.0f64 / 3.0).powi(l as i32 + 1)
}

/// Profile weight of the first of two impurities at `0` and `L`.
pub fn g1(i: isize, l: usize) -> f64 {
    let bump = if i == l as isize { 1.25 } else { 1.0 };
    bump * single_impurity_profile(i)
}

pub fn g2(i: isize, l: usize) -> f64 {
    g1(l as isize - i, l)
}

fn check_separation(l: usize) -> Result<()> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("separation L must be >= 2, got {l}")));
    }
    Ok(())
}

/// Closed-form Gram matrix of the two-impurity basis at sites `0` and `L`.
pub fn gram_matrix(l: usize) -> Result<ComplexMatrix> {
    check_separation(l)?;
    let d = delta(l);
    let mut g = Mat::<c64>::zeros(4, 4);
    g[(0, 0)] = real(1.0 - d);
    g[(1, 1)] = real(1.0 + d);
    g[(2, 2)] = real(1.0 + d);
    g[(1, 2)] = real(-2.0 * d);
    g[(2, 1)] = real(-2.0 * d);
    g[(3, 3)] = real(1.0 - d);
    Ok(g)
}

/// Overlap matrix `u^dagger u` of a manifold basis by contraction.
pub fn gram_by_contraction(basis: &[WindowMps]) -> Result<ComplexMatrix> {
    let n = basis.len();
    let mut g = Mat::<c64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = basis[i].overlap(&basis[j])?;
        }
    }
    Ok(g)
}

/// A site field `h_i` as `(x, y, z)` components.
pub type SiteField = (isize, [f64; 3]);

fn site_spin_ops(d: usize) -> [ComplexMatrix; 3] {
    spin::vector(d - 1)
}

/// `u^dagger (sum_i h_i . S_i) u` by contraction over the support of the fields.
pub fn field_matrix_by_contraction(basis: &[WindowMps], fields: &[SiteField]) -> Result<ComplexMatrix> {
    let n = basis.len();
    let mut out = Mat::<c64>::zeros(n, n);
    if fields.is_empty() {
        return Ok(out);
    }
    let lo = fields.iter().map(|f| f.0).min().unwrap_or(0);
    let hi = fields.iter().map(|f| f.0).max().unwrap_or(0);
    for i in 0..n {
        for j in 0..n {
            let mut acc = c64::new(0.0, 0.0);
            for alpha in 0..3 {
                let prof = WindowMps::transition_profile(
                    &basis[i],
                    &basis[j],
                    &|d| site_spin_ops(d)[alpha].clone(),
                    lo..=hi,
                )?;
                for &(site, h) in fields {
                    acc += prof[(site - lo) as usize] * h[alpha];
                }
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// `h^eff = 2 sum_i w(i) h_i`.
pub fn effective_field(fields: &[SiteField], weight: impl Fn(isize) -> f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for &(site, h) in fields {
        let w = 2.0 * weight(site);
        for a in 0..3 {
            out[a] += w * h[a];
        }
    }
    out
}

/// `(1/2) h . sigma`.
pub fn half_field_matrix(h: [f64; 3]) -> ComplexMatrix {
    let mut m = Mat::<c64>::zeros(2, 2);
    m[(0, 0)] = real(0.5 * h[2]);
    m[(1, 1)] = real(-0.5 * h[2]);
    m[(0, 1)] = cplx(0.5 * h[0], -0.5 * h[1]);
    m[(1, 0)] = cplx(0.5 * h[0], 0.5 * h[1]);
    m
}

/// Two-spin form `(1/2) sum_j h_j . sigma_j` in the basis `(uu, ud, du, dd)`.
pub fn two_spin_field_matrix(h1: [f64; 3], h2: [f64; 3]) -> ComplexMatrix {
    let one = crate::linalg::dense::kron(half_field_matrix(h1).as_ref(), identity(2).as_ref());
    let two = crate::linalg::dense::kron(identity(2).as_ref(), half_field_matrix(h2).as_ref());
    one + two
}

/// Closed-form effective Zeeman matrix. One impurity sits at `positions[0]`; for two
/// impurities the second must sit at `positions[0] + L` with `L >= 2`.
pub fn effective_field_matrix(fields: &[SiteField], positions: &[isize]) -> Result<ComplexMatrix> {
    match positions {
        [p] => Ok(half_field_matrix(effective_field(fields, |i| single_impurity_profile(i - p)))),
        [p, q] => {
            if q <= p {
                return Err(Error::InvalidArgument("impurity positions must increase".into()));
            }
            let l = (q - p) as usize;
            check_separation(l)?;
            let h1 = effective_field(fields, |i| g1(i - p, l));
            let h2 = effective_field(fields, |i| g2(i - p, l));
            Ok(two_spin_field_matrix(h1, h2))
        }
        _ => Err(Error::InvalidArgument(format!(
            "closed form exists for one or two impurities, got {}",
            positions.len()
        ))),
    }
}

#[derive(Clone, Debug)]
pub struct QubitBasis {
    pub delta: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    /// `sqrt(G)^{-1}` in block form.
    pub transform: ComplexMatrix,
}

/// Orthonormalizing transform of the two-impurity basis at separation `L`.
pub fn qubit_basis(l: usize) -> Result<QubitBasis> {
    check_separation(l)?;
    Ok(qubit_basis_for_delta(delta(l)))
}

pub fn qubit_basis_for_delta(d: f64) -> QubitBasis {
    let a = (1.0 / (1.0 - d)).sqrt();
    let b = (1.0 / (1.0 + 3.0 * d)).sqrt();
    let bp = 0.5 * (a + b);
    let bm = 0.5 * (a - b);
    let mut t = Mat::<c64>::zeros(4, 4);
    t[(0, 0)] = real(bp + bm);
    t[(1, 1)] = real(bp);
    t[(2, 2)] = real(bp);
    t[(1, 2)] = real(bm);
    t[(2, 1)] = real(bm);
    t[(3, 3)] = real(bp + bm);
    QubitBasis {
        delta: d,
        beta_plus: bp,
        beta_minus: bm,
        transform: t,
    }
}

impl QubitBasis {
    /// Effective fields seen in the orthonormalized basis.
    pub fn redefined_fields(&self, h1: [f64; 3], h2: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let s = 1.0 / (1.0 - self.delta).sqrt();
        let mix = |a: [f64; 3], b: [f64; 3]| {
            let mut o = [0.0; 3];
            for k in 0..3 {
                o[k] = s * (self.beta_plus * a[k] + self.beta_minus * b[k]);
            }
            o
        };
        (mix(h1, h2), mix(h2, h1))
    }
}

#[derive(Clone, Debug)]
pub struct NoGoOptions {
    /// Number of random field configurations.
    pub configs: usize,
    pub l: usize,
    pub l_prime: usize,
    /// Number of impurities, 2 (control) or 3.
    pub spins: usize,
    pub seed: u64,
    /// Draw one uniform `h_z` per configuration instead of i.i.d. site fields.
    pub uniform: bool,
}

impl Default for NoGoOptions {
    fn default() -> Self {
        Self {
            configs: 10,
            l: 3,
            l_prime: 3,
            spins: 3,
            seed: 2022,
            uniform: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NoGoReport {
    pub spins: usize,
    pub configs: usize,
    pub seed: u64,
    /// Configurations redrawn because two eigenvalues were closer than the gap floor.
    pub resampled: usize,
    pub max_subspace_angle: f64,
    pub min_pair_angle: f64,
    pub dependent: bool,
}

/// Angle threshold separating genuinely different eigenframes from roundoff.
pub const NO_GO_ANGLE_THRESHOLD: f64 = 1e-6;
const NO_GO_GAP_FLOOR: f64 = 1e-6;

struct Frame {
    vectors: ComplexMatrix,
    clusters: Vec<std::ops::Range<usize>>,
}

fn clusters(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Largest angle between an eigenvector of `a` and the nearest eigenspace of `b`,
/// measured in the `G` metric as `asin |v - P_W v|_G`.
fn frame_angle(a: &Frame, b: &Frame, g: &ComplexMatrix) -> f64 {
    let n = a.vectors.nrows();
    let mut worst = 0.0f64;
    for i in 0..a.vectors.ncols() {
        let v = a.vectors.col(i).to_owned();
        let gv = g * &v;
        let mut best = f64::INFINITY;
        for c in &b.clusters {
            let mut r = v.clone();
            for j in c.clone() {
                let w = b.vectors.col(j);
                let coef: c64 = (0..n).map(|k| w[k].conj() * gv[k]).sum();
                for k in 0..n {
                    r[k] -= w[k] * coef;
                }
            }
            let gr = g * &r;
            let s2: f64 = (0..n).map(|k| (r[k].conj() * gr[k]).re).sum();
            best = best.min(s2.max(0.0).sqrt().min(1.0).asin());
        }
        worst = worst.max(best);
    }
    worst
}

/// Solves `lambda G v = H v` for random `z` fields and compares eigenframes across
/// configurations.
pub fn three_spin_no_go_test(opts: &NoGoOptions) -> Result<NoGoReport> {
    if opts.configs < 2 {
        return Err(Error::InvalidArgument("need at least two configurations".into()));
    }
    let l = opts.l as isize;
    let lp = opts.l_prime as isize;
    let positions: Vec<isize> = match opts.spins {
        2 => vec![0, l + 1],
        3 => vec![0, l + 1, l + lp + 2],
        k => return Err(Error::InvalidArgument(format!("spins must be 2 or 3, got {k}"))),
    };
    let bg = background();
    let basis = manifold_basis(&bg, &positions)?;
    let g = crate::linalg::dense::hermitian_part(gram_by_contraction(&basis)?.as_ref());
    let lo = -5isize;
    let hi = l + lp + 5;
    let n = basis.len();
    // per-site matrices <s'|S^z_i|s>
    let mut site_mats = vec![Mat::<c64>::zeros(n, n); (hi - lo + 1) as usize];
    for i in 0..n {
        for j in 0..n {
            let prof = WindowMps::transition_profile(&basis[i], &basis[j], &|d| spin::sz(d - 1), lo..=hi)?;
            for (k, v) in prof.into_iter().enumerate() {
                site_mats[k][(i, j)] = v;
            }
        }
    }
    let solve = |fields: &[f64]| -> Result<(Vec<f64>, ComplexMatrix)> {
        let mut h = Mat::<c64>::zeros(n, n);
        for (m, &f) in site_mats.iter().zip(fields) {
            h += m * faer::Scale(real(f));
        }
        let h = crate::linalg::dense::hermitian_part(h.as_ref());
        let sol = GeneralizedEigenProblem::new(h, g.clone()).solve()?;
        Ok((sol.values, sol.vectors))
    };
    let width = (hi - lo + 1) as usize;
    let results: Vec<Result<(Frame, usize)>> = (0..opts.configs)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(c as u64);
            let mut redrawn = 0;
            loop {
                let fields: Vec<f64> = if opts.uniform {
                    let hz = rng.random_range(-1.0..1.0);
                    vec![hz; width]
                } else {
                    (0..width).map(|_| rng.random_range(-1.0..1.0)).collect()
                };
                let (values, vectors) = solve(&fields)?;
                let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                let tol = NO_GO_GAP_FLOOR * scale;
                let min_gap = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
                if !opts.uniform && min_gap < tol {
                    redrawn += 1;
                    if redrawn > 100 {
                        return Err(Error::InvalidArgument(
                            "could not draw a non-degenerate configuration".into(),
                        ));
                    }
                    continue;
                }
                let clusters = clusters(&values, tol);
                return Ok((Frame { vectors, clusters }, redrawn));
            }
        })
        .collect();
    let mut frames = Vec::with_capacity(opts.configs);
    let mut resampled = 0;
    for r in results {
        let (f, k) = r?;
        frames.push(f);
        resampled += k;
    }
    let mut max_angle = 0.0f64;
    let mut min_angle = f64::INFINITY;
    for i in 0..frames.len() {
        for j in i + 1..frames.len() {
            let a = frame_angle(&frames[i], &frames[j], &g).max(frame_angle(&frames[j], &frames[i], &g));
            max_angle = max_angle.max(a);
            min_angle = min_angle.min(a);
        }
    }
    Ok(NoGoReport {
        spins: opts.spins,
        configs: opts.configs,
        seed: opts.seed,
        resampled,
        max_subspace_angle: max_angle,
        min_pair_angle: min_angle,
        dependent: max_angle > NO_GO_ANGLE_THRESHOLD,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringAmplitude {
    pub l: usize,
    pub l_prime: usize,
    pub l_double_prime: usize,
    /// Full `<up,up,up|S^z|up,up,up>` at the probed site.
    pub full: f64,
    /// Contribution where all three impurities scatter, by contraction.
    pub triple_path: f64,
    /// The published closed form `-(2/3)(-1/3)^{L+L''+2}`.
    pub closed_form: f64,
    /// `(2/9)(-1/3)^{L+L''+2}`, the product of the channel factors along the path.
    pub path_product: f64,
}

pub fn triple_scattering_closed_form(l: usize, l2: usize) -> f64 {
    -2.0 / 3.0 * (-1.0f64 / 3.0).powi((l + l2 + 2) as i32)
}

pub fn triple_scattering_path_product(l: usize, l2: usize) -> f64 {
    2.0 / 9.0 * (-1.0f64 / 3.0).powi((l + l2 + 2) as i32)
}

/// Evaluates the three-impurity amplitude at site `L + L' + L'' + 3`, and its pure
/// triple-scattering part where every `T_B` is replaced by `T_B - T_A`.
pub fn scattering_amplitude(l: usize, lp: usize, lpp: usize) -> Result<ScatteringAmplitude> {
    let a = bulk_tensor();
    let b = impurity_tensor(Label::Up);
    let fp = bulk_fixed_points();
    let ta = transfer::transfer(&a, &a)?;
    let tb = transfer::transfer(&b, &b)?;
    let jz = transfer::site_operator_transfer(spin::sz(2).as_ref(), &a, &a)?;
    let scatter = |x: &ComplexMatrix| tb.apply_left(x.as_ref()) - ta.apply_left(x.as_ref());
    let power = |mut x: ComplexMatrix, n: usize| {
        for _ in 0..n {
            x = ta.apply_left(x.as_ref());
        }
        x
    };
    let close = |x: &ComplexMatrix| pair(jz.apply_left(x.as_ref()).as_ref(), fp.right.as_ref()).re;

    let mut x = tb.apply_left(fp.left.as_ref());
    x = power(x, l);
    x = tb.apply_left(x.as_ref());
    x = power(x, lp);
    x = tb.apply_left(x.as_ref());
    x = power(x, lpp);
    let full = close(&x);

    let mut y = scatter(&fp.left);
    y = power(y, l);
    y = scatter(&y);
    y = power(y, lp);
    y = scatter(&y);
    y = power(y, lpp);
    let triple_path = close(&y);

    Ok(ScatteringAmplitude {
        l,
        l_prime: lp,
        l_double_prime: lpp,
        full,
        triple_path,
        closed_form: triple_scattering_closed_form(l, lpp),
        path_product: triple_scattering_path_product(l, lpp),
    })
}

/// `(l_1|, (l_2|, |r_1), |r_2)` of the bulk transfer operator.
pub fn channel_vectors() -> [ComplexMatrix; 4] {
    [identity(2), pauli_z(), scaled(identity(2), 0.5), scaled(pauli_z(), 0.5)]
}
