//! Imaginary-time TDVP for the window tensors over a fixed background.
//!
//! One cell (the center) is updated with an unconstrained tangent vector. Every
//! other cell uses a gauge-fixed tangent `C(X)` that is orthogonal to the current
//! state by construction, left-gauged for cells left of the center and
//! right-gauged for cells right of it. With this choice the tangent-space metric
//! is the identity in `X`, and the projected gradient step decouples cell by cell.

use faer::{c64, Mat, MatRef};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::dense::{orthogonal_complement, pinv_sqrt, real, ComplexMatrix};
use crate::mps::MpsTensor;
use crate::window::{WindowEnvironments, WindowHamiltonian, WindowMps};

/// Relative eigenvalue floor when inverting environments.
pub const ENV_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Null-space isometry `V` with its environment factors, defining
/// `C(X)^s = l^{-1/2} V^s X r^{-1/2}` (left) or `l^{-1/2} X V^s r^{-1/2}` (right).
#[derive(Clone, Debug)]
pub struct TangentGauge {
    pub side: Side,
    pub v: MpsTensor,
    pub l_inv_half: ComplexMatrix,
    pub r_inv_half: ComplexMatrix,
}

impl TangentGauge {
    /// `V_L` with `sum_s V^s† l^{1/2} B^s = 0` and `sum_s V^s† V^s = 1`.
    pub fn left(b: &MpsTensor, l: MatRef<'_, c64>, r: MatRef<'_, c64>) -> Result<Self> {
        let l_half = crate::linalg::dense::sqrt_psd(l)?;
        let w = b.left_mul(l_half.as_ref()).stacked_rows();
        let v = orthogonal_complement(w.as_ref())?;
        Ok(Self {
            side: Side::Left,
            v: MpsTensor::from_stacked_rows(v.as_ref(), b.d())?,
            l_inv_half: pinv_sqrt(l, ENV_FLOOR)?,
            r_inv_half: pinv_sqrt(r, ENV_FLOOR)?,
        })
    }

    /// `V_R` with `sum_s B^s r^{1/2} V^s† = 0` and `sum_s V^s V^s† = 1`.
    pub fn right(b: &MpsTensor, l: MatRef<'_, c64>, r: MatRef<'_, c64>) -> Result<Self> {
        let r_half = crate::linalg::dense::sqrt_psd(r)?;
        let w = b.right_mul(r_half.as_ref()).stacked_cols();
        let v = orthogonal_complement(w.adjoint().to_owned().as_ref())?;
        Ok(Self {
            side: Side::Right,
            v: MpsTensor::from_stacked_cols(v.adjoint().to_owned().as_ref(), b.d())?,
            l_inv_half: pinv_sqrt(l, ENV_FLOOR)?,
            r_inv_half: pinv_sqrt(r, ENV_FLOOR)?,
        })
    }

    /// Shape of `X`.
    pub fn x_shape(&self) -> (usize, usize) {
        match self.side {
            Side::Left => (self.v.dr(), self.r_inv_half.nrows()),
            Side::Right => (self.l_inv_half.nrows(), self.v.dl()),
        }
    }

    pub fn tangent(&self, x: MatRef<'_, c64>) -> MpsTensor {
        let mats = (0..self.v.d())
            .map(|s| match self.side {
                Side::Left => &self.l_inv_half * self.v.mat(s) * x * &self.r_inv_half,
                Side::Right => &self.l_inv_half * x * self.v.mat(s) * &self.r_inv_half,
            })
            .collect();
        MpsTensor::new(mats).expect("consistent shapes")
    }

    /// Adjoint of [`Self::tangent`]: `X` with `<C(X')|G> = Tr(X'† X)` for all `X'`.
    pub fn project(&self, g: &MpsTensor) -> ComplexMatrix {
        let (rows, cols) = self.x_shape();
        let mut x = Mat::<c64>::zeros(rows, cols);
        for s in 0..self.v.d() {
            let core = &self.l_inv_half * g.mat(s) * &self.r_inv_half;
            match self.side {
                Side::Left => x += self.v.mat(s).adjoint() * core,
                Side::Right => x += core * self.v.mat(s).adjoint(),
            }
        }
        x
    }
}

/// Steepest-descent tangent of one cell.
#[derive(Clone, Debug)]
pub struct CellTangent {
    pub cell: isize,
    pub c: MpsTensor,
    /// `Tr(X X†)` for gauged cells, `(l|T_C^C|r)` for the center.
    pub weight: f64,
}

/// Tangent vectors of every window cell for the normalized energy.
pub fn tangents(ham: &WindowHamiltonian, w: &WindowMps, center: isize) -> Result<(WindowEnvironments, Vec<CellTangent>)> {
    if center < w.offset || center > w.end() {
        return Err(Error::InvalidArgument(format!(
            "center cell {center} outside window {}..={}",
            w.offset,
            w.end()
        )));
    }
    let env = ham.environments(w)?;
    let e = env.energy();
    let n = env.norm_sq();
    let cells: Vec<isize> = (w.offset..=w.end()).collect();
    let out = cells
        .par_iter()
        .map(|&cell| {
            let op = env.site_operator(w, cell)?;
            let b = w.cell_tensor(cell);
            // gradient of <H>/<N> at fixed norm, up to the factor 1/N
            let g = op
                .apply(b)
                .add_scaled(real(-e), &op.apply_norm(b))
                .scaled(real(1.0 / n));
            let (l, r) = (env.left(cell), env.right(cell));
            if cell == center {
                let li = pinv_sqrt(l.as_ref(), ENV_FLOOR)?;
                let ri = pinv_sqrt(r.as_ref(), ENV_FLOOR)?;
                let (li, ri) = (&li * &li, &ri * &ri);
                let c = g.left_mul(li.as_ref()).right_mul(ri.as_ref()).scaled(real(-1.0));
                let weight = c.inner(&op.apply_norm(&c)).re;
                Ok(CellTangent { cell, c, weight })
            } else {
                let gauge = if cell < center {
                    TangentGauge::left(b, l.as_ref(), r.as_ref())?
                } else {
                    TangentGauge::right(b, l.as_ref(), r.as_ref())?
                };
                let x = gauge.project(&g) * faer::Scale(real(-1.0));
                let weight = x.norm_l2().powi(2);
                Ok(CellTangent {
                    cell,
                    c: gauge.tangent(x.as_ref()),
                    weight,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((env, out))
}

#[derive(Clone, Debug)]
pub struct TdvpStep {
    pub state: WindowMps,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `sqrt(sum of tangent weights)`.
    pub tangent_norm: f64,
    /// `1 - |<old|new>|` between the normalized states.
    pub distance: f64,
}

fn apply_tangents(w: &WindowMps, tangents: &[CellTangent], dtau: f64) -> WindowMps {
    let mut next = w.clone();
    for t in tangents {
        let k = (t.cell - w.offset) as usize;
        next.tensors[k] = w.tensors[k].add_scaled(real(dtau), &t.c);
    }
    next.normalize();
    next
}

/// One Euler step `B_i <- B_i + dtau C_i` on all cells, followed by normalization.
pub fn tdvp_imaginary_step(ham: &WindowHamiltonian, w: &WindowMps, dtau: f64, center: isize) -> Result<TdvpStep> {
    if !(dtau > 0.0) {
        return Err(Error::InvalidArgument(format!("dtau must be positive, got {dtau}")));
    }
    let (env, tan) = tangents(ham, w, center)?;
    step_from(ham, w, &env, &tan, dtau)
}

fn step_from(
    ham: &WindowHamiltonian,
    w: &WindowMps,
    env: &WindowEnvironments,
    tan: &[CellTangent],
    dtau: f64,
) -> Result<TdvpStep> {
    let state = apply_tangents(w, tan, dtau);
    let energy_after = ham.energy(&state)?;
    let fid = window_fidelity(w, &state)?;
    Ok(TdvpStep {
        state,
        energy_before: env.energy(),
        energy_after,
        tangent_norm: tan.iter().map(|t| t.weight).sum::<f64>().sqrt(),
        distance: 1.0 - fid,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdvpOptions {
    pub dtau: f64,
    pub dtau_min: f64,
    /// Stop once `1 - |<old|new>|` of one step falls below this.
    pub tol: f64,
    pub max_steps: usize,
    /// Cell with the unconstrained tangent; the middle of the window if `None`.
    pub center: Option<isize>,
}

impl Default for TdvpOptions {
    fn default() -> Self {
        Self {
            dtau: 0.1,
            dtau_min: 1e-3,
            tol: 1e-9,
            max_steps: 20_000,
            center: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TdvpResult {
    pub state: WindowMps,
    pub energy: f64,
    pub steps: usize,
    pub converged: bool,
    pub distance: f64,
    pub tangent_norm: f64,
    pub dtau: f64,
}

impl TdvpResult {
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                what: "window TDVP",
                iterations: self.steps,
                residual: self.distance,
            })
        }
    }
}

/// Imaginary-time evolution until the per-step fidelity distance drops below `tol`.
///
/// The step halves whenever the energy would rise; below `dtau_min` that is an error.
pub fn optimize_window(ham: &WindowHamiltonian, start: WindowMps, opts: &TdvpOptions) -> Result<TdvpResult> {
    let center = opts.center.unwrap_or((start.offset + start.end()).div_euclid(2));
    let mut w = start;
    w.normalize();
    let mut dtau = opts.dtau;
    let mut last = (f64::INFINITY, f64::INFINITY);
    let mut energy = ham.energy(&w)?;
    for step in 0..opts.max_steps {
        let (env, tan) = tangents(ham, &w, center)?;
        let slack = 1e-13 * env.energy().abs().max(1.0);
        let accepted = loop {
            let trial = step_from(ham, &w, &env, &tan, dtau)?;
            if trial.energy_after <= trial.energy_before + slack {
                break trial;
            }
            dtau *= 0.5;
            if dtau < opts.dtau_min {
                return Err(Error::NoConvergence {
                    what: "window TDVP step size",
                    iterations: step,
                    residual: trial.energy_after - trial.energy_before,
                });
            }
        };
        w = accepted.state;
        energy = accepted.energy_after;
        last = (accepted.distance, accepted.tangent_norm);
        if step % 200 == 0 {
            log::debug!(
                "tdvp step {step}: E={energy:.12} |C|={:.3e} dist={:.3e} dtau={dtau}",
                last.1,
                last.0
            );
        }
        if accepted.distance < opts.tol {
            return Ok(TdvpResult {
                state: w,
                energy,
                steps: step + 1,
                converged: true,
                distance: last.0,
                tangent_norm: last.1,
                dtau,
            });
        }
    }
    Ok(TdvpResult {
        state: w,
        energy,
        steps: opts.max_steps,
        converged: false,
        distance: last.0,
        tangent_norm: last.1,
        dtau,
    })
}

/// `|<a|b>| / sqrt(<a|a><b|b>)`.
pub fn window_fidelity(a: &WindowMps, b: &WindowMps) -> Result<f64> {
    let ov = a.overlap(b)?;
    Ok(ov.norm() / (a.norm_sq() * b.norm_sq()).sqrt())
}

/// `sqrt(1 - |<a|b>|)` for normalized states.
pub fn fidelity_distance(a: &WindowMps, b: &WindowMps) -> Result<f64> {
    Ok((1.0 - window_fidelity(a, b)?).max(0.0).sqrt())
}

/// Tangent weights `eps_m` of a state padded by `pad` background cells on each side,
/// with the original center cell unconstrained.
pub fn tangent_energy_weights(
    ham: &WindowHamiltonian,
    w: &WindowMps,
    center: isize,
    pad: usize,
) -> Result<Vec<(isize, f64)>> {
    let padded = w.padded(pad, pad);
    let (_, tan) = tangents(ham, &padded, center)?;
    Ok(tan.into_iter().map(|t| (t.cell, t.weight)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aklt;
    use crate::linalg::dense::{frobenius, identity};
    use crate::model::BondModel;
    use crate::spin;
    use crate::transfer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn aklt_ham() -> WindowHamiltonian {
        let model = BondModel {
            bonds: vec![(3, 3, spin::heisenberg(2, 2))],
        };
        WindowHamiltonian::new(Arc::new(model), aklt::background(), 1e-12).unwrap()
    }

    #[test]
    fn gauge_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = MpsTensor::random(4, 5, 5, &mut rng);
        let x0 = MpsTensor::random(1, 5, 5, &mut rng);
        let l = x0.mat(0) * x0.mat(0).adjoint() + identity(5);
        let r = x0.mat(0).adjoint() * x0.mat(0) + identity(5) * faer::Scale(real(0.5));
        for side in [Side::Left, Side::Right] {
            let g = match side {
                Side::Left => TangentGauge::left(&b, l.as_ref(), r.as_ref()).unwrap(),
                Side::Right => TangentGauge::right(&b, l.as_ref(), r.as_ref()).unwrap(),
            };
            assert_eq!(g.x_shape(), if side == Side::Left { (15, 5) } else { (5, 15) });
            let (rows, cols) = g.x_shape();
            let xt = MpsTensor::random(1, rows, cols, &mut rng);
            let x = xt.mat(0);
            let c = g.tangent(x);
            // |C(X)|^2 in the metric (l, r) equals Tr(X X†)
            let norm = transfer::pair(l.as_ref(), transfer::transfer(&c, &c).unwrap().apply_right(r.as_ref()).as_ref());
            assert!((norm.re - x.norm_l2().powi(2)).abs() < 1e-10 * norm.re);
            // orthogonality to B on the gauged side
            let ov = match side {
                Side::Left => frobenius(transfer::transfer(&b, &c).unwrap().apply_left(l.as_ref()).as_ref()),
                Side::Right => frobenius(transfer::transfer(&b, &c).unwrap().apply_right(r.as_ref()).as_ref()),
            };
            assert!(ov < 1e-10, "{ov}");
            // project is the adjoint of tangent in the (l, r) metric
            let gt = MpsTensor::random(4, 5, 5, &mut rng);
            let lhs = c.inner(&gt.left_mul(l.as_ref()).right_mul(r.as_ref()));
            let x2 = g.project(&gt.left_mul(l.as_ref()).right_mul(r.as_ref()));
            let rhs = crate::linalg::dense::inner(x, x2.as_ref());
            assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn exact_vacuum_is_stationary() {
        let ham = aklt_ham();
        let bg = ham.background().clone();
        let w = WindowMps::new(bg.clone(), vec![bg.left.tensor.clone(); 5], vec![vec![3]; 5], -2, -2).unwrap();
        let eps = tangent_energy_weights(&ham, &w, 0, 3).unwrap();
        assert_eq!(eps.len(), 11);
        assert!(eps.iter().all(|&(_, e)| e < 1e-20), "{eps:?}");
        let step = tdvp_imaginary_step(&ham, &w, 0.1, 0).unwrap();
        assert!(step.distance < 1e-14);
    }

    #[test]
    fn tdvp_relaxes_a_perturbed_window_to_the_vacuum() {
        let ham = aklt_ham();
        let bg = ham.background().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tensors = (0..3)
            .map(|_| bg.left.tensor.add_scaled(real(0.2), &MpsTensor::random(3, 2, 2, &mut rng)))
            .collect();
        let w = WindowMps::new(bg.clone(), tensors, vec![vec![3]; 3], -1, -1).unwrap();
        let e_start = ham.energy(&w).unwrap();
        assert!(e_start > 1e-3);
        let opts = TdvpOptions {
            tol: 1e-14,
            ..Default::default()
        };
        let res = optimize_window(&ham, w, &opts).unwrap().into_converged().unwrap();
        assert!(res.energy.abs() < 1e-9, "{}", res.energy);
        let vac = WindowMps::new(bg.clone(), vec![bg.left.tensor.clone(); 3], vec![vec![3]; 3], -1, -1).unwrap();
        assert!(1.0 - window_fidelity(&vac, &res.state).unwrap() < 1e-8);
    }

    #[test]
    fn fidelity_of_identical_windows_is_one() {
        let bg = aklt::background();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = WindowMps::new(bg, vec![MpsTensor::random(3, 2, 2, &mut rng)], vec![vec![3]], 0, 0).unwrap();
        assert!((window_fidelity(&w, &w).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(fidelity_distance(&w, &w).unwrap(), 0.0);
    }
}
