//! Bond defects of the dimerized chain as windows over a uniform background.
//!
//! The background cell holds two sites joined by a strong bond. A weak-weak defect
//! is a cell holding a single site: both of its bonds are then inter-cell bonds and
//! hence weak. Cells left of the defect cell `k` cover sites `(2c, 2c+1)`, cells
//! right of it `(2c-1, 2c)`, and the defect cell is site `2k`.

use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dense::{real, ComplexMatrix, GeneralizedEigenProblem};
use crate::model::{Abahc, PairModel};
use crate::mps::MpsTensor;
use crate::uniform::UniformMps;
use crate::window::{
    optimize_window, vector_to_tensor, Background, TdvpOptions, TdvpResult, WindowHamiltonian, WindowMps,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefectKind {
    /// One site between two weak bonds.
    WeakWeak,
    /// Uniform chain; the window only carries a variational freedom.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectSpec {
    pub kind: DefectKind,
    /// Cell index of the defect.
    pub cell: isize,
}

impl DefectSpec {
    pub fn weak_weak() -> Self {
        Self {
            kind: DefectKind::WeakWeak,
            cell: 0,
        }
    }

    pub fn none() -> Self {
        Self {
            kind: DefectKind::None,
            cell: 0,
        }
    }

    /// Local dimensions of every cell in `lo..=hi`.
    pub fn layout(&self, lo: isize, hi: isize) -> Vec<Vec<usize>> {
        (lo..=hi)
            .map(|c| match self.kind {
                DefectKind::WeakWeak if c == self.cell => vec![2],
                _ => Abahc::cell_dims(),
            })
            .collect()
    }
}

/// A uniform dimerized ground state together with one defect and its Hamiltonian.
#[derive(Clone, Debug)]
pub struct DefectProblem {
    pub uniform: UniformMps,
    pub background: Arc<Background>,
    pub model: Abahc,
    pub defect: DefectSpec,
    pub ham: WindowHamiltonian,
}

/// Lowest levels of the single-cell effective problem.
#[derive(Clone, Debug)]
pub struct CenterSolution {
    /// Ascending energies relative to the background.
    pub energies: Vec<f64>,
    /// Center tensors, normalized as states, in the same order.
    pub tensors: Vec<MpsTensor>,
    pub window: WindowMps,
}

impl DefectProblem {
    pub fn new(uniform: UniformMps, model: Abahc, defect: DefectSpec, tol: f64) -> Result<Self> {
        if uniform.cell_dims != Abahc::cell_dims() {
            return Err(Error::Dimension(format!(
                "dimerized background needs two-site cells, got {:?}",
                uniform.cell_dims
            )));
        }
        let background = Arc::new(uniform.background()?);
        let ham = WindowHamiltonian::new(Arc::new(model) as Arc<dyn PairModel>, background.clone(), tol)?;
        Ok(Self {
            uniform,
            background,
            model,
            defect,
            ham,
        })
    }

    /// Same background and defect under another field.
    pub fn with_field(&self, hz: f64, tol: f64) -> Result<Self> {
        Self::new(self.uniform.clone(), Abahc::new(self.model.delta, hz)?, self.defect, tol)
    }

    /// Window of `2n + 1` cells centered on cell 0: `A_L` copies left of the defect
    /// cell, `A_R` copies right of it, and `center` (or a guess built from `A_C`) on it.
    pub fn window(&self, n: usize, center: Option<&MpsTensor>) -> Result<WindowMps> {
        let n = n as isize;
        let k = self.defect.cell;
        if k < -n || k > n {
            return Err(Error::InvalidArgument(format!(
                "defect cell {k} outside a window of half-width {n}"
            )));
        }
        let dims = self.defect.layout(-n, n);
        let u = &self.uniform;
        let mut tensors = Vec::with_capacity(dims.len());
        for (c, d) in (-n..=n).zip(&dims) {
            let t = if c < k {
                u.al.clone()
            } else if c > k {
                u.ar.clone()
            } else {
                match center {
                    Some(b) => {
                        if b.d() != d.iter().product::<usize>() || b.dl() != u.bond() || b.dr() != u.bond() {
                            return Err(Error::Dimension("center tensor does not fit the defect cell".into()));
                        }
                        b.clone()
                    }
                    None => center_guess(&u.ac, d.len()),
                }
            };
            tensors.push(t);
        }
        let origin = -2 * n;
        let mut w = WindowMps::new(self.background.clone(), tensors, dims, -n, origin)?;
        w.normalize();
        Ok(w)
    }

    /// Dense `(H_eff, N_eff)` of the defect cell with everything else fixed to the
    /// background.
    pub fn effective_center_problem(&self) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let w = self.window(0, None)?;
        let env = self.ham.environments(&w)?;
        Ok(env.site_operator(&w, 0)?.dense())
    }

    /// Lowest `levels` solutions of `H_eff x = lambda N_eff x`.
    pub fn solve_center(&self, levels: usize) -> Result<CenterSolution> {
        if self.defect.cell != 0 {
            return Err(Error::InvalidArgument("single-cell problem needs the defect at cell 0".into()));
        }
        let (h, n) = self.effective_center_problem()?;
        let sol = GeneralizedEigenProblem::new(h, n).solve()?;
        let w0 = self.window(0, None)?;
        let t0 = &w0.tensors[0];
        let (d, dl, dr) = (t0.d(), t0.dl(), t0.dr());
        let levels = levels.max(1).min(sol.values.len());
        let tensors: Vec<MpsTensor> = (0..levels)
            .map(|j| {
                let v: Vec<_> = (0..sol.vectors.nrows()).map(|i| sol.vectors[(i, j)]).collect();
                vector_to_tensor(&v, d, dl, dr)
            })
            .collect();
        let mut window = self.window(0, Some(&tensors[0]))?;
        window.normalize();
        Ok(CenterSolution {
            energies: sol.values[..levels].to_vec(),
            tensors,
            window,
        })
    }

    /// TDVP on a window of half-width `n` started from the single-cell solution.
    pub fn optimize(&self, n: usize, center: &MpsTensor, opts: &TdvpOptions) -> Result<TdvpResult> {
        let w = self.window(n, Some(center))?;
        let opts = TdvpOptions {
            center: Some(self.defect.cell),
            ..*opts
        };
        optimize_window(&self.ham, w, &opts)
    }
}

/// Single-site guess `B^s = sum_t A_C^{(s,t)} / sqrt(2)` or `A_C` itself.
fn center_guess(ac: &MpsTensor, sites: usize) -> MpsTensor {
    if sites == 2 {
        return ac.clone();
    }
    let mats = (0..2)
        .map(|s| (ac.mat(2 * s).to_owned() + ac.mat(2 * s + 1)) * faer::Scale(real(std::f64::consts::FRAC_1_SQRT_2)))
        .collect::<Vec<Mat<_>>>();
    MpsTensor::new(mats).expect("two components")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{identity, max_abs};
    use crate::vumps::{vumps, VumpsOptions};

    fn problem(defect: DefectSpec, hz: f64) -> DefectProblem {
        let model = Abahc::new(0.3, 0.0).unwrap();
        let opts = VumpsOptions {
            bond: 4,
            tol: 1e-10,
            ..Default::default()
        };
        let res = vumps(model.uniform_pair().as_ref(), Abahc::cell_dims(), &opts).unwrap();
        DefectProblem::new(res.state, Abahc::new(0.3, hz).unwrap(), defect, 1e-12).unwrap()
    }

    #[test]
    fn window_shapes() {
        let p = problem(DefectSpec::weak_weak(), 0.0);
        let w = p.window(2, None).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w.window_sites(), 9);
        assert_eq!(w.cell_first_site(0), 0);
        assert_eq!(w.cell_first_site(-1), -2);
        assert_eq!(w.cell_first_site(1), 1);
        assert_eq!(w.cell_first_site(-5), -10);
        assert_eq!(w.cell_first_site(5), 9);
        assert_eq!(p.window(0, None).unwrap().len(), 1);
        let bad = DefectProblem {
            defect: DefectSpec {
                kind: DefectKind::WeakWeak,
                cell: 3,
            },
            ..p
        };
        assert!(bad.window(2, None).is_err());
    }

    #[test]
    fn mixed_gauge_metric_is_identity() {
        let p = problem(DefectSpec::weak_weak(), 0.0);
        let (h, n) = p.effective_center_problem().unwrap();
        assert!(max_abs((&n - identity(n.nrows())).as_ref()) < 1e-10);
        assert!(crate::linalg::dense::hermitian_deviation(h.as_ref()) < 1e-10);
    }

    #[test]
    fn no_defect_center_reproduces_the_background() {
        let p = problem(DefectSpec::none(), 0.0);
        let sol = p.solve_center(2).unwrap();
        // the uniform state is already optimal for its own cell
        assert!(sol.energies[0].abs() < 1e-8, "{:?}", sol.energies);
        let ov = p.uniform.ac.inner(&sol.tensors[0]).norm();
        assert!((ov - 1.0).abs() < 1e-8);
    }

    #[test]
    fn defect_levels_are_a_kramers_pair_without_field() {
        let p = problem(DefectSpec::weak_weak(), 0.0);
        let sol = p.solve_center(3).unwrap();
        assert!((sol.energies[1] - sol.energies[0]).abs() < 1e-9, "{:?}", sol.energies);
        assert!(sol.energies[2] - sol.energies[1] > 1e-3);
        let pf = p.with_field(1e-3, 1e-12).unwrap();
        let solf = pf.solve_center(2).unwrap();
        let gap = solf.energies[1] - solf.energies[0];
        assert!((gap - 1e-3).abs() < 1e-6, "{gap}");
        let sum: f64 = solf.window.sz_profile(-40..=40).unwrap().iter().sum();
        assert!((sum - 0.5).abs() < 1e-6, "{sum}");
    }
}
