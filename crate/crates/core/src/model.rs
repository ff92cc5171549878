//! Nearest-cell Hamiltonians on a cell layout.
//!
//! A chain is split into cells of one or more sites. The Hamiltonian is written as a
//! sum of operators on neighbouring cell pairs; terms internal to a cell are shared
//! equally between the two pairs containing it.

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dense::{identity, real, ComplexMatrix};
use crate::spin;

pub trait PairModel: Send + Sync {
    /// Operator on all sites of two neighbouring cells, index `s_left * d_right + s_right`.
    fn pair_operator(&self, left: &[usize], right: &[usize]) -> Result<ComplexMatrix>;
}

/// `O_a O_b` on sites `a` and `b` of a product space.
pub fn two_site(oa: MatRef<'_, c64>, a: usize, ob: MatRef<'_, c64>, b: usize, dims: &[usize]) -> ComplexMatrix {
    spin::embed(oa, a, dims) * spin::embed(ob, b, dims)
}

/// `S_a . S_b`.
pub fn exchange(a: usize, b: usize, dims: &[usize]) -> ComplexMatrix {
    let sa = spin::vector(dims[a] - 1);
    let sb = spin::vector(dims[b] - 1);
    let n: usize = dims.iter().product();
    let mut out = Mat::<c64>::zeros(n, n);
    for k in 0..3 {
        out += two_site(sa[k].as_ref(), a, sb[k].as_ref(), b, dims);
    }
    out
}

/// `H = sum_i J_i S_i . S_{i+1} - h_z sum_i S^z_i` for spin-1/2 sites, with `J = 1 + |delta|`
/// on bonds inside a two-site cell and `1 - |delta|` between cells.
///
/// A one-site cell therefore sits between two weak bonds, which is the weak-weak
/// defect of the dimerized chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Abahc {
    pub delta: f64,
    pub hz: f64,
}

impl Abahc {
    pub fn new(delta: f64, hz: f64) -> Result<Self> {
        if !(delta.abs() <= 1.0) || !hz.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need |delta| <= 1 and finite field, got delta={delta}, hz={hz}"
            )));
        }
        Ok(Self { delta, hz })
    }

    pub fn strong(&self) -> f64 {
        1.0 + self.delta.abs()
    }

    pub fn weak(&self) -> f64 {
        1.0 - self.delta.abs()
    }

    /// Background cell of two sites.
    pub fn cell_dims() -> Vec<usize> {
        vec![2, 2]
    }

    /// Pair operator between two background cells.
    pub fn uniform_pair(&self) -> ComplexMatrix {
        self.pair_operator(&[2, 2], &[2, 2]).expect("fixed layout")
    }
}

impl PairModel for Abahc {
    fn pair_operator(&self, left: &[usize], right: &[usize]) -> Result<ComplexMatrix> {
        if left.is_empty() || right.is_empty() || left.iter().chain(right).any(|&d| d != 2) {
            return Err(Error::Dimension(format!(
                "spin-1/2 cells expected, got {left:?} and {right:?}"
            )));
        }
        if left.len() > 2 || right.len() > 2 {
            return Err(Error::Dimension("cells hold at most two sites".into()));
        }
        let dims: Vec<usize> = left.iter().chain(right).copied().collect();
        let n: usize = dims.iter().product();
        let nl = left.len();
        let mut h = Mat::<c64>::zeros(n, n);
        for (start, len) in [(0, nl), (nl, right.len())] {
            for k in start..start + len - 1 {
                h += exchange(k, k + 1, &dims) * faer::Scale(real(0.5 * self.strong()));
            }
        }
        h += exchange(nl - 1, nl, &dims) * faer::Scale(real(self.weak()));
        if self.hz != 0.0 {
            let sz = spin::sz(1);
            for k in 0..dims.len() {
                h -= spin::embed(sz.as_ref(), k, &dims) * faer::Scale(real(0.5 * self.hz));
            }
        }
        Ok(h)
    }
}

/// Pair operator built from a two-site bond term for chains of single-site cells,
/// with an optional different term next to one-site impurity cells of another spin.
#[derive(Clone, Debug)]
pub struct BondModel {
    /// `(d_left, d_right, operator)`.
    pub bonds: Vec<(usize, usize, ComplexMatrix)>,
}

impl PairModel for BondModel {
    fn pair_operator(&self, left: &[usize], right: &[usize]) -> Result<ComplexMatrix> {
        if left.len() != 1 || right.len() != 1 {
            return Err(Error::Dimension("bond models use one-site cells".into()));
        }
        self.bonds
            .iter()
            .find(|(a, b, _)| *a == left[0] && *b == right[0])
            .map(|(_, _, h)| h.clone())
            .ok_or_else(|| Error::InvalidArgument(format!("no bond term for dims {left:?}, {right:?}")))
    }
}

/// Total `S^z` on a cell of the given local dimensions.
pub fn cell_sz(dims: &[usize]) -> ComplexMatrix {
    let mut out = Mat::<c64>::zeros(dims.iter().product(), dims.iter().product());
    for (k, &d) in dims.iter().enumerate() {
        out += spin::embed(spin::sz(d - 1).as_ref(), k, dims);
    }
    out
}

pub fn shifted(h: &ComplexMatrix, e: f64) -> ComplexMatrix {
    h - identity(h.nrows()) * faer::Scale(real(e))
}
