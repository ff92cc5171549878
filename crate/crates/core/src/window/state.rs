//! Uniform background with a finite window of replaced tensors.

use std::sync::Arc;

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::dense::{identity, real, ComplexMatrix};
use crate::mps::MpsTensor;
use crate::spin;
use crate::transfer::{self, pair, Channel, FixedPoints};

/// Background tensors in mixed gauge: `left` fills every cell left of the window,
/// `right` every cell to its right.
#[derive(Clone, Debug)]
pub struct Background {
    pub left: Channel,
    pub right: Channel,
    /// Local dimensions of the sites in one background cell.
    pub cell_dims: Vec<usize>,
}

impl Background {
    /// Same tensor on both sides, e.g. an exact state with known fixed points.
    pub fn symmetric(a: MpsTensor, fixed: FixedPoints, cell_dims: Vec<usize>) -> Result<Self> {
        check_dims(&a, &cell_dims)?;
        let ch = Channel { tensor: a, fixed };
        Ok(Self {
            left: ch.clone(),
            right: ch,
            cell_dims,
        })
    }

    /// Mixed gauge from a left-isometric `al`, right-isometric `ar` and center matrix `c`.
    pub fn mixed(al: MpsTensor, ar: MpsTensor, c: MatRef<'_, c64>, cell_dims: Vec<usize>) -> Result<Self> {
        check_dims(&al, &cell_dims)?;
        check_dims(&ar, &cell_dims)?;
        let n = c.nrows();
        let left = Channel {
            tensor: al,
            fixed: FixedPoints {
                left: identity(n),
                right: c * c.adjoint(),
            },
        };
        let right = Channel {
            tensor: ar,
            fixed: FixedPoints {
                left: c.adjoint() * c,
                right: identity(n),
            },
        };
        Ok(Self {
            left,
            right,
            cell_dims,
        })
    }

    pub fn bond(&self) -> usize {
        self.left.tensor.dr()
    }

    fn same_as(&self, other: &Self) -> bool {
        self.left.tensor == other.left.tensor
            && self.right.tensor == other.right.tensor
            && self.cell_dims == other.cell_dims
    }
}

fn check_dims(t: &MpsTensor, dims: &[usize]) -> Result<()> {
    if dims.iter().product::<usize>() != t.d() {
        return Err(Error::Dimension(format!(
            "tensor with d={} does not match local dimensions {dims:?}",
            t.d()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct WindowMps {
    pub background: Arc<Background>,
    pub tensors: Vec<MpsTensor>,
    /// Local site dimensions of each window tensor.
    pub dims: Vec<Vec<usize>>,
    /// Cell index of the first window tensor.
    pub offset: isize,
    /// Global index of the first physical site of the window.
    pub origin: isize,
}

/// One cell of a padded contraction range.
struct Slot<'a> {
    tensor: &'a MpsTensor,
    dims: &'a [usize],
    first_site: isize,
}

impl WindowMps {
    pub fn new(
        background: Arc<Background>,
        tensors: Vec<MpsTensor>,
        dims: Vec<Vec<usize>>,
        offset: isize,
        origin: isize,
    ) -> Result<Self> {
        if tensors.is_empty() || tensors.len() != dims.len() {
            return Err(Error::Dimension(format!(
                "window of {} tensors with {} dimension lists",
                tensors.len(),
                dims.len()
            )));
        }
        for (t, d) in tensors.iter().zip(&dims) {
            check_dims(t, d)?;
        }
        let bond = background.bond();
        if tensors[0].dl() != bond || tensors[tensors.len() - 1].dr() != bond {
            return Err(Error::Dimension("window bonds do not match the background".into()));
        }
        for w in tensors.windows(2) {
            if w[0].dr() != w[1].dl() {
                return Err(Error::Dimension("inconsistent bonds inside the window".into()));
            }
        }
        Ok(Self {
            background,
            tensors,
            dims,
            offset,
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Cell index of the last window tensor.
    pub fn end(&self) -> isize {
        self.offset + self.tensors.len() as isize - 1
    }

    pub fn window_sites(&self) -> usize {
        self.dims.iter().map(Vec::len).sum()
    }

    /// Global index of the first site of a cell.
    pub fn cell_first_site(&self, cell: isize) -> isize {
        let ncell = self.background.cell_dims.len() as isize;
        if cell < self.offset {
            self.origin - (self.offset - cell) * ncell
        } else if cell > self.end() {
            self.origin + self.window_sites() as isize + (cell - self.end() - 1) * ncell
        } else {
            let k = (cell - self.offset) as usize;
            self.origin + self.dims[..k].iter().map(Vec::len).sum::<usize>() as isize
        }
    }

    /// Cell containing a global site.
    pub fn cell_of_site(&self, site: isize) -> isize {
        let ncell = self.background.cell_dims.len() as isize;
        if site < self.origin {
            self.offset - (self.origin - site + ncell - 1) / ncell
        } else if site >= self.origin + self.window_sites() as isize {
            self.end() + 1 + (site - self.origin - self.window_sites() as isize) / ncell
        } else {
            let mut s = self.origin;
            for (k, d) in self.dims.iter().enumerate() {
                if site < s + d.len() as isize {
                    return self.offset + k as isize;
                }
                s += d.len() as isize;
            }
            unreachable!()
        }
    }

    /// Tensor occupying a cell, from the window or the background.
    pub fn cell_tensor(&self, cell: isize) -> &MpsTensor {
        self.slot(cell).tensor
    }

    /// Local site dimensions of a cell.
    pub fn cell_dims(&self, cell: isize) -> &[usize] {
        self.slot(cell).dims
    }

    fn slot(&self, cell: isize) -> Slot<'_> {
        let bg = &self.background;
        let (tensor, dims) = if cell < self.offset {
            (&bg.left.tensor, bg.cell_dims.as_slice())
        } else if cell > self.end() {
            (&bg.right.tensor, bg.cell_dims.as_slice())
        } else {
            let k = (cell - self.offset) as usize;
            (&self.tensors[k], self.dims[k].as_slice())
        };
        Slot {
            tensor,
            dims,
            first_site: self.cell_first_site(cell),
        }
    }

    /// `<self|self>` by transfer contraction through the window.
    pub fn norm_sq(&self) -> f64 {
        self.overlap_unchecked(self).re
    }

    /// Rescales the middle window tensor so that `<self|self> = 1`.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm_sq();
        let k = self.tensors.len() / 2;
        self.tensors[k] = self.tensors[k].scaled(real(1.0 / n.sqrt()));
        n
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if !(Arc::ptr_eq(&self.background, &other.background)
            || self.background.same_as(&other.background))
        {
            return Err(Error::InvalidArgument(
                "windows live on different backgrounds".into(),
            ));
        }
        let lo = self.offset.min(other.offset);
        let hi = self.end().max(other.end());
        for c in lo..=hi {
            let (a, b) = (self.slot(c), other.slot(c));
            if a.dims != b.dims || a.first_site != b.first_site {
                return Err(Error::InvalidArgument(format!(
                    "windows disagree on the layout of cell {c}"
                )));
            }
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Self) -> Result<c64> {
        self.check_compatible(other)?;
        Ok(self.overlap_unchecked(other))
    }

    fn overlap_unchecked(&self, other: &Self) -> c64 {
        let lo = self.offset.min(other.offset);
        let hi = self.end().max(other.end());
        let bg = &self.background;
        let mut l = bg.left.fixed.left.clone();
        for c in lo..=hi {
            let t = transfer::transfer(self.slot(c).tensor, other.slot(c).tensor).expect("layout checked");
            l = t.apply_left(l.as_ref());
        }
        pair(l.as_ref(), bg.right.fixed.right.as_ref())
    }

    /// Left environments `L[c]` (everything left of cell `c`) and right environments
    /// `R[c]` (cell `c` and everything right of it) over cells `lo..=hi+1`, for the
    /// transition element `<bra| . |ket>`.
    fn environments(bra: &Self, ket: &Self, lo: isize, hi: isize) -> (Vec<ComplexMatrix>, Vec<ComplexMatrix>) {
        let n = (hi - lo + 1) as usize;
        let bg = &ket.background;
        let mut left = Vec::with_capacity(n + 1);
        left.push(bg.left.fixed.left.clone());
        for k in 0..n {
            let c = lo + k as isize;
            let t = transfer::transfer(bra.slot(c).tensor, ket.slot(c).tensor).expect("layout checked");
            let next = t.apply_left(left[k].as_ref());
            left.push(next);
        }
        let mut right = vec![Mat::<c64>::zeros(0, 0); n + 1];
        right[n] = bg.right.fixed.right.clone();
        for k in (0..n).rev() {
            let c = lo + k as isize;
            let t = transfer::transfer(bra.slot(c).tensor, ket.slot(c).tensor).expect("layout checked");
            right[k] = t.apply_right(right[k + 1].as_ref());
        }
        (left, right)
    }

    /// `<bra|O_i|ket>` for every site `i` in `sites`, with `op(d)` the operator on a
    /// site of local dimension `d`. Not divided by any norm.
    pub fn transition_profile(
        bra: &Self,
        ket: &Self,
        op: &dyn Fn(usize) -> ComplexMatrix,
        sites: std::ops::RangeInclusive<isize>,
    ) -> Result<Vec<c64>> {
        bra.check_compatible(ket)?;
        let lo = ket
            .cell_of_site(*sites.start())
            .min(ket.offset)
            .min(bra.offset);
        let hi = ket.cell_of_site(*sites.end()).max(ket.end()).max(bra.end());
        let (left, right) = Self::environments(bra, ket, lo, hi);
        let mut out = Vec::new();
        for site in sites {
            let c = ket.cell_of_site(site);
            let k = (c - lo) as usize;
            let (ks, bs) = (ket.slot(c), bra.slot(c));
            let q = (site - ks.first_site) as usize;
            let local = op(ks.dims[q]);
            let full = spin::embed(local.as_ref(), q, ks.dims);
            let j = transfer::site_operator_transfer(full.as_ref(), ks.tensor, bs.tensor)?;
            out.push(pair(left[k].as_ref(), j.apply_right(right[k + 1].as_ref()).as_ref()));
        }
        Ok(out)
    }

    /// Normalized `<O_i>` over a site range.
    pub fn profile(
        &self,
        op: &dyn Fn(usize) -> ComplexMatrix,
        sites: std::ops::RangeInclusive<isize>,
    ) -> Result<Vec<f64>> {
        let n = self.norm_sq();
        Ok(Self::transition_profile(self, self, op, sites)?
            .into_iter()
            .map(|v| v.re / n)
            .collect())
    }

    /// `<S^z_i>` over a site range.
    pub fn sz_profile(&self, sites: std::ops::RangeInclusive<isize>) -> Result<Vec<f64>> {
        self.profile(&|d| spin::sz(d - 1), sites)
    }

    /// `<bra|h_{c,c+1}|ket>` for an operator on all sites of cells `c` and `c+1`.
    pub fn transition_cell_pair(bra: &Self, ket: &Self, h: MatRef<'_, c64>, cell: isize) -> Result<c64> {
        bra.check_compatible(ket)?;
        let lo = cell.min(ket.offset).min(bra.offset);
        let hi = (cell + 1).max(ket.end()).max(bra.end());
        let (left, right) = Self::environments(bra, ket, lo, hi);
        let k = (cell - lo) as usize;
        let (x, y) = (ket.slot(cell).tensor, ket.slot(cell + 1).tensor);
        let (xp, yp) = (bra.slot(cell).tensor, bra.slot(cell + 1).tensor);
        let j = transfer::operator_transfer(h, x, y, xp, yp)?;
        Ok(pair(left[k].as_ref(), j.apply_right(right[k + 2].as_ref()).as_ref()))
    }

    /// The same state with `left` and `right` background cells moved into the window.
    pub fn padded(&self, left: usize, right: usize) -> Self {
        let bg = &self.background;
        let mut tensors = vec![bg.left.tensor.clone(); left];
        tensors.extend(self.tensors.iter().cloned());
        tensors.extend(std::iter::repeat_n(bg.right.tensor.clone(), right));
        let mut dims = vec![bg.cell_dims.clone(); left];
        dims.extend(self.dims.iter().cloned());
        dims.extend(std::iter::repeat_n(bg.cell_dims.clone(), right));
        let ncell = bg.cell_dims.len() as isize;
        Self {
            background: bg.clone(),
            tensors,
            dims,
            offset: self.offset - left as isize,
            origin: self.origin - left as isize * ncell,
        }
    }

    pub fn tensor_norms(&self) -> Vec<f64> {
        self.tensors.iter().map(MpsTensor::norm).collect()
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
