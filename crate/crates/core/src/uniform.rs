//! Translation-invariant MPS in mixed canonical form.

use faer::{c64, Mat, MatRef};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::dense::{
    frobenius, identity, inverse, real, sqrt_psd, thin_svd, trace, ComplexMatrix,
};
use crate::mps::MpsTensor;
use crate::transfer::{self, pair, Channel, FixedPoints, SpectralData};
use crate::window::Background;

/// `A_L C = C A_R = A_C`, with `A_L` left- and `A_R` right-isometric and `C` diagonal
/// and non-negative after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformMps {
    pub al: MpsTensor,
    pub ar: MpsTensor,
    pub c: ComplexMatrix,
    pub ac: MpsTensor,
    pub cell_dims: Vec<usize>,
}

impl UniformMps {
    /// Brings an arbitrary injective tensor into mixed canonical form.
    pub fn from_tensor(a: &MpsTensor, cell_dims: Vec<usize>, tol: f64) -> Result<Self> {
        if a.d() != cell_dims.iter().product::<usize>() {
            return Err(Error::Dimension(format!(
                "tensor with d={} for cell {cell_dims:?}",
                a.d()
            )));
        }
        let (lambda, fp) = transfer::fixed_points(a, tol)?;
        let a = a.scaled(real(1.0 / lambda.norm().sqrt()));
        let sign = if trace(fp.left.as_ref()).re < 0.0 { -1.0 } else { 1.0 };
        let l = sqrt_psd((&fp.left * faer::Scale(real(sign))).as_ref())?;
        let r = sqrt_psd((&fp.right * faer::Scale(real(sign))).as_ref())?;
        let al = a.left_mul(l.as_ref()).right_mul(inverse(l.as_ref())?.as_ref());
        let ar = a.left_mul(inverse(r.as_ref())?.as_ref()).right_mul(r.as_ref());
        let c = &l * &r;
        Self::from_parts(al, ar, c, cell_dims)
    }

    /// Rotates the bond basis so that `C` is diagonal with descending entries, then
    /// normalizes `C`.
    pub fn from_parts(al: MpsTensor, ar: MpsTensor, c: ComplexMatrix, cell_dims: Vec<usize>) -> Result<Self> {
        Self::from_parts_with_center(al, ar, c, None, cell_dims)
    }

    /// As [`Self::from_parts`] with an independently obtained `A_C`, which is rotated
    /// along and normalized instead of being recomputed as `A_L C`.
    pub fn from_parts_with_center(
        al: MpsTensor,
        ar: MpsTensor,
        c: ComplexMatrix,
        ac: Option<MpsTensor>,
        cell_dims: Vec<usize>,
    ) -> Result<Self> {
        let (u, s, v) = thin_svd(c.as_ref())?;
        let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("center matrix vanishes".into()));
        }
        let al = al.left_mul(u.adjoint().to_owned().as_ref()).right_mul(u.as_ref());
        let ar = ar.left_mul(v.adjoint().to_owned().as_ref()).right_mul(v.as_ref());
        let c = Mat::from_fn(s.len(), s.len(), |i, j| real(if i == j { s[i] / norm } else { 0.0 }));
        let ac = match ac {
            Some(x) => {
                let x = x.left_mul(u.adjoint().to_owned().as_ref()).right_mul(v.as_ref());
                let n = x.norm();
                x.scaled(real(1.0 / n))
            }
            None => al.right_mul(c.as_ref()),
        };
        Ok(Self {
            al,
            ar,
            c,
            ac,
            cell_dims,
        })
    }

    pub fn random(cell_dims: Vec<usize>, bond: usize, rng: &mut impl Rng, tol: f64) -> Result<Self> {
        let d = cell_dims.iter().product();
        let a = MpsTensor::random(d, bond, bond, rng);
        Self::from_tensor(&a, cell_dims, tol)
    }

    pub fn bond(&self) -> usize {
        self.c.nrows()
    }

    pub fn d(&self) -> usize {
        self.al.d()
    }

    pub fn schmidt_values(&self) -> Vec<f64> {
        (0..self.bond()).map(|i| self.c[(i, i)].re).collect()
    }

    pub fn left_channel(&self) -> Channel {
        Channel {
            tensor: self.al.clone(),
            fixed: FixedPoints {
                left: identity(self.bond()),
                right: &self.c * self.c.adjoint(),
            },
        }
    }

    pub fn right_channel(&self) -> Channel {
        Channel {
            tensor: self.ar.clone(),
            fixed: FixedPoints {
                left: self.c.adjoint() * &self.c,
                right: identity(self.bond()),
            },
        }
    }

    /// Mixed background, `A_L` left of a window and `A_R` right of it.
    pub fn background(&self) -> Result<Background> {
        Background::mixed(
            self.al.clone(),
            self.ar.clone(),
            self.c.as_ref(),
            self.cell_dims.clone(),
        )
    }

    /// Uniform background in the left gauge on both sides.
    pub fn left_gauge_background(&self) -> Result<Background> {
        let ch = self.left_channel();
        Background::symmetric(ch.tensor, ch.fixed, self.cell_dims.clone())
    }

    /// Largest deviation from the two isometry conditions.
    pub fn isometry_error(&self) -> f64 {
        let n = self.bond();
        let mut l = Mat::<c64>::zeros(n, n);
        let mut r = Mat::<c64>::zeros(n, n);
        for s in 0..self.d() {
            l += self.al.mat(s).adjoint() * self.al.mat(s);
            r += self.ar.mat(s) * self.ar.mat(s).adjoint();
        }
        let i = identity(n);
        frobenius((&l - &i).as_ref()).max(frobenius((&r - &i).as_ref()))
    }

    /// `max(|A_C - A_L C|, |A_C - C A_R|)`.
    pub fn gauge_error(&self) -> f64 {
        let lc = self.al.right_mul(self.c.as_ref());
        let cr = self.ar.left_mul(self.c.as_ref());
        let one = self.ac.add_scaled(real(-1.0), &lc).norm();
        let two = self.ac.add_scaled(real(-1.0), &cr).norm();
        one.max(two)
    }

    pub fn spectral_data(&self, m: usize) -> Result<SpectralData> {
        transfer::spectral_data(&transfer::transfer(&self.al, &self.al)?, m)
    }

    /// `-1 / ln |lambda_2|` in units of cells.
    pub fn correlation_length(&self) -> Result<f64> {
        Ok(self.spectral_data(4)?.xi)
    }

    /// Pair energy `(1|J_h^{A_L A_L}|C C^dagger)`.
    pub fn energy_per_cell(&self, h: MatRef<'_, c64>) -> Result<f64> {
        Ok(transfer::bond_energy(&self.left_channel(), h)?.re)
    }

    /// The same pair energy contracted as `A_C A_R` between identity environments.
    pub fn energy_per_cell_center(&self, h: MatRef<'_, c64>) -> Result<f64> {
        let j = transfer::operator_transfer(h, &self.ac, &self.ar, &self.ac, &self.ar)?;
        let n = self.bond();
        Ok(pair(identity(n).as_ref(), j.apply_right(identity(n).as_ref()).as_ref()).re)
    }

    /// `<O>` for an operator on one cell.
    pub fn cell_expectation(&self, op: MatRef<'_, c64>) -> Result<c64> {
        let j = transfer::site_operator_transfer(op, &self.ac, &self.ac)?;
        let n = self.bond();
        Ok(pair(identity(n).as_ref(), j.apply_right(identity(n).as_ref()).as_ref()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_state_is_in_mixed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = UniformMps::random(vec![2, 2], 6, &mut rng, 1e-12).unwrap();
        assert!(u.isometry_error() < 1e-10);
        assert!(u.gauge_error() < 1e-10);
        let s = u.schmidt_values();
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        assert!((s.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = UniformMps::random(vec![2, 2], 5, &mut rng, 1e-12).unwrap();
        let h = crate::model::Abahc::new(0.2, 0.0).unwrap().uniform_pair();
        let a = u.energy_per_cell(h.as_ref()).unwrap();
        let b = u.energy_per_cell_center(h.as_ref()).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} {b}");
    }

    #[test]
    fn aklt_tensor_round_trip() {
        let a = crate::aklt::bulk_tensor();
        let u = UniformMps::from_tensor(&a, vec![3], 1e-12).unwrap();
        let s = u.schmidt_values();
        assert!((s[0] - s[1]).abs() < 1e-12);
        let xi = u.correlation_length().unwrap();
        assert!((xi - 1.0 / 3f64.ln()).abs() < 1e-10);
        let spec = u.spectral_data(4).unwrap();
        assert!((spec.eigenvalues[1].norm() - 1.0 / 3.0).abs() < 1e-10);
        let c2 = &u.c * u.c.adjoint();
        assert!(max_abs((&c2 - identity(2) * faer::Scale(real(0.5))).as_ref()) < 1e-12);
    }
}
