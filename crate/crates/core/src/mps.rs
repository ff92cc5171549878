//! Rank-3 MPS tensors stored as one `D_l x D_r` matrix per physical index.

use faer::{c64, Mat, MatRef};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::dense::ComplexMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct MpsTensor {
    mats: Vec<ComplexMatrix>,
}

impl MpsTensor {
    pub fn new(mats: Vec<ComplexMatrix>) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::Dimension("tensor with zero physical dimension".into()))?;
        let (dl, dr) = (first.nrows(), first.ncols());
        if mats.iter().any(|m| m.nrows() != dl || m.ncols() != dr) {
            return Err(Error::Dimension(
                "physical components have different bond shapes".into(),
            ));
        }
        Ok(Self { mats })
    }

    pub fn zeros(d: usize, dl: usize, dr: usize) -> Self {
        Self {
            mats: (0..d).map(|_| Mat::zeros(dl, dr)).collect(),
        }
    }

    /// Complex Gaussian entries.
    pub fn random(d: usize, dl: usize, dr: usize, rng: &mut impl Rng) -> Self {
        let mats = (0..d)
            .map(|_| {
                Mat::from_fn(dl, dr, |_, _| {
                    c64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                })
            })
            .collect();
        Self { mats }
    }

    pub fn d(&self) -> usize {
        self.mats.len()
    }

    pub fn dl(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn dr(&self) -> usize {
        self.mats[0].ncols()
    }

    pub fn mat(&self, s: usize) -> MatRef<'_, c64> {
        self.mats[s].as_ref()
    }

    pub fn mats(&self) -> &[ComplexMatrix] {
        &self.mats
    }

    pub fn mats_mut(&mut self) -> &mut [ComplexMatrix] {
        &mut self.mats
    }

    pub fn into_mats(self) -> Vec<ComplexMatrix> {
        self.mats
    }

    /// `(d * D_l) x D_r` matrix with row index `s * D_l + a`.
    pub fn stacked_rows(&self) -> ComplexMatrix {
        let (dl, dr) = (self.dl(), self.dr());
        Mat::from_fn(self.d() * dl, dr, |i, j| self.mats[i / dl][(i % dl, j)])
    }

    pub fn from_stacked_rows(m: MatRef<'_, c64>, d: usize) -> Result<Self> {
        if d == 0 || m.nrows() % d != 0 {
            return Err(Error::Dimension(format!(
                "cannot split {} rows into {d} physical blocks",
                m.nrows()
            )));
        }
        let dl = m.nrows() / d;
        Self::new(
            (0..d)
                .map(|s| Mat::from_fn(dl, m.ncols(), |a, b| m[(s * dl + a, b)]))
                .collect(),
        )
    }

    /// `D_l x (d * D_r)` matrix with column index `s * D_r + b`.
    pub fn stacked_cols(&self) -> ComplexMatrix {
        let (dl, dr) = (self.dl(), self.dr());
        Mat::from_fn(dl, self.d() * dr, |i, j| self.mats[j / dr][(i, j % dr)])
    }

    pub fn from_stacked_cols(m: MatRef<'_, c64>, d: usize) -> Result<Self> {
        if d == 0 || m.ncols() % d != 0 {
            return Err(Error::Dimension(format!(
                "cannot split {} columns into {d} physical blocks",
                m.ncols()
            )));
        }
        let dr = m.ncols() / d;
        Self::new(
            (0..d)
                .map(|s| Mat::from_fn(m.nrows(), dr, |a, b| m[(a, s * dr + b)]))
                .collect(),
        )
    }

    /// `A^s -> M A^s`
    pub fn left_mul(&self, m: MatRef<'_, c64>) -> Self {
        Self {
            mats: self.mats.iter().map(|a| m * a).collect(),
        }
    }

    /// `A^s -> A^s M`
    pub fn right_mul(&self, m: MatRef<'_, c64>) -> Self {
        Self {
            mats: self.mats.iter().map(|a| a * m).collect(),
        }
    }

    pub fn scaled(&self, alpha: c64) -> Self {
        Self {
            mats: self.mats.iter().map(|a| a * faer::Scale(alpha)).collect(),
        }
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: c64, other: &Self) -> Self {
        Self {
            mats: self
                .mats
                .iter()
                .zip(&other.mats)
                .map(|(a, b)| a + b * faer::Scale(alpha))
                .collect(),
        }
    }

    /// Frobenius norm over all entries.
    pub fn norm(&self) -> f64 {
        self.mats
            .iter()
            .map(|m| m.norm_l2().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `sum_s Tr(A^s^dagger B^s)`
    pub fn inner(&self, other: &Self) -> c64 {
        self.mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| crate::linalg::dense::inner(a.as_ref(), b.as_ref()))
            .sum()
    }

    /// Fuses two neighbouring tensors into one with physical index `s_a * d_b + s_b`.
    pub fn block(a: &Self, b: &Self) -> Result<Self> {
        if a.dr() != b.dl() {
            return Err(Error::Dimension(format!(
                "cannot block tensors with bonds {} and {}",
                a.dr(),
                b.dl()
            )));
        }
        let mut mats = Vec::with_capacity(a.d() * b.d());
        for x in &a.mats {
            for y in &b.mats {
                mats.push(x * y);
            }
        }
        Ok(Self { mats })
    }

    /// Applies a one-body operator on the physical leg: `B^s = sum_t O[s, t] A^t`.
    pub fn apply_physical(&self, op: MatRef<'_, c64>) -> Result<Self> {
        if op.nrows() != self.d() || op.ncols() != self.d() {
            return Err(Error::Dimension(format!(
                "operator {}x{} on physical dimension {}",
                op.nrows(),
                op.ncols(),
                self.d()
            )));
        }
        let mats = (0..self.d())
            .map(|s| {
                let mut acc = Mat::<c64>::zeros(self.dl(), self.dr());
                for t in 0..self.d() {
                    let c = op[(s, t)];
                    if c != c64::new(0.0, 0.0) {
                        acc += &self.mats[t] * faer::Scale(c);
                    }
                }
                acc
            })
            .collect();
        Ok(Self { mats })
    }

    pub fn is_finite(&self) -> bool {
        self.mats
            .iter()
            .all(|m| m.as_ref().norm_max().is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stacking_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = MpsTensor::random(3, 4, 5, &mut rng);
        let r = MpsTensor::from_stacked_rows(a.stacked_rows().as_ref(), 3).unwrap();
        let c = MpsTensor::from_stacked_cols(a.stacked_cols().as_ref(), 3).unwrap();
        assert_eq!(r, a);
        assert_eq!(c, a);
    }

    #[test]
    fn block_multiplies_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = MpsTensor::random(2, 3, 4, &mut rng);
        let b = MpsTensor::random(3, 4, 2, &mut rng);
        let ab = MpsTensor::block(&a, &b).unwrap();
        assert_eq!(ab.d(), 6);
        let diff = ab.mat(1 * 3 + 2) - a.mat(1) * b.mat(2);
        assert!(max_abs(diff.as_ref()) < 1e-15);
    }

    #[test]
    fn shape_errors() {
        assert!(MpsTensor::new(vec![]).is_err());
        assert!(MpsTensor::new(vec![Mat::zeros(2, 2), Mat::zeros(2, 3)]).is_err());
        let a = MpsTensor::zeros(2, 2, 3);
        assert!(MpsTensor::block(&a, &a).is_err());
    }
}
