//! Spin operators in the `S^z` eigenbasis ordered `m = S, S-1, ..., -S`.

use faer::{c64, Mat, MatRef};

use crate::linalg::dense::{cplx, identity, kron, real, ComplexMatrix};

/// `2S + 1` for `two_s = 2S`.
pub fn dim(two_s: usize) -> usize {
    two_s + 1
}

fn m_of(two_s: usize, i: usize) -> f64 {
    (two_s as f64 - 2.0 * i as f64) / 2.0
}

pub fn sz(two_s: usize) -> ComplexMatrix {
    let n = dim(two_s);
    Mat::from_fn(n, n, |i, j| if i == j { real(m_of(two_s, i)) } else { real(0.0) })
}

/// Raising operator: `<m+1|S^+|m> = sqrt(S(S+1) - m(m+1))`.
pub fn splus(two_s: usize) -> ComplexMatrix {
    let n = dim(two_s);
    let s = two_s as f64 / 2.0;
    Mat::from_fn(n, n, |i, j| {
        if j == i + 1 {
            let m = m_of(two_s, j);
            real((s * (s + 1.0) - m * (m + 1.0)).sqrt())
        } else {
            real(0.0)
        }
    })
}

pub fn sminus(two_s: usize) -> ComplexMatrix {
    splus(two_s).adjoint().to_owned()
}

pub fn sx(two_s: usize) -> ComplexMatrix {
    (splus(two_s) + sminus(two_s)) * faer::Scale(real(0.5))
}

pub fn sy(two_s: usize) -> ComplexMatrix {
    (splus(two_s) - sminus(two_s)) * faer::Scale(cplx(0.0, -0.5))
}

/// `(S^x, S^y, S^z)`.
pub fn vector(two_s: usize) -> [ComplexMatrix; 3] {
    [sx(two_s), sy(two_s), sz(two_s)]
}

/// Two-site `S_1 . S_2` with index `s_1 * d_2 + s_2`.
pub fn heisenberg(two_s1: usize, two_s2: usize) -> ComplexMatrix {
    let a = vector(two_s1);
    let b = vector(two_s2);
    let mut out = Mat::<c64>::zeros(dim(two_s1) * dim(two_s2), dim(two_s1) * dim(two_s2));
    for k in 0..3 {
        out += kron(a[k].as_ref(), b[k].as_ref());
    }
    out
}

/// Projector onto total spin 2 of two spin-1 sites, the AKLT bond term.
pub fn aklt_projector() -> ComplexMatrix {
    let ss = heisenberg(2, 2);
    let ss2 = &ss * &ss;
    ss * faer::Scale(real(0.5)) + ss2 * faer::Scale(real(1.0 / 6.0)) + identity(9) * faer::Scale(real(1.0 / 3.0))
}

/// `O` acting on site `k` of a product space with local dimensions `dims`.
pub fn embed(op: MatRef<'_, c64>, k: usize, dims: &[usize]) -> ComplexMatrix {
    let mut out = identity(1);
    for (i, &d) in dims.iter().enumerate() {
        out = if i == k {
            kron(out.as_ref(), op)
        } else {
            kron(out.as_ref(), identity(d).as_ref())
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{hermitian_eig, max_abs};

    #[test]
    fn commutation_relations() {
        for two_s in 1..=3 {
            let [x, y, z] = vector(two_s);
            let comm = &x * &y - &y * &x;
            let expect = &z * faer::Scale(cplx(0.0, 1.0));
            assert!(max_abs((&comm - &expect).as_ref()) < 1e-14);
            let s = two_s as f64 / 2.0;
            let casimir = &x * &x + &y * &y + &z * &z;
            let expect = identity(dim(two_s)) * faer::Scale(real(s * (s + 1.0)));
            assert!(max_abs((&casimir - &expect).as_ref()) < 1e-13);
        }
    }

    #[test]
    fn singlet_energy() {
        let (v, _) = hermitian_eig(heisenberg(1, 1).as_ref()).unwrap();
        assert!((v[0] + 0.75).abs() < 1e-14);
        assert!((v[3] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn aklt_projector_rank_five() {
        let p = aklt_projector();
        let (v, _) = hermitian_eig(p.as_ref()).unwrap();
        let ones = v.iter().filter(|x| (*x - 1.0).abs() < 1e-12).count();
        let zeros = v.iter().filter(|x| x.abs() < 1e-12).count();
        assert_eq!((ones, zeros), (5, 4));
    }
}
