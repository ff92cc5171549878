//! Exact diagonalization of a periodic dimerized spin-1/2 ring in the `S^z = 0` sector.
//!
//! Independent of the crate: real arithmetic, bit-string basis, plain Lanczos with
//! full reorthogonalization and a Sturm-bisection tridiagonal solver.

use std::collections::HashMap;

pub struct Ring {
    pub sites: usize,
    /// `(i, j, J)` for every bond of the ring.
    pub bonds: Vec<(usize, usize, f64)>,
}

impl Ring {
    /// Bonds `1 + delta` on `(2k, 2k+1)` and `1 - delta` on `(2k+1, 2k+2)`.
    pub fn dimerized(sites: usize, delta: f64) -> Self {
        assert!(sites % 2 == 0);
        let bonds = (0..sites)
            .map(|i| {
                let j = if i % 2 == 0 { 1.0 + delta } else { 1.0 - delta };
                (i, (i + 1) % sites, j)
            })
            .collect();
        Self { sites, bonds }
    }

    fn basis(&self) -> Vec<u32> {
        (0u32..1 << self.sites)
            .filter(|s| s.count_ones() as usize == self.sites / 2)
            .collect()
    }

    fn apply(&self, states: &[u32], index: &HashMap<u32, usize>, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (k, &s) in states.iter().enumerate() {
            for &(i, j, c) in &self.bonds {
                let (bi, bj) = ((s >> i) & 1, (s >> j) & 1);
                if bi == bj {
                    y[k] += 0.25 * c * x[k];
                } else {
                    y[k] -= 0.25 * c * x[k];
                    let t = s ^ (1 << i) ^ (1 << j);
                    y[index[&t]] += 0.5 * c * x[k];
                }
            }
        }
    }

    pub fn ground_energy(&self, max_iter: usize) -> f64 {
        let states = self.basis();
        let index: HashMap<u32, usize> = states.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        let n = states.len();
        // deterministic pseudo-random start
        let mut seed = 0x9e37_79b9_7f4a_7c15u64;
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        normalize(&mut v);
        let mut basis: Vec<Vec<f64>> = vec![v];
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        let mut w = vec![0.0; n];
        let mut last = f64::INFINITY;
        for it in 0..max_iter.min(n) {
            self.apply(&states, &index, &basis[it], &mut w);
            let a = dot(&w, &basis[it]);
            alpha.push(a);
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            let b = dot(&w, &w).sqrt();
            let e = lowest_tridiagonal(&alpha, &beta);
            if (it >= 10 && (e - last).abs() < 1e-13) || b < 1e-12 {
                return e;
            }
            last = e;
            beta.push(b);
            let mut next = w.clone();
            next.iter_mut().for_each(|x| *x /= b);
            basis.push(next);
        }
        last
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Number of eigenvalues below `x` by the Sturm sequence.
fn count_below(a: &[f64], b: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = a[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for k in 1..a.len() {
        let denom = if q == 0.0 { 1e-300 } else { q };
        q = a[k] - x - b[k - 1] * b[k - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn lowest_tridiagonal(a: &[f64], b: &[f64]) -> f64 {
    let r = a
        .iter()
        .enumerate()
        .map(|(k, x)| x.abs() + b.get(k).map_or(0.0, |v| v.abs()) + if k > 0 { b[k - 1].abs() } else { 0.0 })
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (-r - 1.0, r + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(a, b, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
