//! Dense and block-tridiagonal solvers for the Newton systems of the ray finder.

use alloc::vec;
use alloc::vec::Vec;

use crate::vector::Mat2;

/// Solves `A x = b` in place by LU with partial pivoting. `a` is row major
/// `n x n`; returns `None` for a (numerically) singular matrix.
pub fn solve_dense(a: &mut [f64], n: usize, b: &mut [f64]) -> Option<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    if scale == 0.0 {
        return None;
    }
    for k in 0..n {
        let mut p = k;
        let mut best = libm::fabs(a[k * n + k]);
        for i in k + 1..n {
            let v = libm::fabs(a[i * n + k]);
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= scale * 1e-15 {
            return None;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let piv = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / piv;
            if f == 0.0 {
                continue;
            }
            a[i * n + k] = 0.0;
            for j in k + 1..n {
                a[i * n + j] -= f * a[k * n + j];
            }
            b[i] -= f * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k * n + j] * b[j];
        }
        b[k] = s / a[k * n + k];
    }
    Some(())
}

/// Symmetric block-tridiagonal matrix with 2x2 blocks.
#[derive(Clone, Debug)]
pub struct BlockTridiagonal {
    /// Diagonal blocks `A_ii`.
    pub diag: Vec<Mat2>,
    /// Super-diagonal blocks `A_{i,i+1}`; the sub-diagonal is their transpose.
    pub upper: Vec<Mat2>,
}

impl BlockTridiagonal {
    pub fn new(n: usize) -> Self {
        BlockTridiagonal { diag: vec![Mat2::ZERO; n], upper: vec![Mat2::ZERO; n.saturating_sub(1)] }
    }

    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = 2 * self.blocks();
        let mut a = vec![0.0; n * n];
        let mut put = |bi: usize, bj: usize, m: &Mat2| {
            for r in 0..2 {
                for c in 0..2 {
                    a[(2 * bi + r) * n + 2 * bj + c] = m.0[r][c];
                }
            }
        };
        for (i, d) in self.diag.iter().enumerate() {
            put(i, i, d);
        }
        for (i, u) in self.upper.iter().enumerate() {
            put(i, i + 1, u);
            put(i + 1, i, &u.transpose());
        }
        a
    }

    pub fn mul_vec(&self, x: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let n = self.blocks();
        let mut y = vec![[0.0; 2]; n];
        for i in 0..n {
            let d = self.diag[i].mul_vec(x[i]);
            y[i][0] += d[0];
            y[i][1] += d[1];
            if i + 1 < n {
                let u = self.upper[i].mul_vec(x[i + 1]);
                let l = self.upper[i].transpose().mul_vec(x[i]);
                y[i][0] += u[0];
                y[i][1] += u[1];
                y[i + 1][0] += l[0];
                y[i + 1][1] += l[1];
            }
        }
        y
    }

    /// Schur complements `S_i` of the block LDL^T factorization, or `None`
    /// when a pivot block is singular to working precision.
    fn pivots(&self) -> Option<Vec<Mat2>> {
        let n = self.blocks();
        let mut s = Vec::with_capacity(n);
        for i in 0..n {
            let mut si = self.diag[i];
            if i > 0 {
                let u = &self.upper[i - 1];
                let inv = pivot_inverse(&s[i - 1])?;
                si = si.sub(&u.transpose().matmul(&inv).matmul(u));
            }
            s.push(si);
        }
        pivot_inverse(&s[n - 1])?;
        Some(s)
    }

    /// Solves `A x = b`; block elimination with a dense pivoted fallback.
    pub fn solve(&self, b: &[[f64; 2]]) -> Option<Vec<[f64; 2]>> {
        let n = self.blocks();
        if let Some(s) = self.pivots() {
            let mut y: Vec<[f64; 2]> = b.to_vec();
            for i in 1..n {
                let w = self.upper[i - 1].transpose().matmul(&pivot_inverse(&s[i - 1])?);
                let wy = w.mul_vec(y[i - 1]);
                y[i][0] -= wy[0];
                y[i][1] -= wy[1];
            }
            let mut x = vec![[0.0; 2]; n];
            for i in (0..n).rev() {
                let mut r = y[i];
                if i + 1 < n {
                    let ux = self.upper[i].mul_vec(x[i + 1]);
                    r[0] -= ux[0];
                    r[1] -= ux[1];
                }
                x[i] = pivot_inverse(&s[i])?.mul_vec(r);
            }
            if x.iter().all(|v| v[0].is_finite() && v[1].is_finite()) {
                return Some(x);
            }
        }
        let dim = 2 * n;
        let mut a = self.to_dense();
        let mut rhs: Vec<f64> = b.iter().flat_map(|v| v.iter().copied()).collect();
        solve_dense(&mut a, dim, &mut rhs)?;
        Some(rhs.chunks(2).map(|c| [c[0], c[1]]).collect())
    }

    /// Number of negative eigenvalues, by Sylvester's law of inertia applied to
    /// the block LDL^T factorization. Also returns the smallest pivot
    /// eigenvalue magnitude relative to the largest diagonal entry.
    pub fn inertia(&self) -> Option<(usize, f64)> {
        let s = self.pivots()?;
        let scale = self
            .diag
            .iter()
            .fold(0.0f64, |m, d| m.max(libm::fabs(d.0[0][0])).max(libm::fabs(d.0[1][1])));
        let mut negative = 0;
        let mut smallest = f64::INFINITY;
        for p in &s {
            for e in p.symmetric_eigenvalues() {
                if e < 0.0 {
                    negative += 1;
                }
                smallest = smallest.min(libm::fabs(e));
            }
        }
        Some((negative, smallest / scale.max(f64::MIN_POSITIVE)))
    }
}

fn pivot_inverse(m: &Mat2) -> Option<Mat2> {
    let norm = libm::fabs(m.0[0][0]) + libm::fabs(m.0[0][1]) + libm::fabs(m.0[1][0]) + libm::fabs(m.0[1][1]);
    if libm::fabs(m.det()) <= 1e-14 * norm * norm {
        return None;
    }
    m.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> BlockTridiagonal {
        let mut t = BlockTridiagonal::new(n);
        for i in 0..n {
            let f = i as f64;
            t.diag[i] = Mat2::new(4.0 + f, 0.5, 0.5, 3.0 - 0.1 * f);
            if i + 1 < n {
                t.upper[i] = Mat2::new(-1.0, 0.2 * f, 0.3, -0.7);
            }
        }
        t
    }

    #[test]
    fn block_solve_matches_dense() {
        let t = sample(7);
        let b: Vec<[f64; 2]> = (0..7).map(|i| [i as f64 - 3.0, 1.0 / (1.0 + i as f64)]).collect();
        let x = t.solve(&b).unwrap();
        let r = t.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri[0] - bi[0]).abs() < 1e-12 && (ri[1] - bi[1]).abs() < 1e-12);
        }
        let mut a = t.to_dense();
        let mut rhs: Vec<f64> = b.iter().flat_map(|v| v.iter().copied()).collect();
        solve_dense(&mut a, 14, &mut rhs).unwrap();
        for (i, xi) in x.iter().enumerate() {
            assert!((xi[0] - rhs[2 * i]).abs() < 1e-12 && (xi[1] - rhs[2 * i + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_leading_pivot_falls_back() {
        let mut t = BlockTridiagonal::new(2);
        t.diag[0] = Mat2::ZERO;
        t.diag[1] = Mat2::identity();
        t.upper[0] = Mat2::identity();
        let x = t.solve(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        // [[0, I], [I, I]] x = b  =>  x1 = b0, x0 = b1 - b0.
        assert!((x[1][0] - 1.0).abs() < 1e-14 && (x[0][0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn inertia_counts_negative_directions() {
        let mut t = BlockTridiagonal::new(2);
        t.diag[0] = Mat2::new(2.0, 0.0, 0.0, -1.0);
        t.diag[1] = Mat2::new(3.0, 0.0, 0.0, 1.0);
        t.upper[0] = Mat2::new(0.5, 0.0, 0.0, 0.0);
        assert_eq!(t.inertia().unwrap().0, 1);
        assert!(solve_dense(&mut [0.0; 4], 2, &mut [1.0, 1.0]).is_none());
    }
}
