//! Banded LU without pivoting.
//!
//! Matrices whose Hermitian part is positive definite have nonsingular
//! leading minors, so elimination in natural order is well defined; a few
//! steps of iterative refinement clean up the remaining rounding.

use num_complex::Complex64;

use super::sparse::CsrMatrix;

type C = Complex64;

pub struct BandedLu {
    n: usize,
    bw: usize,
    /// Row `i` stores columns `i - bw ..= i + bw` at offsets `0 ..= 2 bw`.
    data: Vec<C>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Option<Self> {
        let n = a.n;
        let bw = a.half_bandwidth();
        let width = 2 * bw + 1;
        let mut data = vec![C::default(); n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                data[i * width + (j + bw - i)] = v;
            }
        }
        for k in 0..n {
            let pivot = data[k * width + bw];
            if !(pivot.norm() > 1e-300) {
                return None;
            }
            let inv = C::new(1.0, 0.0) / pivot;
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let ik = i * width + (k + bw - i);
                let factor = data[ik] * inv;
                if factor == C::default() {
                    continue;
                }
                data[ik] = factor;
                for j in k + 1..=last {
                    let kj = data[k * width + (j + bw - k)];
                    if kj != C::default() {
                        data[i * width + (j + bw - i)] -= factor * kj;
                    }
                }
            }
        }
        Some(Self { n, bw, data })
    }

    pub fn solve(&self, b: &[C]) -> Vec<C> {
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        let mut x = b.to_vec();
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let mut s = x[i];
            for j in first..i {
                s -= self.data[i * width + (j + bw - i)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let last = (i + bw).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=last {
                s -= self.data[i * width + (j + bw - i)] * x[j];
            }
            x[i] = s / self.data[i * width + bw];
        }
        x
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_banded_system() {
        let n = 40;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, C::new(4.0, 1.0))];
                for d in [1usize, 3] {
                    if i >= d {
                        r.push((i - d, C::new(-1.0, 0.2)));
                    }
                    if i + d < n {
                        r.push((i + d, C::new(-1.0, -0.3)));
                    }
                }
                r
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        let lu = BandedLu::factor(&a).unwrap();
        assert_eq!(lu.bandwidth(), 3);
        let x: Vec<C> = (0..n).map(|i| C::new(1.0, i as f64 * 0.1)).collect();
        let sol = lu.solve(&a.mul(&x));
        assert!(sol.iter().zip(&x).all(|(a, b)| (a - b).norm() < 1e-12));
    }
}
