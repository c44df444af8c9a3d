//! Complex CSR matrices, ILU(0) and restarted GMRES.

use num_complex::Complex64;

type C = Complex64;

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<C>,
}

impl CsrMatrix {
    /// Builds from per-row entry lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, C)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> C {
        self.row(i).find(|e| e.0 == j).map(|e| e.1).unwrap_or_default()
    }

    pub fn matvec(&self, x: &[C], y: &mut [C]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = C::default();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[C]) -> Vec<C> {
        let mut y = vec![C::default(); self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Largest `|i - j|` over stored entries.
    pub fn half_bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

pub fn norm2(x: &[C]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Incomplete LU with the sparsity pattern of the matrix.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Option<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.cols[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return None;
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.cols[k]] = k;
            }
            for k in start..end {
                let j = lu.cols[k];
                if j >= i {
                    break;
                }
                let pivot = lu.vals[diag[j]];
                if pivot.norm() == 0.0 {
                    return None;
                }
                let factor = lu.vals[k] / pivot;
                lu.vals[k] = factor;
                for kk in diag[j] + 1..lu.row_ptr[j + 1] {
                    let c = lu.cols[kk];
                    if pos[c] != usize::MAX && pos[c] >= start && pos[c] < end {
                        let v = lu.vals[kk];
                        lu.vals[pos[c]] -= factor * v;
                    }
                }
            }
            for k in start..end {
                pos[lu.cols[k]] = usize::MAX;
            }
            if lu.vals[diag[i]].norm() == 0.0 {
                return None;
            }
        }
        Some(Self { lu, diag })
    }

    pub fn apply(&self, r: &[C], z: &mut [C]) {
        let lu = &self.lu;
        let n = lu.n;
        for i in 0..n {
            let mut s = r[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s / lu.vals[self.diag[i]];
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<C>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Right-preconditioned restarted GMRES. The residual is measured relative
/// to `|b|` with the true (unpreconditioned) residual at each restart.
pub fn gmres(
    a: &CsrMatrix,
    b: &[C],
    x0: Option<&[C]>,
    precond: Option<&Ilu0>,
    restart: usize,
    tol: f64,
    max_iter: usize,
) -> GmresOutcome {
    let n = a.n;
    let bnorm = norm2(b).max(1e-300);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![C::default(); n]);
    let m = restart.max(1);
    let mut total = 0usize;
    let mut tmp = vec![C::default(); n];
    let apply_m = |v: &[C], out: &mut [C]| match precond {
        Some(p) => p.apply(v, out),
        None => out.copy_from_slice(v),
    };
    loop {
        a.matvec(&x, &mut tmp);
        let r: Vec<C> = b.iter().zip(&tmp).map(|(b, ax)| b - ax).collect();
        let beta = norm2(&r);
        if beta / bnorm < tol || total >= max_iter {
            return GmresOutcome {
                x,
                iterations: total,
                relative_residual: beta / bnorm,
                converged: beta / bnorm < tol,
            };
        }
        let mut v: Vec<Vec<C>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h = vec![vec![C::default(); m]; m + 1];
        let mut cs = vec![C::default(); m];
        let mut sn = vec![C::default(); m];
        let mut g = vec![C::default(); m + 1];
        g[0] = C::new(beta, 0.0);
        let mut z = vec![C::default(); n];
        let mut k_used = 0;
        for j in 0..m {
            apply_m(&v[j], &mut z);
            let mut w = a.mul(&z);
            for i in 0..=j {
                let hij: C = w.iter().zip(&v[i]).map(|(w, vi)| vi.conj() * w).sum();
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= hij * vk;
                }
            }
            let hn = norm2(&w);
            h[j + 1][j] = C::new(hn, 0.0);
            for i in 0..j {
                let t = cs[i].conj() * h[i][j] + sn[i].conj() * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let (a1, b1) = (h[j][j], h[j + 1][j]);
            let d = (a1.norm_sqr() + b1.norm_sqr()).sqrt();
            if d == 0.0 {
                cs[j] = C::new(1.0, 0.0);
                sn[j] = C::default();
            } else {
                cs[j] = a1 / d;
                sn[j] = b1 / d;
            }
            h[j][j] = C::new(d, 0.0);
            h[j + 1][j] = C::default();
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j].conj() * g[j];
            total += 1;
            k_used = j + 1;
            if g[j + 1].norm() / bnorm < tol * 0.5 || hn == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|z| z / hn).collect());
        }
        let mut y = vec![C::default(); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in i + 1..k_used {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![C::default(); n];
        for (i, yi) in y.iter().enumerate() {
            for (u, vi) in update.iter_mut().zip(&v[i]) {
                *u += yi * vi;
            }
        }
        apply_m(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, C::new(2.5, 0.3))];
                if i > 0 {
                    r.push((i - 1, C::new(-1.0, 0.1)));
                }
                if i + 1 < n {
                    r.push((i + 1, C::new(-1.0, -0.2)));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_rows(vec![vec![(0, C::new(1.0, 0.0)), (0, C::new(2.0, 0.0))]]);
        assert_eq!(m.get(0, 0), C::new(3.0, 0.0));
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn ilu0_is_exact_for_tridiagonal() {
        let a = tridiag(50);
        let ilu = Ilu0::new(&a).unwrap();
        let x: Vec<C> = (0..50).map(|i| C::new(i as f64, 1.0)).collect();
        let b = a.mul(&x);
        let mut z = vec![C::default(); 50];
        ilu.apply(&b, &mut z);
        assert!(z.iter().zip(&x).all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn gmres_converges_without_preconditioner() {
        let a = tridiag(200);
        let b: Vec<C> = (0..200).map(|i| C::new((i as f64).sin(), 0.5)).collect();
        let out = gmres(&a, &b, None, None, 30, 1e-12, 2000);
        assert!(out.converged);
        let r: Vec<C> = a.mul(&out.x).iter().zip(&b).map(|(ax, b)| ax - b).collect();
        assert!(norm2(&r) / norm2(&b) < 1e-11);
    }
}
