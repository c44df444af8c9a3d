use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::Value;

use crate::error::{PellError, Result};

/// Dense complex `n x n` matrix, row-major.
///
/// Inner products follow `<a, b> = sum a_i conj(b_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(n: usize, entries: Vec<Complex64>) -> Result<Self> {
        if n < 2 {
            return Err(PellError::InvalidMatrix(format!("dimension {n} < 2")));
        }
        if entries.len() != n * n {
            return Err(PellError::InvalidMatrix(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PellError::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self { n, entries })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(n >= 2, "dimension must be at least 2");
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        Self { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, Complex64::new(1.0, 0.0))
    }

    pub fn scaled_identity(n: usize, c: Complex64) -> Self {
        Self::from_fn(n, |i, j| if i == j { c } else { Complex64::new(0.0, 0.0) })
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// `re + i * im` from two real row-major arrays.
    pub fn from_parts(n: usize, re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != n * n || im.len() != n * n {
            return Err(PellError::InvalidMatrix("part length mismatch".into()));
        }
        Self::new(
            n,
            re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        )
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.entries[i * self.n + j] = z;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn re(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).re
    }

    pub fn im(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).im
    }

    pub fn real_part(&self) -> ComplexMatrix {
        self.map(|z| Complex64::new(z.re, 0.0))
    }

    pub fn imag_part(&self) -> ComplexMatrix {
        self.map(|z| Complex64::new(z.im, 0.0))
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexMatrix {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> ComplexMatrix {
        self.map(|z| z * c)
    }

    pub fn transpose(&self) -> ComplexMatrix {
        Self::from_fn(self.n, |i, j| self.get(j, i))
    }

    /// Conjugate transpose `A*`.
    pub fn adjoint(&self) -> ComplexMatrix {
        Self::from_fn(self.n, |i, j| self.get(j, i).conj())
    }

    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, other.n);
        Self::from_fn(self.n, |i, j| {
            (0..self.n).map(|k| self.get(i, k) * other.get(k, j)).sum()
        })
    }

    pub fn apply(&self, xi: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * xi[j]).sum())
            .collect()
    }

    /// `<A xi, eta> = sum_i (A xi)_i conj(eta_i)`.
    pub fn sesquilinear(&self, xi: &[Complex64], eta: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.n {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..self.n {
                row += self.get(i, j) * xi[j];
            }
            acc += row * eta[i].conj();
        }
        acc
    }

    /// Bilinear pairing `<A xi, conj(xi)> = sum_ij A_ij xi_j xi_i`.
    pub fn bilinear(&self, xi: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.get(i, j) * xi[j] * xi[i];
            }
        }
        acc
    }

    /// `<M xi, xi>` for real `xi`, with `M` the real part (`imag = false`) or
    /// the imaginary part (`imag = true`).
    pub fn real_form(&self, xi: &[f64], imag: bool) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let z = self.get(i, j);
                acc += if imag { z.im } else { z.re } * xi[j] * xi[i];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest `|Im A_ij - Im A_ji|`.
    pub fn imag_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.im(i, j) - self.im(j, i)).abs());
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }

    /// Smallest eigenvalue of the Hermitian part `(A + A*)/2`, i.e. the
    /// exact minimum of `Re<A xi, xi>` on the unit sphere.
    pub fn hermitian_min_eigenvalue(&self) -> f64 {
        let n = self.n;
        let h = DMatrix::from_fn(n, n, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5);
        let eig = h.symmetric_eigenvalues();
        eig.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Spectral norm (largest singular value).
    pub fn spectral_norm(&self) -> f64 {
        let n = self.n;
        let m = DMatrix::from_fn(n, n, |i, j| self.get(i, j));
        m.singular_values().iter().cloned().fold(0.0, f64::max)
    }

    pub fn inverse(&self) -> Option<ComplexMatrix> {
        let n = self.n;
        let m = DMatrix::from_fn(n, n, |i, j| self.get(i, j));
        m.try_inverse()
            .map(|inv| Self::from_fn(n, |i, j| inv[(i, j)]))
    }

    /// Parses either a nested `[[[re, im], ...], ...]` array of rows, rows of
    /// plain real numbers, or a flat row-major array of `[re, im]` pairs.
    pub fn from_json(value: &Value) -> Result<Self> {
        let arr = value
            .as_array()
            .ok_or_else(|| PellError::InvalidMatrix("expected a JSON array".into()))?;
        let pair_rows = arr
            .first()
            .and_then(|row| row.as_array())
            .map(|row| row.first().map(|e| e.is_array()).unwrap_or(false))
            .unwrap_or(false);
        let number_rows = !arr.is_empty()
            && arr
                .iter()
                .all(|row| row.as_array().is_some_and(|r| r.len() == arr.len() && r.iter().all(|e| e.is_number())));
        let nested = pair_rows || number_rows;
        let flat: Vec<&Value> = if nested {
            let mut out = Vec::new();
            for row in arr {
                let row = row
                    .as_array()
                    .ok_or_else(|| PellError::InvalidMatrix("row is not an array".into()))?;
                if row.len() != arr.len() {
                    return Err(PellError::InvalidMatrix("matrix is not square".into()));
                }
                out.extend(row.iter());
            }
            out
        } else {
            arr.iter().collect()
        };
        let n = (flat.len() as f64).sqrt().round() as usize;
        if n * n != flat.len() {
            return Err(PellError::InvalidMatrix(format!(
                "{} entries do not form a square matrix",
                flat.len()
            )));
        }
        let entries = flat
            .into_iter()
            .map(parse_complex)
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, entries)
    }

    /// Nested rows of `[re, im]` pairs.
    pub fn to_json(&self) -> Value {
        Value::Array(
            (0..self.n)
                .map(|i| {
                    Value::Array(
                        (0..self.n)
                            .map(|j| {
                                let z = self.get(i, j);
                                serde_json::json!([z.re, z.im])
                            })
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

fn parse_complex(v: &Value) -> Result<Complex64> {
    if let Some(x) = v.as_f64() {
        return Ok(Complex64::new(x, 0.0));
    }
    match v.as_array().map(|a| a.as_slice()) {
        Some([re, im]) => match (re.as_f64(), im.as_f64()) {
            (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
            _ => Err(PellError::InvalidMatrix("entry is not numeric".into())),
        },
        _ => Err(PellError::InvalidMatrix(
            "entry must be a number or a [re, im] pair".into(),
        )),
    }
}

/// Splits a real vector of length `2n` into `alpha + i beta`.
pub(crate) fn to_complex(x: &[f64]) -> Vec<Complex64> {
    let n = x.len() / 2;
    (0..n).map(|k| Complex64::new(x[k], x[n + k])).collect()
}
