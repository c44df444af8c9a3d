//! Reduction to `A00 = 1` and a real first row.
//!
//! Dividing the equation by `A00` gives `A~ = alpha A`,
//! `B~_j = alpha B_j - sum_i (d_i alpha) A_ij` with `alpha = 1/A00`, and the
//! weak forms satisfy `B~(u, phi) = B(u, conj(alpha) phi)`. Afterwards each
//! `i g = i Im A~_0j` is moved from `A~_0j` to `A~_j0`, which costs the drift
//! terms `B~_j += i d0 g` and `B~_0 -= i dj g`.

use std::sync::Arc;

use num_complex::Complex64;

use super::field::CoefficientField;
use super::model::{fd_points, CoefficientModel};
use crate::ellipticity::ComplexMatrix;
use crate::error::{PellError, Result};
use crate::geometry::StripDomain;

/// Smallest admissible `|A00|`.
pub const A00_FLOOR: f64 = 1e-8;

pub struct NormalizedModel {
    pub base: Arc<dyn CoefficientModel>,
}

impl NormalizedModel {
    fn alpha(&self, x: [f64; 3]) -> Complex64 {
        Complex64::new(1.0, 0.0) / self.base.a(x).get(0, 0)
    }

    fn d_alpha(&self, x: [f64; 3], k: usize) -> Complex64 {
        let a00 = self.base.a(x).get(0, 0);
        -self.base.da(x, k).get(0, 0) / (a00 * a00)
    }

    /// Rescaled matrix `alpha A` (before the swap).
    fn scaled(&self, x: [f64; 3]) -> ComplexMatrix {
        self.base.a(x).scale(self.alpha(x))
    }

    /// `g_j = Im (alpha A)_0j` and its derivative along `k`.
    fn d_g(&self, x: [f64; 3], j: usize, k: usize) -> f64 {
        let (lo, hi, w) = fd_points(x, k);
        (self.scaled(hi).im(0, j) - self.scaled(lo).im(0, j)) / w
    }

    /// The drift added by the normalization (`B~ - alpha B`).
    pub fn remainder(&self, x: [f64; 3]) -> Vec<Complex64> {
        let n = self.base.n();
        let a = self.base.a(x);
        let mut r: Vec<Complex64> = (0..n)
            .map(|j| -(0..n).map(|i| self.d_alpha(x, i) * a.get(i, j)).sum::<Complex64>())
            .collect();
        let i = Complex64::new(0.0, 1.0);
        for j in 1..n {
            r[j] += i * self.d_g(x, j, 0);
            r[0] -= i * self.d_g(x, j, j);
        }
        r
    }
}

impl CoefficientModel for NormalizedModel {
    fn n(&self) -> usize {
        self.base.n()
    }

    fn a(&self, x: [f64; 3]) -> ComplexMatrix {
        let mut a = self.scaled(x);
        a.set(0, 0, Complex64::new(1.0, 0.0));
        for j in 1..a.dim() {
            let g = a.im(0, j);
            let z = a.get(0, j);
            a.set(0, j, Complex64::new(z.re, 0.0));
            let w = a.get(j, 0);
            a.set(j, 0, w + Complex64::new(0.0, g));
        }
        a
    }

    fn b(&self, x: [f64; 3]) -> Vec<Complex64> {
        let alpha = self.alpha(x);
        self.base
            .b(x)
            .into_iter()
            .zip(self.remainder(x))
            .map(|(b, r)| alpha * b + r)
            .collect()
    }

    fn is_constant(&self) -> bool {
        self.base.is_constant()
    }
}

#[derive(Debug)]
pub struct Normalization {
    pub field: CoefficientField,
    /// Largest modulus of the added drift over the nodes.
    pub remainder_max: f64,
    /// Set when the input already had `A00 = 1` and a real first row.
    pub identity: bool,
    pub warnings: Vec<String>,
}

/// Rewrites `field` so that `A00 = 1` and `Im A0j = 0`.
pub fn normalize_first_row(field: &CoefficientField, domain: &StripDomain) -> Result<Normalization> {
    let min_a00 = field
        .a_nodes
        .iter()
        .map(|a| a.get(0, 0).norm())
        .fold(f64::INFINITY, f64::min);
    if !(min_a00 > A00_FLOOR) {
        return Err(PellError::A00NearZero(min_a00));
    }
    if field.is_row_normalized(0.0) {
        return Ok(Normalization {
            field: field.clone(),
            remainder_max: 0.0,
            identity: true,
            warnings: vec![],
        });
    }
    let model = Arc::new(NormalizedModel {
        base: field.model.clone(),
    });
    let remainder_max = (0..domain.n_nodes())
        .map(|id| {
            model
                .remainder(domain.node_coords(id))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let mut warnings = Vec::new();
    let sampled = CoefficientField::sample(domain, model, format!("normalized({})", field.descriptor))?;
    if sampled.lambda < 0.5 * field.lambda / field.upper.max(1.0) {
        warnings.push(format!(
            "rescaling reduced the ellipticity bound from {:.3e} to {:.3e}; p-ellipticity may not be preserved",
            field.lambda, sampled.lambda
        ));
    }
    Ok(Normalization {
        field: sampled,
        remainder_max,
        identity: false,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{make_field, FieldSpec};
    use crate::geometry::build_strip;
    use serde_json::json;

    #[test]
    fn normalized_field_is_identity() {
        let d = build_strip(2, 1.0, 0.25, 1.0).unwrap();
        let f = make_field(
            &d,
            &FieldSpec::Block {
                lateral: vec![vec![[2.0, 1.0]]],
                amplitude: 0.0,
                mode: 1,
            },
        )
        .unwrap();
        let nf = normalize_first_row(&f, &d).unwrap();
        assert!(nf.identity);
    }

    #[test]
    fn constant_a00_rescales() {
        let d = build_strip(2, 1.0, 0.25, 1.0).unwrap();
        let f = make_field(
            &d,
            &FieldSpec::Constant {
                a: json!([[2, 0], [0, 2]]),
                b: Some(vec![[1.0, 0.0], [0.0, 1.0]]),
            },
        )
        .unwrap();
        let nf = normalize_first_row(&f, &d).unwrap();
        let a = &nf.field.a_nodes[5];
        assert!((a.get(1, 1) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let b = &nf.field.b_nodes[5];
        assert!((b[0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((b[1] - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        assert!(nf.field.is_row_normalized(1e-15));
    }

    #[test]
    fn zero_a00_is_rejected() {
        let d = build_strip(2, 1.0, 0.25, 1.0).unwrap();
        let mut f = make_field(
            &d,
            &FieldSpec::Constant {
                a: json!([[1, 0], [0, 1]]),
                b: None,
            },
        )
        .unwrap();
        f.a_nodes[3].set(0, 0, Complex64::new(1e-12, 0.0));
        assert!(matches!(normalize_first_row(&f, &d), Err(PellError::A00NearZero(_))));
    }
}
