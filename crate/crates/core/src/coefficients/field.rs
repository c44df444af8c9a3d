use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::model::{CoefficientModel, FieldSpec};
use crate::ellipticity::ComplexMatrix;
use crate::error::{PellError, Result};
use crate::geometry::StripDomain;

/// Coefficients sampled on the nodes of a strip, with their global bounds.
#[derive(Clone)]
pub struct CoefficientField {
    pub model: Arc<dyn CoefficientModel>,
    pub a_nodes: Vec<ComplexMatrix>,
    pub b_nodes: Vec<Vec<Complex64>>,
    /// Global lower ellipticity bound (minimum over nodes).
    pub lambda: f64,
    /// Global upper bound (maximum spectral norm over nodes).
    pub upper: f64,
    /// Drift constant: `max_i |B_i(x)| delta(x)` over nodes with `delta > 0`.
    pub k_drift: f64,
    pub descriptor: String,
}

impl std::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientField")
            .field("lambda", &self.lambda)
            .field("upper", &self.upper)
            .field("k_drift", &self.k_drift)
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl CoefficientField {
    /// Samples `model` on every node and validates node-wise ellipticity.
    pub fn sample(domain: &StripDomain, model: Arc<dyn CoefficientModel>, descriptor: String) -> Result<Self> {
        if model.n() != domain.n() {
            return Err(PellError::Config(format!(
                "field dimension {} does not match domain dimension {}",
                model.n(),
                domain.n()
            )));
        }
        let samples: Vec<(ComplexMatrix, Vec<Complex64>, f64, f64)> = (0..domain.n_nodes())
            .into_par_iter()
            .map(|node| {
                let x = domain.node_coords(node);
                let a = model.a(x);
                let b = model.b(x);
                let lam = a.hermitian_min_eigenvalue();
                let up = a.spectral_norm();
                (a, b, lam, up)
            })
            .collect();
        let mut lambda = f64::INFINITY;
        let mut upper: f64 = 0.0;
        let mut k_drift: f64 = 0.0;
        let mut a_nodes = Vec::with_capacity(samples.len());
        let mut b_nodes = Vec::with_capacity(samples.len());
        for (node, (a, b, lam, up)) in samples.into_iter().enumerate() {
            if !(lam > 1e-9) {
                return Err(PellError::FieldNotElliptic { node, lambda: lam });
            }
            lambda = lambda.min(lam);
            upper = upper.max(up);
            let (layer, _) = domain.split(node);
            let d = domain.delta(layer);
            if d > 0.0 {
                let bmax = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if !bmax.is_finite() {
                    return Err(PellError::Config(format!("drift is not finite at node {node}")));
                }
                k_drift = k_drift.max(bmax * d);
            }
            a_nodes.push(a);
            b_nodes.push(b);
        }
        Ok(Self {
            model,
            a_nodes,
            b_nodes,
            lambda,
            upper,
            k_drift,
            descriptor,
        })
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    /// Whether `A00 = 1` and `Im A0j = 0` at every node.
    pub fn is_row_normalized(&self, tol: f64) -> bool {
        self.a_nodes.iter().all(|a| {
            (a.get(0, 0) - Complex64::new(1.0, 0.0)).norm() <= tol && (1..a.dim()).all(|j| a.im(0, j).abs() <= tol)
        })
    }

    /// One CSV row per node: coordinates then `Re`/`Im` of each `A` and `B` entry.
    pub fn to_csv(&self, domain: &StripDomain) -> String {
        let n = self.n();
        let mut s = String::from("node,x0,x1,x2");
        for i in 0..n {
            for j in 0..n {
                let _ = write!(s, ",re_a{i}{j},im_a{i}{j}");
            }
        }
        for i in 0..n {
            let _ = write!(s, ",re_b{i},im_b{i}");
        }
        s.push('\n');
        for (node, (a, b)) in self.a_nodes.iter().zip(&self.b_nodes).enumerate() {
            let x = domain.node_coords(node);
            let _ = write!(s, "{node},{},{},{}", x[0], x[1], x[2]);
            for z in a.entries() {
                let _ = write!(s, ",{},{}", z.re, z.im);
            }
            for z in b {
                let _ = write!(s, ",{},{}", z.re, z.im);
            }
            s.push('\n');
        }
        s
    }
}

/// Builds the model from its description and samples it on `domain`.
pub fn make_field(domain: &StripDomain, spec: &FieldSpec) -> Result<CoefficientField> {
    let model = spec.build(domain.n(), domain.period())?;
    let descriptor = serde_json::to_string(spec)?;
    CoefficientField::sample(domain, model, descriptor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_strip;
    use serde_json::json;

    #[test]
    fn constant_complex_field() {
        let d = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let spec = FieldSpec::Constant {
            a: json!([[[1, 1], [0, 0]], [[0, 0], [1, 1]]]),
            b: None,
        };
        let f = make_field(&d, &spec).unwrap();
        assert!((f.lambda - 1.0).abs() < 1e-12);
        assert!((f.upper - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(f.k_drift, 0.0);
    }

    #[test]
    fn block_field_is_normalized() {
        let d = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let spec = FieldSpec::Block {
            lateral: vec![vec![[1.0, 0.5]]],
            amplitude: 0.3,
            mode: 1,
        };
        let f = make_field(&d, &spec).unwrap();
        assert!(f.is_row_normalized(0.0));
        assert!(f.a_nodes.iter().all(|a| a.get(0, 1) == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn saturated_drift_has_k_half() {
        let d = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let spec = FieldSpec::Drift {
            base: None,
            kappa: vec![[0.5, 0.0], [0.0, 0.0]],
            offset: 0.0,
        };
        let f = make_field(&d, &spec).unwrap();
        assert!((f.k_drift - 0.5).abs() < 1e-14);
    }

    #[test]
    fn non_elliptic_generator_fails() {
        let d = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let spec = FieldSpec::TIndependent {
            base: json!([[1, 0], [0, 1]]),
            amplitude: 1.5,
            mode: 1,
            direction: None,
        };
        assert!(matches!(make_field(&d, &spec), Err(PellError::FieldNotElliptic { .. })));
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let d = build_strip(2, 1.0, 0.25, 1.0).unwrap();
        let f = make_field(
            &d,
            &FieldSpec::Constant {
                a: json!([[1, 0], [0, 1]]),
                b: None,
            },
        )
        .unwrap();
        assert_eq!(f.to_csv(&d).lines().count(), 1 + d.n_nodes());
    }
}
