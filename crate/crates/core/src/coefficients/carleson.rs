use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::CoefficientField;
use crate::geometry::{DyadicTentSystem, StripDomain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarlesonKind {
    /// `sup [|grad A|^2 + |B|^2] delta`.
    Mu,
    /// `sup [sum_j |d0 A0j|^2 + |sum_j dj A0j|^2 + |B|^2] delta`.
    MuPrime,
    /// A density supplied directly.
    Raw,
}

#[derive(Clone, Debug)]
pub struct CarlesonDensity {
    pub kind: CarlesonKind,
    /// Value per node (zero on the boundary layer).
    pub values: Vec<f64>,
}

impl CarlesonDensity {
    pub fn from_fn(domain: &StripDomain, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..domain.n_nodes())
            .map(|id| {
                let v = f(domain.node_coords(id));
                assert!(v >= 0.0 && v.is_finite(), "density must be finite and nonnegative");
                v
            })
            .collect();
        Self {
            kind: CarlesonKind::Raw,
            values,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            kind: self.kind,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// Grid derivative of a node quantity along axis `k` (centered, one-sided at
/// the bottom and top layers, periodic laterally).
fn grid_derivative<T, F>(domain: &StripDomain, node: usize, k: usize, f: &F) -> T
where
    F: Fn(usize) -> T,
    T: std::ops::Sub<Output = T> + std::ops::Div<f64, Output = T>,
{
    let (layer, lat) = domain.split(node);
    if k == 0 {
        let last = domain.n_layers() - 1;
        let (lo, hi) = match layer {
            0 => (0, 1),
            l if l == last => (last - 1, last),
            l => (l - 1, l + 1),
        };
        let w = domain.x0(hi) - domain.x0(lo);
        (f(domain.node(hi, lat)) - f(domain.node(lo, lat))) / w
    } else {
        let plus = domain.lateral_shift(lat, k - 1, 1);
        let minus = domain.lateral_shift(lat, k - 1, -1);
        (f(domain.node(layer, plus)) - f(domain.node(layer, minus))) / (2.0 * domain.lateral_mesh())
    }
}

fn pointwise(field: &CoefficientField, domain: &StripDomain, kind: CarlesonKind) -> Vec<f64> {
    let n = domain.n();
    (0..domain.n_nodes())
        .into_par_iter()
        .map(|node| {
            let b2: f64 = field.b_nodes[node].iter().map(|z| z.norm_sqr()).sum();
            let entry = |i: usize, j: usize| move |id: usize| field.a_nodes[id].get(i, j);
            match kind {
                CarlesonKind::Mu => {
                    let mut g = 0.0;
                    for k in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                g += grid_derivative(domain, node, k, &entry(i, j)).norm_sqr();
                            }
                        }
                    }
                    g + b2
                }
                CarlesonKind::MuPrime => {
                    let mut g = 0.0;
                    let mut div = num_complex::Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        g += grid_derivative(domain, node, 0, &entry(0, j)).norm_sqr();
                        div += grid_derivative(domain, node, j, &entry(0, j));
                    }
                    g + div.norm_sqr() + b2
                }
                CarlesonKind::Raw => unreachable!("raw densities are supplied directly"),
            }
        })
        .collect()
}

/// Supremum of a node quantity over `B_{delta(x)/2}(x)`, times `delta(x)`.
pub fn whitney_sup(domain: &StripDomain, g: &[f64]) -> Vec<f64> {
    let m = domain.lateral_mesh();
    let nl = domain.nl() as isize;
    let half_diag = 0.5 * domain.period() * ((domain.n() - 1) as f64).sqrt();
    let layer_max: Vec<f64> = (0..domain.n_layers())
        .map(|l| {
            (0..domain.n_lateral())
                .map(|lat| g[domain.node(l, lat)])
                .fold(0.0, f64::max)
        })
        .collect();
    (0..domain.n_nodes())
        .into_par_iter()
        .map(|node| {
            let (layer, lat) = domain.split(node);
            let x0 = domain.x0(layer);
            if x0 <= 0.0 {
                return 0.0;
            }
            let r = 0.5 * x0;
            let [qi, qj] = domain.lat_index(lat);
            let mut sup: f64 = 0.0;
            for l in 0..domain.n_layers() {
                let dz = domain.x0(l) - x0;
                if dz.abs() >= r {
                    continue;
                }
                let rr = (r * r - dz * dz).sqrt();
                if rr > half_diag {
                    sup = sup.max(layer_max[l]);
                    continue;
                }
                let reach = ((rr / m).ceil() as isize).min(nl / 2);
                let second = if domain.n() == 3 { reach } else { 0 };
                for i in -reach..=reach {
                    for j in -second..=second {
                        let d = domain.periodic_disp([i as f64 * m, j as f64 * m], [0.0, 0.0]);
                        if dz * dz + d[0] * d[0] + d[1] * d[1] < r * r {
                            let id = domain.node(l, domain.lat_flat([qi as isize + i, qj as isize + j]));
                            sup = sup.max(g[id]);
                        }
                    }
                }
            }
            sup * x0
        })
        .collect()
}

pub fn carleson_density(field: &CoefficientField, domain: &StripDomain, kind: CarlesonKind) -> CarlesonDensity {
    let g = pointwise(field, domain, kind);
    CarlesonDensity {
        kind,
        values: whitney_sup(domain, &g),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelRatio {
    pub radius: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub norm: f64,
    pub levels: Vec<LevelRatio>,
    /// Least-squares slope of `log max_ratio` against `log radius`.
    pub growth_exponent: Option<f64>,
    /// Set when the ratio grows faster than any bounded density allows.
    pub not_carleson: bool,
}

/// Growth exponent above which the ratios are flagged.
pub const GROWTH_THRESHOLD: f64 = 1.5;

/// `max_T mu(T) / sigma(Delta)` over the tent system, by node quadrature.
pub fn carleson_norm(density: &CarlesonDensity, domain: &StripDomain, tents: &DyadicTentSystem) -> CarlesonReport {
    let ratios: Vec<(usize, f64, f64)> = tents
        .tents
        .par_iter()
        .map(|t| {
            let mass: f64 = t
                .nodes
                .iter()
                .map(|&id| density.values[id] * domain.node_volume(domain.split(id).0))
                .sum();
            (t.level, t.radius, mass / t.sigma)
        })
        .collect();
    let mut levels: Vec<LevelRatio> = Vec::new();
    for k in 0..tents.levels {
        let mut it = ratios.iter().filter(|r| r.0 == k).peekable();
        if let Some(&&(_, radius, _)) = it.peek() {
            let max_ratio = it.map(|r| r.2).fold(0.0, f64::max);
            levels.push(LevelRatio { radius, max_ratio });
        }
    }
    let norm = levels.iter().map(|l| l.max_ratio).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .filter(|l| l.max_ratio > 0.0)
        .map(|l| (l.radius.ln(), l.max_ratio.ln()))
        .collect();
    let growth_exponent = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    CarlesonReport {
        norm,
        levels,
        growth_exponent,
        not_carleson: growth_exponent.is_some_and(|s| s > GROWTH_THRESHOLD),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{make_field, FieldSpec};
    use crate::geometry::{build_strip, dyadic_tents};
    use serde_json::json;

    #[test]
    fn constant_field_has_zero_density() {
        let d = build_strip(2, 1.0, 1.0 / 16.0, 1.0).unwrap();
        let f = make_field(
            &d,
            &FieldSpec::Constant {
                a: json!([[[1, 1], [0, 0]], [[0, 0], [1, 1]]]),
                b: None,
            },
        )
        .unwrap();
        let dens = carleson_density(&f, &d, CarlesonKind::Mu);
        assert!(dens.values.iter().all(|&v| v == 0.0));
        let rep = carleson_norm(&dens, &d, &dyadic_tents(&d, 4));
        assert_eq!(rep.norm, 0.0);
        assert!(!rep.not_carleson);
    }

    #[test]
    fn linear_growth_density() {
        let d = build_strip(2, 1.0, 1.0 / 16.0, 1.0).unwrap();
        let spec = FieldSpec::Formula {
            a: vec![
                ["1 + 0.1 * x0".into(), "0".into()],
                ["0".into(), "0".into()],
                ["0".into(), "0".into()],
                ["1 + 0.1 * x0".into(), "0".into()],
            ],
            b: vec![],
        };
        let f = make_field(&d, &spec).unwrap();
        let dens = carleson_density(&f, &d, CarlesonKind::Mu);
        for id in 0..d.n_nodes() {
            let x0 = d.node_coords(id)[0];
            // Frobenius norm of 0.1 I is 0.02 in two dimensions
            assert!((dens.values[id] - 0.02 * x0).abs() < 1e-10);
        }
    }

    #[test]
    fn block_field_mu_prime_sees_only_drift() {
        let d = build_strip(2, 1.0, 1.0 / 16.0, 1.0).unwrap();
        let f = make_field(
            &d,
            &FieldSpec::Block {
                lateral: vec![vec![[1.0, 0.5]]],
                amplitude: 0.3,
                mode: 1,
            },
        )
        .unwrap();
        let mu_p = carleson_density(&f, &d, CarlesonKind::MuPrime);
        assert!(mu_p.values.iter().all(|&v| v == 0.0));
        let mu = carleson_density(&f, &d, CarlesonKind::Mu);
        assert!(mu.values.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn growth_detector_flags_x0_density() {
        let d = build_strip(2, 1.0, 1.0 / 64.0, 1.0).unwrap();
        let tents = dyadic_tents(&d, 5);
        let lin = carleson_norm(&CarlesonDensity::from_fn(&d, |x| x[0]), &d, &tents);
        assert!(lin.not_carleson, "{lin:?}");
        let flat = carleson_norm(&CarlesonDensity::from_fn(&d, |x| if x[0] > 0.0 { 1.0 } else { 0.0 }), &d, &tents);
        assert!(!flat.not_carleson, "{flat:?}");
    }
}
