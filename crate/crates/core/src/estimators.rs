//! Averages, nontangential maximal functions and square functions of a
//! discrete solution, evaluated on the boundary torus.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{ConeGeometry, ConeStencil, StripDomain};
use crate::solver::{CellSample, SolutionField};

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    /// `N~_{p,a}`: sup of the ball averages `w` over the cone.
    NtMaxAveraged,
    /// `N_a`: sup of `|u|` over the cone.
    NtMax,
    /// `S_{p,a}`.
    Square,
}

/// One value per boundary node, plus the parameters that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryFunction {
    pub kind: FunctionalKind,
    pub p: f64,
    pub aperture: f64,
    pub truncation: Option<f64>,
    pub values: Vec<f64>,
}

impl BoundaryFunction {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Pointwise `v -> v^e`.
    pub fn powf(&self, e: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v.powf(e)).collect(),
            ..self.clone()
        }
    }

    /// Boundary measure of `{pred(v)}`.
    pub fn measure_where(&self, domain: &StripDomain, pred: impl Fn(usize, f64) -> bool) -> f64 {
        let dm = domain.lateral_cell_measure();
        self.values
            .iter()
            .enumerate()
            .filter(|&(i, &v)| pred(i, v))
            .count() as f64
            * dm
    }

    pub fn to_csv(&self, domain: &StripDomain) -> String {
        let mut s = String::from("x1,x2,value\n");
        for (lat, v) in self.values.iter().enumerate() {
            let [a, b] = domain.lateral_coords(lat);
            s.push_str(&format!("{a},{b},{v}\n"));
        }
        s
    }
}

/// Discrete `L^q` norm on the boundary torus; `q = inf` gives the maximum.
pub fn lq_norm(bf: &BoundaryFunction, domain: &StripDomain, q: f64) -> f64 {
    assert!(q > 0.0, "q must be positive");
    if q.is_infinite() {
        return bf.max();
    }
    let dm = domain.lateral_cell_measure();
    (bf.values.iter().map(|v| v.abs().powf(q)).sum::<f64>() * dm).powf(1.0 / q)
}

/// Sum of a periodic sequence over the integer range `lo ..= hi`, counting
/// full wraps of the period.
fn periodic_sum(prefix: &[f64], lo: isize, hi: isize) -> f64 {
    let n = (prefix.len() - 1) as isize;
    let total = prefix[n as usize];
    let at = |k: isize| {
        // sum over indices 0 .. k (exclusive), extended periodically
        let wraps = k.div_euclid(n);
        let rem = k.rem_euclid(n) as usize;
        wraps as f64 * total + prefix[rem]
    };
    at(hi + 1) - at(lo)
}

/// `L^p` averages `w(x)` of `|u|` over the balls `B_{delta(x)/2}(x)`.
///
/// Nodes are weighted by their quadrature volume; points above `x0 = h`
/// count as zeros on a uniform continuation of the grid. Lateral extents
/// larger than the period wrap around (covering-space balls). At the
/// boundary layer the average degenerates to `|u|`.
pub fn averages_w(u: &SolutionField, p: f64) -> Vec<f64> {
    assert!(p > 0.0, "p must be positive");
    let d = &u.domain;
    let [s0, s1] = d.lateral_shape();
    let m = d.lateral_mesh();
    let x0 = d.x0_nodes();
    let top = d.n_layers() - 1;
    // prefix sums of |u|^p along lateral axis 0, per (layer, j)
    let rows: Vec<Vec<f64>> = (0..d.n_layers() * s1)
        .map(|r| {
            let (layer, j) = (r / s1, r % s1);
            let mut pre = vec![0.0; s0 + 1];
            for i in 0..s0 {
                let lat = d.lat_flat([i as isize, j as isize]);
                pre[i + 1] = pre[i] + u.at(layer, lat).norm().powf(p);
            }
            pre
        })
        .collect();
    let weight = |layer: usize| d.layer_weight(layer);
    (0..d.n_nodes())
        .into_par_iter()
        .map(|id| {
            let (layer, lat) = d.split(id);
            let here = x0[layer];
            if layer == 0 || here <= 0.0 {
                return u.u[id].norm();
            }
            let r = 0.5 * here;
            let [qi, qj] = d.lat_index(lat);
            let mut num = 0.0;
            let mut den = 0.0;
            let mut visit = |dx0: f64, wl: f64, layer: Option<usize>| {
                let rest = r * r - dx0 * dx0;
                if rest < 0.0 {
                    return;
                }
                let reach_j = if d.n() == 3 { (rest.sqrt() / m + 1e-9).floor() as isize } else { 0 };
                for dj in -reach_j..=reach_j {
                    let rest2 = rest - (dj as f64 * m).powi(2);
                    if rest2 < 0.0 {
                        continue;
                    }
                    let reach_i = (rest2.sqrt() / m + 1e-9).floor() as isize;
                    let count = (2 * reach_i + 1) as f64;
                    den += wl * count;
                    if let Some(l) = layer {
                        let j = (qj as isize + dj).rem_euclid(s1 as isize) as usize;
                        num += wl * periodic_sum(&rows[l * s1 + j], qi as isize - reach_i, qi as isize + reach_i);
                    }
                }
            };
            for (l, &y0) in x0.iter().enumerate() {
                if (y0 - here).abs() <= r {
                    visit(y0 - here, weight(l), Some(l));
                }
            }
            // zero continuation above the strip
            let step = d.mesh_x0();
            let mut y0 = x0[top] + step;
            while y0 - here <= r {
                visit(y0 - here, step, None);
                y0 += step;
            }
            (num / den).powf(1.0 / p)
        })
        .collect()
}

/// `N~_{p,a}` together with the plain `N_a`.
#[derive(Clone, Debug)]
pub struct NtMax {
    pub averaged: BoundaryFunction,
    pub plain: BoundaryFunction,
}

pub fn ntmax(u: &SolutionField, p: f64, cone: &ConeGeometry) -> NtMax {
    let w = averages_w(u, p);
    ntmax_from_w(u, &w, p, cone)
}

/// Same as [`ntmax`] with precomputed averages.
///
/// The supremum runs over interior cone nodes together with the boundary
/// vertex, whose value is the limit of the averages along the cone.
pub fn ntmax_from_w(u: &SolutionField, w: &[f64], p: f64, cone: &ConeGeometry) -> NtMax {
    let d = &u.domain;
    let stencil = ConeStencil::new(d, cone);
    let (tilde, plain): (Vec<f64>, Vec<f64>) = (0..d.n_lateral())
        .into_par_iter()
        .map(|q| {
            // the vertex itself carries the nontangential limit of both maximands
            let foot = d.node(0, q);
            stencil
                .nodes_at(d, q)
                .fold((w[foot], u.u[foot].norm()), |(a, b), id| (a.max(w[id]), b.max(u.u[id].norm())))
        })
        .unzip();
    let make = |kind, values| BoundaryFunction {
        kind,
        p,
        aperture: cone.aperture,
        truncation: cone.truncation,
        values,
    };
    NtMax {
        averaged: make(FunctionalKind::NtMaxAveraged, tilde),
        plain: make(FunctionalKind::NtMax, plain),
    }
}

/// Cell samples of a solution, computed once and shared by the square functions.
pub struct CellCache {
    pub samples: Vec<CellSample>,
    nlat: usize,
}

impl CellCache {
    pub fn new(u: &SolutionField) -> Self {
        let (nk, nlat) = u.domain.cell_shape();
        let samples = (0..nk * nlat).into_par_iter().map(|i| u.cell(i / nlat, i % nlat)).collect();
        Self { samples, nlat }
    }

    #[inline]
    pub fn get(&self, k: usize, lat: usize) -> &CellSample {
        &self.samples[k * self.nlat + lat]
    }
}

/// `|grad u|^2 |u|^{p-2}`, taken to be zero where the gradient vanishes.
/// Cells where `u` is exactly zero are a null set and are skipped.
#[inline]
pub fn p_energy_density(value: C, grad_norm_sqr: f64, p: f64) -> f64 {
    if grad_norm_sqr == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return grad_norm_sqr;
    }
    let a = value.norm();
    if a == 0.0 {
        return 0.0;
    }
    grad_norm_sqr * a.powf(p - 2.0)
}

pub fn square_function(u: &SolutionField, p: f64, cone: &ConeGeometry) -> BoundaryFunction {
    square_function_cached(u, &CellCache::new(u), p, cone)
}

pub fn square_function_cached(u: &SolutionField, cells: &CellCache, p: f64, cone: &ConeGeometry) -> BoundaryFunction {
    let d = &u.domain;
    let n = d.n() as i32;
    let stencil = ConeStencil::new(d, cone);
    let layer_factor: Vec<f64> = (0..d.n_layers() - 1)
        .map(|k| d.cell_center_x0(k).powi(2 - n) * d.cell_volume(k))
        .collect();
    let values = (0..d.n_lateral())
        .into_par_iter()
        .map(|q| {
            stencil
                .cells_at(d, q)
                .map(|(k, lat, mult)| {
                    let c = cells.get(k, lat);
                    mult * layer_factor[k] * p_energy_density(c.value, c.grad_norm_sqr(), p)
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    BoundaryFunction {
        kind: FunctionalKind::Square,
        p,
        aperture: cone.aperture,
        truncation: cone.truncation,
        values,
    }
}

/// Volume of the unit ball of `R^{n-1}`, the cone cross-section constant.
pub fn cross_section_constant(n: usize, aperture: f64) -> f64 {
    match n {
        2 => 2.0 * aperture,
        3 => std::f64::consts::PI * aperture * aperture,
        _ => panic!("unsupported dimension {n}"),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FubiniCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Continuum value of the ratio for an untruncated cone.
    pub expected: f64,
    /// Both sides vanish; the ratio is 1 by convention.
    pub degenerate: bool,
}

/// `||S_a(u)||_2^2 / int |grad u|^2 delta`.
pub fn fubini_identity_check(u: &SolutionField, aperture: f64) -> FubiniCheck {
    let cone = ConeGeometry::full(aperture);
    let s = square_function(u, 2.0, &cone);
    let lhs = lq_norm(&s, &u.domain, 2.0).powi(2);
    let rhs = u.weighted_energy();
    let expected = cross_section_constant(u.domain.n(), aperture);
    if rhs == 0.0 && lhs == 0.0 {
        return FubiniCheck {
            lhs,
            rhs,
            ratio: 1.0,
            expected,
            degenerate: true,
        };
    }
    FubiniCheck {
        lhs,
        rhs,
        ratio: lhs / rhs,
        expected,
        degenerate: false,
    }
}

/// Gradient of `|u|^{p/2 - 1} u` from the value and gradient of `u`.
pub fn power_gradient(value: C, grad: &[C], p: f64) -> Vec<C> {
    let s = 0.5 * p - 1.0;
    let a = value.norm();
    grad.iter()
        .map(|g| {
            let re = (value.conj() * g).re;
            a.powf(s) * g + s * a.powf(s - 2.0) * re * value
        })
        .collect()
}

/// `|u|^{p-4} (|u|^2 |grad u|^2 + ((p/2)^2 - 1) sum_k (Re <u, d_k u>)^2)`.
pub fn l28_expansion(value: C, grad: &[C], p: f64) -> f64 {
    let a2 = value.norm_sqr();
    let g2: f64 = grad.iter().map(|g| g.norm_sqr()).sum();
    let cross: f64 = grad.iter().map(|g| (value.conj() * g).re.powi(2)).sum();
    a2.powf(0.5 * p - 2.0) * (a2 * g2 + (0.25 * p * p - 1.0) * cross)
}

/// Gradient of `|u|^{p-2} u`, the test function of the dissipativity form.
pub fn dissipative_test_gradient(value: C, grad: &[C], p: f64) -> Vec<C> {
    let a = value.norm();
    grad.iter()
        .map(|g| {
            let re = (value.conj() * g).re;
            a.powf(p - 2.0) * g + (p - 2.0) * a.powf(p - 4.0) * re * value
        })
        .collect()
}

/// Level-set measures of the good-lambda inequality at one `nu`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GoodLambdaSets {
    pub nu: f64,
    /// `|{S#_{p,a} > nu, N~_b <= gamma nu}|`.
    pub lhs: f64,
    /// `|{S#_{p,b} > nu / 2}|`.
    pub rhs: f64,
}

/// Inputs to the good-lambda level-set counting, on a common boundary grid.
///
/// `s_a` and `s_b` are the square functions rescaled to degree one
/// (`S#_p = S_p^{2/p}`) so that they compare with `N~` at the same level.
pub struct GoodLambdaData<'a> {
    pub domain: &'a StripDomain,
    pub s_a: &'a BoundaryFunction,
    pub s_b: &'a BoundaryFunction,
    pub n_b: &'a BoundaryFunction,
    /// Restricts counting to a boundary ball, if set.
    pub window: Option<&'a [bool]>,
}

pub fn good_lambda_sets(data: &GoodLambdaData<'_>, nu: f64, gamma: f64) -> GoodLambdaSets {
    let inside = |i: usize| data.window.is_none_or(|w| w[i]);
    let lhs = data.s_a.measure_where(data.domain, |i, v| {
        inside(i) && v > nu && data.n_b.values[i] <= gamma * nu
    });
    let rhs = data.s_b.measure_where(data.domain, |i, v| inside(i) && v > 0.5 * nu);
    GoodLambdaSets { nu, lhs, rhs }
}

/// Threshold `nu_0 = (c * mean_{window} N_b^p)^{1/p}` above which the local
/// good-lambda inequality is asserted. `n_b` is the plain maximal function.
pub fn good_lambda_nu0(n_b: &BoundaryFunction, window: Option<&[bool]>, p: f64, c: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, v) in n_b.values.iter().enumerate() {
        if window.is_none_or(|w| w[i]) {
            sum += v.powf(p);
            count += 1;
        }
    }
    (c * sum / count.max(1) as f64).powf(1.0 / p)
}

/// Degree-one rescaling `S_p^{2/p}` of a square function.
pub fn homogenized(s: &BoundaryFunction) -> BoundaryFunction {
    s.powf(2.0 / s.p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_strip;

    #[test]
    fn periodic_sum_counts_wraps() {
        let pre = [0.0, 1.0, 3.0, 6.0];
        assert_eq!(periodic_sum(&pre, 0, 2), 6.0);
        assert_eq!(periodic_sum(&pre, -1, 1), 3.0 + 1.0 + 2.0);
        assert_eq!(periodic_sum(&pre, 0, 5), 12.0);
    }

    #[test]
    fn constant_averages() {
        let d = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let u = SolutionField::from_fn(&d, |_| C::new(0.6, 0.8));
        let w = averages_w(&u, 3.0);
        // balls that reach above the strip see the zero continuation
        for id in 0..d.n_nodes() {
            let x0 = d.node_coords(id)[0];
            if 1.5 * x0 <= 1.0 {
                assert!((w[id] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn square_function_of_constant_vanishes() {
        let d = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let u = SolutionField::from_fn(&d, |_| C::new(2.0, 0.0));
        let s = square_function(&u, 1.5, &ConeGeometry::full(1.0));
        assert!(s.values.iter().all(|v| *v == 0.0));
        assert!(fubini_identity_check(&u, 1.0).degenerate);
    }

    #[test]
    fn lq_of_half_indicator() {
        let d = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let values = (0..d.n_lateral()).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect();
        let bf = BoundaryFunction {
            kind: FunctionalKind::Square,
            p: 2.0,
            aperture: 1.0,
            truncation: None,
            values,
        };
        assert!((lq_norm(&bf, &d, 1.0) - 0.5).abs() < 1e-14);
    }
}
