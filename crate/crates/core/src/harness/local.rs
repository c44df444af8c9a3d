//! Per-solution evaluations of the interior inequalities.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::balls::{ball_cells, ball_nodes, cell_mean, lp_average, Ball};
use super::report::Instance;
use crate::coefficients::{CoefficientField, CoefficientModel};
use crate::ellipticity::{p_range, ComplexMatrix, PRange, SphereSearch};
use crate::error::{PellError, Result};
use crate::estimators::{dissipative_test_gradient, p_energy_density, CellCache};
use crate::geometry::StripDomain;
use crate::solver::{CellSample, SolutionField};

type C = Complex64;

/// Worst-case exponent interval of a field, from up to `samples` nodes.
pub fn field_p_range(field: &CoefficientField, samples: usize) -> Result<PRange> {
    let search = SphereSearch::fast();
    let total = field.a_nodes.len();
    let step = (total / samples.max(1)).max(1);
    let mut seen: Vec<&ComplexMatrix> = Vec::new();
    let mut worst: Option<PRange> = None;
    for a in field.a_nodes.iter().step_by(step) {
        if seen.iter().any(|s| *s == a) {
            continue;
        }
        seen.push(a);
        let r = p_range(a, &search)?;
        worst = Some(match worst {
            None => r,
            Some(w) => PRange {
                p0: w.p0.max(r.p0),
                p0_prime: match (w.p0_prime, r.p0_prime) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, None) => x,
                    (None, y) => y,
                },
                mu: match (w.mu, r.mu) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, y) => x.or(y),
                },
                mu_degenerate: w.mu_degenerate && r.mu_degenerate,
                sign_checks_passed: w.sign_checks_passed && r.sign_checks_passed,
            },
        });
    }
    Ok(worst.expect("field has at least one node"))
}

/// Upper end of the reverse Hoelder exponent window, `p0' n / (n - 2)`;
/// infinite for `n = 2`.
pub fn reverse_holder_ceiling(range: &PRange, n: usize) -> f64 {
    if n == 2 {
        f64::INFINITY
    } else {
        range.upper() * n as f64 / (n as f64 - 2.0)
    }
}

pub fn check_exponent_window(p: f64, lo: f64, hi: f64) -> Result<()> {
    if p > lo && p < hi {
        Ok(())
    } else {
        Err(PellError::ExponentOutOfRange { p, lo, hi })
    }
}

/// Reverse Hoelder instances
/// `avg_p(B_r) <= C avg_q(B_2r) + eps avg_2(B_2r)` over the given balls.
pub fn reverse_holder_instances(u: &SolutionField, balls: &[Ball], p: f64, q: f64, eps: f64) -> Vec<Instance> {
    let d = &u.domain;
    let mesh = d.lateral_mesh();
    balls
        .iter()
        .filter(|b| b.fits(d, 4.0))
        .map(|b| {
            let inner = ball_nodes(d, b);
            let outer = ball_nodes(d, &b.scaled(2.0));
            let lhs = lp_average(u, &inner, p) - eps * lp_average(u, &outer, 2.0);
            let rhs = lp_average(u, &outer, q);
            Instance::new(ball_label(b), mesh, lhs.max(0.0), rhs)
        })
        .collect()
}

/// Caccioppoli instances
/// `r^2 avg_{B_r} |grad u|^2 |u|^{p-2} <= C avg_{B_2r} |u|^p + eps avg_{B_2r}(|u|^2)^{p/2}`.
pub fn caccioppoli_instances(
    u: &SolutionField,
    cells: &CellCache,
    balls: &[Ball],
    p: f64,
    eps: f64,
) -> Vec<Instance> {
    let d = &u.domain;
    let mesh = d.lateral_mesh();
    balls
        .iter()
        .filter(|b| b.radius < 0.25 * b.center[0] && b.fits(d, 2.0))
        .map(|b| {
            let inner = ball_cells(d, b);
            let outer = ball_nodes(d, &b.scaled(2.0));
            let energy = cell_mean(cells, &inner, |c| p_energy_density(c.value, c.grad_norm_sqr(), p));
            let lhs = b.radius * b.radius * energy - eps * lp_average(u, &outer, 2.0).powf(p);
            let rhs = lp_average(u, &outer, p).powf(p);
            Instance::new(ball_label(b), mesh, lhs.max(0.0), rhs)
        })
        .collect()
}

fn ball_label(b: &Ball) -> String {
    format!(
        "ball(x0={:.4},x1={:.4},x2={:.4},r={:.4})",
        b.center[0], b.center[1], b.center[2], b.radius
    )
}

/// Nonnegative bounded weights for the dissipativity integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Chi {
    One,
    /// `x0 zeta(x0 / r) zeta(|x' - y'| / 2r)` with `zeta(s) = (1 - s^2)_+^2`
    /// and `y'` the middle of the period cell.
    Cutoff { radius: f64 },
}

impl Chi {
    pub fn eval(&self, domain: &StripDomain, x: [f64; 3]) -> f64 {
        match *self {
            Chi::One => 1.0,
            Chi::Cutoff { radius } => {
                let zeta = |s: f64| if s < 1.0 { (1.0 - s * s).powi(2) } else { 0.0 };
                let mid = 0.5 * domain.period();
                let y = if domain.n() == 3 { [mid, mid] } else { [mid, 0.0] };
                let lat = domain.lateral_distance([x[1], x[2]], y);
                x[0] * zeta(x[0] / radius) * zeta(lat / (2.0 * radius))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Chi::One => "chi=1".into(),
            Chi::Cutoff { radius } => format!("chi=x0*cutoff(r={radius})"),
        }
    }
}

/// `Re <A grad u, grad(|u|^{p-2} u)>` and `|u|^{p-2} |grad u|^2` at one point.
pub fn dissipativity_integrands(a: &ComplexMatrix, value: C, grad: &[C], p: f64) -> (f64, f64) {
    let g2: f64 = grad.iter().map(|g| g.norm_sqr()).sum();
    let den = p_energy_density(value, g2, p);
    if den == 0.0 {
        return (0.0, 0.0);
    }
    let ag = a.apply(grad);
    let test = dissipative_test_gradient(value, grad, p);
    let num: f64 = ag.iter().zip(&test).map(|(x, y)| (x * y.conj()).re).sum();
    (num, den)
}

/// Integrals of both sides over the cells of a solved field.
pub fn dissipativity_sums(
    cells: &CellCache,
    domain: &StripDomain,
    model: &dyn CoefficientModel,
    p: f64,
    chi: &Chi,
) -> (f64, f64) {
    let n = domain.n();
    let mut num = 0.0;
    let mut den = 0.0;
    for c in &cells.samples {
        let x = cell_center(domain, c);
        let w = chi.eval(domain, x) * domain.cell_volume(c.layer);
        if w == 0.0 {
            continue;
        }
        let (a, b) = dissipativity_integrands(&model.a(x), c.value, &c.grad[..n], p);
        num += w * a;
        den += w * b;
    }
    (num, den)
}

pub fn cell_center(domain: &StripDomain, c: &CellSample) -> [f64; 3] {
    let [a, b] = domain.cell_center_lateral(c.lat);
    [domain.cell_center_x0(c.layer), a, b]
}

/// Result of minimizing the Rayleigh quotient over the synthetic family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdversarialResult {
    pub quotient: f64,
    pub twist: f64,
    pub amplitude: f64,
}

/// Minimizes the dissipativity quotient over the synthetic family
/// `u = exp((1 + i t) s sin(2 pi x1 / P)) x0 (h - x0)`, with analytic
/// gradients, on the cells of `domain` for a constant matrix.
pub fn adversarial_quotient(domain: &StripDomain, a: &ComplexMatrix, p: f64, chi: &Chi) -> AdversarialResult {
    let n = domain.n();
    let h = domain.h();
    let per = domain.period();
    let eval = |t: f64, s: f64| {
        let k = C::new(1.0, t) * s;
        let mut num = 0.0;
        let mut den = 0.0;
        for layer in 0..domain.n_layers() - 1 {
            let x0 = domain.cell_center_x0(layer);
            for lat in 0..domain.n_lateral() {
                let [x1, x2] = domain.cell_center_lateral(lat);
                let x = [x0, x1, x2];
                let w = chi.eval(domain, x) * domain.cell_volume(layer);
                if w == 0.0 {
                    continue;
                }
                let phase = (TAU * x1 / per).sin();
                let dphase = TAU / per * (TAU * x1 / per).cos();
                let e = (k * phase).exp();
                let env = x0 * (h - x0);
                let value = e * env;
                let mut grad = vec![C::default(); n];
                grad[0] = e * (h - 2.0 * x0);
                grad[1] = e * k * dphase * env;
                let (a_, b_) = dissipativity_integrands(a, value, &grad, p);
                num += w * a_;
                den += w * b_;
            }
        }
        num / den
    };
    let mut best = AdversarialResult {
        quotient: f64::INFINITY,
        twist: 0.0,
        amplitude: 0.0,
    };
    for s in [0.5, 1.0, 2.0] {
        for i in 0..=160 {
            let t = -8.0 + 0.1 * i as f64;
            let q = eval(t, s);
            if q < best.quotient {
                best = AdversarialResult {
                    quotient: q,
                    twist: t,
                    amplitude: s,
                };
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_strip;

    #[test]
    fn constant_passes_reverse_holder_with_one() {
        let d = build_strip(2, 1.0, 1.0 / 16.0, 1.0).unwrap();
        let u = SolutionField::from_fn(&d, |_| C::new(3.0, -1.0));
        let balls = [Ball {
            center: [0.5, 0.5, 0.0],
            radius: 0.1,
        }];
        let inst = reverse_holder_instances(&u, &balls, 4.0, 2.0, 0.0);
        assert_eq!(inst.len(), 1);
        assert!((inst[0].ratio() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p2_integrands_reduce_to_ellipticity() {
        let a = ComplexMatrix::scaled_identity(2, C::new(1.0, 1.0));
        let grad = [C::new(0.3, -0.2), C::new(0.1, 0.7)];
        let (num, den) = dissipativity_integrands(&a, C::new(0.5, 0.5), &grad, 2.0);
        let g2: f64 = grad.iter().map(|g| g.norm_sqr()).sum();
        assert!((num - g2).abs() < 1e-14);
        assert!((den - g2).abs() < 1e-14);
    }

    #[test]
    fn cutoff_is_supported_near_the_boundary() {
        let d = build_strip(2, 1.0, 1.0 / 16.0, 1.0).unwrap();
        let chi = Chi::Cutoff { radius: 0.25 };
        assert_eq!(chi.eval(&d, [0.3, 0.5, 0.0]), 0.0);
        assert!(chi.eval(&d, [0.1, 0.5, 0.0]) > 0.0);
        assert_eq!(chi.eval(&d, [0.1, 0.0, 0.0]), 0.0);
    }
}
