//! Lipschitz graph domains `{x0 > phi(x')}` and the mollified pullback
//! `rho(y0, y') = (y0 + (P_{gamma y0} * phi)(y'), y')` onto the flat strip.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::strip::StripDomain;
use crate::ellipticity::ComplexMatrix;
use crate::error::{PellError, Result};

/// Boundary profile `phi` on the lateral torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Flat,
    Constant { c: f64 },
    /// `c + slope . x'`; not periodic, used for shear checks.
    Linear { c: f64, slope: Vec<f64> },
    /// `amplitude (1 - |x' - center|^2 / radius^2)^3_+` with periodic distance.
    Bump { amplitude: f64, center: Vec<f64>, radius: f64 },
    /// `amplitude cos(2 pi mode x'_1 / period)`.
    Fourier { amplitude: f64, mode: u32 },
    /// Samples on the lateral grid, interpolated piecewise linearly.
    Sampled { values: Vec<f64> },
}

/// `max_s |d/ds (1 - s^2)^3|`, attained at `s = 1/sqrt 5`.
const BUMP_SLOPE: f64 = 1.717_300_071_380_894_3;

impl Profile {
    pub fn value(&self, domain: &StripDomain, x: [f64; 2]) -> f64 {
        match self {
            Profile::Flat => 0.0,
            Profile::Constant { c } => *c,
            Profile::Linear { c, slope } => {
                c + slope.first().copied().unwrap_or(0.0) * x[0]
                    + slope.get(1).copied().unwrap_or(0.0) * x[1]
            }
            Profile::Bump {
                amplitude,
                center,
                radius,
            } => {
                let c = [center.first().copied().unwrap_or(0.0), center.get(1).copied().unwrap_or(0.0)];
                let d = domain.lateral_distance(x, c) / radius;
                if d >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - d * d).powi(3)
                }
            }
            Profile::Fourier { amplitude, mode } => {
                let k = std::f64::consts::TAU * *mode as f64 / domain.period();
                amplitude * (k * x[0]).cos()
            }
            Profile::Sampled { values } => sampled(domain, values, x).0,
        }
    }

    pub fn gradient(&self, domain: &StripDomain, x: [f64; 2]) -> [f64; 2] {
        match self {
            Profile::Flat | Profile::Constant { .. } => [0.0, 0.0],
            Profile::Linear { slope, .. } => [
                slope.first().copied().unwrap_or(0.0),
                if domain.n() == 3 { slope.get(1).copied().unwrap_or(0.0) } else { 0.0 },
            ],
            Profile::Bump {
                amplitude,
                center,
                radius,
            } => {
                let c = [center.first().copied().unwrap_or(0.0), center.get(1).copied().unwrap_or(0.0)];
                let disp = domain.periodic_disp(x, c);
                let s2 = (disp[0] * disp[0] + disp[1] * disp[1]) / (radius * radius);
                if s2 >= 1.0 {
                    [0.0, 0.0]
                } else {
                    let g = -6.0 * amplitude * (1.0 - s2).powi(2) / (radius * radius);
                    [g * disp[0], g * disp[1]]
                }
            }
            Profile::Fourier { amplitude, mode } => {
                let k = std::f64::consts::TAU * *mode as f64 / domain.period();
                [-amplitude * k * (k * x[0]).sin(), 0.0]
            }
            Profile::Sampled { values } => sampled(domain, values, x).1,
        }
    }

    /// Analytic Lipschitz bound.
    pub fn lipschitz_bound(&self, domain: &StripDomain) -> f64 {
        match self {
            Profile::Flat | Profile::Constant { .. } => 0.0,
            Profile::Linear { .. } => {
                let g = self.gradient(domain, [0.0, 0.0]);
                (g[0] * g[0] + g[1] * g[1]).sqrt()
            }
            Profile::Bump { amplitude, radius, .. } => amplitude.abs() * BUMP_SLOPE / radius,
            Profile::Fourier { amplitude, mode } => {
                amplitude.abs() * std::f64::consts::TAU * *mode as f64 / domain.period()
            }
            Profile::Sampled { .. } => discrete_lipschitz(self, domain),
        }
    }

    pub fn is_periodic(&self) -> bool {
        !matches!(self, Profile::Linear { .. })
    }
}

fn sampled(domain: &StripDomain, values: &[f64], x: [f64; 2]) -> (f64, [f64; 2]) {
    let m = domain.lateral_mesh();
    let p = domain.period();
    let u = x[0].rem_euclid(p) / m;
    let i = u.floor();
    let s = u - i;
    let i = i as isize;
    if domain.n() == 2 {
        let a = values[domain.lat_flat([i, 0])];
        let b = values[domain.lat_flat([i + 1, 0])];
        return (a + s * (b - a), [(b - a) / m, 0.0]);
    }
    let v = x[1].rem_euclid(p) / m;
    let j = v.floor();
    let t = v - j;
    let j = j as isize;
    let f00 = values[domain.lat_flat([i, j])];
    let f10 = values[domain.lat_flat([i + 1, j])];
    let f01 = values[domain.lat_flat([i, j + 1])];
    let f11 = values[domain.lat_flat([i + 1, j + 1])];
    let val = f00 * (1.0 - s) * (1.0 - t) + f10 * s * (1.0 - t) + f01 * (1.0 - s) * t + f11 * s * t;
    let gx = ((f10 - f00) * (1.0 - t) + (f11 - f01) * t) / m;
    let gy = ((f01 - f00) * (1.0 - s) + (f11 - f10) * s) / m;
    (val, [gx, gy])
}

/// Largest difference quotient over lateral neighbor pairs of the grid.
pub fn discrete_lipschitz(profile: &Profile, domain: &StripDomain) -> f64 {
    let m = domain.lateral_mesh();
    let mut best: f64 = 0.0;
    for lat in 0..domain.n_lateral() {
        let x = domain.lateral_coords(lat);
        let fx = profile.value(domain, x);
        for axis in 0..domain.lateral_axes() {
            let mut y = x;
            y[axis] += m;
            best = best.max((profile.value(domain, y) - fx).abs() / m);
        }
    }
    best
}

/// A domain above a Lipschitz graph, discretized through its parameter strip.
#[derive(Clone, Debug)]
pub struct GraphDomain {
    pub strip: StripDomain,
    pub profile: Profile,
    pub lipschitz_l: f64,
}

impl GraphDomain {
    /// `lipschitz_l` defaults to the analytic bound; a supplied value must
    /// dominate every discrete difference quotient.
    pub fn new(strip: StripDomain, profile: Profile, lipschitz_l: Option<f64>) -> Result<Self> {
        if let Profile::Sampled { values } = &profile {
            if values.len() != strip.n_lateral() || values.iter().any(|v| !v.is_finite()) {
                return Err(PellError::InvalidGeometry(format!(
                    "sampled profile needs {} finite values",
                    strip.n_lateral()
                )));
            }
        }
        let l = lipschitz_l.unwrap_or_else(|| profile.lipschitz_bound(&strip));
        if !(l.is_finite() && l >= 0.0) {
            return Err(PellError::InvalidGeometry("Lipschitz constant must be finite".into()));
        }
        let q = discrete_lipschitz(&profile, &strip);
        if q > l * (1.0 + 1e-9) + 1e-12 {
            return Err(PellError::InvalidGeometry(format!(
                "discrete Lipschitz quotient {q} exceeds L = {l}"
            )));
        }
        Ok(Self {
            strip,
            profile,
            lipschitz_l: l,
        })
    }

    pub fn phi(&self, x: [f64; 2]) -> f64 {
        self.profile.value(&self.strip, x)
    }

    /// Brute-force distance from `x` to the graph, sampled on a refined
    /// lateral grid around `x'`.
    pub fn boundary_distance(&self, x: [f64; 3]) -> f64 {
        let d = &self.strip;
        let reach = (x[0] - self.phi([x[1], x[2]])).abs() + 1e-12;
        let steps = 400usize;
        let h = 2.0 * reach / steps as f64;
        let mut best = f64::INFINITY;
        let second: Vec<f64> = if d.n() == 3 {
            (0..=steps).map(|j| x[2] - reach + j as f64 * h).collect()
        } else {
            vec![x[2]]
        };
        for i in 0..=steps {
            let y1 = x[1] - reach + i as f64 * h;
            for &y2 in &second {
                let dy1 = y1 - x[1];
                let dy2 = y2 - x[2];
                let dz = x[0] - self.phi([y1, y2]);
                best = best.min((dy1 * dy1 + dy2 * dy2 + dz * dz).sqrt());
            }
        }
        best
    }
}

/// Even, unit-mass quadrature for `P(z) = c (1 - |z|^2)^3_+` on the unit ball.
#[derive(Clone, Debug)]
pub struct Mollifier {
    pub points: Vec<([f64; 2], f64)>,
}

impl Mollifier {
    pub fn new(n: usize, order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        let mut points = Vec::new();
        if n == 2 {
            for (z, w) in nodes.iter().zip(&weights) {
                points.push(([*z, 0.0], w * (1.0 - z * z).powi(3)));
            }
        } else {
            let n_theta = 4 * order;
            for (z, w) in nodes.iter().zip(&weights) {
                let r = 0.5 * (z + 1.0);
                let wr = 0.5 * w * r * (1.0 - r * r).powi(3);
                for k in 0..n_theta {
                    let th = std::f64::consts::TAU * k as f64 / n_theta as f64;
                    points.push(([r * th.cos(), r * th.sin()], wr));
                }
            }
        }
        let total: f64 = points.iter().map(|p| p.1).sum();
        points.iter_mut().for_each(|p| p.1 /= total);
        Self { points }
    }

    pub fn first_moment(&self) -> [f64; 2] {
        self.points.iter().fold([0.0, 0.0], |acc, (z, w)| {
            [acc[0] + w * z[0], acc[1] + w * z[1]]
        })
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, `m >= 2`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 2, "need at least two Gauss points");
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// First row of `D rho`; the remaining rows are the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhoJacobian {
    pub row0: [f64; 3],
}

impl RhoJacobian {
    pub fn identity() -> Self {
        Self { row0: [1.0, 0.0, 0.0] }
    }

    pub fn det(&self) -> f64 {
        self.row0[0]
    }

    /// Dense `n x n` matrix.
    pub fn matrix(&self, n: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        m[0][..n].copy_from_slice(&self.row0[..n]);
        for (k, row) in m.iter_mut().enumerate().skip(1) {
            row[k] = 1.0;
        }
        m
    }

    /// `(D rho)^{-1}`, available in closed form because of the row structure.
    pub fn inverse(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        let d0 = self.row0[0];
        if !(d0.abs() > 1e-14) {
            return Err(PellError::SingularJacobian(d0));
        }
        let mut m = vec![vec![0.0; n]; n];
        m[0][0] = 1.0 / d0;
        for k in 1..n {
            m[0][k] = -self.row0[k] / d0;
            m[k][k] = 1.0;
        }
        Ok(m)
    }
}

#[derive(Clone, Debug)]
pub struct Pullback {
    pub gamma: f64,
    pub mollifier: Mollifier,
    pub graph: GraphDomain,
    /// Minimum of `d rho_0 / d y0` over the strip grid.
    pub min_d0rho0: f64,
}

pub fn default_gamma(l: f64) -> f64 {
    1.0 / (2.0 * l.max(1.0))
}

/// Builds the pullback on the grid of `graph.strip`; fails if `rho` is not
/// monotone in `y0` at some node.
pub fn pullback_map(graph: &GraphDomain, gamma: Option<f64>) -> Result<Pullback> {
    let gamma = gamma.unwrap_or_else(|| default_gamma(graph.lipschitz_l));
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(PellError::InvalidGeometry("gamma must be nonnegative".into()));
    }
    let mut pb = Pullback {
        gamma,
        mollifier: Mollifier::new(graph.strip.n(), 24),
        graph: graph.clone(),
        min_d0rho0: f64::INFINITY,
    };
    let d = &graph.strip;
    let mut min = f64::INFINITY;
    for node in 0..d.n_nodes() {
        min = min.min(pb.jacobian(d.node_coords(node)).row0[0]);
    }
    pb.min_d0rho0 = min;
    if min <= 0.0 {
        return Err(PellError::NotBijective(min));
    }
    Ok(pb)
}

impl Pullback {
    fn strip(&self) -> &StripDomain {
        &self.graph.strip
    }

    pub fn rho(&self, y: [f64; 3]) -> [f64; 3] {
        let t = self.gamma * y[0];
        let mut conv = 0.0;
        for (z, w) in &self.mollifier.points {
            conv += w * self.graph.profile.value(self.strip(), [y[1] - t * z[0], y[2] - t * z[1]]);
        }
        [y[0] + conv, y[1], y[2]]
    }

    pub fn jacobian(&self, y: [f64; 3]) -> RhoJacobian {
        let t = self.gamma * y[0];
        let mut row0 = [1.0, 0.0, 0.0];
        for (z, w) in &self.mollifier.points {
            let g = self.graph.profile.gradient(self.strip(), [y[1] - t * z[0], y[2] - t * z[1]]);
            row0[0] -= self.gamma * w * (z[0] * g[0] + z[1] * g[1]);
            row0[1] += w * g[0];
            row0[2] += w * g[1];
        }
        RhoJacobian { row0 }
    }

    /// Newton inversion in `y0`; the lateral coordinates are unchanged.
    pub fn invert(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let mut y = [x[0] - self.graph.phi([x[1], x[2]]), x[1], x[2]];
        for _ in 0..60 {
            let r = self.rho(y)[0] - x[0];
            if r.abs() < 1e-13 * (1.0 + x[0].abs()) {
                return Ok(y);
            }
            let d = self.jacobian(y).row0[0];
            if d <= 0.0 {
                return Err(PellError::NotBijective(d));
            }
            y[0] -= r / d;
        }
        Err(PellError::NoConvergence {
            iterations: 60,
            residual: (self.rho(y)[0] - x[0]).abs(),
        })
    }
}

/// `A~ = J Drho^{-1} A Drho^{-T}` and `B~ = J Drho^{-1} B`, so that `v = u ∘ rho`
/// solves the transformed equation in weak form.
pub fn pullback_coefficients(
    a: &ComplexMatrix,
    b: &[Complex64],
    jac: &RhoJacobian,
) -> Result<(ComplexMatrix, Vec<Complex64>)> {
    let n = a.dim();
    let inv = jac.inverse(n)?;
    let j = jac.det();
    let at = ComplexMatrix::from_fn(n, |r, c| {
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..n {
            for l in 0..n {
                s += inv[r][k] * a.get(k, l) * inv[c][l];
            }
        }
        s * j
    });
    let bt = (0..n)
        .map(|r| (0..n).map(|k| inv[r][k] * b[k]).sum::<Complex64>() * j)
        .collect();
    Ok((at, bt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::strip::build_strip;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        let i4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((i4 - 0.4).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn mollifier_is_even_with_unit_mass() {
        for n in [2, 3] {
            let m = Mollifier::new(n, 24);
            let mass: f64 = m.points.iter().map(|p| p.1).sum();
            assert!((mass - 1.0).abs() < 1e-13, "{n} {mass}");
            let fm = m.first_moment();
            assert!(fm[0].abs() < 1e-14 && fm[1].abs() < 1e-14);
        }
    }

    #[test]
    fn flat_and_constant_profiles() {
        let s = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let flat = pullback_map(&GraphDomain::new(s.clone(), Profile::Flat, None).unwrap(), None).unwrap();
        let y = [0.3, 0.4, 0.0];
        assert_eq!(flat.rho(y), y);
        assert_eq!(flat.jacobian(y), RhoJacobian::identity());
        let c = pullback_map(&GraphDomain::new(s, Profile::Constant { c: 0.7 }, None).unwrap(), None).unwrap();
        assert!((c.rho(y)[0] - 1.0).abs() < 1e-14);
        assert_eq!(c.jacobian(y), RhoJacobian::identity());
    }

    #[test]
    fn linear_profile_gives_shear() {
        let s = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let g = GraphDomain::new(
            s,
            Profile::Linear {
                c: 0.0,
                slope: vec![0.4],
            },
            None,
        )
        .unwrap();
        let pb = pullback_map(&g, Some(0.3)).unwrap();
        let y = [0.6, 0.25, 0.0];
        assert!((pb.rho(y)[0] - (0.6 + 0.4 * 0.25)).abs() < 1e-14);
        let jac = pb.jacobian(y);
        assert!((jac.row0[0] - 1.0).abs() < 1e-14 && (jac.row0[1] - 0.4).abs() < 1e-14);
        let (at, _) = pullback_coefficients(&ComplexMatrix::identity(2), &[Complex64::default(); 2], &jac).unwrap();
        assert!((at.re(0, 0) - 1.16).abs() < 1e-13);
        assert!((at.re(0, 1) + 0.4).abs() < 1e-13);
        assert!((at.re(1, 1) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn steep_profile_with_large_gamma_is_rejected() {
        let s = build_strip(2, 1.0, 1.0 / 64.0, 1.0).unwrap();
        let g = GraphDomain::new(
            s,
            Profile::Fourier {
                amplitude: 0.3,
                mode: 2,
            },
            None,
        )
        .unwrap();
        assert!(matches!(pullback_map(&g, Some(20.0)), Err(PellError::NotBijective(_))));
        assert!(pullback_map(&g, None).is_ok());
    }

    #[test]
    fn lipschitz_violation_is_rejected() {
        let s = build_strip(2, 1.0, 0.25, 1.0).unwrap();
        let p = Profile::Sampled {
            values: vec![0.0, 1.0, 0.0, 0.0],
        };
        assert!(GraphDomain::new(s.clone(), p.clone(), Some(1.0)).is_err());
        assert!(GraphDomain::new(s, p, Some(4.0)).is_ok());
    }

    #[test]
    fn identity_pullback_keeps_coefficients() {
        let a = ComplexMatrix::scaled_identity(3, Complex64::new(1.0, 1.0));
        let b = vec![Complex64::new(0.5, 0.1); 3];
        let (at, bt) = pullback_coefficients(&a, &b, &RhoJacobian::identity()).unwrap();
        assert_eq!(at, a);
        assert_eq!(bt, b);
    }
}
