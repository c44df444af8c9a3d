//! Quadrature over interior balls with subsampled fractional weights.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::estimators::CellCache;
use crate::geometry::StripDomain;
use crate::solver::{CellSample, SolutionField};

const SUB: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Ball {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            center: self.center,
            radius: k * self.radius,
        }
    }

    /// `B_{k r}` lies strictly inside `0 < x0 < h`.
    pub fn fits(&self, domain: &StripDomain, k: f64) -> bool {
        self.center[0] - k * self.radius > 0.0 && self.center[0] + k * self.radius < domain.h()
    }
}

/// Fixed physical balls: lateral positions on a coarse lattice at the given
/// heights and radii, in deterministic order.
pub fn ball_family(domain: &StripDomain, heights: &[f64], radii: &[f64], lateral_points: usize) -> Vec<Ball> {
    let p = domain.period();
    let mut out = Vec::new();
    let second: Vec<f64> = if domain.n() == 3 {
        (0..lateral_points).map(|j| (j as f64 + 0.5) * p / lateral_points as f64).collect()
    } else {
        vec![0.0]
    };
    for &x0 in heights {
        for &r in radii {
            for i in 0..lateral_points {
                for &b in &second {
                    let a = (i as f64 + 0.5) * p / lateral_points as f64;
                    out.push(Ball {
                        center: [x0, a, b],
                        radius: r,
                    });
                }
            }
        }
    }
    out
}

/// Fraction of the box `lo..hi` (per axis) inside the ball, by midpoint subsampling.
fn box_fraction(domain: &StripDomain, ball: &Ball, lo: [f64; 3], hi: [f64; 3]) -> f64 {
    let n = domain.n();
    let r2 = ball.radius * ball.radius;
    let mut hits = 0usize;
    let mut total = 0usize;
    let subs = |k: usize| if k < n { SUB } else { 1 };
    for a in 0..subs(0) {
        let x0 = lo[0] + (a as f64 + 0.5) / SUB as f64 * (hi[0] - lo[0]);
        for b in 0..subs(1) {
            let x1 = lo[1] + (b as f64 + 0.5) / SUB as f64 * (hi[1] - lo[1]);
            for c in 0..subs(2) {
                let x2 = if n == 3 {
                    lo[2] + (c as f64 + 0.5) / SUB as f64 * (hi[2] - lo[2])
                } else {
                    0.0
                };
                let d = domain.periodic_disp([x1, x2], [ball.center[1], ball.center[2]]);
                let dx0 = x0 - ball.center[0];
                if dx0 * dx0 + d[0] * d[0] + d[1] * d[1] < r2 {
                    hits += 1;
                }
                total += 1;
            }
        }
    }
    hits as f64 / total as f64
}

/// Lateral indices whose unit box around `center +- reach` may meet the ball.
fn lateral_candidates(domain: &StripDomain, ball: &Ball, shift: f64) -> Vec<usize> {
    let m = domain.lateral_mesh();
    let reach = (ball.radius / m).ceil() as isize + 1;
    let ci = ((ball.center[1] - shift) / m).round() as isize;
    let cj = ((ball.center[2] - shift) / m).round() as isize;
    let js: Vec<isize> = if domain.n() == 3 { (-reach..=reach).collect() } else { vec![0] };
    let mut out = Vec::new();
    for di in -reach..=reach {
        for &dj in &js {
            let cjj = if domain.n() == 3 { cj + dj } else { 0 };
            out.push(domain.lat_flat([ci + di, cjj]));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// `(node, weight)` pairs: node volume times the fraction of its dual cell in the ball.
pub fn ball_nodes(domain: &StripDomain, ball: &Ball) -> Vec<(usize, f64)> {
    let x = domain.x0_nodes();
    let last = x.len() - 1;
    let m = domain.lateral_mesh();
    let lats = lateral_candidates(domain, ball, 0.0);
    let mut out = Vec::new();
    for layer in 0..=last {
        let lo0 = if layer == 0 { x[0] } else { 0.5 * (x[layer - 1] + x[layer]) };
        let hi0 = if layer == last { x[last] } else { 0.5 * (x[layer] + x[layer + 1]) };
        if hi0 <= ball.center[0] - ball.radius || lo0 >= ball.center[0] + ball.radius {
            continue;
        }
        for &lat in &lats {
            let [a, b] = domain.lateral_coords(lat);
            let lo = [lo0, a - 0.5 * m, b - 0.5 * m];
            let hi = [hi0, a + 0.5 * m, b + 0.5 * m];
            let f = box_fraction(domain, ball, lo, hi);
            if f > 0.0 {
                let vol = (hi0 - lo0) * domain.lateral_cell_measure();
                out.push((domain.node(layer, lat), f * vol));
            }
        }
    }
    out
}

/// `(cell layer, lateral cell, weight)` with weight the cell volume inside the ball.
pub fn ball_cells(domain: &StripDomain, ball: &Ball) -> Vec<(usize, usize, f64)> {
    let x = domain.x0_nodes();
    let m = domain.lateral_mesh();
    let shift = 0.5 * m;
    let lats = lateral_candidates(domain, ball, shift);
    let mut out = Vec::new();
    for k in 0..x.len() - 1 {
        if x[k + 1] <= ball.center[0] - ball.radius || x[k] >= ball.center[0] + ball.radius {
            continue;
        }
        for &lat in &lats {
            let [a, b] = domain.lateral_coords(lat);
            let b_hi = if domain.n() == 3 { b + m } else { 0.0 };
            let f = box_fraction(domain, ball, [x[k], a, b], [x[k + 1], a + m, b_hi]);
            if f > 0.0 {
                out.push((k, lat, f * domain.cell_volume(k)));
            }
        }
    }
    out
}

/// Weighted mean of `g(u)` over ball nodes.
pub fn node_mean(u: &SolutionField, nodes: &[(usize, f64)], g: impl Fn(Complex64) -> f64) -> f64 {
    let (num, den) = nodes
        .iter()
        .fold((0.0, 0.0), |(a, b), &(id, w)| (a + w * g(u.u[id]), b + w));
    num / den
}

/// `(mean |u|^p)^{1/p}` over ball nodes.
pub fn lp_average(u: &SolutionField, nodes: &[(usize, f64)], p: f64) -> f64 {
    node_mean(u, nodes, |z| z.norm().powf(p)).powf(1.0 / p)
}

/// Weighted mean of `g(cell sample)` over ball cells.
pub fn cell_mean(cells: &CellCache, list: &[(usize, usize, f64)], g: impl Fn(&CellSample) -> f64) -> f64 {
    let (num, den) = list
        .iter()
        .fold((0.0, 0.0), |(a, b), &(k, lat, w)| (a + w * g(cells.get(k, lat)), b + w));
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_strip;

    #[test]
    fn weights_approximate_ball_volume() {
        let d = build_strip(2, 1.0, 1.0 / 32.0, 1.0).unwrap();
        let ball = Ball {
            center: [0.5, 0.3, 0.0],
            radius: 0.2,
        };
        let area = std::f64::consts::PI * 0.04;
        let nodes: f64 = ball_nodes(&d, &ball).iter().map(|x| x.1).sum();
        let cells: f64 = ball_cells(&d, &ball).iter().map(|x| x.2).sum();
        assert!((nodes - area).abs() / area < 5e-3, "{nodes}");
        assert!((cells - area).abs() / area < 5e-3, "{cells}");
    }

    #[test]
    fn balls_wrap_laterally() {
        let d = build_strip(2, 1.0, 1.0 / 16.0, 1.0).unwrap();
        let ball = Ball {
            center: [0.5, 0.0, 0.0],
            radius: 0.2,
        };
        let left = ball_nodes(&d, &ball);
        assert!(left.iter().any(|&(id, _)| d.node_coords(id)[1] > 0.7));
    }
}
