use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PellError, Result};
use crate::geometry::StripDomain;

type C = Complex64;

const GRID_MAGIC: &[u8; 8] = b"PELLGRID";

/// Gradient and value of `u` at a cell center.
#[derive(Clone, Copy, Debug)]
pub struct CellSample {
    pub layer: usize,
    pub lat: usize,
    pub value: C,
    pub grad: [C; 3],
}

impl CellSample {
    pub fn grad_norm_sqr(&self) -> f64 {
        self.grad.iter().map(|z| z.norm_sqr()).sum()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveStats {
    pub method: String,
    pub iterations: usize,
    pub relative_residual: f64,
    pub unknowns: usize,
}

/// Nodal solution on a strip, including the boundary and top layers.
#[derive(Clone, Debug)]
pub struct SolutionField {
    pub domain: StripDomain,
    pub u: Vec<C>,
    pub datum: Vec<C>,
    pub stats: SolveStats,
}

impl SolutionField {
    pub fn from_nodes(domain: StripDomain, u: Vec<C>, stats: SolveStats) -> Self {
        assert_eq!(u.len(), domain.n_nodes());
        let datum = u[..domain.n_lateral()].to_vec();
        Self { domain, u, datum, stats }
    }

    /// Node values of an analytic function (no solve); handy for estimator checks.
    pub fn from_fn(domain: &StripDomain, f: impl Fn([f64; 3]) -> C) -> Self {
        let u: Vec<C> = (0..domain.n_nodes()).map(|id| f(domain.node_coords(id))).collect();
        Self::from_nodes(
            domain.clone(),
            u,
            SolveStats {
                method: "analytic".into(),
                iterations: 0,
                relative_residual: 0.0,
                unknowns: 0,
            },
        )
    }

    pub fn scaled(&self, c: C) -> Self {
        let mut out = self.clone();
        out.u.iter_mut().for_each(|z| *z *= c);
        out.datum.iter_mut().for_each(|z| *z *= c);
        out
    }

    #[inline]
    pub fn at(&self, layer: usize, lat: usize) -> C {
        self.u[self.domain.node(layer, lat)]
    }

    /// Value and gradient at the center of cell `(k, lat)`, from its corners.
    pub fn cell(&self, k: usize, lat: usize) -> CellSample {
        let d = &self.domain;
        let hk = d.cell_height(k);
        let m = d.lateral_mesh();
        let corners: Vec<usize> = if d.n() == 2 {
            vec![lat, d.lateral_shift(lat, 0, 1)]
        } else {
            let p1 = d.lateral_shift(lat, 0, 1);
            vec![lat, p1, d.lateral_shift(lat, 1, 1), d.lateral_shift(p1, 1, 1)]
        };
        let nc = corners.len() as f64;
        let mut value = C::default();
        let mut g0 = C::default();
        for &c in &corners {
            let lo = self.at(k, c);
            let hi = self.at(k + 1, c);
            value += lo + hi;
            g0 += (hi - lo) / hk;
        }
        value /= 2.0 * nc;
        g0 /= nc;
        let mut grad = [g0, C::default(), C::default()];
        for axis in 0..d.n() - 1 {
            let mut g = C::default();
            let mut count = 0.0;
            for &c in &corners {
                let [i, j] = d.lat_index(c);
                let [i0, j0] = d.lat_index(lat);
                let on_low_side = if axis == 0 { i == i0 } else { j == j0 };
                if !on_low_side {
                    continue;
                }
                let c2 = d.lateral_shift(c, axis, 1);
                for l in [k, k + 1] {
                    g += (self.at(l, c2) - self.at(l, c)) / m;
                    count += 1.0;
                }
            }
            grad[axis + 1] = g / count;
        }
        CellSample { layer: k, lat, value, grad }
    }

    pub fn cells(&self) -> impl Iterator<Item = CellSample> + '_ {
        let (nk, nlat) = self.domain.cell_shape();
        (0..nk).flat_map(move |k| (0..nlat).map(move |lat| self.cell(k, lat)))
    }

    /// `int |grad u|^2`, cell-center quadrature.
    pub fn energy(&self) -> f64 {
        self.cells()
            .map(|c| c.grad_norm_sqr() * self.domain.cell_volume(c.layer))
            .sum()
    }

    /// `int |grad u|^2 delta`, cell-center quadrature.
    pub fn weighted_energy(&self) -> f64 {
        self.cells()
            .map(|c| c.grad_norm_sqr() * self.domain.cell_center_x0(c.layer) * self.domain.cell_volume(c.layer))
            .sum()
    }

    /// Nodal `L^2` distance to `exact`.
    pub fn l2_error(&self, exact: impl Fn([f64; 3]) -> C) -> f64 {
        let d = &self.domain;
        (0..d.n_nodes())
            .map(|id| {
                let (layer, _) = d.split(id);
                (self.u[id] - exact(d.node_coords(id))).norm_sqr() * d.node_volume(layer)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_error(&self, exact: impl Fn([f64; 3]) -> C) -> f64 {
        let d = &self.domain;
        (0..d.n_nodes())
            .map(|id| (self.u[id] - exact(d.node_coords(id))).norm())
            .fold(0.0, f64::max)
    }

    /// Binary grid: magic, dimensions, meshes, `x0` nodes, then interleaved
    /// little-endian `re, im` doubles in node order.
    pub fn to_binary(&self) -> Vec<u8> {
        let d = &self.domain;
        let mut out = GRID_MAGIC.to_vec();
        for v in [1u32, d.n() as u32, d.n_layers() as u32, d.nl() as u32] {
            out.extend(v.to_le_bytes());
        }
        for v in [d.h(), d.mesh_x0(), d.lateral_mesh(), d.period()] {
            out.extend(v.to_le_bytes());
        }
        for &x in d.x0_nodes() {
            out.extend(x.to_le_bytes());
        }
        for z in &self.u {
            out.extend(z.re.to_le_bytes());
            out.extend(z.im.to_le_bytes());
        }
        out
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        fs::File::create(path)?.write_all(&self.to_binary())?;
        Ok(())
    }

    /// CSV slice of `u` at a fixed layer.
    pub fn layer_csv(&self, layer: usize) -> String {
        let mut s = String::from("x1,x2,re,im\n");
        for lat in 0..self.domain.n_lateral() {
            let [a, b] = self.domain.lateral_coords(lat);
            let z = self.at(layer, lat);
            s.push_str(&format!("{a},{b},{},{}\n", z.re, z.im));
        }
        s
    }
}

/// Parsed header and payload of a binary grid.
#[derive(Debug)]
pub struct GridFile {
    pub n: usize,
    pub n_layers: usize,
    pub nl: usize,
    pub h: f64,
    pub mesh_x0: f64,
    pub lateral_mesh: f64,
    pub period: f64,
    pub x0_nodes: Vec<f64>,
    pub values: Vec<C>,
}

pub fn read_binary(bytes: &[u8]) -> Result<GridFile> {
    let bad = || PellError::Config("malformed grid file".into());
    if bytes.len() < 56 || &bytes[..8] != GRID_MAGIC {
        return Err(bad());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (n, n_layers, nl) = (u32_at(12), u32_at(16), u32_at(20));
    let lateral = if n == 2 { nl } else { nl * nl };
    let need = 56 + 8 * n_layers + 16 * n_layers * lateral;
    if bytes.len() != need {
        return Err(bad());
    }
    let x0_nodes = (0..n_layers).map(|i| f64_at(56 + 8 * i)).collect();
    let base = 56 + 8 * n_layers;
    let values = (0..n_layers * lateral)
        .map(|i| C::new(f64_at(base + 16 * i), f64_at(base + 16 * i + 8)))
        .collect();
    Ok(GridFile {
        n,
        n_layers,
        nl,
        h: f64_at(24),
        mesh_x0: f64_at(32),
        lateral_mesh: f64_at(40),
        period: f64_at(48),
        x0_nodes,
        values,
    })
}
