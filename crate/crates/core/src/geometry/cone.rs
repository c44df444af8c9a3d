use serde::{Deserialize, Serialize};

use super::strip::StripDomain;

/// Nontangential approach region `{a |x0 - y0| > |x' - y'|}` with vertex on
/// the boundary, optionally truncated to `x0 <= truncation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeGeometry {
    pub aperture: f64,
    #[serde(default)]
    pub truncation: Option<f64>,
}

impl ConeGeometry {
    pub fn new(aperture: f64, truncation: Option<f64>) -> Self {
        assert!(aperture > 0.0, "cone aperture must be positive");
        Self { aperture, truncation }
    }

    pub fn full(aperture: f64) -> Self {
        Self::new(aperture, None)
    }

    /// Strict membership test for a point at height `x0` and lateral distance `r`.
    #[inline]
    pub fn contains(&self, x0: f64, r: f64) -> bool {
        x0 > 0.0 && self.aperture * x0 > r && self.truncation.is_none_or(|t| x0 <= t)
    }

    /// Whether the aperture is admissible over a graph with Lipschitz constant `l`.
    pub fn admissible_over_graph(&self, l: f64) -> bool {
        l == 0.0 || 1.0 / self.aperture > l
    }
}

/// Interior node ids of `Gamma_a(Q)` for the boundary node with lateral index
/// `q_lat`, using the periodic metric. The top layer `x0 = h` is excluded.
pub fn cone_mask(domain: &StripDomain, q_lat: usize, cone: &ConeGeometry) -> Vec<usize> {
    let stencil = ConeStencil::new(domain, cone);
    stencil.nodes_at(domain, q_lat).collect()
}

/// Number of lattice translates `d + k P` with `|d + k P| < radius`.
pub fn lift_count(domain: &StripDomain, disp: [f64; 2], radius: f64) -> u32 {
    let p = domain.period();
    let reach = (radius / p).ceil() as i64 + 1;
    let range2 = if domain.n() == 3 { -reach..=reach } else { 0..=0 };
    let mut count = 0;
    for k0 in -reach..=reach {
        for k1 in range2.clone() {
            let a = disp[0] + k0 as f64 * p;
            let b = disp[1] + k1 as f64 * p;
            if (a * a + b * b).sqrt() < radius {
                count += 1;
            }
        }
    }
    count
}

/// Fraction of the lateral cell centered at `disp` that lies in the disk of
/// the given radius, summed over all periodic lifts of the cell.
pub fn cell_coverage(domain: &StripDomain, disp: [f64; 2], radius: f64) -> f64 {
    let m = domain.lateral_mesh();
    let p = domain.period();
    let reach = ((radius + m) / p).ceil() as i64 + 1;
    if domain.n() == 2 {
        return (-reach..=reach)
            .map(|k| {
                let c = disp[0] + k as f64 * p;
                let lo = (c - 0.5 * m).max(-radius);
                let hi = (c + 0.5 * m).min(radius);
                (hi - lo).max(0.0) / m
            })
            .sum();
    }
    // midpoint subsampling of the square cell
    const SUB: usize = 8;
    let mut total = 0.0;
    for k0 in -reach..=reach {
        for k1 in -reach..=reach {
            let c = [disp[0] + k0 as f64 * p, disp[1] + k1 as f64 * p];
            let near = (c[0].abs() - 0.5 * m).max(0.0).hypot((c[1].abs() - 0.5 * m).max(0.0));
            if near >= radius {
                continue;
            }
            let mut hits = 0;
            for a in 0..SUB {
                for b in 0..SUB {
                    let x = c[0] + ((a as f64 + 0.5) / SUB as f64 - 0.5) * m;
                    let y = c[1] + ((b as f64 + 0.5) / SUB as f64 - 0.5) * m;
                    if x.hypot(y) < radius {
                        hits += 1;
                    }
                }
            }
            total += hits as f64 / (SUB * SUB) as f64;
        }
    }
    total
}

/// Translation-invariant description of a cone relative to its vertex.
///
/// Node offsets use the minimal-image metric (for maxima); cell offsets carry
/// the covered fraction of the cell cross-section, summed over periodic lifts,
/// so that cone integrals match the covering space `R^{n-1}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeStencil {
    pub cone: ConeGeometry,
    /// `(layer, lateral index offset)`.
    pub nodes: Vec<(usize, [isize; 2])>,
    /// `(cell layer, lateral cell offset, covered fraction)`.
    pub cells: Vec<(usize, [isize; 2], f64)>,
}

impl ConeStencil {
    pub fn new(domain: &StripDomain, cone: &ConeGeometry) -> Self {
        let m = domain.lateral_mesh();
        let nl = domain.nl() as isize;
        let second: Vec<isize> = if domain.n() == 3 {
            (0..nl).map(|j| j - nl / 2).collect()
        } else {
            vec![0]
        };
        let first: Vec<isize> = (0..nl).map(|j| j - nl / 2).collect();
        let mut nodes = Vec::new();
        for layer in 1..domain.n_layers() - 1 {
            let x0 = domain.x0(layer);
            for &i in &first {
                for &j in &second {
                    let d = domain.periodic_disp([i as f64 * m, j as f64 * m], [0.0, 0.0]);
                    if cone.contains(x0, (d[0] * d[0] + d[1] * d[1]).sqrt()) {
                        nodes.push((layer, [i, j]));
                    }
                }
            }
        }
        let mut cells = Vec::new();
        let off = if domain.n() == 3 { 0.5 } else { 0.0 };
        for k in 0..domain.n_layers() - 1 {
            let x0 = domain.cell_center_x0(k);
            if cone.truncation.is_some_and(|t| x0 > t) {
                continue;
            }
            for &i in &first {
                for &j in &second {
                    let disp = [(i as f64 + 0.5) * m, (j as f64 + off) * m];
                    let disp = domain.periodic_disp(disp, [0.0, 0.0]);
                    let c = cell_coverage(domain, disp, cone.aperture * x0);
                    if c > 0.0 {
                        cells.push((k, [i, j], c));
                    }
                }
            }
        }
        Self {
            cone: *cone,
            nodes,
            cells,
        }
    }

    pub fn nodes_at<'a>(&'a self, domain: &'a StripDomain, q_lat: usize) -> impl Iterator<Item = usize> + 'a {
        let [qi, qj] = domain.lat_index(q_lat);
        self.nodes.iter().map(move |&(layer, [di, dj])| {
            let lat = domain.lat_flat([qi as isize + di, qj as isize + dj]);
            domain.node(layer, lat)
        })
    }

    /// `(cell layer, lateral cell index, covered fraction)` for vertex `q_lat`.
    pub fn cells_at<'a>(
        &'a self,
        domain: &'a StripDomain,
        q_lat: usize,
    ) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
        let [qi, qj] = domain.lat_index(q_lat);
        self.cells.iter().map(move |&(k, [di, dj], c)| {
            let lat = domain.lat_flat([qi as isize + di, qj as isize + dj]);
            (k, lat, c)
        })
    }
}
