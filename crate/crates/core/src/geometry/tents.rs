use serde::Serialize;

use super::strip::StripDomain;

/// One surface ball `Delta_r(Q)` and its tent `T = Omega ∩ B_r(Q)`.
#[derive(Clone, Debug, Serialize)]
pub struct Tent {
    pub level: usize,
    pub center_lat: usize,
    pub radius: f64,
    /// Surface measure of the flat ball.
    pub sigma: f64,
    /// Interior node ids inside the half-ball.
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DyadicTentSystem {
    pub tents: Vec<Tent>,
    pub levels: usize,
}

/// Flat surface measure of a ball of radius `r` in `R^{n-1}`.
pub fn flat_sigma(n: usize, r: f64) -> f64 {
    match n {
        2 => 2.0 * r,
        3 => std::f64::consts::PI * r * r,
        _ => unreachable!("dimension checked by StripDomain"),
    }
}

impl DyadicTentSystem {
    /// Level `k` has radius `period / 2^{k+1}` and centers spaced `period / 2^k`.
    /// Levels whose radius drops below two lateral meshes are skipped.
    pub fn build(domain: &StripDomain, max_levels: usize) -> Self {
        let max_levels = max_levels.max(1);
        let nl = domain.nl();
        let m = domain.lateral_mesh();
        let mut tents = Vec::new();
        let mut levels = 0;
        for k in 0..max_levels {
            let radius = domain.period() / (1u64 << (k + 1)) as f64;
            if k > 0 && radius < 2.0 * m {
                break;
            }
            levels += 1;
            let per_axis = 1usize << k;
            let step = nl as f64 / per_axis as f64;
            let second = if domain.n() == 3 { per_axis } else { 1 };
            for a in 0..per_axis {
                for b in 0..second {
                    let i = (a as f64 * step).round() as isize;
                    let j = (b as f64 * step).round() as isize;
                    let center_lat = domain.lat_flat([i, j]);
                    tents.push(Tent {
                        level: k,
                        center_lat,
                        radius,
                        sigma: flat_sigma(domain.n(), radius),
                        nodes: tent_nodes(domain, center_lat, radius),
                    });
                }
            }
        }
        Self { tents, levels }
    }

    pub fn level(&self, k: usize) -> impl Iterator<Item = &Tent> {
        self.tents.iter().filter(move |t| t.level == k)
    }

    pub fn largest_radius(&self) -> f64 {
        self.tents.iter().map(|t| t.radius).fold(0.0, f64::max)
    }
}

/// Interior nodes with `|x - (0, Q')| < r` (strict), excluding the top layer.
pub fn tent_nodes(domain: &StripDomain, center_lat: usize, r: f64) -> Vec<usize> {
    let q = domain.lateral_coords(center_lat);
    let mut out = Vec::new();
    for layer in 1..domain.n_layers() - 1 {
        let x0 = domain.x0(layer);
        if x0 >= r {
            break;
        }
        for lat in 0..domain.n_lateral() {
            let d = domain.lateral_distance(domain.lateral_coords(lat), q);
            if x0 * x0 + d * d < r * r {
                out.push(domain.node(layer, lat));
            }
        }
    }
    out
}

pub fn dyadic_tents(domain: &StripDomain, max_levels: usize) -> DyadicTentSystem {
    DyadicTentSystem::build(domain, max_levels)
}
