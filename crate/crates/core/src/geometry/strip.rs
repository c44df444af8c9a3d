use serde::{Deserialize, Serialize};

use crate::error::{PellError, Result};

/// Descriptor from which a [`StripDomain`] is rebuilt; this is the JSON form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripSpec {
    pub n: usize,
    pub h: f64,
    pub mesh_x0: f64,
    /// Defaults to `mesh_x0`.
    #[serde(default)]
    pub lateral_mesh: Option<f64>,
    pub period: f64,
    /// Number of geometric halvings inserted inside the first `x0` cell.
    #[serde(default)]
    pub grading_levels: usize,
}

/// The strip `(0, h) x T^{n-1}` with a tensor grid, periodic laterally.
///
/// Nodes are indexed `layer * n_lateral + lat`; layer 0 is the boundary
/// `x0 = 0` and the last layer is the top `x0 = h`.
#[derive(Clone, Debug)]
pub struct StripDomain {
    spec: StripSpec,
    lateral_mesh: f64,
    x0_nodes: Vec<f64>,
    lateral_shape: [usize; 2],
}

fn integer_ratio(a: f64, b: f64, what: &str) -> Result<usize> {
    let r = a / b;
    let k = r.round();
    if k < 1.0 || (r - k).abs() > 1e-9 * r.max(1.0) {
        return Err(PellError::InvalidGeometry(format!(
            "{what}: {a} is not an integer multiple of {b}"
        )));
    }
    Ok(k as usize)
}

impl StripDomain {
    pub fn new(spec: StripSpec) -> Result<Self> {
        let StripSpec {
            n,
            h,
            mesh_x0,
            period,
            grading_levels,
            ..
        } = spec;
        if !(2..=3).contains(&n) {
            return Err(PellError::InvalidGeometry(format!(
                "dimension {n} not supported (2 or 3)"
            )));
        }
        let lateral_mesh = spec.lateral_mesh.unwrap_or(mesh_x0);
        for (v, name) in [(h, "h"), (mesh_x0, "mesh_x0"), (lateral_mesh, "lateral_mesh"), (period, "period")] {
            if !(v.is_finite() && v > 0.0) {
                return Err(PellError::InvalidGeometry(format!("{name} must be positive")));
            }
        }
        if mesh_x0 > h {
            return Err(PellError::InvalidGeometry(format!(
                "mesh_x0 {mesh_x0} exceeds strip height {h}"
            )));
        }
        if grading_levels > 30 {
            return Err(PellError::InvalidGeometry("too many grading levels".into()));
        }
        let nx0 = integer_ratio(h, mesh_x0, "strip height")?;
        let nl = integer_ratio(period, lateral_mesh, "lateral period")?;
        if nl < 2 {
            return Err(PellError::InvalidGeometry("lateral grid needs at least 2 nodes".into()));
        }
        let mut x0_nodes = vec![0.0];
        for l in (1..=grading_levels).rev() {
            x0_nodes.push(mesh_x0 / (1u64 << l) as f64);
        }
        for k in 1..=nx0 {
            x0_nodes.push(if k == nx0 { h } else { k as f64 * mesh_x0 });
        }
        let lateral_shape = if n == 2 { [nl, 1] } else { [nl, nl] };
        Ok(Self {
            spec,
            lateral_mesh,
            x0_nodes,
            lateral_shape,
        })
    }

    /// Uniform strip with square cells.
    pub fn build(n: usize, h: f64, mesh: f64, period: f64) -> Result<Self> {
        Self::new(StripSpec {
            n,
            h,
            mesh_x0: mesh,
            lateral_mesh: None,
            period,
            grading_levels: 0,
        })
    }

    pub fn with_grading(&self, levels: usize) -> Result<Self> {
        Self::new(StripSpec {
            grading_levels: levels,
            ..self.spec.clone()
        })
    }

    pub fn with_height(&self, h: f64) -> Result<Self> {
        Self::new(StripSpec { h, ..self.spec.clone() })
    }

    pub fn spec(&self) -> &StripSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn h(&self) -> f64 {
        self.spec.h
    }

    pub fn period(&self) -> f64 {
        self.spec.period
    }

    pub fn mesh_x0(&self) -> f64 {
        self.spec.mesh_x0
    }

    pub fn lateral_mesh(&self) -> f64 {
        self.lateral_mesh
    }

    pub fn x0_nodes(&self) -> &[f64] {
        &self.x0_nodes
    }

    #[inline]
    pub fn x0(&self, layer: usize) -> f64 {
        self.x0_nodes[layer]
    }

    pub fn n_layers(&self) -> usize {
        self.x0_nodes.len()
    }

    pub fn lateral_shape(&self) -> [usize; 2] {
        self.lateral_shape
    }

    /// Nodes per lateral direction.
    pub fn nl(&self) -> usize {
        self.lateral_shape[0]
    }

    pub fn n_lateral(&self) -> usize {
        self.lateral_shape[0] * self.lateral_shape[1]
    }

    pub fn n_nodes(&self) -> usize {
        self.n_layers() * self.n_lateral()
    }

    /// Cell counts `(x0 cells, lateral cells)`.
    pub fn cell_shape(&self) -> (usize, usize) {
        (self.n_layers() - 1, self.n_lateral())
    }

    #[inline]
    pub fn node(&self, layer: usize, lat: usize) -> usize {
        layer * self.n_lateral() + lat
    }

    #[inline]
    pub fn split(&self, node: usize) -> (usize, usize) {
        (node / self.n_lateral(), node % self.n_lateral())
    }

    #[inline]
    pub fn lat_index(&self, lat: usize) -> [usize; 2] {
        [lat / self.lateral_shape[1], lat % self.lateral_shape[1]]
    }

    #[inline]
    pub fn lat_flat(&self, idx: [isize; 2]) -> usize {
        let s = self.lateral_shape;
        let i0 = idx[0].rem_euclid(s[0] as isize) as usize;
        let i1 = idx[1].rem_euclid(s[1] as isize) as usize;
        i0 * s[1] + i1
    }

    /// Lateral coordinates of a lateral node (second entry 0 when `n = 2`).
    pub fn lateral_coords(&self, lat: usize) -> [f64; 2] {
        let [i, j] = self.lat_index(lat);
        [i as f64 * self.lateral_mesh, j as f64 * self.lateral_mesh]
    }

    /// Full coordinates `(x0, x')`, padded with zeros to length 3.
    pub fn node_coords(&self, node: usize) -> [f64; 3] {
        let (layer, lat) = self.split(node);
        let [a, b] = self.lateral_coords(lat);
        [self.x0(layer), a, b]
    }

    /// Minimal-image displacement `x' - y'` on the torus.
    pub fn periodic_disp(&self, x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
        let p = self.period();
        let wrap = |d: f64| d - p * (d / p).round();
        if self.n() == 2 {
            [wrap(x[0] - y[0]), 0.0]
        } else {
            [wrap(x[0] - y[0]), wrap(x[1] - y[1])]
        }
    }

    pub fn lateral_distance(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let d = self.periodic_disp(x, y);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    /// Distance to the boundary: `delta(x) = x0`.
    #[inline]
    pub fn delta(&self, layer: usize) -> f64 {
        self.x0(layer)
    }

    /// Measure of one lateral cell, `lateral_mesh^{n-1}`.
    pub fn lateral_cell_measure(&self) -> f64 {
        self.lateral_mesh.powi(self.n() as i32 - 1)
    }

    /// Total boundary measure `period^{n-1}`.
    pub fn boundary_measure(&self) -> f64 {
        self.period().powi(self.n() as i32 - 1)
    }

    /// Dual-cell width in `x0` of a layer (halved at both ends).
    pub fn layer_weight(&self, layer: usize) -> f64 {
        let x = &self.x0_nodes;
        let last = x.len() - 1;
        match layer {
            0 => 0.5 * (x[1] - x[0]),
            l if l == last => 0.5 * (x[last] - x[last - 1]),
            l => 0.5 * (x[l + 1] - x[l - 1]),
        }
    }

    /// Quadrature volume attached to a node.
    pub fn node_volume(&self, layer: usize) -> f64 {
        self.layer_weight(layer) * self.lateral_cell_measure()
    }

    /// Height of the cell between layers `k` and `k + 1`.
    pub fn cell_height(&self, k: usize) -> f64 {
        self.x0_nodes[k + 1] - self.x0_nodes[k]
    }

    pub fn cell_center_x0(&self, k: usize) -> f64 {
        0.5 * (self.x0_nodes[k] + self.x0_nodes[k + 1])
    }

    /// Lateral coordinates of the center of lateral cell `lat`.
    pub fn cell_center_lateral(&self, lat: usize) -> [f64; 2] {
        let [a, b] = self.lateral_coords(lat);
        let hm = 0.5 * self.lateral_mesh;
        if self.n() == 2 {
            [a + hm, 0.0]
        } else {
            [a + hm, b + hm]
        }
    }

    pub fn cell_volume(&self, k: usize) -> f64 {
        self.cell_height(k) * self.lateral_cell_measure()
    }

    /// Layer index of the node at height `x0`, if one exists.
    pub fn layer_at(&self, x0: f64) -> Option<usize> {
        self.x0_nodes
            .iter()
            .position(|&v| (v - x0).abs() <= 1e-12 * x0.abs().max(1.0))
    }

    /// Lateral neighbor offsets per direction `(+1, -1)` for each lateral axis.
    pub fn lateral_axes(&self) -> usize {
        self.n() - 1
    }

    pub fn lateral_shift(&self, lat: usize, axis: usize, step: isize) -> usize {
        let [i, j] = self.lat_index(lat);
        let mut idx = [i as isize, j as isize];
        idx[axis] += step;
        self.lat_flat(idx)
    }
}

/// Convenience constructor for the common uniform case.
pub fn build_strip(n: usize, h: f64, mesh: f64, period: f64) -> Result<StripDomain> {
    StripDomain::build(n, h, mesh, period)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        let d = build_strip(2, 1.0, 1.0 / 64.0, 1.0).unwrap();
        assert_eq!(d.cell_shape(), (64, 64));
        assert_eq!(d.n_layers(), 65);
        let d3 = build_strip(3, 1.0, 1.0 / 32.0, 1.0).unwrap();
        assert_eq!(d3.cell_shape(), (32, 32 * 32));
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(build_strip(2, 1.0, 2.0, 1.0).is_err());
        assert!(build_strip(2, 1.0, 0.3, 1.0).is_err());
        assert!(build_strip(4, 1.0, 0.25, 1.0).is_err());
        assert!(build_strip(2, -1.0, 0.25, 1.0).is_err());
    }

    #[test]
    fn grading_inserts_geometric_layers() {
        let d = build_strip(2, 1.0, 0.25, 1.0).unwrap().with_grading(3).unwrap();
        assert_eq!(d.x0_nodes(), &[0.0, 0.03125, 0.0625, 0.125, 0.25, 0.5, 0.75, 1.0]);
        let total: f64 = (0..d.n_layers()).map(|l| d.layer_weight(l)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn delta_is_height() {
        let d = build_strip(2, 2.0, 0.5, 1.0).unwrap();
        for l in 0..d.n_layers() {
            assert_eq!(d.delta(l), d.node_coords(d.node(l, 1))[0]);
        }
    }

    #[test]
    fn periodic_distance_uses_minimal_image() {
        let d = build_strip(3, 1.0, 0.125, 1.0).unwrap();
        let dist = d.lateral_distance([0.05, 0.95], [0.95, 0.05]);
        assert!((dist - (0.1f64 * 0.1 * 2.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let d = build_strip(2, 1.0, 0.25, 1.0).unwrap();
        let s = serde_json::to_string(d.spec()).unwrap();
        let back: StripSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(&back, d.spec());
    }
}
