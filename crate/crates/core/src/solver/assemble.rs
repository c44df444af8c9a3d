//! Conservative finite differences for `div(A grad u) + B . grad u = F`.
//!
//! Diagonal fluxes use `A` at edge midpoints; mixed derivatives use the
//! centered four-corner stencil with `A` at nodes; drift is centered. Each
//! row is multiplied by `-V` (the dual-cell volume) so that the matrix is the
//! discrete sesquilinear form and `A = I` gives the 5-point Laplacian.

use num_complex::Complex64;
use rayon::prelude::*;

use super::sparse::CsrMatrix;
use crate::coefficients::CoefficientField;
use crate::geometry::StripDomain;

type C = Complex64;

/// Manufactured right-hand side `F(x)` in `L u = F`.
pub type Source<'a> = &'a (dyn Fn([f64; 3]) -> C + Sync);

pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<C>,
}

/// Unknown index of an interior node; layers `1 ..= n_layers - 2` are free.
#[inline]
pub fn unknown_index(domain: &StripDomain, layer: usize, lat: usize) -> usize {
    (layer - 1) * domain.n_lateral() + lat
}

pub fn n_unknowns(domain: &StripDomain) -> usize {
    (domain.n_layers() - 2) * domain.n_lateral()
}

pub fn assemble(
    field: &CoefficientField,
    domain: &StripDomain,
    datum: &[C],
    source: Option<Source<'_>>,
) -> LinearSystem {
    assert_eq!(datum.len(), domain.n_lateral(), "datum must have one value per boundary node");
    let n = domain.n();
    let top = domain.n_layers() - 1;
    let m = domain.lateral_mesh();
    let model = &field.model;
    let constant = model.is_constant();
    let a_at = |x: [f64; 3]| {
        if constant {
            field.a_nodes[0].clone()
        } else {
            model.a(x)
        }
    };
    let rows: Vec<(Vec<(usize, C)>, C)> = (0..n_unknowns(domain))
        .into_par_iter()
        .map(|row| {
            let layer = row / domain.n_lateral() + 1;
            let lat = row % domain.n_lateral();
            let node = domain.node(layer, lat);
            let x = domain.node_coords(node);
            let hm = domain.x0(layer) - domain.x0(layer - 1);
            let hp = domain.x0(layer + 1) - domain.x0(layer);
            let wbar = 0.5 * (hm + hp);
            let vol = wbar * domain.lateral_cell_measure();
            let mut entries: Vec<(usize, C)> = Vec::with_capacity(9 + 8 * n);
            let mut rhs = source.map(|f| -vol * f(x)).unwrap_or_default();
            let mut add = |l: usize, lt: usize, c_op: C| {
                if c_op == C::default() {
                    return;
                }
                let coef = -vol * c_op;
                if l == 0 {
                    rhs -= coef * datum[lt];
                } else if l < top {
                    entries.push((unknown_index(domain, l, lt), coef));
                }
            };

            let mut xp = x;
            xp[0] = 0.5 * (domain.x0(layer) + domain.x0(layer + 1));
            let mut xm = x;
            xm[0] = 0.5 * (domain.x0(layer) + domain.x0(layer - 1));
            let ap = a_at(xp).get(0, 0);
            let am = a_at(xm).get(0, 0);
            add(layer + 1, lat, ap / (wbar * hp));
            add(layer - 1, lat, am / (wbar * hm));
            add(layer, lat, -(ap / hp + am / hm) / wbar);

            let b = &field.b_nodes[node];
            let s0 = 1.0 / (hp + hm);
            add(layer + 1, lat, b[0] * s0);
            add(layer - 1, lat, -b[0] * s0);

            for d in 1..n {
                let axis = d - 1;
                let plus = domain.lateral_shift(lat, axis, 1);
                let minus = domain.lateral_shift(lat, axis, -1);
                let mut xl = x;
                xl[d] += 0.5 * m;
                let lp = a_at(xl).get(d, d);
                xl[d] -= m;
                let lm = a_at(xl).get(d, d);
                add(layer, plus, lp / (m * m));
                add(layer, minus, lm / (m * m));
                add(layer, lat, -(lp + lm) / (m * m));

                add(layer, plus, b[d] / (2.0 * m));
                add(layer, minus, -b[d] / (2.0 * m));

                // d0 (A_0d d_d u) + d_d (A_d0 d0 u)
                let s = s0 / (2.0 * m);
                let up = &field.a_nodes[domain.node(layer + 1, lat)];
                let dn = &field.a_nodes[domain.node(layer - 1, lat)];
                let (a0d_up, a0d_dn) = (up.get(0, d), dn.get(0, d));
                let ad0_p = field.a_nodes[domain.node(layer, plus)].get(d, 0);
                let ad0_m = field.a_nodes[domain.node(layer, minus)].get(d, 0);
                add(layer + 1, plus, (a0d_up + ad0_p) * s);
                add(layer + 1, minus, -(a0d_up + ad0_m) * s);
                add(layer - 1, plus, -(a0d_dn + ad0_p) * s);
                add(layer - 1, minus, (a0d_dn + ad0_m) * s);

                // d_d (A_dl d_l u) for lateral l != d
                for l in 1..n {
                    if l == d {
                        continue;
                    }
                    let sl = 1.0 / (4.0 * m * m);
                    let adl_p = field.a_nodes[domain.node(layer, plus)].get(d, l);
                    let adl_m = field.a_nodes[domain.node(layer, minus)].get(d, l);
                    let pp = domain.lateral_shift(plus, l - 1, 1);
                    let pm = domain.lateral_shift(plus, l - 1, -1);
                    let mp = domain.lateral_shift(minus, l - 1, 1);
                    let mm = domain.lateral_shift(minus, l - 1, -1);
                    add(layer, pp, adl_p * sl);
                    add(layer, pm, -adl_p * sl);
                    add(layer, mp, -adl_m * sl);
                    add(layer, mm, adl_m * sl);
                }
            }
            (entries, rhs)
        })
        .collect();
    let mut rhs = Vec::with_capacity(rows.len());
    let mut mat_rows = Vec::with_capacity(rows.len());
    for (r, b) in rows {
        mat_rows.push(r);
        rhs.push(b);
    }
    LinearSystem {
        matrix: CsrMatrix::from_rows(mat_rows),
        rhs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{make_field, FieldSpec};
    use crate::geometry::build_strip;
    use serde_json::json;

    fn laplace_field(d: &StripDomain) -> CoefficientField {
        make_field(
            d,
            &FieldSpec::Constant {
                a: json!([[1, 0], [0, 1]]),
                b: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn identity_gives_five_point_stencil() {
        let d = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let f = laplace_field(&d);
        let sys = assemble(&f, &d, &vec![C::default(); d.n_lateral()], None);
        let row = unknown_index(&d, 3, 4);
        let entries: Vec<(usize, C)> = sys.matrix.row(row).collect();
        assert_eq!(entries.len(), 5);
        for (c, v) in entries {
            let expect = if c == row { 4.0 } else { -1.0 };
            assert!((v - C::new(expect, 0.0)).norm() < 1e-12, "{c} {v}");
        }
    }

    #[test]
    fn drift_breaks_symmetry() {
        let d = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let f = make_field(
            &d,
            &FieldSpec::Drift {
                base: None,
                kappa: vec![[0.5, 0.0], [0.0, 0.0]],
                offset: 0.1,
            },
        )
        .unwrap();
        let sys = assemble(&f, &d, &vec![C::default(); d.n_lateral()], None);
        let r = unknown_index(&d, 3, 4);
        let up = unknown_index(&d, 4, 4);
        assert!((sys.matrix.get(r, up) - sys.matrix.get(up, r)).norm() > 1e-3);
    }

    #[test]
    fn datum_enters_first_layer_rhs() {
        let d = build_strip(2, 1.0, 0.25, 1.0).unwrap();
        let f = laplace_field(&d);
        let datum = vec![C::new(1.0, 0.0); d.n_lateral()];
        let sys = assemble(&f, &d, &datum, None);
        assert!((sys.rhs[unknown_index(&d, 1, 0)] - C::new(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(sys.rhs[unknown_index(&d, 2, 0)], C::default());
    }
}
