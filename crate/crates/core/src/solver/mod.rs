//! Discrete energy solutions on `(0, h) x T^{n-1}` with `u = f` at `x0 = 0`
//! and `u = 0` at `x0 = h`.

pub mod assemble;
pub mod banded;
pub mod datum;
pub mod solution;
pub mod sparse;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use assemble::{assemble, n_unknowns, unknown_index, LinearSystem, Source};
pub use datum::DatumSpec;
pub use solution::{read_binary, CellSample, GridFile, SolutionField, SolveStats};

use crate::coefficients::{normalize_first_row, CoefficientField, CoefficientModel, PulledBackModel};
use crate::error::{PellError, Result};
use crate::geometry::{pullback_map, GraphDomain, Pullback, StripDomain};
use banded::BandedLu;
use sparse::{gmres, norm2, Ilu0};

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Banded LU when it is affordable, GMRES otherwise.
    #[default]
    Auto,
    Direct,
    Gmres,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub method: SolverMethod,
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    pub initial_guess: Option<Vec<C>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolverMethod::Auto,
            tol: 1e-10,
            restart: 80,
            max_iter: 20_000,
            initial_guess: None,
        }
    }
}

/// Unknown count below which a direct factorization is allowed.
pub const DIRECT_LIMIT: usize = 100_000;
/// Budget for `n * bandwidth^2` in the banded factorization.
const DIRECT_WORK: f64 = 4e9;

fn residual(sys: &LinearSystem, x: &[C]) -> (Vec<C>, f64) {
    let ax = sys.matrix.mul(x);
    let r: Vec<C> = sys.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let rel = norm2(&r) / norm2(&sys.rhs).max(1e-300);
    (r, rel)
}

/// Solves the assembled system to relative residual `opts.tol`.
pub fn solve_system(sys: &LinearSystem, opts: &SolveOptions) -> Result<(Vec<C>, SolveStats)> {
    let n = sys.matrix.n;
    if norm2(&sys.rhs) == 0.0 {
        return Ok((
            vec![C::default(); n],
            SolveStats {
                method: "trivial".into(),
                iterations: 0,
                relative_residual: 0.0,
                unknowns: n,
            },
        ));
    }
    let bw = sys.matrix.half_bandwidth() as f64;
    let direct = match opts.method {
        SolverMethod::Direct => true,
        SolverMethod::Gmres => false,
        SolverMethod::Auto => n < DIRECT_LIMIT && n as f64 * bw * bw <= DIRECT_WORK,
    };
    if direct {
        if let Some(lu) = BandedLu::factor(&sys.matrix) {
            let mut x = lu.solve(&sys.rhs);
            let (mut r, mut rel) = residual(sys, &x);
            let mut steps = 0;
            while rel >= opts.tol && steps < 5 {
                let dx = lu.solve(&r);
                x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
                (r, rel) = residual(sys, &x);
                steps += 1;
            }
            if rel < opts.tol {
                return Ok((
                    x,
                    SolveStats {
                        method: "banded_lu".into(),
                        iterations: steps,
                        relative_residual: rel,
                        unknowns: n,
                    },
                ));
            }
        }
    }
    let ilu = Ilu0::new(&sys.matrix);
    let out = gmres(
        &sys.matrix,
        &sys.rhs,
        opts.initial_guess.as_deref(),
        ilu.as_ref(),
        opts.restart,
        opts.tol,
        opts.max_iter,
    );
    if !out.converged {
        return Err(PellError::NoConvergence {
            iterations: out.iterations,
            residual: out.relative_residual,
        });
    }
    Ok((
        out.x,
        SolveStats {
            method: if ilu.is_some() { "gmres_ilu0" } else { "gmres" }.into(),
            iterations: out.iterations,
            relative_residual: out.relative_residual,
            unknowns: n,
        },
    ))
}

/// Assembles and solves; `datum` holds one value per boundary node.
pub fn solve(
    field: &CoefficientField,
    domain: &StripDomain,
    datum: &[C],
    source: Option<Source<'_>>,
    opts: &SolveOptions,
) -> Result<SolutionField> {
    let sys = assemble(field, domain, datum, source);
    let (x, stats) = solve_system(&sys, opts)?;
    let mut u = vec![C::default(); domain.n_nodes()];
    u[..domain.n_lateral()].copy_from_slice(datum);
    for layer in 1..domain.n_layers() - 1 {
        for lat in 0..domain.n_lateral() {
            u[domain.node(layer, lat)] = x[unknown_index(domain, layer, lat)];
        }
    }
    Ok(SolutionField::from_nodes(domain.clone(), u, stats))
}

pub fn solve_datum(
    field: &CoefficientField,
    domain: &StripDomain,
    datum: &DatumSpec,
    opts: &SolveOptions,
) -> Result<SolutionField> {
    solve(field, domain, &datum.sample(domain), None, opts)
}

/// Solution on a graph domain, represented on its parameter strip.
#[derive(Debug)]
pub struct GraphSolution {
    /// `v = u ∘ rho` on the strip nodes.
    pub strip_solution: SolutionField,
    /// Physical coordinates `rho(y)` of every strip node.
    pub physical_nodes: Vec<[f64; 3]>,
    pub gamma: f64,
    pub min_d0rho0: f64,
    pub normalization_warnings: Vec<String>,
}

impl GraphSolution {
    /// Physical value `u(x)` at a node.
    pub fn value(&self, node: usize) -> C {
        self.strip_solution.u[node]
    }
}

/// Pulls the operator back to the strip, normalizes the first row, solves,
/// and reports the solution together with the physical node positions.
pub fn solve_on_graph(
    model: Arc<dyn CoefficientModel>,
    graph: &GraphDomain,
    gamma: Option<f64>,
    datum: &DatumSpec,
    opts: &SolveOptions,
) -> Result<GraphSolution> {
    let pb: Pullback = pullback_map(graph, gamma)?;
    let strip = &graph.strip;
    let pulled = Arc::new(PulledBackModel {
        base: model,
        pullback: pb.clone(),
    });
    let field = CoefficientField::sample(strip, pulled, "pullback".into())?;
    let norm = normalize_first_row(&field, strip)?;
    let sol = solve_datum(&norm.field, strip, datum, opts)?;
    let physical_nodes = (0..strip.n_nodes()).map(|id| pb.rho(strip.node_coords(id))).collect();
    Ok(GraphSolution {
        strip_solution: sol,
        physical_nodes,
        gamma: pb.gamma,
        min_d0rho0: pb.min_d0rho0,
        normalization_warnings: norm.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{make_field, FieldSpec};
    use crate::geometry::build_strip;
    use serde_json::json;

    #[test]
    fn linear_profile_is_exact() {
        let d = build_strip(2, 1.0, 1.0 / 16.0, 1.0).unwrap();
        let f = make_field(
            &d,
            &FieldSpec::Constant {
                a: json!([[1, 0], [0, 1]]),
                b: None,
            },
        )
        .unwrap();
        let datum = DatumSpec::Constant { value: [1.0, 0.0] };
        // the Krylov error is bounded by the condition number times the tolerance
        for (method, bound) in [(SolverMethod::Direct, 1e-12), (SolverMethod::Gmres, 1e-8)] {
            let opts = SolveOptions {
                method,
                ..Default::default()
            };
            let u = solve_datum(&f, &d, &datum, &opts).unwrap();
            let err = u.max_error(|x| C::new(1.0 - x[0], 0.0));
            assert!(err < bound, "{method:?} {err:e}");
            assert!(u.stats.relative_residual < 1e-10);
        }
    }

    #[test]
    fn zero_datum_gives_zero() {
        let d = build_strip(2, 1.0, 0.125, 1.0).unwrap();
        let f = make_field(
            &d,
            &FieldSpec::Constant {
                a: json!([[1, 0], [0, 1]]),
                b: None,
            },
        )
        .unwrap();
        let u = solve(&f, &d, &vec![C::default(); d.n_lateral()], None, &SolveOptions::default()).unwrap();
        assert!(u.u.iter().all(|z| *z == C::default()));
    }
}
