//! Global minimization of smooth functions on the unit sphere of `R^d`.
//!
//! Quasi-uniform seeded sampling is followed by pattern search over plane
//! rotations, started from the best few samples. Objectives may return
//! `+inf` (or NaN) to exclude a point.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug)]
pub struct SphereSearch {
    /// Random samples drawn before refinement.
    pub samples: usize,
    pub seed: u64,
    /// Number of best samples used as refinement starts.
    pub refine_starts: usize,
    /// Initial rotation angle of the pattern search.
    pub initial_step: f64,
    /// Refinement stops once the rotation angle drops below this.
    pub min_step: f64,
    pub max_evaluations: usize,
}

impl Default for SphereSearch {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0x5eed_2024,
            refine_starts: 6,
            initial_step: 0.05,
            min_step: 1e-10,
            max_evaluations: 400_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SphereMin {
    pub value: f64,
    pub point: Vec<f64>,
}

impl SphereSearch {
    /// Cheaper configuration for per-node sweeps over fields.
    pub fn fast() -> Self {
        Self {
            samples: 1_500,
            refine_starts: 2,
            min_step: 1e-8,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn minimize<F>(&self, dim: usize, f: F) -> SphereMin
    where
        F: Fn(&[f64]) -> f64,
    {
        assert!(dim >= 1, "sphere dimension must be positive");
        let eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut candidates: Vec<(f64, Vec<f64>)> = Vec::with_capacity(self.samples + 2 * dim * dim);
        for x in structured_points(dim) {
            candidates.push((eval(&x), x));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.samples {
            let mut x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if normalize(&mut x) {
                candidates.push((eval(&x), x));
            }
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

        let mut best = SphereMin {
            value: f64::INFINITY,
            point: candidates
                .first()
                .map(|c| c.1.clone())
                .unwrap_or_else(|| unit(dim, 0)),
        };
        let starts = self.refine_starts.max(1).min(candidates.len());
        let budget = self.max_evaluations / starts.max(1);
        for (v0, x0) in candidates.into_iter().take(starts) {
            if !v0.is_finite() {
                continue;
            }
            let (v, x) = self.refine(&eval, x0, v0, budget);
            if v < best.value {
                best = SphereMin { value: v, point: x };
            }
        }
        best
    }

    pub fn maximize<F>(&self, dim: usize, f: F) -> SphereMin
    where
        F: Fn(&[f64]) -> f64,
    {
        let m = self.minimize(dim, |x| -f(x));
        SphereMin {
            value: -m.value,
            point: m.point,
        }
    }

    fn refine<F>(&self, f: &F, mut x: Vec<f64>, mut fx: f64, budget: usize) -> (f64, Vec<f64>)
    where
        F: Fn(&[f64]) -> f64,
    {
        let dim = x.len();
        if dim == 1 {
            return (fx, x);
        }
        let mut step = self.initial_step;
        let mut evals = 0usize;
        let mut trial = x.clone();
        while step > self.min_step && evals < budget {
            let mut improved = false;
            let (s, c) = step.sin_cos();
            for i in 0..dim {
                for j in (i + 1)..dim {
                    for sign in [1.0, -1.0] {
                        trial.copy_from_slice(&x);
                        let (xi, xj) = (x[i], x[j]);
                        trial[i] = c * xi - sign * s * xj;
                        trial[j] = sign * s * xi + c * xj;
                        let ft = f(&trial);
                        evals += 1;
                        if ft < fx {
                            fx = ft;
                            x.copy_from_slice(&trial);
                            improved = true;
                            break;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            } else {
                normalize(&mut x);
                fx = fx.min(f(&x));
            }
        }
        (fx, x)
    }
}

fn unit(dim: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[k] = 1.0;
    e
}

/// Coordinate axes and diagonal pairs `(e_i +- e_j)/sqrt 2`.
fn structured_points(dim: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        pts.push(unit(dim, i));
        for j in (i + 1)..dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[i] = r;
                e[j] = s * r;
                pts.push(e);
            }
        }
    }
    pts
}

fn normalize(x: &mut [f64]) -> bool {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-300 || !norm.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    true
}
