use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::StripDomain;

/// Periodic Dirichlet data on the lateral torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumSpec {
    Constant {
        value: [f64; 2],
    },
    /// `amplitude exp(2 pi i (m1 x1 + m2 x2) / period)`.
    Fourier {
        mode: [i32; 2],
        #[serde(default = "unit")]
        amplitude: [f64; 2],
    },
    /// `amplitude (1 - |x' - center|^2 / radius^2)^2_+`.
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "unit")]
        amplitude: [f64; 2],
    },
    /// `(1 + depth cos(2 pi x1 / period)) exp(2 pi i carrier x1 / period)`.
    Modulated {
        carrier: i32,
        depth: f64,
    },
    /// Indicator of `x1 < fraction * period`.
    Step {
        fraction: f64,
    },
    Sum {
        terms: Vec<DatumSpec>,
    },
}

fn unit() -> [f64; 2] {
    [1.0, 0.0]
}

impl DatumSpec {
    pub fn eval(&self, domain: &StripDomain, x: [f64; 2]) -> Complex64 {
        let p = domain.period();
        match self {
            DatumSpec::Constant { value } => Complex64::new(value[0], value[1]),
            DatumSpec::Fourier { mode, amplitude } => {
                let phase = TAU * (mode[0] as f64 * x[0] + mode[1] as f64 * x[1]) / p;
                Complex64::new(amplitude[0], amplitude[1]) * Complex64::from_polar(1.0, phase)
            }
            DatumSpec::Bump {
                center,
                radius,
                amplitude,
            } => {
                let c = [center.first().copied().unwrap_or(0.0), center.get(1).copied().unwrap_or(0.0)];
                let s = domain.lateral_distance(x, c) / radius;
                let v = if s < 1.0 { (1.0 - s * s).powi(2) } else { 0.0 };
                Complex64::new(amplitude[0], amplitude[1]) * v
            }
            DatumSpec::Modulated { carrier, depth } => {
                let env = 1.0 + depth * (TAU * x[0] / p).cos();
                Complex64::from_polar(env, TAU * *carrier as f64 * x[0] / p)
            }
            DatumSpec::Step { fraction } => {
                if x[0].rem_euclid(p) < fraction * p {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::default()
                }
            }
            DatumSpec::Sum { terms } => terms.iter().map(|t| t.eval(domain, x)).sum(),
        }
    }

    /// Values at the boundary nodes, in lateral order.
    pub fn sample(&self, domain: &StripDomain) -> Vec<Complex64> {
        (0..domain.n_lateral())
            .map(|lat| self.eval(domain, domain.lateral_coords(lat)))
            .collect()
    }

    /// Lateral points where the datum is discontinuous.
    pub fn jumps(&self, domain: &StripDomain) -> Vec<f64> {
        match self {
            DatumSpec::Step { fraction } => vec![0.0, fraction * domain.period()],
            DatumSpec::Sum { terms } => terms.iter().flat_map(|t| t.jumps(domain)).collect(),
            _ => vec![],
        }
    }

    /// The standard family: constant, two lateral modes, and a localized bump.
    pub fn standard_family(n: usize) -> Vec<DatumSpec> {
        let center = vec![0.5; n - 1];
        vec![
            DatumSpec::Constant { value: [1.0, 0.0] },
            DatumSpec::Fourier {
                mode: [1, 0],
                amplitude: unit(),
            },
            DatumSpec::Fourier {
                mode: [2, 0],
                amplitude: unit(),
            },
            DatumSpec::Bump {
                center,
                radius: 0.25,
                amplitude: unit(),
            },
        ]
    }
}
