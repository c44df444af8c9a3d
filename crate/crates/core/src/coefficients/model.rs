use std::f64::consts::TAU;
use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, HashMapContext, Node, Value as EValue};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ellipticity::ComplexMatrix;
use crate::error::{PellError, Result};
use crate::geometry::{pullback_coefficients, Pullback};

const FD_STEP: f64 = 1e-5;

/// Pointwise coefficients `A(x)`, `B(x)` of `div(A grad u) + B . grad u`.
///
/// Points are `[x0, x1, x2]`; unused lateral coordinates are zero.
pub trait CoefficientModel: Send + Sync {
    fn n(&self) -> usize;
    fn a(&self, x: [f64; 3]) -> ComplexMatrix;
    fn b(&self, x: [f64; 3]) -> Vec<Complex64>;

    /// `d A / d x_k`, centered differences (one-sided near `x0 = 0`).
    fn da(&self, x: [f64; 3], k: usize) -> ComplexMatrix {
        let (lo, hi, w) = fd_points(x, k);
        let d = self.a(hi).add(&self.a(lo).scale(Complex64::new(-1.0, 0.0)));
        d.scale(Complex64::new(1.0 / w, 0.0))
    }

    /// Whether `A` and `B` are constant; lets assembly skip re-evaluation.
    fn is_constant(&self) -> bool {
        false
    }
}

pub(crate) fn fd_points(x: [f64; 3], k: usize) -> ([f64; 3], [f64; 3], f64) {
    let mut lo = x;
    let mut hi = x;
    if k == 0 && x[0] < FD_STEP {
        hi[0] += FD_STEP;
        (lo, hi, FD_STEP)
    } else {
        lo[k] -= FD_STEP;
        hi[k] += FD_STEP;
        (lo, hi, 2.0 * FD_STEP)
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn c(z: [f64; 2]) -> Complex64 {
    Complex64::new(z[0], z[1])
}

/// Constant coefficients.
#[derive(Clone, Debug)]
pub struct ConstantModel {
    pub a: ComplexMatrix,
    pub b: Vec<Complex64>,
}

impl CoefficientModel for ConstantModel {
    fn n(&self) -> usize {
        self.a.dim()
    }
    fn a(&self, _: [f64; 3]) -> ComplexMatrix {
        self.a.clone()
    }
    fn b(&self, _: [f64; 3]) -> Vec<Complex64> {
        self.b.clone()
    }
    fn da(&self, _: [f64; 3], _: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.a.dim(), |_, _| zero())
    }
    fn is_constant(&self) -> bool {
        true
    }
}

/// `A = base + s(x) E` for a scalar profile `s`, plus a drift `B_j = kappa_j / (x0 + offset)`.
pub struct ProfileModel {
    pub base: ComplexMatrix,
    pub direction: ComplexMatrix,
    pub profile: Box<dyn Fn([f64; 3]) -> (Complex64, [Complex64; 3]) + Send + Sync>,
    pub kappa: Vec<Complex64>,
    pub offset: f64,
}

impl CoefficientModel for ProfileModel {
    fn n(&self) -> usize {
        self.base.dim()
    }
    fn a(&self, x: [f64; 3]) -> ComplexMatrix {
        let (s, _) = (self.profile)(x);
        self.base.add(&self.direction.scale(s))
    }
    fn b(&self, x: [f64; 3]) -> Vec<Complex64> {
        let d = x[0] + self.offset;
        self.kappa.iter().map(|k| if *k == zero() { zero() } else { k / d }).collect()
    }
    fn da(&self, x: [f64; 3], k: usize) -> ComplexMatrix {
        let (_, g) = (self.profile)(x);
        self.direction.scale(g[k])
    }
}

/// Entry-wise formulas in the variables `x0`, `x1`, `x2`, `pi`, `period`.
pub struct FormulaModel {
    n: usize,
    a: Vec<(Node, Node)>,
    b: Vec<(Node, Node)>,
    period: f64,
}

impl FormulaModel {
    pub fn new(n: usize, a: &[[String; 2]], b: &[[String; 2]], period: f64) -> Result<Self> {
        if a.len() != n * n {
            return Err(PellError::Formula(format!("need {} entries for A", n * n)));
        }
        if !b.is_empty() && b.len() != n {
            return Err(PellError::Formula(format!("need {n} entries for B")));
        }
        let parse = |s: &str| build_operator_tree(s).map_err(|e| PellError::Formula(format!("{s}: {e}")));
        let pairs = |v: &[[String; 2]]| -> Result<Vec<(Node, Node)>> {
            v.iter().map(|[re, im]| Ok((parse(re)?, parse(im)?))).collect()
        };
        let model = Self {
            n,
            a: pairs(a)?,
            b: pairs(b)?,
            period,
        };
        model.try_eval(&model.a, [0.5, 0.25, 0.25])?;
        model.try_eval(&model.b, [0.5, 0.25, 0.25])?;
        Ok(model)
    }

    fn try_eval(&self, nodes: &[(Node, Node)], x: [f64; 3]) -> Result<Vec<Complex64>> {
        let mut ctx = HashMapContext::new();
        let vars = [
            ("x0", x[0]),
            ("x1", x[1]),
            ("x2", x[2]),
            ("pi", std::f64::consts::PI),
            ("period", self.period),
        ];
        for (k, v) in vars {
            ctx.set_value(k.into(), EValue::Float(v))
                .map_err(|e| PellError::Formula(e.to_string()))?;
        }
        nodes
            .iter()
            .map(|(re, im)| {
                let r = re.eval_number_with_context(&ctx);
                let i = im.eval_number_with_context(&ctx);
                match (r, i) {
                    (Ok(r), Ok(i)) if r.is_finite() && i.is_finite() => Ok(Complex64::new(r, i)),
                    (Err(e), _) | (_, Err(e)) => Err(PellError::Formula(e.to_string())),
                    _ => Err(PellError::Formula(format!("non-finite value at {x:?}"))),
                }
            })
            .collect()
    }
}

impl CoefficientModel for FormulaModel {
    fn n(&self) -> usize {
        self.n
    }
    fn a(&self, x: [f64; 3]) -> ComplexMatrix {
        let e = self.try_eval(&self.a, x).unwrap_or_else(|e| panic!("formula failed: {e}"));
        ComplexMatrix::new(self.n, e).expect("formula matrix has n^2 finite entries")
    }
    fn b(&self, x: [f64; 3]) -> Vec<Complex64> {
        if self.b.is_empty() {
            return vec![zero(); self.n];
        }
        self.try_eval(&self.b, x).unwrap_or_else(|e| panic!("formula failed: {e}"))
    }
}

/// Adds `kappa / (x0 + offset)` to the drift of another model.
pub struct DriftModel {
    pub inner: Arc<dyn CoefficientModel>,
    pub kappa: Vec<Complex64>,
    pub offset: f64,
}

impl CoefficientModel for DriftModel {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn a(&self, x: [f64; 3]) -> ComplexMatrix {
        self.inner.a(x)
    }
    fn b(&self, x: [f64; 3]) -> Vec<Complex64> {
        let s = 1.0 / (x[0].max(0.0) + self.offset);
        self.inner
            .b(x)
            .into_iter()
            .zip(&self.kappa)
            .map(|(b, k)| b + k * s)
            .collect()
    }
    fn da(&self, x: [f64; 3], k: usize) -> ComplexMatrix {
        self.inner.da(x, k)
    }
}

/// Coefficients transported to the parameter strip of a graph domain.
pub struct PulledBackModel {
    pub base: Arc<dyn CoefficientModel>,
    pub pullback: Pullback,
}

impl CoefficientModel for PulledBackModel {
    fn n(&self) -> usize {
        self.base.n()
    }
    fn a(&self, y: [f64; 3]) -> ComplexMatrix {
        self.eval(y).0
    }
    fn b(&self, y: [f64; 3]) -> Vec<Complex64> {
        self.eval(y).1
    }
}

impl PulledBackModel {
    fn eval(&self, y: [f64; 3]) -> (ComplexMatrix, Vec<Complex64>) {
        let x = self.pullback.rho(y);
        let jac = self.pullback.jacobian(y);
        pullback_coefficients(&self.base.a(x), &self.base.b(x), &jac)
            .expect("pullback Jacobian checked positive at construction")
    }
}

/// Generator families for coefficient fields (the `field` object of a config).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// Constant `A` (JSON matrix) and optional constant `B`.
    Constant {
        a: Value,
        #[serde(default)]
        b: Option<Vec<[f64; 2]>>,
    },
    /// `A00 = 1`, `A0j = Aj0 = 0`, lateral block scaled by
    /// `1 + amplitude cos(2 pi mode x1 / period)`.
    Block {
        lateral: Vec<Vec<[f64; 2]>>,
        #[serde(default)]
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
    },
    /// `A = base + amplitude cos(2 pi mode x1 / period) E`.
    TIndependent {
        base: Value,
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
        #[serde(default)]
        direction: Option<Value>,
    },
    /// `A = base + i epsilon sin(frequency ln(1 + x0 / scale)) E`.
    Oscillatory {
        #[serde(default)]
        base: Option<Value>,
        epsilon: f64,
        frequency: f64,
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default)]
        direction: Option<Value>,
    },
    /// Constant `A` with drift `B_j = kappa_j / (x0 + offset)`, so `K = max |kappa_j|`.
    Drift {
        #[serde(default)]
        base: Option<Value>,
        kappa: Vec<[f64; 2]>,
        #[serde(default)]
        offset: f64,
    },
    /// Any field plus the drift `kappa_j / (x0 + offset)`.
    WithDrift {
        base: Box<FieldSpec>,
        kappa: Vec<[f64; 2]>,
        #[serde(default)]
        offset: f64,
    },
    /// Entry formulas `[re, im]`, row-major.
    Formula {
        a: Vec<[String; 2]>,
        #[serde(default)]
        b: Vec<[String; 2]>,
    },
}

fn one() -> u32 {
    1
}

fn default_scale() -> f64 {
    0.05
}

fn matrix_or_identity(v: &Option<Value>, n: usize) -> Result<ComplexMatrix> {
    match v {
        Some(v) => checked_dim(ComplexMatrix::from_json(v)?, n),
        None => Ok(ComplexMatrix::identity(n)),
    }
}

fn checked_dim(m: ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    if m.dim() != n {
        return Err(PellError::InvalidMatrix(format!(
            "matrix has dimension {}, domain has {n}",
            m.dim()
        )));
    }
    Ok(m)
}

/// Off-diagonal symmetric coupling between `x0` and `x1`.
fn default_direction(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |i, j| {
        if (i, j) == (0, 1) || (i, j) == (1, 0) {
            Complex64::new(1.0, 0.0)
        } else {
            zero()
        }
    })
}

impl FieldSpec {
    pub fn build(&self, n: usize, period: f64) -> Result<Arc<dyn CoefficientModel>> {
        let none = vec![zero(); n];
        let model: Arc<dyn CoefficientModel> = match self {
            FieldSpec::Constant { a, b } => {
                let a = checked_dim(ComplexMatrix::from_json(a)?, n)?;
                let b = match b {
                    Some(b) if b.len() != n => {
                        return Err(PellError::Config(format!("B needs {n} entries")))
                    }
                    Some(b) => b.iter().map(|z| c(*z)).collect(),
                    None => none,
                };
                Arc::new(ConstantModel { a, b })
            }
            FieldSpec::Block {
                lateral,
                amplitude,
                mode,
            } => {
                if lateral.len() != n - 1 || lateral.iter().any(|r| r.len() != n - 1) {
                    return Err(PellError::InvalidMatrix(format!(
                        "lateral block must be {0}x{0}",
                        n - 1
                    )));
                }
                let base = ComplexMatrix::from_fn(n, |i, j| match (i, j) {
                    (0, 0) => Complex64::new(1.0, 0.0),
                    (0, _) | (_, 0) => zero(),
                    _ => c(lateral[i - 1][j - 1]),
                });
                let direction = ComplexMatrix::from_fn(n, |i, j| if i == 0 || j == 0 { zero() } else { base.get(i, j) });
                let k = TAU * *mode as f64 / period;
                let amp = *amplitude;
                Arc::new(ProfileModel {
                    base,
                    direction,
                    profile: Box::new(move |x| {
                        let s = amp * (k * x[1]).cos();
                        let g = -amp * k * (k * x[1]).sin();
                        (s.into(), [zero(), g.into(), zero()])
                    }),
                    kappa: none,
                    offset: 0.0,
                })
            }
            FieldSpec::TIndependent {
                base,
                amplitude,
                mode,
                direction,
            } => {
                let base = checked_dim(ComplexMatrix::from_json(base)?, n)?;
                let direction = match direction {
                    Some(d) => checked_dim(ComplexMatrix::from_json(d)?, n)?,
                    None => ComplexMatrix::identity(n),
                };
                let k = TAU * *mode as f64 / period;
                let amp = *amplitude;
                Arc::new(ProfileModel {
                    base,
                    direction,
                    profile: Box::new(move |x| {
                        let s = amp * (k * x[1]).cos();
                        let g = -amp * k * (k * x[1]).sin();
                        (s.into(), [zero(), g.into(), zero()])
                    }),
                    kappa: none,
                    offset: 0.0,
                })
            }
            FieldSpec::Oscillatory {
                base,
                epsilon,
                frequency,
                scale,
                direction,
            } => {
                if !(*scale > 0.0) {
                    return Err(PellError::Config("oscillatory scale must be positive".into()));
                }
                let base = matrix_or_identity(base, n)?;
                let direction = match direction {
                    Some(d) => checked_dim(ComplexMatrix::from_json(d)?, n)?,
                    None => default_direction(n),
                };
                let (eps, w, s) = (*epsilon, *frequency, *scale);
                Arc::new(ProfileModel {
                    base,
                    direction,
                    profile: Box::new(move |x| {
                        let t = w * (1.0 + x[0].max(0.0) / s).ln();
                        let val = Complex64::new(0.0, eps * t.sin());
                        let d0 = Complex64::new(0.0, eps * w * t.cos() / (s + x[0].max(0.0)));
                        (val, [d0, zero(), zero()])
                    }),
                    kappa: none,
                    offset: 0.0,
                })
            }
            FieldSpec::Drift { base, kappa, offset } => {
                if kappa.len() != n {
                    return Err(PellError::Config(format!("kappa needs {n} entries")));
                }
                if *offset < 0.0 {
                    return Err(PellError::Config("drift offset must be nonnegative".into()));
                }
                let base = matrix_or_identity(base, n)?;
                Arc::new(ProfileModel {
                    direction: ComplexMatrix::from_fn(n, |_, _| zero()),
                    base,
                    profile: Box::new(|_| (zero(), [zero(); 3])),
                    kappa: kappa.iter().map(|z| c(*z)).collect(),
                    offset: *offset,
                })
            }
            FieldSpec::WithDrift { base, kappa, offset } => {
                if kappa.len() != n {
                    return Err(PellError::Config(format!("kappa needs {n} entries")));
                }
                if !(*offset > 0.0) {
                    return Err(PellError::Config("drift offset must be positive".into()));
                }
                Arc::new(DriftModel {
                    inner: base.build(n, period)?,
                    kappa: kappa.iter().map(|z| c(*z)).collect(),
                    offset: *offset,
                })
            }
            FieldSpec::Formula { a, b } => Arc::new(FormulaModel::new(n, a, b, period)?),
        };
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn spec_parses_from_json() {
        let s: FieldSpec = serde_json::from_value(json!({
            "kind": "constant", "a": [[[1, 1], [0, 0]], [[0, 0], [1, 1]]]
        }))
        .unwrap();
        let m = s.build(2, 1.0).unwrap();
        assert_eq!(m.a([0.3, 0.1, 0.0]).get(1, 1), Complex64::new(1.0, 1.0));
        assert!(m.is_constant());
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!(serde_json::from_value::<FieldSpec>(json!({"kind": "nope"})).is_err());
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let s = FieldSpec::Oscillatory {
            base: None,
            epsilon: 0.3,
            frequency: 2.0,
            scale: 0.1,
            direction: None,
        };
        let m = s.build(2, 1.0).unwrap();
        let x = [0.37, 0.2, 0.0];
        let (lo, hi, w) = fd_points(x, 0);
        let fd = (m.a(hi).get(0, 1) - m.a(lo).get(0, 1)) / w;
        assert!((fd - m.da(x, 0).get(0, 1)).norm() < 1e-8);
    }

    #[test]
    fn formula_model_evaluates() {
        let one = || ["1".to_string(), "0".to_string()];
        let zero = || ["0".to_string(), "0".to_string()];
        let a = vec![
            ["1 + 0.1 * x0".to_string(), "0".to_string()],
            zero(),
            zero(),
            one(),
        ];
        let m = FormulaModel::new(2, &a, &[], 1.0).unwrap();
        assert!((m.a([0.5, 0.0, 0.0]).re(0, 0) - 1.05).abs() < 1e-15);
        assert!((m.da([0.5, 0.0, 0.0], 0).re(0, 0) - 0.1).abs() < 1e-9);
        assert!(FormulaModel::new(2, &[one(), one(), one()], &[], 1.0).is_err());
        let bad = vec![["x0 +".to_string(), "0".to_string()], zero(), zero(), one()];
        assert!(FormulaModel::new(2, &bad, &[], 1.0).is_err());
    }

    #[test]
    fn drift_is_inverse_distance() {
        let s = FieldSpec::Drift {
            base: None,
            kappa: vec![[0.5, 0.0], [0.0, 0.0]],
            offset: 0.0,
        };
        let m = s.build(2, 1.0).unwrap();
        assert!((m.b([0.25, 0.0, 0.0])[0].re - 2.0).abs() < 1e-15);
    }
}
