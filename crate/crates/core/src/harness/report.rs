use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Relative spread below which a fitted constant counts as refinement-stable.
pub const STABILITY_THRESHOLD: f64 = 0.25;
/// Safety factor applied to the largest observed ratio.
pub const SAFETY_MARGIN: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

/// One sampled instance of an inequality `lhs <= C rhs`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub label: String,
    pub mesh: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl Instance {
    pub fn new(label: impl Into<String>, mesh: f64, lhs: f64, rhs: f64) -> Self {
        Self {
            label: label.into(),
            mesh,
            lhs,
            rhs,
        }
    }

    /// Smallest admissible constant for this instance; `0/0` counts as 0.
    pub fn ratio(&self) -> f64 {
        if self.lhs <= 0.0 {
            0.0
        } else if self.rhs <= 0.0 {
            f64::INFINITY
        } else {
            self.lhs / self.rhs
        }
    }
}

/// Fitted constant at one refinement level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrendPoint {
    pub mesh: f64,
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub id: String,
    pub title: String,
    pub parameters: Value,
    /// Largest ratio over all instances.
    pub fitted: f64,
    /// `fitted` times the safety margin.
    pub envelope: f64,
    pub trend: Vec<TrendPoint>,
    /// `(max - min) / max` of the trend constants.
    pub variation: f64,
    pub verdict: Verdict,
    /// Controls are designed to fail.
    pub expected_fail: bool,
    pub instances: Vec<Instance>,
    /// Check-specific numbers.
    pub diagnostics: Value,
    pub notes: Vec<String>,
}

/// `(max - min) / max`; zero for constant or empty input.
pub fn relative_variation(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max <= 0.0 {
        return 0.0;
    }
    if !max.is_finite() {
        return f64::INFINITY;
    }
    (max - min) / max
}

/// Per-level constants (max ratio over instances at that mesh), in mesh order.
pub fn trend_by_mesh(instances: &[Instance]) -> Vec<TrendPoint> {
    let mut meshes: Vec<f64> = instances.iter().map(|i| i.mesh).collect();
    meshes.sort_by(|a, b| b.total_cmp(a));
    meshes.dedup();
    meshes
        .into_iter()
        .map(|mesh| TrendPoint {
            mesh,
            constant: instances
                .iter()
                .filter(|i| i.mesh == mesh)
                .map(Instance::ratio)
                .fold(0.0, f64::max),
        })
        .collect()
}

impl VerificationReport {
    /// Fits the constant over all instances and applies the default rule:
    /// pass iff the constant is finite and refinement-stable.
    pub fn fitted(id: &str, title: &str, parameters: Value, instances: Vec<Instance>) -> Self {
        let trend = trend_by_mesh(&instances);
        let fitted = instances.iter().map(Instance::ratio).fold(0.0, f64::max);
        let constants: Vec<f64> = trend.iter().map(|t| t.constant).collect();
        let variation = relative_variation(&constants);
        let verdict = if fitted.is_finite() && variation < STABILITY_THRESHOLD {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            id: id.into(),
            title: title.into(),
            parameters,
            fitted,
            envelope: fitted * SAFETY_MARGIN,
            trend,
            variation,
            verdict,
            expected_fail: false,
            instances,
            diagnostics: Value::Null,
            notes: vec![],
        }
    }

    pub fn with_diagnostics(mut self, d: Value) -> Self {
        self.diagnostics = d;
        self
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Downgrades the verdict to fail with a reason.
    pub fn fail(&mut self, why: impl Into<String>) {
        self.verdict = Verdict::Fail;
        self.notes.push(why.into());
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub const CSV_HEADER: &'static str = "id,verdict,expected_fail,fitted,variation,levels,instances";

    pub fn csv_row(&self) -> String {
        let levels: Vec<String> = self.trend.iter().map(|t| format!("{:.6e}", t.constant)).collect();
        format!(
            "{},{},{},{:.6e},{:.4},{},{}",
            self.id,
            serde_json::to_value(self.verdict).unwrap().as_str().unwrap(),
            self.expected_fail,
            self.fitted,
            self.variation,
            levels.join(";"),
            self.instances.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_and_variation() {
        let inst = vec![
            Instance::new("a", 0.5, 1.0, 1.0),
            Instance::new("b", 0.5, 2.0, 1.0),
            Instance::new("c", 0.25, 1.5, 1.0),
        ];
        let r = VerificationReport::fitted("x", "x", Value::Null, inst);
        assert_eq!(r.fitted, 2.0);
        assert_eq!(r.trend.len(), 2);
        assert!((r.variation - 0.25).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn zero_over_zero_is_zero() {
        assert_eq!(Instance::new("z", 1.0, 0.0, 0.0).ratio(), 0.0);
        assert!(Instance::new("z", 1.0, 1.0, 0.0).ratio().is_infinite());
    }
}
