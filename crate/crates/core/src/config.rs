//! Experiment configuration files and the shipped presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::coefficients::FieldSpec;
use crate::error::{PellError, Result};
use crate::geometry::{Profile, StripDomain, StripSpec};
use crate::harness::Chi;
use crate::solver::DatumSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default = "two")]
    pub n: usize,
    #[serde(default = "unit")]
    pub h: f64,
    #[serde(default = "unit")]
    pub period: f64,
    /// Strip heights used by the Dirichlet check.
    #[serde(default = "default_heights")]
    pub heights: Vec<f64>,
    #[serde(default)]
    pub grading_levels: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            n: 2,
            h: 1.0,
            period: 1.0,
            heights: default_heights(),
            grading_levels: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    #[serde(default = "default_q")]
    pub q: Vec<f64>,
}

impl Default for Exponents {
    fn default() -> Self {
        Self {
            p: default_p(),
            q: default_q(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Apertures {
    #[serde(default = "unit")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
}

impl Default for Apertures {
    fn default() -> Self {
        Self { a: 1.0, b: 2.0 }
    }
}

/// Fixed physical balls for the interior inequalities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallSettings {
    /// Heights of the centers, as fractions of `h`.
    pub heights: Vec<f64>,
    /// Radii, as fractions of `h`.
    pub radii: Vec<f64>,
    pub lateral_points: usize,
}

impl Default for BallSettings {
    fn default() -> Self {
        Self {
            heights: vec![0.5],
            radii: vec![0.08, 0.1, 0.12],
            lateral_points: 8,
        }
    }
}

/// Drift-amplitude sweep of the Dirichlet check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    /// Field to which the drift is added; defaults to the experiment field.
    #[serde(default)]
    pub base: Option<FieldSpec>,
    /// Unit drift direction `kappa_j` (complex pairs), scaled by each amplitude.
    pub direction: Vec<[f64; 2]>,
    #[serde(default = "default_offset")]
    pub offset: f64,
    pub amplitudes: Vec<f64>,
    /// Mesh used for the sweep.
    #[serde(default = "default_sweep_mesh")]
    pub mesh: f64,
    /// Breakdown is declared once `C` exceeds this multiple of its initial value.
    #[serde(default = "default_breakdown")]
    pub breakdown_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoodLambdaSettings {
    pub gammas: Vec<f64>,
    /// Number of geometric levels between `nu0` and `max S`.
    pub levels: usize,
    /// Dimensional constant in `nu0^p = c mean N_b^p`.
    pub nu0_constant: f64,
    /// Overrides the experiment apertures for this check.
    #[serde(default)]
    pub apertures: Option<Apertures>,
    /// Overrides the first experiment datum for this check.
    #[serde(default)]
    pub datum: Option<DatumSpec>,
}

impl Default for GoodLambdaSettings {
    fn default() -> Self {
        Self {
            gammas: vec![0.5, 0.25, 0.125],
            levels: 200,
            nu0_constant: 1.0,
            apertures: None,
            datum: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSettings {
    /// Extra boundary refinement levels of the graded grid.
    pub grading_levels: usize,
    pub tolerance: f64,
    pub min_fraction: f64,
    /// Errors must decrease at heights up to this multiple of `h`.
    pub monotone_below: f64,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self {
            grading_levels: 8,
            tolerance: 1e-3,
            min_fraction: 0.99,
            monotone_below: 0.0625,
        }
    }
}

/// Parameters of the matrix-level studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixStudySettings {
    pub gammas: Vec<f64>,
    pub random_matrices: usize,
    pub exponents: usize,
    pub identity_samples: usize,
    pub identity_exponents: Vec<f64>,
}

impl Default for MatrixStudySettings {
    fn default() -> Self {
        Self {
            gammas: vec![0.5, 1.0, 2.0],
            random_matrices: 200,
            exponents: 20,
            identity_samples: 10_000,
            identity_exponents: vec![1.5, 2.0, 3.0, 4.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSettings {
    #[serde(default)]
    pub balls: BallSettings,
    #[serde(default = "default_chi")]
    pub chi: Vec<Chi>,
    /// Exponent of the adversarial dissipativity control.
    #[serde(default = "default_control_p")]
    pub control_p: f64,
    #[serde(default)]
    pub sweep: Option<SweepSettings>,
    #[serde(default)]
    pub good_lambda: GoodLambdaSettings,
    #[serde(default)]
    pub trace: TraceSettings,
    #[serde(default)]
    pub matrix_study: MatrixStudySettings,
    /// Global rescaling used by the homogeneity rerun, `[re, im]`.
    #[serde(default = "default_scale")]
    pub homogeneity_scale: [f64; 2],
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            balls: BallSettings::default(),
            chi: default_chi(),
            control_p: default_control_p(),
            sweep: None,
            good_lambda: GoodLambdaSettings::default(),
            trace: TraceSettings::default(),
            matrix_study: MatrixStudySettings::default(),
            homogeneity_scale: default_scale(),
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub domain: DomainConfig,
    pub field: FieldSpec,
    /// Graph boundary `x0 = phi(x')`; the flat strip when absent.
    #[serde(default)]
    pub graph: Option<Profile>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_data")]
    pub data: Vec<DatumSpec>,
    #[serde(default)]
    pub exponents: Exponents,
    #[serde(default)]
    pub apertures: Apertures,
    #[serde(default = "default_meshes")]
    pub meshes: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Checks run by `verify` when no ids are given.
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub settings: CheckSettings,
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(PellError::Config(s));
        if self.meshes.is_empty() {
            return bad("at least one mesh is required".into());
        }
        if self.meshes.iter().any(|m| !(*m > 0.0)) {
            return bad("meshes must be positive".into());
        }
        if self.meshes.windows(2).any(|w| w[1] >= w[0]) {
            return bad("meshes must be strictly decreasing".into());
        }
        if !(self.apertures.a > 0.0 && self.apertures.b > self.apertures.a) {
            return bad("apertures need 0 < a < b".into());
        }
        if self.exponents.p.iter().chain(&self.exponents.q).any(|p| !(*p > 1.0)) {
            return bad("exponents must exceed 1".into());
        }
        if self.data.is_empty() {
            return bad("at least one datum is required".into());
        }
        if self.domain.heights.iter().any(|h| !(*h > 0.0)) {
            return bad("heights must be positive".into());
        }
        if !matches!(self.domain.n, 2 | 3) {
            return bad(format!("dimension {} is not supported", self.domain.n));
        }
        Ok(())
    }

    /// Keeps the first `levels` meshes, halving the last one to extend.
    pub fn with_mesh_levels(mut self, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(PellError::Config("mesh levels must be positive".into()));
        }
        while self.meshes.len() < levels {
            let last = *self.meshes.last().unwrap();
            self.meshes.push(0.5 * last);
        }
        self.meshes.truncate(levels);
        Ok(self)
    }

    pub fn strip(&self, h: f64, mesh: f64) -> Result<StripDomain> {
        StripDomain::new(StripSpec {
            n: self.domain.n,
            h,
            mesh_x0: mesh,
            lateral_mesh: None,
            period: self.domain.period,
            grading_levels: self.domain.grading_levels,
        })
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn two() -> usize {
    2
}
fn unit() -> f64 {
    1.0
}
fn default_b() -> f64 {
    2.0
}
fn default_heights() -> Vec<f64> {
    vec![1.0, 2.0, 4.0]
}
fn default_p() -> Vec<f64> {
    vec![2.0]
}
fn default_q() -> Vec<f64> {
    vec![2.0]
}
fn default_meshes() -> Vec<f64> {
    vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
}
fn default_epsilon() -> Vec<f64> {
    vec![0.0, 0.01, 0.1]
}
fn default_chi() -> Vec<Chi> {
    vec![Chi::One, Chi::Cutoff { radius: 0.25 }]
}
fn default_control_p() -> f64 {
    8.0
}
fn default_scale() -> [f64; 2] {
    [3.0, 4.0]
}
fn default_offset() -> f64 {
    0.1
}
fn default_sweep_mesh() -> f64 {
    1.0 / 32.0
}
fn default_breakdown() -> f64 {
    10.0
}
fn default_data() -> Vec<DatumSpec> {
    vec![DatumSpec::Fourier {
        mode: [1, 0],
        amplitude: [1.0, 0.0],
    }]
}

/// Presets shipped with the library, one per acceptance criterion plus the
/// named fields they are built from.
pub const PRESETS: &[(&str, &str)] = &[
    ("laplace", include_str!("../presets/laplace.json")),
    ("block", include_str!("../presets/block.json")),
    ("complex-identity", include_str!("../presets/complex_identity.json")),
    ("oscillatory", include_str!("../presets/oscillatory.json")),
    ("graph", include_str!("../presets/graph.json")),
    ("ac01-p0-closed-form", include_str!("../presets/ac01_p0_closed_form.json")),
    ("ac02-delta-p-equivalence", include_str!("../presets/ac02_delta_p_equivalence.json")),
    ("ac03-l28-identity", include_str!("../presets/ac03_l28_identity.json")),
    ("ac04-solver-order", include_str!("../presets/ac04_solver_order.json")),
    ("ac05-fubini", include_str!("../presets/ac05_fubini.json")),
    ("ac06-dissipativity", include_str!("../presets/ac06_dissipativity.json")),
    ("ac07-reverse-holder", include_str!("../presets/ac07_reverse_holder.json")),
    ("ac07-reverse-holder-complex", include_str!("../presets/ac07_reverse_holder_complex.json")),
    ("ac08-square-ntm", include_str!("../presets/ac08_square_ntm.json")),
    ("ac09-dirichlet", include_str!("../presets/ac09_dirichlet.json")),
    ("ac10-good-lambda", include_str!("../presets/ac10_good_lambda.json")),
    ("ac11-trace", include_str!("../presets/ac11_trace.json")),
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| PellError::Config(format!("unknown preset '{name}'")))?;
    ExperimentConfig::from_json_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn missing_field_is_a_schema_error() {
        let err = ExperimentConfig::from_json_str(r#"{"domain": {"n": 2}}"#).unwrap_err();
        assert!(matches!(err, PellError::Json(_)), "{err}");
    }

    #[test]
    fn meshes_must_decrease() {
        let err = ExperimentConfig::from_json_str(
            r#"{"field": {"kind": "constant", "a": [[1,0],[0,1]]}, "meshes": [0.25, 0.5]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, PellError::Config(_)));
    }

    #[test]
    fn mesh_levels_extend_by_halving() {
        let cfg = preset("laplace").unwrap().with_mesh_levels(4).unwrap();
        assert_eq!(cfg.meshes.len(), 4);
        assert_eq!(cfg.meshes[3], 0.5 * cfg.meshes[2]);
    }
}
