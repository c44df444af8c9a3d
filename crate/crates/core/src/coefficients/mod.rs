//! Coefficient models, sampled fields, Carleson densities and the first-row
//! normalization.

pub mod carleson;
pub mod field;
pub mod model;
pub mod normalize;

pub use carleson::{carleson_density, carleson_norm, whitney_sup, CarlesonDensity, CarlesonKind, CarlesonReport};
pub use field::{make_field, CoefficientField};
pub use model::{CoefficientModel, ConstantModel, DriftModel, FieldSpec, FormulaModel, PulledBackModel};
pub use normalize::{normalize_first_row, Normalization, NormalizedModel};
