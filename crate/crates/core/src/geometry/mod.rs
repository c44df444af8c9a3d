//! Strips, graph domains, nontangential cones and dyadic tents.

pub mod cache;
pub mod cone;
pub mod graph;
pub mod strip;
pub mod tents;

pub use cache::MaskCache;
pub use cone::{cell_coverage, cone_mask, lift_count, ConeGeometry, ConeStencil};
pub use graph::{
    default_gamma, pullback_coefficients, pullback_map, GraphDomain, Mollifier, Profile, Pullback, RhoJacobian,
};
pub use strip::{build_strip, StripDomain, StripSpec};
pub use tents::{dyadic_tents, flat_sigma, DyadicTentSystem, Tent};
