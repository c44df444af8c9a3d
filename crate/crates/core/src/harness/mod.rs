//! Experiments that evaluate the inequalities on solved fields, fit their
//! constants and judge refinement stability.

pub mod balls;
pub mod experiments;
pub mod local;
pub mod report;

pub use balls::{ball_family, Ball};
pub use local::{adversarial_quotient, field_p_range, Chi};
pub use report::{Instance, TrendPoint, VerificationReport, Verdict};
pub use experiments::{resolve_ids, run_check, Problem, ALL_CHECKS, CHECK_IDS, CONTROL_IDS};
