//! Accessibility, seeds, reachability sampling and control-set evidence.

pub mod estimate;
pub mod larc;
pub mod pipeline;
pub mod reach;
pub mod seed;
pub mod shooting;

pub use estimate::{control_set_estimate, fiber_closure_check, ControlSetEstimate, EstimateParams, FiberReport};
pub use larc::{larc_check, AccessibilityReport};
pub use pipeline::{full_pipeline, Outcome, PipelineConfig, PipelineReport};
pub use reach::{reach_sample, ReachCloud, ReachParams};
pub use seed::{seed_family_scan, seed_finder, ScanOptions, ScanReport, SeedCertificate};
pub use shooting::{cross_reachability, ShootingOutcome, ShootingParams};
