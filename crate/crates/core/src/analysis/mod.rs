//! Bundled studies built on the core operations.

pub mod analyze;
pub mod euler_study;
pub mod regimes;

pub use analyze::{run_analyze, singularity_scan, AnalyzeReport};
pub use euler_study::{run_euler_study, EulerStudyRow};
pub use regimes::{classify_bursts, run_regimes, BurstStats, RegimeLabel, RegimeReport};
