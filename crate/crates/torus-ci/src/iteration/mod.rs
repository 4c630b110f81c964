//! The convex-integration iteration: schedule, one-level construction, the `v1`
//! fixed point, the driver and its ledger.

pub mod construct;
pub mod driver;
pub mod ledger;
pub mod params;
pub mod solve;
pub mod track;

pub use driver::{build_level, init_state, iterate, Context, DiagnosticsConfig, LevelReport, LevelState};
pub use ledger::LedgerRow;
pub use params::{IterationParams, LevelOverride, LevelPlan};
pub use track::Track;
