//! Firm lifecycle series from monthly registry snapshots, officer identity
//! resolution, and SARIMA counterfactuals for excess firm creation and closure.

pub mod calendar;
pub mod ingest;
pub mod officers;
pub mod status;
pub mod ts;
pub mod selection;
pub mod breaks;
pub mod excess;
pub mod fixture;
pub mod pipeline;
