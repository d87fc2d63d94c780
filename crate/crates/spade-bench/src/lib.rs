//! Criterion benchmark targets for the planner live under `benches/`; see
//! `benches/planning.rs`. This crate intentionally exports nothing.
