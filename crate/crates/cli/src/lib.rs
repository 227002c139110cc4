//! Command-line runner and benchmark harness for `ssk-core`.
//!
//! [`methods`] wraps each selection method behind one call, [`report`] holds
//! per-trial records and their aggregates, and [`commands`] implements the
//! `ssk` verbs on top of both.

pub mod commands;
pub mod methods;
pub mod report;
