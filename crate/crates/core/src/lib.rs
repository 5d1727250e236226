//! Causal measurement of metro service disruptions.
//!
//! Estimates the direct and network-spillover effects of service disruptions
//! on five station-level outcomes (entry/exit ridership, average journey
//! time, average travel speed, on-board crowding density). Each station's
//! disrupted day is compared against a synthetic control: a convex
//! combination of fully undisrupted donor days whose pre-disruption
//! characteristics mimic the disrupted day. A deterministic metro-day
//! simulator produces paired disrupted/undisrupted datasets with known
//! ground-truth effects, which back the test suites.

pub mod config;
pub mod data;
pub mod detect;
pub mod network;
pub mod outcomes;
pub mod report;
pub mod scm;
pub mod simgen;
pub mod spillover;

mod error;
mod seed;

pub use error::{Error, Result};
