//! Budgeted online selection of federated-learning clients.
//!
//! A server sees `N` candidate clients one at a time and must irrevocably
//! pick `R` of them. Each candidate is probed (one round of local training
//! from a shared initial model, scored on the server's test set), the first
//! `α*` probes only calibrate a threshold, and later candidates are accepted
//! when they beat it. The crate provides the threshold math, the online
//! policies and baselines, a small deterministic FedAvg trainer, data and
//! flow-feature pipelines, and an experiment harness.

pub mod data;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fl;
pub mod flow;
pub mod montecarlo;
pub mod policy;
pub mod rng;
pub mod stopping;

pub use error::{Error, Result};
