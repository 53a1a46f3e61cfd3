//! Deterministic remediation pipeline over a toy block-graph artifact model.
//!
//! The pipeline runs four stages per vulnerability candidate:
//!
//! 1. candidate acquisition and ranking ([`caca`]),
//! 2. operational-state reachability verification ([`osva`]),
//! 3. tiered remediation synthesis ([`rsa`]),
//! 4. closed-loop correctness validation ([`cva`]),
//!
//! orchestrated by [`controller`] over cases loaded from JSON manifests
//! ([`manifest`]). Everything is deterministic under a fixed seed: the
//! constraint solver ([`constraint`]) is a budgeted backtracking enumerator
//! over finite declared domains, path scoring uses a term-frequency embedder,
//! and all collections iterate in a stable order.

pub mod artifact;
pub mod caca;
pub mod config;
pub mod constraint;
pub mod controller;
pub mod cva;
pub mod encode;
pub mod interp;
pub mod manifest;
pub mod osva;
pub mod rsa;
pub mod ssckg;
pub mod vocab;

pub use config::Config;
