//! Order-based MRI protocol assignment.
//!
//! Free-text indications and diagnoses are normalized and one-hot encoded,
//! scored by a fully connected network, and routed either to
//! auto-protocoling (top-1) or to clinical decision support (top-k) by the
//! gap between the two highest normalized scores.

pub mod cli;
pub mod corpus;
pub mod economics;
pub mod evalkit;
pub mod neural;
pub mod pipeline;
pub mod protocols;
pub mod router;
pub mod service;
pub mod synthgen;
