//! Machine-translation evaluation workbench.

pub mod corpus;
pub mod stats;
pub mod qa;
pub mod embeddings;
pub mod estimator;
pub mod service;
pub mod cli;
