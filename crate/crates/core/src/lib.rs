pub mod java;
pub mod graph;
pub mod engine;
pub mod patch;
pub mod metrics;
pub mod eval;
pub mod config;
pub mod workspace;
pub mod service;
pub mod cli;
