//! Full-graph GNN training and evaluation for multi-label node
//! classification: graph data model, reverse-mode tensor primitives, three
//! strengthened backbones (GCN, SSGConv, GCNII), seven ranking metrics, and
//! a seeded training/ablation harness.

pub mod backbones;
pub mod data;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod nn;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
