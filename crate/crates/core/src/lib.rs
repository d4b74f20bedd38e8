//! Hyperbolic address-role inference for token transaction graphs.
//!
//! Addresses are embedded in the Poincaré ball so that hyperbolic radius
//! tracks structural depth, smoothed with trust weights derived from transfer
//! volatility, and classified from ball coordinates, random-walk vectors and
//! neighbourhood radius statistics.

// Index loops mirror the maths; `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bucketing;
pub mod config;
pub mod embed;
pub mod error;
pub mod geometry;
pub mod hierfeat;
pub mod io;
pub mod lar;
pub mod pipeline;
pub mod roleclf;
pub mod synth;
pub mod txgraph;
pub mod walkfeat;

pub use bucketing::{BucketRuleSet, RoleLabel, RoleRuleSet};
pub use config::PipelineConfig;
pub use embed::{EmbeddingMatrix, TrainConfig};
pub use error::{Error, ErrorKind, Result};
pub use geometry::{BallPoint, GeometryConfig, PoincareBall};
pub use io::NodeMatrix;
pub use lar::RefineConfig;
pub use roleclf::{Ablation, ClassifierConfig, RoleModel};
pub use txgraph::{LabeledAddress, TransactionRecord, TxGraph};
pub use walkfeat::WalkConfig;
