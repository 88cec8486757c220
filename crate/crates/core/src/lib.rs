//! Granular biclustering of gene expression matrices.
//!
//! Each gene row is summarized by ordered information granules (fuzzy
//! c-means prototypes or justifiable-granularity intervals), its conditions
//! are labeled by granule, and greedy chains over the resulting trend signs
//! give initial biclusters. Those are refined under mean squared residue and
//! mean fluctuation degree. A Cheng-Church baseline, a planted-block
//! generator and file I/O round out the crate.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bicluster;
pub mod cc;
pub mod error;
pub mod fcm;
pub mod granule;
pub mod io;
pub mod jig;
pub mod matrix;
pub mod pipeline;
pub mod pso;
pub mod refine;
pub mod score;
pub mod search;
pub mod seed;
pub mod synth;
pub mod trend;

pub use bicluster::{Bicluster, Provenance};
pub use error::{Error, Result};
pub use matrix::ExpressionMatrix;
pub use pipeline::{run_pipeline, RunBundle, RunConfig};
