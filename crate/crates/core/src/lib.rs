//! Literature exploration over abstract corpora.
//!
//! The crate retrieves documents with BM25, recognizes vocabulary concepts,
//! labels Population/Intervention/Outcome spans, and organizes a working set
//! of documents (a *briefcase*) into three views: PICO-typed concept
//! relations ready for a Sankey diagram, a 2-D topic map, and per-document
//! concept clouds ranked by log-likelihood keyness. An HTTP API composes the
//! views for a dashboard.
//!
//! Each capability has a runnable program under `examples/`:
//!
//! ```bash
//! cargo run -p litscope --example tag_concepts
//! cargo run -p litscope --example end_to_end
//! ```

pub mod analysis;
pub mod api;
pub mod briefcase;
pub mod corpus;
pub mod error;
pub mod fixtures;
pub mod keyness;
pub mod pico;
pub mod relations;
pub mod search;
pub mod topics;
pub mod vocab;

pub use error::{Error, Result};
