//! Online sparse streaming feature selection.
//!
//! Streamed feature columns with missing entries are buffered into blocks,
//! completed by latent factor analysis, and screened online with
//! conditional-independence tests. A fuzzy significance band, driven by how
//! much of each block was missing, separates clearly relevant features from
//! borderline ones; borderline features are ranked by neighborhood rough set
//! dependency and the best are merged into the selection after every block.
//!
//! Modules, bottom-up: [`special`] and [`ci`] (tests), [`fuzzy`], [`nrs`],
//! [`lfa`] (block completion), [`data`] (datasets), [`selector`] (the online
//! loop), [`eval`] (cross-validation and Wilcoxon), [`cli`].

pub mod ci;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod fuzzy;
pub mod lfa;
pub mod nrs;
pub mod selector;
pub mod special;

pub use data::{Dataset, GroundTruth, Label, MaskSpec};
pub use error::{Error, Result};
pub use selector::{SelectionOutcome, SelectorConfig};
