//! Word-level recognition of semantic differences between two documents.
//!
//! Every word of a document pair gets a score of how much it contributes to a
//! difference in meaning, from one of three unsupervised signals computed on a
//! masked language model's outputs:
//!
//! - [`metrics::diff_align`]: how poorly the token aligns to any token of the other side,
//! - [`metrics::diff_del`]: how much the pooled similarity changes when the token is left out,
//! - [`metrics::diff_mask`]: how little the other document helps the model predict the token.
//!
//! The crate also builds the evaluation datasets ([`datagen`]) and scores
//! predictions against gold labels ([`eval`]). Hidden states come from an
//! [`encoders::Encoder`]; no neural inference happens here.
//!
//! ```
//! use semdiff_core::document::{LabeledPair, Source, TokenizedDocument};
//! use semdiff_core::encoders::MockEncoder;
//! use semdiff_core::metrics::{score_pair, MetricConfig, MetricKind};
//!
//! let pair = LabeledPair {
//!     pair_id: "example".into(),
//!     source: Source::Ists,
//!     inversions: 0,
//!     side_a: TokenizedDocument::from_text("en", "Nice sweater !", None),
//!     side_b: TokenizedDocument::from_text("en", "Great sweater !", None),
//! };
//! let encoder = MockEncoder::new(0, 64, 8)?;
//! let (a, _b) = score_pair(&pair, &MetricConfig::new(MetricKind::Align, 8), &encoder)?;
//! assert!(a.word_scores[0] > a.word_scores[1]);
//! # Ok::<(), semdiff_core::Error>(())
//! ```

pub mod datagen;
pub mod document;
pub mod encoders;
mod error;
pub mod eval;
pub mod io;
pub mod metrics;

pub use error::{Diagnosed, Error, Result};
