//! Selective inference for CART regression trees.
//!
//! Fit a tree with [`cart::fit`], then test the difference in means between
//! sibling regions or the mean of a single region with
//! [`inference::infer_targets`]. P-values and confidence intervals condition on
//! the tree having been selected from the same data, using the exact set of
//! values of the test statistic that reproduce the selection event.

pub mod cart;
pub mod contrast;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod ext_float;
pub mod inference;
pub mod intervals;
pub mod oracle;
pub mod sim;
pub mod truncation;

pub use cart::{StoppingRule, Tree};
pub use contrast::{Contrast, ContrastKind};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use exec::Exec;
pub use intervals::{Interval, IntervalSet};
pub use truncation::{Branch, Conditioning, PermutationMode};
