//! Keeps the guide honest: every fenced Rust block in `book/src` compiles
//! and runs under `cargo test --doc -p restrata-book-tests`.
//!
//! mdbook does not run snippets against local crates by itself, so each
//! chapter is included as a module's documentation and rustdoc does the
//! work. One module per chapter keeps failures attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/diversity-loss.md")]
pub mod diversity_loss {}

#[doc = include_str!("../../../book/src/strata.md")]
pub mod strata {}

#[doc = include_str!("../../../book/src/rejection.md")]
pub mod rejection {}

#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}

#[doc = include_str!("../../../book/src/candidates.md")]
pub mod candidates {}

#[doc = include_str!("../../../book/src/subsets.md")]
pub mod subsets {}

#[doc = include_str!("../../../book/src/synthetic.md")]
pub mod synthetic {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}

#[doc = include_str!("../../../book/src/config-reference.md")]
pub mod config_reference {}
