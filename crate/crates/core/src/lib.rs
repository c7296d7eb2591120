//! Contrastive-loss analysis toolkit.
//!
//! Global and mini-batch contrastive losses (CL, DCL, NSCL) with analytic
//! gradients, class-geometry statistics, few-shot error bounds and
//! estimators, and an unconstrained-features trainer for studying collapse.

pub mod bounds;
pub mod embedspace;
pub mod error;
pub mod fewshot;
pub mod geometry;
pub mod losses;
pub mod rng;
pub mod ufm;

pub use embedspace::{EmbeddingSet, Labeling};
pub use error::{Error, Result};
pub use losses::{contrastive_loss, loss_gradient, LossKind, Objective};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/fewshot.md")]
    mod fewshot {}
    #[doc = include_str!("../../../book/src/collapse.md")]
    mod collapse {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
