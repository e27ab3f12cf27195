// `!(x > 0.0)` is how NaN is rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod phase;
pub mod potential;
pub mod quad;
pub mod radon;
pub mod reconstruct;
pub mod separation;
pub mod special;
pub mod symbol;

pub use error::{Error, Result};

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/phase.md")]
    mod phase {}
    #[doc = include_str!("../../../book/src/symbol.md")]
    mod symbol {}
    #[doc = include_str!("../../../book/src/separation.md")]
    mod separation {}
    #[doc = include_str!("../../../book/src/radon.md")]
    mod radon {}
    #[doc = include_str!("../../../book/src/reconstruct.md")]
    mod reconstruct {}
}
