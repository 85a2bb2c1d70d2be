//! Probability of robust stability for polynomials with deterministic and random parameters.

pub mod expr;
pub mod param;
pub mod poly;
pub mod robust;
pub mod estimate;
pub mod region;
pub mod mixed;

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    pub mod expressions {}
    #[doc = include_str!("../../../book/src/stability.md")]
    pub mod stability {}
    #[doc = include_str!("../../../book/src/robustness.md")]
    pub mod robustness {}
    #[doc = include_str!("../../../book/src/problems.md")]
    pub mod problems {}
    #[doc = include_str!("../../../book/src/regions.md")]
    pub mod regions {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
