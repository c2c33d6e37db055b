//! Safety Q-functions for reinforcement learning.
//!
//! A safety critic estimates the discounted probability of ever reaching a
//! failure state. Actions whose estimate is not below a threshold are masked
//! out of the policy, both while learning in a source task and while
//! fine-tuning in a target task.

pub mod envs;
pub mod error;
pub mod mdp;
pub mod nn;
pub mod oracle;
pub mod runner;
pub mod sac;
pub mod safety;

pub use error::{Result, SqrlError};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/safety-q-function.md")]
    mod safety_q_function {}
    #[doc = include_str!("../../../book/src/masking.md")]
    mod masking {}
    #[doc = include_str!("../../../book/src/failure-bound.md")]
    mod failure_bound {}
    #[doc = include_str!("../../../book/src/transfer.md")]
    mod transfer {}
    #[doc = include_str!("../../../book/src/multiplier.md")]
    mod multiplier {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
