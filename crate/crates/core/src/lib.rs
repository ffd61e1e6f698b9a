pub mod algebra;
pub mod conjugacy;
pub mod dichotomy;
pub mod error;
pub mod experiment;
pub mod exprlang;
pub mod stability;
pub mod trajectories;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/library.md")]
    mod library {}
    #[doc = include_str!("../../../book/src/stability.md")]
    mod stability {}
}
