//! The narrative guide, mirrored from the mdbook sources under `book/`.
//!
//! Each chapter is included verbatim as the documentation of an empty
//! module, so `cargo test --doc` compiles and runs every Rust snippet in the
//! book. The book and the doctests cannot drift apart: they are the same
//! files.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}

#[doc = include_str!("../../../book/src/clustering.md")]
pub mod clustering {}

#[doc = include_str!("../../../book/src/selection.md")]
pub mod selection {}

#[doc = include_str!("../../../book/src/schedules.md")]
pub mod schedules {}

#[doc = include_str!("../../../book/src/curriculum.md")]
pub mod curriculum_ordering {}

#[doc = include_str!("../../../book/src/simulator.md")]
pub mod simulator {}

#[doc = include_str!("../../../book/src/benchmarking.md")]
pub mod benchmarking {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
