//! Labelled-set selection and supervision scheduling for semi-supervised
//! learning over precomputed embeddings, with a desk-scale simulator and a
//! seeded benchmark harness.
//!
//! The pipeline has four stages, each its own module:
//!
//! 1. [`ingest`] loads embedding matrices, labels, and prediction matrices
//!    from bit-exact file formats.
//! 2. [`cluster`] partitions the pool (K-Means, K-Means++, bisecting
//!    variants) and [`select`] turns a clustering into a labelled set by
//!    taking the member nearest each centroid, with balanced and random
//!    baselines.
//! 3. [`curriculum`] orders a selection for injection (prediction entropy or
//!    seeded-random) and [`policy`] maps epochs to active labelled counts.
//! 4. [`sslsim`] trains a small semi-supervised classifier on synthetic
//!    blobs, and [`bench`] runs paired multi-seed comparisons and renders
//!    mean ± std reports.
//!
//! Everything is deterministic: all randomness flows from explicit seeds
//! through [`seeding`], and equal inputs reproduce equal outputs bit for bit.
//! The `book/` directory of the repository walks through the concepts; its
//! chapters are compiled as doctests via the [`guide`] module.

pub mod bench;
pub mod cluster;
pub mod curriculum;
pub mod guide;
pub mod ingest;
pub mod policy;
pub mod seeding;
pub mod select;
pub mod sslsim;
