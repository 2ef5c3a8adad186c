//! Symbolic imitation learning for highway driving.
//!
//! The crate covers the whole pipeline: a small Horn-clause dialect
//! ([`logic`]), the eight-sector driving vocabulary ([`domain`]), example
//! generation over factored state spaces ([`knowledge`]), a
//! learning-from-failures rule inducer ([`ilp`]), the rule-aggregating driving
//! policy ([`policy`]), a deterministic highway simulator ([`sim`]),
//! trajectory ingestion ([`ingest`]) and a neural behavior-cloning baseline
//! ([`dil`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dil;
pub mod domain;
pub mod experiment;
pub mod ilp;
pub mod ingest;
pub mod knowledge;
pub mod logic;
pub mod policy;
pub mod sim;

mod fsutil;
