//! Core of the tsflow toolkit: the tswf-schema vocabulary, the workflow
//! document model, time-series analytics and the execution engine.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod document;
pub mod vocabulary;
pub mod series;
pub mod analysis;
pub mod models;
pub mod metrics;
pub mod engine;
