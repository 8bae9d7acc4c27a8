//! Link-level simulator of an outdoor 60 GHz link that falls back to the
//! ground-reflected path when a pedestrian blocks line of sight.
//!
//! Layers, bottom up: [`geometry`] and [`codebook`] describe the link and the
//! arrays, [`channel`] turns them into RSS, [`blockage`] moves pedestrians
//! through the link, [`protocol`] holds the beam-management state machines,
//! [`engine`] runs them tick by tick, [`metrics`] scores the records and
//! [`trace`] replays recorded per-beam RSS.

// `!(x > 0.0)` is how validation rejects NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blockage;
pub mod channel;
pub mod codebook;
pub mod engine;
pub mod geometry;
pub mod metrics;
pub mod protocol;
pub mod trace;
