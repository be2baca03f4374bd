//! Link-level Monte Carlo simulator for cloud-aided multi-way buffer-aided
//! MIMO relay networks.
//!
//! Two protocols are modelled over per-slot Rayleigh block fading. The
//! cloud-aided protocol pools decoded uplink traffic in per-cluster cloud
//! buffers as XOR-combined packet groups and serves each cluster through
//! the best relay pair; the max-link baseline buffers at individual relays
//! and activates the single best link. Both select links by the largest
//! worst-case candidate-pair distance under an exhaustive ML detector, and
//! both report bit error rate, average sum-rate and average buffering
//! delay across an SNR sweep.
//!
//! [`engine`] holds the per-slot state machines, [`cli`] the batch driver;
//! the remaining modules are the building blocks they compose.

pub mod analysis;
pub mod buffers;
pub mod channel;
pub mod cli;
pub mod detection;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod modem;
pub mod plnc;
pub mod selection;

pub use error::{Error, Result};
