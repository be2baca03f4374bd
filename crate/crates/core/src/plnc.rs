//! Bitwise XOR network coding.
//!
//! After decoding both uplink streams the relay side keeps only their XOR.
//! Each destination undoes the combination with its own transmitted bits, so
//! one stored stream serves both directions of the exchange.

use crate::error::{Error, Result};

/// XOR of two equal-length bit strings.
pub fn xor_combine(a: &[u8], b: &[u8]) -> Result<Vec<u8>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "cannot combine bit strings of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    debug_assert!(a.iter().chain(b).all(|&x| x <= 1));
    Ok(a.iter().zip(b).map(|(x, y)| x ^ y).collect())
}

/// Recovers the partner's bits from the decoded combination and the
/// receiver's own contribution. XOR is self-inverse, so this is the same
/// operation as [`xor_combine`].
pub fn recover_partner(own: &[u8], combined: &[u8]) -> Result<Vec<u8>> {
    xor_combine(own, combined)
}

/// A stored group of XOR-combined packets together with the ground-truth
/// source bits needed to score the eventual deliveries.
#[derive(Debug, Clone, PartialEq)]
pub struct XorPacketGroup {
    /// One combined bit string per source antenna stream.
    pub z_packets: Vec<Vec<u8>>,
    /// Bits source 1 actually sent, per antenna stream.
    pub truth_x1: Vec<Vec<u8>>,
    /// Bits source 2 actually sent, per antenna stream.
    pub truth_x2: Vec<Vec<u8>>,
    /// Slot index at which the group entered the buffer.
    pub stored_slot: u64,
}
