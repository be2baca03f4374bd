//! FIFO packet buffering.
//!
//! Buffers are organised as a bank of queues with a shared capacity. Entries
//! are whole [`XorPacketGroup`]s: one group per uplink slot, `group_size`
//! packets each, so a capacity of `J` packets holds `J / group_size` groups.
//! The multi-way protocol uses one queue per cluster at the cloud; the
//! baseline uses one queue per relay-cluster pair.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::plnc::XorPacketGroup;

/// Bank of bounded FIFO queues storing combined packet groups.
#[derive(Debug, Clone)]
pub struct BufferBank {
    queues: Vec<VecDeque<XorPacketGroup>>,
    capacity_groups: usize,
    group_size: usize,
}

impl BufferBank {
    /// `capacity_packets` is the per-queue limit in packets and must be a
    /// positive multiple of `group_size`.
    pub fn new(n_queues: usize, capacity_packets: usize, group_size: usize) -> Result<Self> {
        if n_queues == 0 || group_size == 0 || capacity_packets == 0 {
            return Err(Error::InvalidArgument(
                "buffer bank dimensions must be positive".into(),
            ));
        }
        if !capacity_packets.is_multiple_of(group_size) {
            return Err(Error::InvalidArgument(format!(
                "buffer capacity {capacity_packets} is not a multiple of group size {group_size}"
            )));
        }
        Ok(Self {
            queues: vec![VecDeque::new(); n_queues],
            capacity_groups: capacity_packets / group_size,
            group_size,
        })
    }

    pub fn n_queues(&self) -> usize {
        self.queues.len()
    }

    pub fn capacity_groups(&self) -> usize {
        self.capacity_groups
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn groups_stored(&self, queue: usize) -> usize {
        self.queues[queue].len()
    }

    pub fn packets_stored(&self, queue: usize) -> usize {
        self.queues[queue].len() * self.group_size
    }

    pub fn total_groups(&self) -> usize {
        self.queues.iter().map(|q| q.len()).sum()
    }

    pub fn total_packets(&self) -> usize {
        self.total_groups() * self.group_size
    }

    /// True when the queue has room for one more group.
    pub fn can_accept(&self, queue: usize) -> bool {
        self.queues[queue].len() < self.capacity_groups
    }

    /// True when the queue holds at least one group.
    pub fn has_group(&self, queue: usize) -> bool {
        !self.queues[queue].is_empty()
    }

    /// Appends a group to the queue's tail.
    pub fn store(&mut self, queue: usize, group: XorPacketGroup) -> Result<()> {
        if group.z_packets.len() != self.group_size {
            return Err(Error::DimensionMismatch(format!(
                "group of {} packets stored in bank with group size {}",
                group.z_packets.len(),
                self.group_size
            )));
        }
        if !self.can_accept(queue) {
            return Err(Error::Protocol(format!("store into full queue {queue}")));
        }
        self.queues[queue].push_back(group);
        Ok(())
    }

    /// Pops the oldest group and reports its queueing delay in slots.
    pub fn retrieve(&mut self, queue: usize, current_slot: u64) -> Result<(XorPacketGroup, u64)> {
        let group = self.queues[queue]
            .pop_front()
            .ok_or_else(|| Error::Protocol(format!("retrieve from empty queue {queue}")))?;
        let delay = current_slot
            .checked_sub(group.stored_slot)
            .ok_or_else(|| Error::Protocol("retrieval before storage slot".into()))?;
        Ok((group, delay))
    }

    /// Index of the non-empty queue holding the most packets; ties resolve
    /// to the lowest index. `None` when the whole bank is empty.
    pub fn fullest_queue(&self) -> Option<usize> {
        let (idx, len) = self
            .queues
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))?;
        if len.is_empty() {
            None
        } else {
            Some(idx)
        }
    }
}
