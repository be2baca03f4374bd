//! Rayleigh block-fading channel generation and channel-state error.
//!
//! All links fade independently per slot with circularly-symmetric complex
//! Gaussian entries. Uplink matrices stack `rx_blocks` square sub-matrices,
//! one per receive-antenna block at the relay. Downlink matrices are the
//! per-relay effective maps onto one source's antennas, each the sum of
//! `tx_blocks` independent square draws.
//!
//! Channel estimates are the true matrices plus an additive error whose
//! variance decays with the link energy. The estimate is what selection and
//! detection see; the true matrix is what the signal actually traverses.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{Complex, ComplexMatrix};

/// Direction of a transmission slot: sources up to a relay, or relays down
/// to a cluster's sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    MultipleAccess,
    Broadcast,
}

/// Network dimensions, fixed for a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    /// Number of two-source clusters.
    pub clusters: usize,
    /// Number of relays.
    pub relays: usize,
    /// Antennas per source.
    pub source_antennas: usize,
    /// Receive-antenna blocks per relay; each block spans both sources'
    /// antennas, so a relay listens with `2 * rx_blocks * source_antennas`.
    pub rx_blocks: usize,
    /// Transmit-antenna blocks per relay, `tx_blocks * source_antennas`
    /// antennas in total.
    pub tx_blocks: usize,
}

impl Topology {
    pub fn new(
        clusters: usize,
        relays: usize,
        source_antennas: usize,
        rx_blocks: usize,
        tx_blocks: usize,
    ) -> Result<Self> {
        if clusters == 0 || relays == 0 || source_antennas == 0 || rx_blocks == 0 || tx_blocks == 0
        {
            return Err(Error::InvalidArgument(
                "all topology dimensions must be positive".into(),
            ));
        }
        if tx_blocks > 2 * rx_blocks {
            return Err(Error::InvalidArgument(format!(
                "transmit blocks {tx_blocks} exceed receive span {}",
                2 * rx_blocks
            )));
        }
        Ok(Self {
            clusters,
            relays,
            source_antennas,
            rx_blocks,
            tx_blocks,
        })
    }

    /// Receive antennas per relay.
    pub fn relay_rx_antennas(&self) -> usize {
        2 * self.rx_blocks * self.source_antennas
    }

    /// Transmit antennas per relay.
    pub fn relay_tx_antennas(&self) -> usize {
        self.tx_blocks * self.source_antennas
    }

    /// Antennas transmitting jointly on the uplink (both cluster sources).
    pub fn uplink_tx_antennas(&self) -> usize {
        2 * self.source_antennas
    }
}

/// Additive channel-estimation error with variance `beta * energy^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiErrorModel {
    pub beta: f64,
    pub alpha: f64,
}

impl CsiErrorModel {
    pub fn new(beta: f64, alpha: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid estimation-error parameters beta={beta} alpha={alpha}"
            )));
        }
        Ok(Self { beta, alpha })
    }

    /// Error-free estimation.
    pub fn perfect() -> Self {
        Self {
            beta: 0.0,
            alpha: 1.0,
        }
    }

    pub fn is_perfect(&self) -> bool {
        self.beta == 0.0
    }

    /// Variance of each complex error entry on a link driven at `energy`.
    pub fn error_variance(&self, energy: f64) -> f64 {
        self.beta * energy.powf(-self.alpha)
    }
}

/// Draws a matrix with independent CN(0, `variance`) entries.
pub fn draw_matrix<R: Rng>(rows: usize, cols: usize, variance: f64, rng: &mut R) -> ComplexMatrix {
    let sigma = (variance / 2.0).sqrt();
    let mut m = ComplexMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            m.set(i, j, Complex::new(sigma * re, sigma * im));
        }
    }
    m
}

/// One slot's channel realisation: true matrices plus the estimates the
/// receiver works with.
///
/// Indexing is `[cluster][relay]` for the uplink and `[cluster][relay][source]`
/// for the downlink, where `source` is 0 or 1 within the cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotChannels {
    pub sr_true: Vec<Vec<ComplexMatrix>>,
    pub sr_est: Vec<Vec<ComplexMatrix>>,
    pub rs_true: Vec<Vec<[ComplexMatrix; 2]>>,
    pub rs_est: Vec<Vec<[ComplexMatrix; 2]>>,
}

impl SlotChannels {
    /// Draws every link for one slot and corrupts the estimates.
    ///
    /// The draw order is fixed (uplink true, downlink true, uplink error,
    /// downlink error; each scanned cluster-major then relay-major) so that
    /// a seeded run is reproducible. With `beta == 0` no error draws are
    /// consumed and the estimates alias the true matrices bit for bit.
    pub fn draw<R: Rng>(topology: &Topology, csi: &CsiErrorModel, es: f64, rng: &mut R) -> Self {
        let k = topology.clusters;
        let n = topology.relays;
        let ms = topology.source_antennas;
        let rx = topology.relay_rx_antennas();
        let up_tx = topology.uplink_tx_antennas();

        let sr_true: Vec<Vec<ComplexMatrix>> = (0..k)
            .map(|_| (0..n).map(|_| draw_matrix(rx, up_tx, 1.0, rng)).collect())
            .collect();

        // Each downlink effective matrix sums tx_blocks independent unit
        // draws, so its entries carry variance tx_blocks.
        let draw_rs = |rng: &mut R| {
            let mut h = draw_matrix(ms, ms, 1.0, rng);
            for _ in 1..topology.tx_blocks {
                h = h.add(&draw_matrix(ms, ms, 1.0, rng)).expect("same shape");
            }
            h
        };
        let rs_true: Vec<Vec<[ComplexMatrix; 2]>> = (0..k)
            .map(|_| {
                (0..n)
                    .map(|_| [draw_rs(rng), draw_rs(rng)])
                    .collect()
            })
            .collect();

        if csi.is_perfect() {
            return Self {
                sr_est: sr_true.clone(),
                rs_est: rs_true.clone(),
                sr_true,
                rs_true,
            };
        }

        let var_sr = csi.error_variance(es);
        let var_rs = csi.error_variance(es / 2.0);
        let sr_est = sr_true
            .iter()
            .map(|row| {
                row.iter()
                    .map(|h| h.add(&draw_matrix(rx, up_tx, var_sr, rng)).expect("same shape"))
                    .collect()
            })
            .collect();
        let rs_est = rs_true
            .iter()
            .map(|row| {
                row.iter()
                    .map(|pair| {
                        [
                            pair[0]
                                .add(&draw_matrix(ms, ms, var_rs, rng))
                                .expect("same shape"),
                            pair[1]
                                .add(&draw_matrix(ms, ms, var_rs, rng))
                                .expect("same shape"),
                        ]
                    })
                    .collect()
            })
            .collect();

        Self {
            sr_true,
            sr_est,
            rs_true,
            rs_est,
        }
    }
}
