//! Per-slot simulation state machines for the two protocols.
//!
//! The cloud-assisted protocol (`Mwc`) keeps one FIFO per cluster at the
//! cloud, scores all uplinks and all relay-pair downlinks each slot, and
//! lets the calibrated threshold plus the latency cap pick the phase. The
//! baseline (`MaxLink`) keeps one FIFO per (cluster, relay), scores single
//! links only, and activates the single best link each slot.
//!
//! A slot transmits `symbols_per_packet` symbol vectors. Uplink slots
//! decode both sources jointly, XOR the two decoded streams and store the
//! result; downlink slots deliver a stored group to both sources, which
//! recover their partner's bits with their own transmitted bits. Bit errors
//! are counted only at delivery, against the ground truth carried along
//! with the stored group.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{average_sumrate, sumrate_bc, sumrate_ma};
use crate::buffers::BufferBank;
use crate::channel::{CsiErrorModel, Phase, SlotChannels, Topology};
use crate::detection::{downlink_scale, transmit, uplink_scale, MlDetector, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector};
use crate::modem::Constellation;
use crate::plnc::{recover_partner, xor_combine, XorPacketGroup};
use crate::selection::{
    choose_mode, estimate_g, mmd_metric_bc, GThreshold, ModeDecision, SelectionMetrics,
};

/// Which protocol a run simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    /// Cloud-aided best-user-link protocol with relay-pair downlinks.
    Mwc,
    /// Per-relay buffer baseline activating one best link per slot.
    MaxLink,
}

impl ProtocolKind {
    pub fn label(&self) -> &'static str {
        match self {
            ProtocolKind::Mwc => "MWC",
            ProtocolKind::MaxLink => "MAXLINK",
        }
    }
}

/// Everything one run needs, fixed up front.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub topology: Topology,
    /// Symbol SNR `es/n0` in dB; `es` is derived from it.
    pub snr_db: f64,
    pub n0: f64,
    /// Per-queue buffer capacity in packets.
    pub buffer_packets: usize,
    /// Latency cap in stored groups; backlogs beyond it force a downlink.
    pub lol: usize,
    pub symbols_per_packet: usize,
    /// Run length: stop once this many source packets have been delivered.
    pub packet_target: usize,
    pub csi: CsiErrorModel,
    pub seed: u64,
    pub protocol: ProtocolKind,
    pub g_calibration_draws: usize,
    pub constellation: Constellation,
}

impl SimConfig {
    /// Symbol energy implied by the SNR, `es = n0 * 10^(snr_db/10)`.
    pub fn es(&self) -> f64 {
        self.n0 * 10f64.powf(self.snr_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ms = self.topology.source_antennas;
        if self.buffer_packets == 0 || !self.buffer_packets.is_multiple_of(ms) {
            return Err(Error::InvalidArgument(format!(
                "buffer capacity {} must be a positive multiple of {} antennas",
                self.buffer_packets, ms
            )));
        }
        if self.symbols_per_packet == 0 {
            return Err(Error::InvalidArgument("packets need at least one symbol".into()));
        }
        if self.packet_target == 0 {
            return Err(Error::InvalidArgument("packet target must be positive".into()));
        }
        if !self.n0.is_finite() || self.n0 <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "noise power must be positive, got {}",
                self.n0
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidArgument("SNR must be finite".into()));
        }
        if self.protocol == ProtocolKind::Mwc && self.g_calibration_draws == 0 {
            return Err(Error::InvalidArgument(
                "threshold calibration needs at least one draw".into(),
            ));
        }
        Ok(())
    }
}

/// Final accumulated measurements of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub bit_errors: u64,
    pub bits_delivered: u64,
    pub ber: f64,
    pub sum_rate_avg: f64,
    /// Buffering delay in slots of every delivered packet.
    pub delays: Vec<u64>,
    pub avg_delay: f64,
    pub n_sr: u64,
    pub n_rs: u64,
}

impl RunMetrics {
    pub fn slots(&self) -> u64 {
        self.n_sr + self.n_rs
    }
}

/// Rate contribution of one slot: one uplink rate, or the pair of downlink
/// rates toward the two sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotRate {
    Uplink(f64),
    Downlink(f64, f64),
}

/// What one slot did, for logs and invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub phase: Phase,
    pub cluster: usize,
    /// Active relay, plus the second pair member on cloud downlinks.
    pub relays: (usize, Option<usize>),
    pub forced_by_latency: bool,
    pub rate: SlotRate,
    pub bit_errors: u64,
    pub bits_delivered: u64,
    /// Delay of each packet delivered this slot (empty on uplinks).
    pub delays: Vec<u64>,
}

/// Bit-error contribution of one delivered exchange: what source 1 decoded
/// is scored against what source 2 sent, and vice versa.
pub fn score_delivery(
    truth_x1: &[u8],
    truth_x2: &[u8],
    recovered_at_s1: &[u8],
    recovered_at_s2: &[u8],
) -> Result<u64> {
    if truth_x1.len() != truth_x2.len()
        || recovered_at_s1.len() != truth_x2.len()
        || recovered_at_s2.len() != truth_x1.len()
    {
        return Err(Error::DimensionMismatch(
            "delivery scoring needs equal-length bit strings".into(),
        ));
    }
    let errs = |got: &[u8], want: &[u8]| -> u64 {
        got.iter().zip(want).filter(|(a, b)| a != b).count() as u64
    };
    Ok(errs(recovered_at_s1, truth_x2) + errs(recovered_at_s2, truth_x1))
}

/// Live simulation state; step it until [`finished`](Self::finished).
pub struct SimState {
    config: SimConfig,
    rng: ChaCha8Rng,
    buffers: BufferBank,
    g: Option<GThreshold>,
    noise: NoiseModel,
    cands_up: Vec<ComplexVector>,
    cands_down: Vec<ComplexVector>,
    slot: u64,
    bit_errors: u64,
    bits_delivered: u64,
    delivered_packets: u64,
    sr_rates: Vec<f64>,
    rs_rates: Vec<(f64, f64)>,
    delays: Vec<u64>,
}

impl SimState {
    /// Validates the config, sets up buffers and, for the cloud protocol,
    /// burns the calibration draws for the mode threshold off the front of
    /// the seeded stream.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let topo = &config.topology;
        let ms = topo.source_antennas;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let noise = NoiseModel::new(config.n0)?;
        let cands_up = config.constellation.enumerate_candidates(2 * ms)?;
        let cands_down = config.constellation.enumerate_candidates(ms)?;
        let (n_queues, g) = match config.protocol {
            ProtocolKind::Mwc => {
                let g = estimate_g(
                    topo,
                    &config.csi,
                    config.es(),
                    &config.constellation,
                    config.g_calibration_draws,
                    &mut rng,
                )?;
                (topo.clusters, Some(g))
            }
            ProtocolKind::MaxLink => (topo.clusters * topo.relays, None),
        };
        let buffers = BufferBank::new(n_queues, config.buffer_packets, ms)?;
        Ok(Self {
            config,
            rng,
            buffers,
            g,
            noise,
            cands_up,
            cands_down,
            slot: 0,
            bit_errors: 0,
            bits_delivered: 0,
            delivered_packets: 0,
            sr_rates: Vec::new(),
            rs_rates: Vec::new(),
            delays: Vec::new(),
        })
    }

    pub fn finished(&self) -> bool {
        self.delivered_packets >= self.config.packet_target as u64
    }

    pub fn g_threshold(&self) -> Option<GThreshold> {
        self.g
    }

    pub fn buffered_packets(&self) -> usize {
        self.buffers.total_packets()
    }

    /// Executes one slot and returns what happened.
    pub fn step(&mut self) -> Result<SlotRecord> {
        let channels = SlotChannels::draw(
            &self.config.topology,
            &self.config.csi,
            self.config.es(),
            &mut self.rng,
        );
        let record = match self.config.protocol {
            ProtocolKind::Mwc => self.step_mwc(&channels)?,
            ProtocolKind::MaxLink => self.step_maxlink(&channels)?,
        };
        self.slot += 1;
        Ok(record)
    }

    fn step_mwc(&mut self, channels: &SlotChannels) -> Result<SlotRecord> {
        let topo = self.config.topology;
        let es = self.config.es();
        let metrics =
            SelectionMetrics::compute(channels, &topo, es, &self.config.constellation)?;
        let eligible_ma: Vec<bool> = (0..topo.clusters)
            .map(|k| self.buffers.can_accept(k))
            .collect();
        let eligible_bc: Vec<bool> = (0..topo.clusters)
            .map(|k| self.buffers.has_group(k))
            .collect();
        let ma = metrics.best_ma(&eligible_ma);
        let bc = metrics.best_bc(&eligible_bc);
        let bc_fullest = self
            .buffers
            .fullest_queue()
            .map(|k| metrics.best_bc_for_cluster(k));
        let g = self.g.as_ref().expect("cloud protocol always calibrates");
        let decision = choose_mode(
            self.buffers.total_packets(),
            topo.source_antennas,
            self.config.lol,
            ma,
            bc,
            bc_fullest,
            g,
        )?;

        match decision {
            ModeDecision::MultipleAccess { selection } => {
                let h_true = &channels.sr_true[selection.cluster][selection.relay];
                let h_est = &channels.sr_est[selection.cluster][selection.relay];
                self.uplink_slot(selection.cluster, selection.relay, h_true, h_est, false)
            }
            ModeDecision::Broadcast {
                selection,
                forced_by_latency,
            } => {
                let (i, j) = selection.relays;
                let k = selection.cluster;
                let combined = |side: &Vec<Vec<[ComplexMatrix; 2]>>, s: usize| {
                    side[k][i][s].add(&side[k][j][s])
                };
                let h_true = [
                    combined(&channels.rs_true, 0)?,
                    combined(&channels.rs_true, 1)?,
                ];
                let h_est = [
                    combined(&channels.rs_est, 0)?,
                    combined(&channels.rs_est, 1)?,
                ];
                self.downlink_slot(k, (i, Some(j)), k, &h_true, &h_est, forced_by_latency)
            }
        }
    }

    fn step_maxlink(&mut self, channels: &SlotChannels) -> Result<SlotRecord> {
        let topo = self.config.topology;
        let es = self.config.es();
        let ms = topo.source_antennas;
        let m_rtx = topo.relay_tx_antennas();

        // One queue per (cluster, relay) link, cluster-major.
        let queue = |k: usize, n: usize| k * topo.relays + n;

        // Scan uplinks first, then downlinks; the first maximum wins, which
        // fixes the tie-break order.
        let mut best: Option<(f64, Phase, usize, usize)> = None;
        let mut consider = |metric: f64, phase: Phase, k: usize, n: usize| {
            if best.is_none_or(|(b, ..)| metric > b) {
                best = Some((metric, phase, k, n));
            }
        };
        for k in 0..topo.clusters {
            for n in 0..topo.relays {
                if self.buffers.can_accept(queue(k, n)) {
                    let m = crate::selection::ma_relay_metric(
                        &channels.sr_est[k][n],
                        es,
                        ms,
                        topo.rx_blocks,
                        &self.cands_up,
                    )?;
                    consider(m, Phase::MultipleAccess, k, n);
                }
            }
        }
        for k in 0..topo.clusters {
            for n in 0..topo.relays {
                if self.buffers.has_group(queue(k, n)) {
                    let mut m = f64::INFINITY;
                    for s in 0..2 {
                        let ms_metric = mmd_metric_bc(
                            &channels.rs_est[k][n][s],
                            es,
                            m_rtx,
                            &self.cands_down,
                        )?;
                        if ms_metric < m {
                            m = ms_metric;
                        }
                    }
                    consider(m, Phase::Broadcast, k, n);
                }
            }
        }
        let (_, phase, k, n) = best.ok_or_else(|| {
            Error::Protocol("baseline found no feasible link".into())
        })?;

        match phase {
            Phase::MultipleAccess => {
                let h_true = &channels.sr_true[k][n];
                let h_est = &channels.sr_est[k][n];
                self.uplink_slot(k, n, h_true, h_est, false)
            }
            Phase::Broadcast => {
                let h_true = [channels.rs_true[k][n][0].clone(), channels.rs_true[k][n][1].clone()];
                let h_est = [channels.rs_est[k][n][0].clone(), channels.rs_est[k][n][1].clone()];
                self.downlink_slot(k, (n, None), queue(k, n), &h_true, &h_est, false)
            }
        }
    }

    /// Runs one uplink slot over the selected link and stores the combined
    /// group in `queue` (the cluster's queue, or the link's queue for the
    /// baseline).
    fn uplink_slot(
        &mut self,
        cluster: usize,
        relay: usize,
        h_true: &ComplexMatrix,
        h_est: &ComplexMatrix,
        forced: bool,
    ) -> Result<SlotRecord> {
        let topo = self.config.topology;
        let ms = topo.source_antennas;
        let t = self.config.symbols_per_packet;
        let cons = &self.config.constellation;
        let bps = cons.bits_per_symbol();
        let es = self.config.es();
        let queue = match self.config.protocol {
            ProtocolKind::Mwc => cluster,
            ProtocolKind::MaxLink => cluster * topo.relays + relay,
        };

        // Fresh payload: per source, one packet per antenna stream.
        let mut truth: [Vec<Vec<u8>>; 2] = [Vec::new(), Vec::new()];
        for side in truth.iter_mut() {
            for _ in 0..ms {
                side.push((0..t * bps).map(|_| self.rng.random_range(0..2u8)).collect());
            }
        }
        let symbols: Vec<Vec<ComplexVector>> = truth
            .iter()
            .map(|side| {
                side.iter()
                    .map(|packet| cons.map_bits(packet))
                    .collect::<Result<_>>()
            })
            .collect::<Result<_>>()?;

        let scale = uplink_scale(es, ms);
        let detector = MlDetector::new(h_est, scale, &self.cands_up)?;
        let mut decoded: [Vec<Vec<u8>>; 2] =
            [vec![Vec::new(); ms], vec![Vec::new(); ms]];
        for ti in 0..t {
            let mut xt = Vec::with_capacity(2 * ms);
            for side in &symbols {
                for stream in side {
                    xt.push(stream[ti]);
                }
            }
            let y = transmit(h_true, scale, &xt, &self.noise, &mut self.rng)?;
            let (_, hat) = detector.detect(&y)?;
            let bits = cons.demap_symbols(hat)?;
            for s in 0..2 {
                for a in 0..ms {
                    let from = (s * ms + a) * bps;
                    decoded[s][a].extend_from_slice(&bits[from..from + bps]);
                }
            }
        }

        let z_packets: Vec<Vec<u8>> = (0..ms)
            .map(|a| xor_combine(&decoded[0][a], &decoded[1][a]))
            .collect::<Result<_>>()?;
        let [truth_x1, truth_x2] = truth;
        self.buffers.store(queue, XorPacketGroup {
            z_packets,
            truth_x1,
            truth_x2,
            stored_slot: self.slot,
        })?;

        let rate = sumrate_ma(h_true, es, ms, self.config.n0)?;
        self.sr_rates.push(rate);
        Ok(SlotRecord {
            slot: self.slot,
            phase: Phase::MultipleAccess,
            cluster,
            relays: (relay, None),
            forced_by_latency: forced,
            rate: SlotRate::Uplink(rate),
            bit_errors: 0,
            bits_delivered: 0,
            delays: Vec::new(),
        })
    }

    /// Runs one downlink slot: retrieves the oldest group from `queue` and
    /// delivers it to both sources of `cluster` over the two per-source
    /// channels (combined pair matrices for the cloud protocol, single-relay
    /// matrices for the baseline).
    fn downlink_slot(
        &mut self,
        cluster: usize,
        relays: (usize, Option<usize>),
        queue: usize,
        h_true: &[ComplexMatrix; 2],
        h_est: &[ComplexMatrix; 2],
        forced: bool,
    ) -> Result<SlotRecord> {
        let topo = self.config.topology;
        let ms = topo.source_antennas;
        let t = self.config.symbols_per_packet;
        let cons = &self.config.constellation;
        let bps = cons.bits_per_symbol();
        let es = self.config.es();

        let (group, delay) = self.buffers.retrieve(queue, self.slot)?;
        let z_symbols: Vec<ComplexVector> = group
            .z_packets
            .iter()
            .map(|p| cons.map_bits(p))
            .collect::<Result<_>>()?;

        let scale = downlink_scale(es, topo.relay_tx_antennas());
        let mut z_hat: [Vec<Vec<u8>>; 2] = [vec![Vec::new(); ms], vec![Vec::new(); ms]];
        for s in 0..2 {
            let detector = MlDetector::new(&h_est[s], scale, &self.cands_down)?;
            for ti in 0..t {
                let xt: ComplexVector = z_symbols.iter().map(|stream| stream[ti]).collect();
                let y = transmit(&h_true[s], scale, &xt, &self.noise, &mut self.rng)?;
                let (_, hat) = detector.detect(&y)?;
                let bits = cons.demap_symbols(hat)?;
                for a in 0..ms {
                    z_hat[s][a].extend_from_slice(&bits[a * bps..(a + 1) * bps]);
                }
            }
        }

        // Each source cancels its own bits out of the decoded combination.
        let mut errors = 0u64;
        for a in 0..ms {
            let at_s1 = recover_partner(&group.truth_x1[a], &z_hat[0][a])?;
            let at_s2 = recover_partner(&group.truth_x2[a], &z_hat[1][a])?;
            errors += score_delivery(&group.truth_x1[a], &group.truth_x2[a], &at_s1, &at_s2)?;
        }
        let bits_now = (2 * ms * t * bps) as u64;
        self.bit_errors += errors;
        self.bits_delivered += bits_now;
        self.delivered_packets += 2 * ms as u64;
        let slot_delays = vec![delay; ms];
        self.delays.extend_from_slice(&slot_delays);

        let r1 = sumrate_bc(&h_true[0], es, topo.relay_tx_antennas(), self.config.n0)?;
        let r2 = sumrate_bc(&h_true[1], es, topo.relay_tx_antennas(), self.config.n0)?;
        self.rs_rates.push((r1, r2));
        Ok(SlotRecord {
            slot: self.slot,
            phase: Phase::Broadcast,
            cluster,
            relays,
            forced_by_latency: forced,
            rate: SlotRate::Downlink(r1, r2),
            bit_errors: errors,
            bits_delivered: bits_now,
            delays: slot_delays,
        })
    }

    /// Folds the accumulators into the final report.
    pub fn metrics(&self) -> Result<RunMetrics> {
        if self.bits_delivered == 0 {
            return Err(Error::Protocol("run ended without deliveries".into()));
        }
        let ber = self.bit_errors as f64 / self.bits_delivered as f64;
        let sum_rate_avg = average_sumrate(&self.sr_rates, &self.rs_rates)?;
        let avg_delay =
            self.delays.iter().sum::<u64>() as f64 / self.delays.len() as f64;
        Ok(RunMetrics {
            bit_errors: self.bit_errors,
            bits_delivered: self.bits_delivered,
            ber,
            sum_rate_avg,
            delays: self.delays.clone(),
            avg_delay,
            n_sr: self.sr_rates.len() as u64,
            n_rs: self.rs_rates.len() as u64,
        })
    }
}

/// Runs a config to completion.
pub fn run(config: SimConfig) -> Result<RunMetrics> {
    run_with_log(config, |_| {})
}

/// Runs a config to completion, handing every slot record to `log`.
pub fn run_with_log(
    config: SimConfig,
    mut log: impl FnMut(&SlotRecord),
) -> Result<RunMetrics> {
    let groups_needed = config
        .packet_target
        .div_ceil(2 * config.topology.source_antennas);
    // A healthy run needs about two slots per delivered group; far more
    // than that means the mode rule stalled.
    let slot_cap = 100 * groups_needed as u64 + 10_000;
    let mut state = SimState::new(config)?;
    while !state.finished() {
        if state.slot >= slot_cap {
            return Err(Error::Protocol(format!(
                "no termination after {slot_cap} slots"
            )));
        }
        let record = state.step()?;
        log(&record);
    }
    state.metrics()
}
