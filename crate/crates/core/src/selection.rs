//! Maximum-minimum-distance link selection and the slot-mode decision.
//!
//! Every slot the cloud scores all candidate links on the *estimated*
//! channels: each (cluster, relay) uplink gets the smallest scaled squared
//! distance any exhaustive-detector candidate pair attains through the
//! relay's most fragile receive block, and each (cluster, relay-pair)
//! downlink gets the smaller of the two sources' distances through the
//! summed pair matrices. The largest metric wins its phase; a threshold `G`
//! on the uplink/downlink metric ratio plus a latency cap decide which
//! phase runs. Ties always resolve to the lowest index so seeded runs
//! replay exactly.

use rand::Rng;

use crate::channel::{CsiErrorModel, Phase, SlotChannels, Topology};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector};
use crate::modem::Constellation;

/// Smallest scaled squared pair distance through one square uplink block:
/// `min over pairs of (es/ms) ||h_u (x_l - x_n)||^2`.
pub fn mmd_metric_ma_sub(
    h_u: &ComplexMatrix,
    es: f64,
    ms: usize,
    candidates: &[ComplexVector],
) -> Result<f64> {
    if h_u.rows() != 2 * ms || h_u.cols() != 2 * ms {
        return Err(Error::DimensionMismatch(format!(
            "uplink block is {}x{}, expected square of order {}",
            h_u.rows(),
            h_u.cols(),
            2 * ms
        )));
    }
    let d = min_pair_distance_sq(h_u, candidates)?;
    Ok(es / ms as f64 * d)
}

/// Smallest scaled squared pair distance through one downlink matrix:
/// `min over pairs of (es/(2 m_rtx)) ||h (x_l - x_n)||^2`.
pub fn mmd_metric_bc(
    h_combined: &ComplexMatrix,
    es: f64,
    m_rtx: usize,
    candidates: &[ComplexVector],
) -> Result<f64> {
    if h_combined.rows() != h_combined.cols() {
        return Err(Error::DimensionMismatch(format!(
            "downlink matrix is {}x{}, expected square",
            h_combined.rows(),
            h_combined.cols()
        )));
    }
    let d = min_pair_distance_sq(h_combined, candidates)?;
    Ok(es / (2.0 * m_rtx as f64) * d)
}

/// Uplink metric of a whole relay: the minimum of [`mmd_metric_ma_sub`]
/// over its `u_blocks` stacked square receive blocks. The weakest block is
/// the one the exhaustive detector would stumble on, so it scores the relay.
pub fn ma_relay_metric(
    h_full: &ComplexMatrix,
    es: f64,
    ms: usize,
    u_blocks: usize,
    candidates: &[ComplexVector],
) -> Result<f64> {
    let order = 2 * ms;
    if u_blocks == 0 || h_full.rows() != u_blocks * order || h_full.cols() != order {
        return Err(Error::DimensionMismatch(format!(
            "uplink matrix is {}x{}, expected {} stacked blocks of order {}",
            h_full.rows(),
            h_full.cols(),
            u_blocks,
            order
        )));
    }
    let mut worst = f64::INFINITY;
    for u in 0..u_blocks {
        let block = h_full.row_block(u * order, order)?;
        let m = mmd_metric_ma_sub(&block, es, ms, candidates)?;
        if m < worst {
            worst = m;
        }
    }
    Ok(worst)
}

/// `min over unordered candidate pairs of ||h(x_l - x_n)||^2`, by brute
/// force over the precomputed images `h x`.
fn min_pair_distance_sq(h: &ComplexMatrix, candidates: &[ComplexVector]) -> Result<f64> {
    if candidates.len() < 2 {
        return Err(Error::InvalidArgument(
            "pair search needs at least two candidates".into(),
        ));
    }
    let images: Vec<ComplexVector> = candidates
        .iter()
        .map(|c| h.mul_vec(c))
        .collect::<Result<_>>()?;
    let mut min = f64::INFINITY;
    for l in 0..images.len() {
        for n in (l + 1)..images.len() {
            let d: f64 = images[l]
                .iter()
                .zip(&images[n])
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            if d < min {
                min = d;
            }
        }
    }
    Ok(min)
}

/// All unordered relay pairs including the degenerate (i, i), in the
/// lexicographic order that also serves as the tie-break order.
pub fn relay_pairs(n_relays: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n_relays * (n_relays + 1) / 2);
    for i in 0..n_relays {
        for j in i..n_relays {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Winning uplink: the selected cluster transmits to this relay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaSelection {
    pub cluster: usize,
    pub relay: usize,
    pub metric: f64,
}

/// Winning downlink: this relay pair (possibly twice the same relay)
/// transmits to the selected cluster's sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcSelection {
    pub cluster: usize,
    pub relays: (usize, usize),
    pub metric: f64,
}

/// Per-slot metric tables for every candidate link.
#[derive(Debug, Clone)]
pub struct SelectionMetrics {
    /// Uplink metric per `[cluster][relay]`.
    pub a_sr: Vec<Vec<f64>>,
    /// Downlink pair metric per `[cluster][pair]`, aligned with
    /// [`relay_pairs`] order.
    pub a_rs_pair: Vec<Vec<f64>>,
    pairs: Vec<(usize, usize)>,
}

impl SelectionMetrics {
    /// Scores every link of the slot on the estimated channels.
    pub fn compute(
        slot: &SlotChannels,
        topology: &Topology,
        es: f64,
        constellation: &Constellation,
    ) -> Result<Self> {
        let k = topology.clusters;
        let n = topology.relays;
        let ms = topology.source_antennas;
        if slot.sr_est.len() != k || slot.rs_est.len() != k {
            return Err(Error::DimensionMismatch(
                "slot channels do not match topology".into(),
            ));
        }
        let cands_up = constellation.enumerate_candidates(2 * ms)?;
        let cands_down = constellation.enumerate_candidates(ms)?;
        let pairs = relay_pairs(n);

        let mut a_sr = vec![vec![0.0; n]; k];
        for ki in 0..k {
            for ni in 0..n {
                a_sr[ki][ni] = ma_relay_metric(
                    &slot.sr_est[ki][ni],
                    es,
                    ms,
                    topology.rx_blocks,
                    &cands_up,
                )?;
                debug_assert!(a_sr[ki][ni] >= 0.0);
            }
        }

        let mut a_rs_pair = vec![vec![0.0; pairs.len()]; k];
        for ki in 0..k {
            for (pi, &(i, j)) in pairs.iter().enumerate() {
                let mut pair_metric = f64::INFINITY;
                for s in 0..2 {
                    let combined = slot.rs_est[ki][i][s].add(&slot.rs_est[ki][j][s])?;
                    let m = mmd_metric_bc(
                        &combined,
                        es,
                        topology.relay_tx_antennas(),
                        &cands_down,
                    )?;
                    if m < pair_metric {
                        pair_metric = m;
                    }
                }
                a_rs_pair[ki][pi] = pair_metric;
                debug_assert!(pair_metric >= 0.0);
            }
        }

        Ok(Self {
            a_sr,
            a_rs_pair,
            pairs,
        })
    }

    /// Best uplink over the eligible clusters and all relays. `None` when
    /// no cluster is eligible.
    pub fn best_ma(&self, eligible_clusters: &[bool]) -> Option<MaSelection> {
        assert_eq!(eligible_clusters.len(), self.a_sr.len());
        let mut best: Option<MaSelection> = None;
        for (k, row) in self.a_sr.iter().enumerate() {
            if !eligible_clusters[k] {
                continue;
            }
            for (n, &metric) in row.iter().enumerate() {
                if best.is_none_or(|b| metric > b.metric) {
                    best = Some(MaSelection {
                        cluster: k,
                        relay: n,
                        metric,
                    });
                }
            }
        }
        best
    }

    /// Best downlink over the eligible clusters and all relay pairs.
    pub fn best_bc(&self, eligible_clusters: &[bool]) -> Option<BcSelection> {
        assert_eq!(eligible_clusters.len(), self.a_rs_pair.len());
        let mut best: Option<BcSelection> = None;
        for (k, row) in self.a_rs_pair.iter().enumerate() {
            if !eligible_clusters[k] {
                continue;
            }
            for (pi, &metric) in row.iter().enumerate() {
                if best.is_none_or(|b| metric > b.metric) {
                    best = Some(BcSelection {
                        cluster: k,
                        relays: self.pairs[pi],
                        metric,
                    });
                }
            }
        }
        best
    }

    /// Best downlink pair within one fixed cluster.
    pub fn best_bc_for_cluster(&self, cluster: usize) -> BcSelection {
        let mut eligible = vec![false; self.a_rs_pair.len()];
        eligible[cluster] = true;
        self.best_bc(&eligible)
            .expect("a cluster always has at least one relay pair")
    }
}

/// Calibrated uplink/downlink balance threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GThreshold {
    pub g: f64,
    pub calibration_draws: usize,
}

/// `mean(best uplink metric) / mean(best downlink metric)` over `w`
/// sampler draws.
fn calibration_ratio(w: usize, mut sampler: impl FnMut() -> (f64, f64)) -> Result<f64> {
    if w == 0 {
        return Err(Error::InvalidArgument(
            "calibration needs at least one draw".into(),
        ));
    }
    let mut sum_sr = 0.0;
    let mut sum_rs = 0.0;
    for _ in 0..w {
        let (a_sr, a_rs) = sampler();
        sum_sr += a_sr;
        sum_rs += a_rs;
    }
    if sum_rs <= 0.0 {
        return Err(Error::InvalidArgument(
            "degenerate calibration: downlink metrics sum to zero".into(),
        ));
    }
    Ok(sum_sr / sum_rs)
}

/// Estimates the mode threshold as the ratio of the expected best uplink
/// metric to the expected best downlink metric, over `w` freshly drawn
/// slots with every cluster eligible. The estimate is frozen for the run.
pub fn estimate_g<R: Rng>(
    topology: &Topology,
    csi: &CsiErrorModel,
    es: f64,
    constellation: &Constellation,
    w: usize,
    rng: &mut R,
) -> Result<GThreshold> {
    let all = vec![true; topology.clusters];
    let mut draw_error = None;
    let g = calibration_ratio(w, || {
        let slot = SlotChannels::draw(topology, csi, es, rng);
        match SelectionMetrics::compute(&slot, topology, es, constellation) {
            Ok(m) => {
                let a_sr = m.best_ma(&all).expect("all clusters eligible").metric;
                let a_rs = m.best_bc(&all).expect("all clusters eligible").metric;
                (a_sr, a_rs)
            }
            Err(e) => {
                draw_error = Some(e);
                (0.0, f64::INFINITY)
            }
        }
    })?;
    if let Some(e) = draw_error {
        return Err(e);
    }
    Ok(GThreshold {
        g,
        calibration_draws: w,
    })
}

/// What the coming slot does: one uplink transmission or one downlink
/// transmission, with the winning link attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeDecision {
    MultipleAccess {
        selection: MaSelection,
    },
    Broadcast {
        selection: BcSelection,
        forced_by_latency: bool,
    },
}

impl ModeDecision {
    pub fn phase(&self) -> Phase {
        match self {
            ModeDecision::MultipleAccess { .. } => Phase::MultipleAccess,
            ModeDecision::Broadcast { .. } => Phase::Broadcast,
        }
    }

    pub fn cluster(&self) -> usize {
        match self {
            ModeDecision::MultipleAccess { selection } => selection.cluster,
            ModeDecision::Broadcast { selection, .. } => selection.cluster,
        }
    }
}

/// Picks the slot mode.
///
/// Priority order: (1) when the buffered backlog exceeds the latency cap
/// `lol` (counted in stored groups, `n_packets_total / ms`) and a downlink
/// is feasible, drain the fullest cluster; (2) when the best uplink beats
/// the best downlink by at least the calibrated factor `g` and an uplink is
/// feasible, run the uplink; (3) otherwise run the best feasible downlink;
/// (4) failing all that, whichever phase remains feasible.
pub fn choose_mode(
    n_packets_total: usize,
    ms: usize,
    lol: usize,
    ma: Option<MaSelection>,
    bc: Option<BcSelection>,
    bc_fullest: Option<BcSelection>,
    g: &GThreshold,
) -> Result<ModeDecision> {
    if ma.is_none() && bc.is_none() {
        return Err(Error::Protocol(
            "no feasible slot mode: all buffers full and empty at once".into(),
        ));
    }
    if bc.is_some() && n_packets_total / ms > lol {
        let selection = bc_fullest.ok_or_else(|| {
            Error::Protocol("latency override without a fullest-cluster selection".into())
        })?;
        return Ok(ModeDecision::Broadcast {
            selection,
            forced_by_latency: true,
        });
    }
    match (ma, bc) {
        (Some(selection), Some(down)) => {
            if selection.metric / down.metric >= g.g {
                Ok(ModeDecision::MultipleAccess { selection })
            } else {
                Ok(ModeDecision::Broadcast {
                    selection: down,
                    forced_by_latency: false,
                })
            }
        }
        (Some(selection), None) => Ok(ModeDecision::MultipleAccess { selection }),
        (None, Some(selection)) => Ok(ModeDecision::Broadcast {
            selection,
            forced_by_latency: false,
        }),
        (None, None) => unreachable!("guarded above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Complex;
    use crate::testutil::random_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn bpsk_cands(n: usize) -> Vec<ComplexVector> {
        Constellation::bpsk().enumerate_candidates(n).unwrap()
    }

    #[test]
    fn ma_metric_identity() {
        let m = mmd_metric_ma_sub(&ComplexMatrix::identity(2), 1.0, 1, &bpsk_cands(2)).unwrap();
        assert!((m - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ma_metric_weak_second_stream() {
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![
            c(0.0, 0.0),
            c(0.5, 0.0),
        ]])
        .unwrap();
        let m = mmd_metric_ma_sub(&h, 1.0, 1, &bpsk_cands(2)).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ma_metric_zero_channel() {
        let m = mmd_metric_ma_sub(&ComplexMatrix::zeros(2, 2), 1.0, 1, &bpsk_cands(2)).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn ma_metric_rejects_wrong_order() {
        assert!(mmd_metric_ma_sub(&ComplexMatrix::zeros(2, 2), 1.0, 2, &bpsk_cands(4)).is_err());
    }

    #[test]
    fn bc_metric_scalar_channel() {
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)]]).unwrap();
        let m = mmd_metric_bc(&h, 2.0, 1, &bpsk_cands(1)).unwrap();
        assert!((m - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bc_metric_quadratic_in_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let h = crate::channel::draw_matrix(2, 2, 1.0, &mut rng);
        let cands = bpsk_cands(2);
        let m1 = mmd_metric_bc(&h, 1.0, 2, &cands).unwrap();
        let m2 = mmd_metric_bc(&h.scale(2.0), 1.0, 2, &cands).unwrap();
        assert_eq!(m2, 4.0 * m1);
    }

    #[test]
    fn metrics_invariant_under_unitary_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let h = crate::channel::draw_matrix(4, 4, 1.0, &mut rng);
        let u = random_unitary(4, &mut rng);
        let cands = bpsk_cands(4);
        let m0 = mmd_metric_ma_sub(&h, 1.5, 2, &cands).unwrap();
        let m1 = mmd_metric_ma_sub(&u.multiply(&h).unwrap(), 1.5, 2, &cands).unwrap();
        assert!((m0 - m1).abs() < 1e-9 * m0.max(1.0));
    }

    #[test]
    fn relay_metric_takes_weakest_block() {
        let cands = bpsk_cands(2);
        let strong = ComplexMatrix::identity(2);
        let weak = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![
            c(0.0, 0.0),
            c(0.5, 0.0),
        ]])
        .unwrap();
        let mut stacked = ComplexMatrix::zeros(4, 2);
        for i in 0..2 {
            for j in 0..2 {
                stacked.set(i, j, strong.get(i, j));
                stacked.set(2 + i, j, weak.get(i, j));
            }
        }
        let single = ma_relay_metric(&strong, 1.0, 1, 1, &cands).unwrap();
        assert_eq!(single, mmd_metric_ma_sub(&strong, 1.0, 1, &cands).unwrap());
        let m = ma_relay_metric(&stacked, 1.0, 1, 2, &cands).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        assert_eq!(
            ma_relay_metric(&ComplexMatrix::zeros(4, 2), 1.0, 1, 2, &cands).unwrap(),
            0.0
        );
    }

    #[test]
    fn relay_metric_rejects_partial_blocks() {
        let cands = bpsk_cands(2);
        assert!(ma_relay_metric(&ComplexMatrix::zeros(3, 2), 1.0, 1, 2, &cands).is_err());
        assert!(ma_relay_metric(&ComplexMatrix::zeros(4, 3), 1.0, 1, 2, &cands).is_err());
    }

    #[test]
    fn pair_enumeration() {
        let pairs = relay_pairs(10);
        assert_eq!(pairs.len(), 55);
        assert_eq!(pairs[0], (0, 0));
        assert_eq!(pairs[1], (0, 1));
        assert_eq!(pairs[54], (9, 9));
        assert!(pairs.windows(2).all(|w| w[0] < w[1]));
    }

    fn tiny_topology() -> Topology {
        Topology::new(1, 2, 1, 1, 1).unwrap()
    }

    fn slot_from_parts(
        topo: &Topology,
        sr: Vec<Vec<ComplexMatrix>>,
        rs: Vec<Vec<[ComplexMatrix; 2]>>,
    ) -> SlotChannels {
        assert_eq!(sr.len(), topo.clusters);
        SlotChannels {
            sr_true: sr.clone(),
            sr_est: sr,
            rs_true: rs.clone(),
            rs_est: rs,
        }
    }

    #[test]
    fn best_ma_prefers_stronger_relay_and_breaks_ties_low() {
        let topo = tiny_topology();
        let cons = Constellation::bpsk();
        let strong = ComplexMatrix::identity(2);
        let weak = strong.scale(0.5);
        let rs = vec![vec![
            [ComplexMatrix::identity(1), ComplexMatrix::identity(1)],
            [ComplexMatrix::identity(1), ComplexMatrix::identity(1)],
        ]];
        let slot = slot_from_parts(&topo, vec![vec![weak.clone(), strong.clone()]], rs.clone());
        let m = SelectionMetrics::compute(&slot, &topo, 1.0, &cons).unwrap();
        let best = m.best_ma(&[true]).unwrap();
        assert_eq!((best.cluster, best.relay), (0, 1));

        let slot = slot_from_parts(&topo, vec![vec![strong.clone(), strong]], rs);
        let m = SelectionMetrics::compute(&slot, &topo, 1.0, &cons).unwrap();
        let best = m.best_ma(&[true]).unwrap();
        assert_eq!(best.relay, 0, "tie must keep the lowest relay index");
        assert!(m.best_ma(&[false]).is_none());
    }

    #[test]
    fn degenerate_pair_doubles_the_channel() {
        let topo = tiny_topology();
        let cons = Constellation::bpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let h0 = [
            crate::channel::draw_matrix(1, 1, 1.0, &mut rng),
            crate::channel::draw_matrix(1, 1, 1.0, &mut rng),
        ];
        let h1 = [
            crate::channel::draw_matrix(1, 1, 1.0, &mut rng),
            crate::channel::draw_matrix(1, 1, 1.0, &mut rng),
        ];
        let sr = vec![vec![ComplexMatrix::identity(2), ComplexMatrix::identity(2)]];
        let slot = slot_from_parts(&topo, sr, vec![vec![h0.clone(), h1]]);
        let m = SelectionMetrics::compute(&slot, &topo, 2.0, &cons).unwrap();
        let cands = bpsk_cands(1);
        let single = (0..2)
            .map(|s| mmd_metric_bc(&h0[s], 2.0, 1, &cands).unwrap())
            .fold(f64::INFINITY, f64::min);
        // Pair (0, 0) sums the relay with itself, so its metric is exactly
        // quadruple the single-relay value.
        assert_eq!(m.a_rs_pair[0][0], 4.0 * single);
    }

    #[test]
    fn best_bc_tie_breaks_lexicographically() {
        let topo = tiny_topology();
        let cons = Constellation::bpsk();
        let same = [ComplexMatrix::identity(1), ComplexMatrix::identity(1)];
        let sr = vec![vec![ComplexMatrix::identity(2), ComplexMatrix::identity(2)]];
        let slot = slot_from_parts(&topo, sr, vec![vec![same.clone(), same]]);
        let m = SelectionMetrics::compute(&slot, &topo, 1.0, &cons).unwrap();
        // All three pairs combine identical matrices, so all metrics tie.
        assert!(m.a_rs_pair[0].windows(2).all(|w| w[0] == w[1]));
        let best = m.best_bc(&[true]).unwrap();
        assert_eq!(best.relays, (0, 0));
        assert!(m.best_bc(&[false]).is_none());
    }

    #[test]
    fn selection_invariant_under_common_scaling() {
        let topo = Topology::new(3, 4, 2, 2, 1).unwrap();
        let cons = Constellation::bpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        for _ in 0..10 {
            let slot = SlotChannels::draw(&topo, &CsiErrorModel::perfect(), 1.0, &mut rng);
            let scaled = SlotChannels {
                sr_true: slot
                    .sr_true
                    .iter()
                    .map(|r| r.iter().map(|h| h.scale(3.0)).collect())
                    .collect(),
                sr_est: slot
                    .sr_est
                    .iter()
                    .map(|r| r.iter().map(|h| h.scale(3.0)).collect())
                    .collect(),
                rs_true: slot
                    .rs_true
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|p| [p[0].scale(3.0), p[1].scale(3.0)])
                            .collect()
                    })
                    .collect(),
                rs_est: slot
                    .rs_est
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|p| [p[0].scale(3.0), p[1].scale(3.0)])
                            .collect()
                    })
                    .collect(),
            };
            let all = vec![true; 3];
            let m0 = SelectionMetrics::compute(&slot, &topo, 1.0, &cons).unwrap();
            let m1 = SelectionMetrics::compute(&scaled, &topo, 1.0, &cons).unwrap();
            let b0 = m0.best_ma(&all).unwrap();
            let b1 = m1.best_ma(&all).unwrap();
            assert_eq!((b0.cluster, b0.relay), (b1.cluster, b1.relay));
            let d0 = m0.best_bc(&all).unwrap();
            let d1 = m1.best_bc(&all).unwrap();
            assert_eq!((d0.cluster, d0.relays), (d1.cluster, d1.relays));
        }
    }

    #[test]
    fn calibration_ratio_of_identical_distributions_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let ratio = calibration_ratio(10_000, || {
            let a: f64 = rng.random::<f64>() + 0.5;
            let b: f64 = rng.random::<f64>() + 0.5;
            (a, b)
        })
        .unwrap();
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio} strayed from 1");
    }

    #[test]
    fn calibration_ratio_single_draw() {
        let mut vals = vec![(2.0, 4.0)].into_iter();
        let ratio = calibration_ratio(1, || vals.next().unwrap()).unwrap();
        assert_eq!(ratio, 0.5);
        assert!(calibration_ratio(0, || (1.0, 1.0)).is_err());
    }

    #[test]
    fn estimate_g_is_positive_and_reproducible() {
        let topo = Topology::new(2, 3, 1, 1, 1).unwrap();
        let cons = Constellation::bpsk();
        let mut a = ChaCha8Rng::seed_from_u64(76);
        let mut b = ChaCha8Rng::seed_from_u64(76);
        let ga = estimate_g(&topo, &CsiErrorModel::perfect(), 1.0, &cons, 200, &mut a).unwrap();
        let gb = estimate_g(&topo, &CsiErrorModel::perfect(), 1.0, &cons, 200, &mut b).unwrap();
        assert!(ga.g > 0.0);
        assert_eq!(ga, gb);
        assert_eq!(ga.calibration_draws, 200);
    }

    fn ma_sel(metric: f64) -> MaSelection {
        MaSelection {
            cluster: 0,
            relay: 1,
            metric,
        }
    }

    fn bc_sel(metric: f64) -> BcSelection {
        BcSelection {
            cluster: 0,
            relays: (0, 1),
            metric,
        }
    }

    #[test]
    fn latency_cap_forces_downlink() {
        let g = GThreshold {
            g: 1.0,
            calibration_draws: 1,
        };
        let fullest = BcSelection {
            cluster: 2,
            relays: (1, 1),
            metric: 0.1,
        };
        // 6 packets in groups of 2 exceeds a cap of 2 groups.
        let d = choose_mode(6, 2, 2, Some(ma_sel(9.0)), Some(bc_sel(0.5)), Some(fullest), &g)
            .unwrap();
        match d {
            ModeDecision::Broadcast {
                selection,
                forced_by_latency,
            } => {
                assert!(forced_by_latency);
                assert_eq!(selection.cluster, 2);
            }
            _ => panic!("latency cap must force the downlink"),
        }
        // At the cap exactly, no force.
        let d = choose_mode(4, 2, 2, Some(ma_sel(9.0)), Some(bc_sel(0.5)), Some(fullest), &g)
            .unwrap();
        assert!(matches!(d, ModeDecision::MultipleAccess { .. }));
    }

    #[test]
    fn ratio_rule_prefers_uplink_at_threshold() {
        let g = GThreshold {
            g: 2.0,
            calibration_draws: 1,
        };
        let d = choose_mode(0, 2, 5, Some(ma_sel(1.0)), Some(bc_sel(0.5)), Some(bc_sel(0.5)), &g)
            .unwrap();
        assert!(
            matches!(d, ModeDecision::MultipleAccess { .. }),
            "ratio equal to g must pick the uplink"
        );
        let d = choose_mode(0, 2, 5, Some(ma_sel(0.9)), Some(bc_sel(0.5)), Some(bc_sel(0.5)), &g)
            .unwrap();
        assert!(matches!(
            d,
            ModeDecision::Broadcast {
                forced_by_latency: false,
                ..
            }
        ));
    }

    #[test]
    fn fallback_modes() {
        let g = GThreshold {
            g: 1.0,
            calibration_draws: 1,
        };
        // Empty buffers: only the uplink is feasible.
        let d = choose_mode(0, 2, 5, Some(ma_sel(0.1)), None, None, &g).unwrap();
        assert!(matches!(d, ModeDecision::MultipleAccess { .. }));
        // Full buffers: only the downlink is feasible.
        let d = choose_mode(12, 2, 100, None, Some(bc_sel(0.1)), Some(bc_sel(0.1)), &g).unwrap();
        assert!(matches!(
            d,
            ModeDecision::Broadcast {
                forced_by_latency: false,
                ..
            }
        ));
        assert!(choose_mode(0, 2, 5, None, None, None, &g).is_err());
    }
}
