//! Closed-form performance quantities: Gaussian tail, worst-case pairwise
//! error probability and per-slot sum-rates.

use crate::channel::Phase;
use crate::error::{Error, Result};
use crate::linalg::{vector_norm_sq, Complex, ComplexMatrix, ComplexVector};

/// Gaussian tail probability Q(x) = P(N(0,1) > x) = erfc(x/sqrt(2))/2.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Worst-case pairwise error probability for one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PepResult {
    /// Smallest squared candidate-pair distance through the channel,
    /// halved in the broadcast phase.
    pub d_min_sq: f64,
    /// Error probability of the critical pair, in [0, 0.5].
    pub pep_single: f64,
    /// Probability that a two-hop exchange through this worst case fails at
    /// least once, `1 - (1 - pep_single)^2`, in [0, 0.75].
    pub pep_ct: f64,
}

/// Evaluates the worst-case pairwise error probability of an exhaustive
/// detector on channel `h`.
///
/// The minimum of `||h (x_n - x_l)||^2` over all unordered candidate pairs
/// is found by brute force; in the broadcast phase the squared distance is
/// halved. `m` is the stream-normalisation antenna count of the phase: the
/// per-source antennas uplink, the per-relay transmit antennas downlink.
pub fn pep_worst(
    h: &ComplexMatrix,
    es: f64,
    n0: f64,
    m: usize,
    phase: Phase,
    candidates: &[ComplexVector],
) -> Result<PepResult> {
    if candidates.len() < 2 {
        return Err(Error::InvalidArgument(
            "worst-case pair search needs at least two candidates".into(),
        ));
    }
    if es <= 0.0 || n0 <= 0.0 || m == 0 {
        return Err(Error::InvalidArgument(
            "energies and antenna counts must be positive".into(),
        ));
    }
    let factor = match phase {
        Phase::MultipleAccess => 1.0,
        Phase::Broadcast => 0.5,
    };
    let mut d_min_sq = f64::INFINITY;
    for l in 0..candidates.len() {
        for n in (l + 1)..candidates.len() {
            let diff: ComplexVector = candidates[l]
                .iter()
                .zip(&candidates[n])
                .map(|(a, b)| a - b)
                .collect();
            let d = factor * vector_norm_sq(&h.mul_vec(&diff)?);
            if d < d_min_sq {
                d_min_sq = d;
            }
        }
    }
    let pep_single = q_function((es * d_min_sq / (2.0 * n0 * m as f64)).sqrt());
    Ok(PepResult {
        d_min_sq,
        pep_single,
        pep_ct: pep_ct(pep_single)?,
    })
}

/// Probability that at least one of the two hops of an exchange hits the
/// worst-case error: `1 - (1 - p)^2`.
pub fn pep_ct(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    Ok(1.0 - (1.0 - p) * (1.0 - p))
}

/// Achievable uplink sum-rate of one slot,
/// `(1/2) log2 det((es/(ms n0)) H H^H + I)`.
pub fn sumrate_ma(h: &ComplexMatrix, es: f64, ms: usize, n0: f64) -> Result<f64> {
    log_det_rate(h, es / (ms as f64 * n0))
}

/// Achievable downlink rate of one slot toward one source,
/// `(1/2) log2 det((es/(2 m_rtx n0)) H H^H + I)`.
pub fn sumrate_bc(h_combined: &ComplexMatrix, es: f64, m_rtx: usize, n0: f64) -> Result<f64> {
    log_det_rate(h_combined, es / (2.0 * m_rtx as f64 * n0))
}

fn log_det_rate(h: &ComplexMatrix, c: f64) -> Result<f64> {
    let gram = h.multiply(&h.conj_transpose())?.scale(c);
    let mut arg = gram;
    for i in 0..arg.rows() {
        let d = arg.get(i, i) + Complex::new(1.0, 0.0);
        arg.set(i, i, d);
    }
    let det = arg.determinant()?;
    // A Hermitian-plus-identity Gram matrix has a real positive determinant;
    // anything else means the arithmetic went wrong.
    debug_assert!(
        det.im.abs() <= 1e-9 * det.re.abs().max(1.0),
        "determinant {det} should be real"
    );
    Ok(0.5 * det.re.log2())
}

/// Run-level average rate: total rate mass over all slots divided by the
/// slot count, where a downlink slot contributes the rates toward both
/// sources.
pub fn average_sumrate(sr_slots: &[f64], rs_slot_pairs: &[(f64, f64)]) -> Result<f64> {
    let n = sr_slots.len() + rs_slot_pairs.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "average over zero slots is undefined".into(),
        ));
    }
    let total: f64 = sr_slots.iter().sum::<f64>()
        + rs_slot_pairs.iter().map(|(a, b)| a + b).sum::<f64>();
    Ok(total / n as f64)
}
