//! AWGN transmission and exhaustive maximum-likelihood detection.
//!
//! A transmission is `y = scale * H x + n` with circularly-symmetric noise.
//! The detector searches every candidate symbol vector for the smallest
//! `||y - scale * H_est x'||^2`, where `H_est` is the receiver's channel
//! estimate. Because the candidate list and the channel are fixed for a
//! whole slot, the detector precomputes all `scale * H_est x'` images once
//! and reuses them for every symbol period in the slot.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{Complex, ComplexMatrix, ComplexVector};

/// Complex AWGN with total per-entry variance `n0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    n0: f64,
}

impl NoiseModel {
    pub fn new(n0: f64) -> Result<Self> {
        if !n0.is_finite() || n0 <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {n0}"
            )));
        }
        Ok(Self { n0 })
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    /// Draws a noise vector with CN(0, n0) entries.
    pub fn draw<R: Rng>(&self, len: usize, rng: &mut R) -> ComplexVector {
        let sigma = (self.n0 / 2.0).sqrt();
        (0..len)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex::new(sigma * re, sigma * im)
            })
            .collect()
    }
}

/// Amplitude applied on the uplink, where both sources split `es` over
/// `source_antennas` streams each.
pub fn uplink_scale(es: f64, source_antennas: usize) -> f64 {
    (es / source_antennas as f64).sqrt()
}

/// Amplitude applied on the downlink, where the transmit energy splits over
/// the two cooperating relays' `relay_tx_antennas` streams.
pub fn downlink_scale(erj: f64, relay_tx_antennas: usize) -> f64 {
    (erj / (2 * relay_tx_antennas) as f64).sqrt()
}

/// Passes a symbol vector through the true channel and adds noise.
pub fn transmit<R: Rng>(
    h_true: &ComplexMatrix,
    scale: f64,
    x: &[Complex],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ComplexVector> {
    let mut y = h_true.mul_vec(x)?;
    let n = noise.draw(y.len(), rng);
    for (yi, ni) in y.iter_mut().zip(&n) {
        *yi = *yi * scale + ni;
    }
    Ok(y)
}

/// Exhaustive detector over a fixed candidate list.
#[derive(Debug, Clone)]
pub struct MlDetector {
    candidates: Vec<ComplexVector>,
    images: Vec<ComplexVector>,
    rx_len: usize,
}

impl MlDetector {
    /// Precomputes `scale * h_est * candidate` for every candidate.
    pub fn new(h_est: &ComplexMatrix, scale: f64, candidates: &[ComplexVector]) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidArgument("empty candidate list".into()));
        }
        let images = candidates
            .iter()
            .map(|c| {
                let mut img = h_est.mul_vec(c)?;
                for v in &mut img {
                    *v *= scale;
                }
                Ok(img)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            candidates: candidates.to_vec(),
            images,
            rx_len: h_est.rows(),
        })
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn candidate(&self, index: usize) -> &ComplexVector {
        &self.candidates[index]
    }

    /// Returns the first candidate index minimising the squared distance to
    /// `y`, together with the candidate itself. Ties keep the earlier index.
    pub fn detect(&self, y: &[Complex]) -> Result<(usize, &ComplexVector)> {
        if y.len() != self.rx_len {
            return Err(Error::DimensionMismatch(format!(
                "received vector of length {} does not match {} antennas",
                y.len(),
                self.rx_len
            )));
        }
        let mut best_idx = 0usize;
        let mut best_dist = f64::INFINITY;
        for (idx, img) in self.images.iter().enumerate() {
            let dist: f64 = y
                .iter()
                .zip(img)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            if dist < best_dist {
                best_dist = dist;
                best_idx = idx;
            }
        }
        Ok((best_idx, &self.candidates[best_idx]))
    }
}
