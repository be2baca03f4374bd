//! Symbol mapping and candidate enumeration.
//!
//! Constellations are unit-average-energy point sets. BPSK is the default:
//! bit 0 maps to +1 and bit 1 to -1, so the all-zero word is the all-(+1)
//! symbol vector. Exhaustive detection enumerates every length-`n` symbol
//! vector in lexicographic order of point indices; that order doubles as the
//! tie-break rule, so it is part of the contract here.

use crate::error::{Error, Result};
use crate::linalg::{Complex, ComplexVector};

/// Hard ceiling on candidate-list size; beyond this, exhaustive search is a
/// configuration mistake rather than a workload.
const MAX_CANDIDATES: usize = 1 << 20;

/// A finite set of modulation points with unit average energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    name: String,
    points: Vec<Complex>,
    bits_per_symbol: usize,
}

impl Constellation {
    /// Builds a constellation after checking the point count is a power of
    /// two and the average energy is 1.
    pub fn new(name: &str, points: Vec<Complex>) -> Result<Self> {
        let n = points.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "constellation size must be a power of two >= 2, got {n}"
            )));
        }
        let avg_energy: f64 = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / n as f64;
        if (avg_energy - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "constellation must have unit average energy, got {avg_energy}"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            points,
            bits_per_symbol: n.trailing_zeros() as usize,
        })
    }

    /// Binary phase-shift keying: bit 0 -> +1, bit 1 -> -1.
    pub fn bpsk() -> Self {
        Self::new("bpsk", vec![Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0)])
            .expect("bpsk is a valid constellation")
    }

    /// Quadrature phase-shift keying with Gray labelling, unit energy.
    pub fn qpsk() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self::new("qpsk", vec![
            Complex::new(a, a),
            Complex::new(-a, a),
            Complex::new(a, -a),
            Complex::new(-a, -a),
        ])
        .expect("qpsk is a valid constellation")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn point(&self, index: usize) -> Complex {
        self.points[index]
    }

    /// Maps a bit string to symbols. The bit count must divide evenly into
    /// symbols; bits are consumed most-significant first within each symbol.
    pub fn map_bits(&self, bits: &[u8]) -> Result<ComplexVector> {
        if !bits.len().is_multiple_of(self.bits_per_symbol) {
            return Err(Error::InvalidArgument(format!(
                "{} bits do not fill a whole number of {}-bit symbols",
                bits.len(),
                self.bits_per_symbol
            )));
        }
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidArgument(format!("bit value {b} out of range")));
        }
        let symbols = bits
            .chunks(self.bits_per_symbol)
            .map(|chunk| {
                let idx = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                self.points[idx]
            })
            .collect();
        Ok(symbols)
    }

    /// Inverse of [`map_bits`](Self::map_bits) for exact constellation
    /// points, as produced by the exhaustive detector.
    pub fn demap_symbols(&self, symbols: &[Complex]) -> Result<Vec<u8>> {
        let mut bits = Vec::with_capacity(symbols.len() * self.bits_per_symbol);
        for &s in symbols {
            let idx = self
                .points
                .iter()
                .position(|&p| p == s)
                .ok_or_else(|| Error::InvalidArgument(format!("{s} is not a constellation point")))?;
            for shift in (0..self.bits_per_symbol).rev() {
                bits.push(((idx >> shift) & 1) as u8);
            }
        }
        Ok(bits)
    }

    /// All length-`n` symbol vectors in lexicographic order of point indices.
    /// Candidate 0 is the all-`point(0)` vector; the last varies fastest in
    /// the final position.
    pub fn enumerate_candidates(&self, n: usize) -> Result<Vec<ComplexVector>> {
        let total = self
            .points
            .len()
            .checked_pow(n as u32)
            .filter(|&t| t <= MAX_CANDIDATES)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "candidate list {}^{} exceeds the exhaustive-search limit",
                    self.points.len(),
                    n
                ))
            })?;
        let mut out = Vec::with_capacity(total);
        let mut indices = vec![0usize; n];
        loop {
            out.push(indices.iter().map(|&i| self.points[i]).collect());
            // Odometer increment, last index fastest.
            let mut pos = n;
            while pos > 0 {
                pos -= 1;
                indices[pos] += 1;
                if indices[pos] < self.points.len() {
                    break;
                }
                indices[pos] = 0;
                if pos == 0 {
                    return Ok(out);
                }
            }
            if n == 0 {
                return Ok(out);
            }
        }
    }
}

/// Payload bits in flight, tagged with where and when they entered the
/// network so delivery delay can be measured.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub bits: Vec<u8>,
    pub cluster: usize,
    pub created_slot: u64,
}

impl Packet {
    pub fn new(bits: Vec<u8>, cluster: usize, created_slot: u64) -> Self {
        Self {
            bits,
            cluster,
            created_slot,
        }
    }
}
