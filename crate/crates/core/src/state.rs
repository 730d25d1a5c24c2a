//! Dense pure and mixed state representations.
//!
//! Both representations use the MSB-first convention of [`crate::bits`]:
//! qubit `q` (0 = leftmost character of a rendered bit string) is bit
//! `m - 1 - q` of the basis-state index.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest register a [`PureState`] may hold.
pub const MAX_PURE_QUBITS: usize = 26;
/// Largest register a [`MixedState`] may hold.
pub const MAX_MIXED_QUBITS: usize = 13;

/// Probability mass at or above which a distribution is treated as a point
/// mass and read out without consuming randomness.
pub const CERTAINTY: f64 = 1.0 - 1e-9;

/// A 2x2 complex matrix in row-major order.
pub type Matrix2 = [[C64; 2]; 2];

pub(crate) fn bit_of(m: usize, qubit: usize) -> usize {
    m - 1 - qubit
}

fn check_qubit(m: usize, qubit: usize) -> Result<()> {
    if qubit >= m {
        return Err(Error::OutOfRange {
            what: "qubit index",
            value: qubit as i64,
            allowed: format!("0..{m}"),
        });
    }
    Ok(())
}

/// Apply `u` to the pair of entries that differ only in `bit`.
pub(crate) fn apply_matrix_on_bit(v: &mut [C64], bit: usize, u: &Matrix2) {
    let stride = 1usize << bit;
    for chunk in v.chunks_exact_mut(stride << 1) {
        let (lo, hi) = chunk.split_at_mut(stride);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            let x0 = *a0;
            let x1 = *a1;
            *a0 = u[0][0] * x0 + u[0][1] * x1;
            *a1 = u[1][0] * x0 + u[1][1] * x1;
        }
    }
}

fn mask_of(m: usize, qubits: &[usize]) -> usize {
    qubits.iter().fold(0usize, |acc, &q| acc | (1 << bit_of(m, q)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    m: usize,
    amps: Vec<C64>,
}

impl PureState {
    /// `H^{⊗m}|0^m>`.
    pub fn uniform(m: usize) -> Result<Self> {
        check_pure_width(m)?;
        let dim = 1usize << m;
        let a = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(Self {
            m,
            amps: vec![a; dim],
        })
    }

    pub fn basis(m: usize, index: usize) -> Result<Self> {
        check_pure_width(m)?;
        let dim = 1usize << m;
        if index >= dim {
            return Err(Error::OutOfRange {
                what: "basis index",
                value: index as i64,
                allowed: format!("0..{dim}"),
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { m, amps })
    }

    /// Wrap an amplitude vector; its length must be a power of two and its
    /// norm 1 within 1e-10.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "amplitude vector length {dim} is not a power of two"
            )));
        }
        let m = dim.trailing_zeros() as usize;
        check_pure_width(m)?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NumericDomain {
                what: "state norm",
                value: norm,
            });
        }
        Ok(Self { m, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> C64 {
        assert_eq!(self.m, other.m, "inner product of mismatched widths");
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Global-phase-insensitive overlap `|<self|other>|^2`.
    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Multiply the amplitude of every `x` with `predicate(x)` by `e^{i phase}`.
    pub fn apply_diagonal_phase(&mut self, predicate: impl Fn(usize) -> bool, phase: f64) {
        if phase == 0.0 {
            return;
        }
        let factor = C64::from_polar(1.0, phase);
        for (x, a) in self.amps.iter_mut().enumerate() {
            if predicate(x) {
                *a *= factor;
            }
        }
    }

    /// Phase the listed basis indices only; the fast path for marked oracles.
    pub fn apply_phase_to_indices(&mut self, indices: impl IntoIterator<Item = usize>, phase: f64) {
        let factor = C64::from_polar(1.0, phase);
        for x in indices {
            self.amps[x] *= factor;
        }
    }

    /// `I_{m-s} ⊗ [(1 - e^{iθ})|φ_s><φ_s| - I_s]`.
    ///
    /// Within each block of `2^s` amplitudes sharing a prefix, `a` becomes
    /// `(1 - e^{iθ}) mean(a) - a`.
    pub fn apply_suffix_diffusion(&mut self, s: usize, theta: f64) -> Result<()> {
        if s == 0 || s > self.m {
            return Err(Error::OutOfRange {
                what: "diffusion suffix width",
                value: s as i64,
                allowed: format!("1..={}", self.m),
            });
        }
        let block = 1usize << s;
        let coeff = C64::new(1.0, 0.0) - C64::from_polar(1.0, theta);
        for chunk in self.amps.chunks_exact_mut(block) {
            let mean: C64 = chunk.iter().sum::<C64>() / block as f64;
            let shift = coeff * mean;
            for a in chunk.iter_mut() {
                *a = shift - *a;
            }
        }
        Ok(())
    }

    pub fn apply_single_qubit(&mut self, qubit: usize, u: &Matrix2) -> Result<()> {
        check_qubit(self.m, qubit)?;
        apply_matrix_on_bit(&mut self.amps, bit_of(self.m, qubit), u);
        Ok(())
    }

    /// Phase `e^{iθ}` on basis states where every listed qubit is 1.
    pub fn apply_controlled_phase(&mut self, qubits: &[usize], theta: f64) -> Result<()> {
        for &q in qubits {
            check_qubit(self.m, q)?;
        }
        let mask = mask_of(self.m, qubits);
        let factor = C64::from_polar(1.0, theta);
        for (x, a) in self.amps.iter_mut().enumerate() {
            if x & mask == mask {
                *a *= factor;
            }
        }
        Ok(())
    }

    /// Exact marginal over the first `p` qubits.
    pub fn prefix_distribution(&self, p: usize) -> Result<PrefixDistribution> {
        check_prefix(self.m, p)?;
        let shift = self.m - p;
        let mut probs = vec![0.0; 1 << p];
        for (x, a) in self.amps.iter().enumerate() {
            probs[x >> shift] += a.norm_sqr();
        }
        Ok(PrefixDistribution { p, probs })
    }

    /// Multinomial draw of `shots` prefix measurements; deterministic given
    /// `seed`.
    pub fn sample_prefix(&self, p: usize, shots: u64, seed: u64) -> Result<BTreeMap<BitString, u64>> {
        let dist = self.prefix_distribution(p)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        dist.sample_histogram(shots, &mut rng)
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    /// Rescale to unit norm (used after a Kraus branch in a trajectory).
    pub(crate) fn renormalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
    }
}

fn check_pure_width(m: usize) -> Result<()> {
    if m == 0 || m > MAX_PURE_QUBITS {
        return Err(Error::Capacity {
            what: "pure state",
            requested: m,
            max: MAX_PURE_QUBITS,
        });
    }
    Ok(())
}

fn check_prefix(m: usize, p: usize) -> Result<()> {
    if p == 0 || p > m {
        return Err(Error::OutOfRange {
            what: "prefix width",
            value: p as i64,
            allowed: format!("1..={m}"),
        });
    }
    Ok(())
}

/// Exact outcome probabilities of measuring the first `p` qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefixDistribution {
    pub p: usize,
    pub probs: Vec<f64>,
}

impl PrefixDistribution {
    pub fn prob(&self, prefix: &BitString) -> f64 {
        assert_eq!(prefix.width(), self.p);
        self.probs[prefix.index()]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Most likely outcome (lowest index on ties).
    pub fn argmax(&self) -> BitString {
        let mut best = 0;
        for (i, &q) in self.probs.iter().enumerate() {
            if q > self.probs[best] {
                best = i;
            }
        }
        BitString::new(self.p, best as u64).expect("index fits width")
    }

    /// One measurement. Point masses (≥ [`CERTAINTY`]) are returned without
    /// touching the generator.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        let best = self.argmax();
        if self.probs[best.index()] >= CERTAINTY {
            return best;
        }
        let weights: Vec<f64> = self.probs.iter().map(|&q| q.max(0.0)).collect();
        let dist = WeightedIndex::new(&weights).expect("non-degenerate distribution");
        BitString::new(self.p, dist.sample(rng) as u64).expect("index fits width")
    }

    pub fn sample_histogram<R: Rng + ?Sized>(
        &self,
        shots: u64,
        rng: &mut R,
    ) -> Result<BTreeMap<BitString, u64>> {
        if shots == 0 {
            return Err(Error::OutOfRange {
                what: "shots",
                value: 0,
                allowed: ">= 1".into(),
            });
        }
        let weights: Vec<f64> = self.probs.iter().map(|&q| q.max(0.0)).collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::Parameter(format!("degenerate distribution: {e}")))?;
        let mut hist = BTreeMap::new();
        for _ in 0..shots {
            let b = BitString::new(self.p, dist.sample(rng) as u64).expect("index fits width");
            *hist.entry(b).or_insert(0) += 1;
        }
        Ok(hist)
    }
}

/// Density matrix stored row-major as a vector of length `4^m`; entry
/// `(r, c)` sits at `(r << m) | c`. Gates act on the row bits and their
/// conjugates on the column bits.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    m: usize,
    entries: Vec<C64>,
}

impl MixedState {
    pub fn from_pure(psi: &PureState) -> Result<Self> {
        let m = psi.num_qubits();
        check_mixed_width(m)?;
        let dim = psi.dim();
        let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
        for (r, a) in psi.amplitudes().iter().enumerate() {
            for (c, b) in psi.amplitudes().iter().enumerate() {
                entries[(r << m) | c] = a * b.conj();
            }
        }
        Ok(Self { m, entries })
    }

    /// `|0^m><0^m|`.
    pub fn zero(m: usize) -> Result<Self> {
        check_mixed_width(m)?;
        let dim = 1usize << m;
        let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
        entries[0] = C64::new(1.0, 0.0);
        Ok(Self { m, entries })
    }

    /// Build from a row-major `2^m x 2^m` matrix (no validation of
    /// positivity).
    pub fn from_matrix(m: usize, entries: Vec<C64>) -> Result<Self> {
        check_mixed_width(m)?;
        if entries.len() != 1 << (2 * m) {
            return Err(Error::Parameter(format!(
                "density matrix needs {} entries, got {}",
                1usize << (2 * m),
                entries.len()
            )));
        }
        Ok(Self { m, entries })
    }

    pub fn num_qubits(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        1 << self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.entries[(row << self.m) | col]
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.entries
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.entry(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entry(i, i).re).collect()
    }

    /// Largest `|ρ_rc - conj(ρ_cr)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.entry(r, c) - self.entry(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn apply_single_qubit(&mut self, qubit: usize, u: &Matrix2) -> Result<()> {
        check_qubit(self.m, qubit)?;
        let col_bit = bit_of(self.m, qubit);
        let row_bit = col_bit + self.m;
        apply_matrix_on_bit(&mut self.entries, row_bit, u);
        let uc = [
            [u[0][0].conj(), u[0][1].conj()],
            [u[1][0].conj(), u[1][1].conj()],
        ];
        apply_matrix_on_bit(&mut self.entries, col_bit, &uc);
        Ok(())
    }

    pub fn apply_controlled_phase(&mut self, qubits: &[usize], theta: f64) -> Result<()> {
        for &q in qubits {
            check_qubit(self.m, q)?;
        }
        let mask = mask_of(self.m, qubits);
        let m = self.m;
        let col_mask = (1usize << m) - 1;
        let phase = C64::from_polar(1.0, theta);
        let phase_c = phase.conj();
        for (idx, e) in self.entries.iter_mut().enumerate() {
            let r_on = (idx >> m) & mask == mask;
            let c_on = (idx & col_mask) & mask == mask;
            match (r_on, c_on) {
                (true, false) => *e *= phase,
                (false, true) => *e *= phase_c,
                _ => {}
            }
        }
        Ok(())
    }

    /// Apply a single-qubit superoperator `S = Σ_k E_k ⊗ conj(E_k)`, indexed
    /// `S[(r' << 1) | c'][(r << 1) | c]`.
    pub fn apply_superoperator(&mut self, qubit: usize, s: &[[C64; 4]; 4]) -> Result<()> {
        check_qubit(self.m, qubit)?;
        let col = 1usize << bit_of(self.m, qubit);
        let row = col << self.m;
        for idx in 0..self.entries.len() {
            if idx & (row | col) != 0 {
                continue;
            }
            let slots = [idx, idx | col, idx | row, idx | row | col];
            let x = slots.map(|i| self.entries[i]);
            for (out, srow) in slots.iter().zip(s.iter()) {
                self.entries[*out] = srow[0] * x[0] + srow[1] * x[1] + srow[2] * x[2] + srow[3] * x[3];
            }
        }
        Ok(())
    }

    pub fn prefix_distribution(&self, p: usize) -> Result<PrefixDistribution> {
        check_prefix(self.m, p)?;
        let shift = self.m - p;
        let mut probs = vec![0.0; 1 << p];
        for (i, d) in self.diagonal().into_iter().enumerate() {
            probs[i >> shift] += d;
        }
        Ok(PrefixDistribution { p, probs })
    }
}

fn check_mixed_width(m: usize) -> Result<()> {
    if m == 0 || m > MAX_MIXED_QUBITS {
        return Err(Error::Capacity {
            what: "mixed state",
            requested: m,
            max: MAX_MIXED_QUBITS,
        });
    }
    Ok(())
}
