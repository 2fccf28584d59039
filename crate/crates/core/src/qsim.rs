//! Dense statevector simulator over the native gate set.
//!
//! Qubit 0 is the most significant bit of a basis index and the leftmost
//! character of a bitstring.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_QUBITS: usize = 14;

/// Shots drawn per RNG stream by [`sample_shots`].
const SHOT_BATCH: u64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("qubit count {0} outside 1..={MAX_QUBITS}")]
    SizeOutOfRange(usize),
    #[error("basis label length {got} does not match {expected} qubits")]
    LabelLength { expected: usize, got: usize },
    #[error("basis label {0:?} contains characters other than 0/1")]
    BadLabel(String),
    #[error("site {0} is not part of the register")]
    InvalidSite(SiteCoord),
    #[error("register lists site {0} twice")]
    DuplicateSite(SiteCoord),
    #[error("CZ applied to identical sites {0}")]
    CzSameSite(SiteCoord),
    #[error("non-finite angle in {0}")]
    NonFiniteAngle(&'static str),
    #[error("shot count must be positive")]
    ZeroShots,
    #[error("distribution does not sum to 1 (total {0})")]
    BadDistribution(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteCoord {
    pub row: usize,
    pub col: usize,
}

impl SiteCoord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn shares_line(&self, other: &SiteCoord) -> bool {
        self.row == other.row || self.col == other.col
    }

    pub fn dist_sq(&self, other: &SiteCoord) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        dr * dr + dc * dc
    }
}

impl fmt::Display for SiteCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NativeOp {
    /// exp(-i theta/2 (cos phi X + sin phi Y)) on every qubit.
    GlobalRot { phi: f64, theta: f64 },
    /// diag(e^{-i theta/2}, e^{i theta/2}) on one site.
    LocalRz { site: SiteCoord, theta: f64 },
    Cz { a: SiteCoord, b: SiteCoord },
    MeasureAll,
}

impl NativeOp {
    pub fn validate(&self) -> Result<(), QsimError> {
        match *self {
            NativeOp::GlobalRot { phi, theta } => {
                if !phi.is_finite() || !theta.is_finite() {
                    return Err(QsimError::NonFiniteAngle("GlobalRot"));
                }
            }
            NativeOp::LocalRz { theta, .. } => {
                if !theta.is_finite() {
                    return Err(QsimError::NonFiniteAngle("LocalRz"));
                }
            }
            NativeOp::Cz { a, b } => {
                if a == b {
                    return Err(QsimError::CzSameSite(a));
                }
            }
            NativeOp::MeasureAll => {}
        }
        Ok(())
    }
}

/// Native ops bound to an ordered register of sites (qubit i sits at `sites[i]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NativeCircuit {
    sites: Vec<SiteCoord>,
    ops: Vec<NativeOp>,
}

impl NativeCircuit {
    pub fn new(sites: Vec<SiteCoord>) -> Result<Self, QsimError> {
        if sites.is_empty() || sites.len() > MAX_QUBITS {
            return Err(QsimError::SizeOutOfRange(sites.len()));
        }
        for (i, s) in sites.iter().enumerate() {
            if sites[..i].contains(s) {
                return Err(QsimError::DuplicateSite(*s));
            }
        }
        Ok(Self { sites, ops: Vec::new() })
    }

    pub fn with_ops(sites: Vec<SiteCoord>, ops: Vec<NativeOp>) -> Result<Self, QsimError> {
        let mut c = Self::new(sites)?;
        for op in ops {
            c.push(op)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, op: NativeOp) -> Result<(), QsimError> {
        op.validate()?;
        match op {
            NativeOp::LocalRz { site, .. } => {
                self.qubit_of(site)?;
            }
            NativeOp::Cz { a, b } => {
                self.qubit_of(a)?;
                self.qubit_of(b)?;
            }
            _ => {}
        }
        self.ops.push(op);
        Ok(())
    }

    pub fn sites(&self) -> &[SiteCoord] {
        &self.sites
    }

    pub fn ops(&self) -> &[NativeOp] {
        &self.ops
    }

    pub fn n_qubits(&self) -> usize {
        self.sites.len()
    }

    pub fn qubit_of(&self, site: SiteCoord) -> Result<usize, QsimError> {
        self.sites.iter().position(|s| *s == site).ok_or(QsimError::InvalidSite(site))
    }

    pub fn cz_count(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, NativeOp::Cz { .. })).count()
    }
}

pub type Gate1 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
    lost: Vec<bool>,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn check_size(n: usize) -> Result<(), QsimError> {
    if n == 0 || n > MAX_QUBITS {
        Err(QsimError::SizeOutOfRange(n))
    } else {
        Ok(())
    }
}

pub fn label_to_index(label: &str) -> Result<usize, QsimError> {
    let mut idx = 0usize;
    for ch in label.chars() {
        idx <<= 1;
        match ch {
            '0' => {}
            '1' => idx |= 1,
            _ => return Err(QsimError::BadLabel(label.to_string())),
        }
    }
    Ok(idx)
}

pub fn index_to_label(idx: usize, n: usize) -> String {
    (0..n).map(|q| if idx >> (n - 1 - q) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Basis state with amplitude 1 on `basis_label`.
pub fn init_state(n_qubits: usize, basis_label: &str) -> Result<StateVector, QsimError> {
    check_size(n_qubits)?;
    if basis_label.chars().count() != n_qubits {
        return Err(QsimError::LabelLength { expected: n_qubits, got: basis_label.chars().count() });
    }
    let idx = label_to_index(basis_label)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
    amps[idx] = c(1.0, 0.0);
    Ok(StateVector { n_qubits, amps, lost: vec![false; n_qubits] })
}

impl StateVector {
    pub fn zeros(n_qubits: usize) -> Result<Self, QsimError> {
        init_state(n_qubits, &"0".repeat(n_qubits))
    }

    /// Wraps raw amplitudes; the length must be a power of two within range.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, QsimError> {
        let n = amps.len().trailing_zeros() as usize;
        if !amps.len().is_power_of_two() {
            return Err(QsimError::SizeOutOfRange(n));
        }
        check_size(n)?;
        Ok(Self { n_qubits: n, amps, lost: vec![false; n] })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, label: &str) -> Result<Complex64, QsimError> {
        if label.len() != self.n_qubits {
            return Err(QsimError::LabelLength { expected: self.n_qubits, got: label.len() });
        }
        Ok(self.amps[label_to_index(label)?])
    }

    pub fn lost_flags(&self) -> &[bool] {
        &self.lost
    }

    pub fn set_lost(&mut self, q: usize, lost: bool) {
        self.lost[q] = lost;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
    }

    fn stride(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    /// Applies a 2x2 matrix to qubit `q`.
    pub fn apply_1q(&mut self, q: usize, m: &Gate1) {
        let s = self.stride(q);
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + s {
                let a0 = self.amps[i];
                let a1 = self.amps[i + s];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i + s] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += 2 * s;
        }
    }

    /// Applies a diagonal phase pair to qubit `q`.
    pub fn apply_diag_1q(&mut self, q: usize, d0: Complex64, d1: Complex64) {
        let s = self.stride(q);
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & s == 0 { d0 } else { d1 };
        }
    }

    pub fn apply_global_rot(&mut self, phi: f64, theta: f64) {
        let m = global_rot_matrix(phi, theta);
        for q in 0..self.n_qubits {
            self.apply_1q(q, &m);
        }
    }

    pub fn apply_rz(&mut self, q: usize, theta: f64) {
        let h = theta / 2.0;
        self.apply_diag_1q(q, Complex64::from_polar(1.0, -h), Complex64::from_polar(1.0, h));
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) {
        let sa = self.stride(a);
        let sb = self.stride(b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & sa != 0 && i & sb != 0 {
                *amp = -*amp;
            }
        }
    }

    /// Applies a Pauli (0=I, 1=X, 2=Y, 3=Z) to qubit `q`.
    pub fn apply_pauli(&mut self, q: usize, p: u8) {
        let zero = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        match p {
            0 => {}
            1 => self.apply_1q(q, &[[zero, one], [one, zero]]),
            2 => self.apply_1q(q, &[[zero, c(0.0, -1.0)], [c(0.0, 1.0), zero]]),
            _ => self.apply_diag_1q(q, one, -one),
        }
    }

    /// Projects qubit `q` onto `bit` and renormalizes; returns the prior probability.
    pub fn project(&mut self, q: usize, bit: bool) -> f64 {
        let s = self.stride(q);
        let mut p = 0.0;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & s != 0) == bit {
                p += a.norm_sqr();
            } else {
                *a = c(0.0, 0.0);
            }
        }
        self.normalize();
        p
    }

    /// Probability that qubit `q` reads 1.
    pub fn prob_one(&self, q: usize) -> f64 {
        let s = self.stride(q);
        self.amps.iter().enumerate().filter(|(i, _)| i & s != 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// In-place application of one native op on a register of sites.
    pub fn apply(&mut self, op: &NativeOp, register: &[SiteCoord]) -> Result<(), QsimError> {
        op.validate()?;
        let find = |s: SiteCoord| register.iter().position(|r| *r == s).ok_or(QsimError::InvalidSite(s));
        match *op {
            NativeOp::GlobalRot { phi, theta } => self.apply_global_rot(phi, theta),
            NativeOp::LocalRz { site, theta } => {
                let q = find(site)?;
                self.apply_rz(q, theta);
            }
            NativeOp::Cz { a, b } => {
                let (qa, qb) = (find(a)?, find(b)?);
                self.apply_cz(qa, qb);
            }
            NativeOp::MeasureAll => {}
        }
        Ok(())
    }
}

pub fn global_rot_matrix(phi: f64, theta: f64) -> Gate1 {
    let (s, co) = (theta / 2.0).sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    [
        [c(co, 0.0), c(0.0, -s) * e.conj()],
        [c(0.0, -s) * e, c(co, 0.0)],
    ]
}

/// Pure form of [`StateVector::apply`].
pub fn apply_native(
    state: &StateVector,
    op: &NativeOp,
    register: &[SiteCoord],
) -> Result<StateVector, QsimError> {
    let mut out = state.clone();
    out.apply(op, register)?;
    Ok(out)
}

/// Runs every op of `circuit` on `init`.
pub fn simulate(circuit: &NativeCircuit, init: &StateVector) -> Result<StateVector, QsimError> {
    if init.n_qubits() != circuit.n_qubits() {
        return Err(QsimError::LabelLength { expected: circuit.n_qubits(), got: init.n_qubits() });
    }
    let mut s = init.clone();
    for op in circuit.ops() {
        s.apply(op, circuit.sites())?;
    }
    Ok(s)
}

pub fn run_ideal(circuit: &NativeCircuit) -> Result<StateVector, QsimError> {
    simulate(circuit, &StateVector::zeros(circuit.n_qubits())?)
}

/// Full unitary of `circuit` as a dense matrix (columns are images of basis states).
pub fn circuit_unitary(circuit: &NativeCircuit) -> Result<DMatrix<Complex64>, QsimError> {
    let n = circuit.n_qubits();
    let dim = 1 << n;
    let mut u = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[j] = Complex64::new(1.0, 0.0);
        let out = simulate(circuit, &StateVector::from_amplitudes(amps)?)?;
        for (i, a) in out.amplitudes().iter().enumerate() {
            u[(i, j)] = *a;
        }
    }
    Ok(u)
}

/// Frobenius distance between `u` and `e^{ia} v`, minimized over the global phase `a`.
pub fn operator_distance(u: &DMatrix<Complex64>, v: &DMatrix<Complex64>) -> f64 {
    let overlap: Complex64 = (v.adjoint() * u).trace();
    let phase = if overlap.norm() > 1e-300 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
    (u - v * phase).norm()
}

/// Probability vector over basis indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    n_qubits: usize,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(n_qubits: usize, probs: Vec<f64>) -> Result<Self, QsimError> {
        check_size(n_qubits)?;
        if probs.len() != 1 << n_qubits {
            return Err(QsimError::SizeOutOfRange(n_qubits));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 || probs.iter().any(|p| *p < -1e-12) {
            return Err(QsimError::BadDistribution(total));
        }
        Ok(Self { n_qubits, probs })
    }

    pub fn from_map(n_qubits: usize, map: &BTreeMap<String, f64>) -> Result<Self, QsimError> {
        check_size(n_qubits)?;
        let mut probs = vec![0.0; 1 << n_qubits];
        for (k, v) in map {
            if k.len() != n_qubits {
                return Err(QsimError::LabelLength { expected: n_qubits, got: k.len() });
            }
            probs[label_to_index(k)?] += v;
        }
        Self::new(n_qubits, probs)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, label: &str) -> f64 {
        match label_to_index(label) {
            Ok(i) if label.len() == self.n_qubits => self.probs[i],
            _ => 0.0,
        }
    }

    /// Nonzero entries keyed by bitstring.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 1e-15)
            .map(|(i, p)| (index_to_label(i, self.n_qubits), *p))
            .collect()
    }

    /// Marginal over the listed qubits, in the listed order.
    pub fn marginal(&self, qubits: &[usize]) -> Distribution {
        let k = qubits.len();
        let mut probs = vec![0.0; 1 << k];
        for (i, p) in self.probs.iter().enumerate() {
            let mut j = 0;
            for &q in qubits {
                j = (j << 1) | (i >> (self.n_qubits - 1 - q) & 1);
            }
            probs[j] += p;
        }
        Distribution { n_qubits: k, probs }
    }

    /// Expectation of the parity of all bits.
    pub fn parity_expectation(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| if i.count_ones() % 2 == 0 { *p } else { -*p })
            .sum()
    }

    pub fn mode(&self) -> String {
        let (i, _) = self
            .probs
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (i, p)| if *p > best.1 { (i, *p) } else { best });
        index_to_label(i, self.n_qubits)
    }
}

pub fn probabilities(state: &StateVector) -> Distribution {
    let probs: Vec<f64> = state.amps.iter().map(|a| a.norm_sqr()).collect();
    Distribution { n_qubits: state.n_qubits, probs }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotHistogram {
    pub counts: BTreeMap<String, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl ShotHistogram {
    pub fn from_samples<I: IntoIterator<Item = String>>(samples: I, seed: u64) -> Self {
        let mut counts = BTreeMap::new();
        let mut shots = 0;
        for s in samples {
            *counts.entry(s).or_insert(0) += 1;
            shots += 1;
        }
        Self { counts, shots, seed }
    }

    pub fn frequency(&self, label: &str) -> f64 {
        self.counts.get(label).copied().unwrap_or(0) as f64 / self.shots as f64
    }

    pub fn mode(&self) -> Option<&str> {
        self.counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(k, _)| k.as_str())
    }

    /// Histogram restricted to the listed bit positions.
    pub fn marginal(&self, qubits: &[usize]) -> ShotHistogram {
        let mut counts = BTreeMap::new();
        for (k, v) in &self.counts {
            let b = k.as_bytes();
            let key: String = qubits.iter().map(|&q| b[q] as char).collect();
            *counts.entry(key).or_insert(0) += v;
        }
        ShotHistogram { counts, shots: self.shots, seed: self.seed }
    }

    pub fn parity_expectation(&self) -> f64 {
        self.counts.iter().map(|(k, v)| parity(k) as f64 * *v as f64).sum::<f64>() / self.shots as f64
    }
}

/// RNG for one stream of a seeded family. Streams are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent child seed for sub-experiment `tag` (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `shots` samples. Batches of 4096 shots use their own ChaCha8 stream,
/// so the result does not depend on thread scheduling.
pub fn sample_shots(dist: &Distribution, shots: u64, seed: u64) -> Result<ShotHistogram, QsimError> {
    if shots == 0 {
        return Err(QsimError::ZeroShots);
    }
    let mut cdf = Vec::with_capacity(dist.probs.len());
    let mut acc = 0.0;
    for p in &dist.probs {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    let n_batches = shots.div_ceil(SHOT_BATCH);
    let partial: Vec<Vec<u64>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let count = SHOT_BATCH.min(shots - b * SHOT_BATCH);
            let mut local = vec![0u64; cdf.len()];
            for _ in 0..count {
                let u: f64 = rng.random::<f64>() * total;
                let i = cdf.partition_point(|x| *x <= u).min(cdf.len() - 1);
                local[i] += 1;
            }
            local
        })
        .collect();
    let mut counts = BTreeMap::new();
    for i in 0..cdf.len() {
        let n: u64 = partial.iter().map(|v| v[i]).sum();
        if n > 0 {
            counts.insert(index_to_label(i, dist.n_qubits), n);
        }
    }
    Ok(ShotHistogram { counts, shots, seed })
}

/// +1 for an even number of 1s, -1 otherwise.
pub fn parity(bits: &str) -> i8 {
    if bits.bytes().filter(|b| *b == b'1').count() % 2 == 0 {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn reg(n: usize) -> Vec<SiteCoord> {
        (0..n).map(|i| SiteCoord::new(0, i)).collect()
    }

    #[test]
    fn init_examples() {
        let s = init_state(2, "00").unwrap();
        assert_eq!(s.amplitude("00").unwrap(), c(1.0, 0.0));
        let s = init_state(1, "1").unwrap();
        assert_eq!(s.amplitude("1").unwrap(), c(1.0, 0.0));
        let s = init_state(14, &"0".repeat(14)).unwrap();
        assert_eq!(s.amplitudes().len(), 16384);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(matches!(init_state(15, &"0".repeat(15)), Err(QsimError::SizeOutOfRange(15))));
        assert!(matches!(init_state(0, ""), Err(QsimError::SizeOutOfRange(0))));
        assert!(matches!(init_state(2, "0"), Err(QsimError::LabelLength { .. })));
    }

    #[test]
    fn msb_ordering() {
        let s = init_state(3, "100").unwrap();
        assert_eq!(s.amplitudes()[4], c(1.0, 0.0));
        assert_eq!(index_to_label(4, 3), "100");
    }

    #[test]
    fn x_rotation_flips() {
        let r = reg(1);
        let s = apply_native(&init_state(1, "0").unwrap(), &NativeOp::GlobalRot { phi: 0.0, theta: PI }, &r).unwrap();
        assert!((s.amplitude("1").unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cz_signs() {
        let r = reg(2);
        for (label, sign) in [("00", 1.0), ("01", 1.0), ("10", 1.0), ("11", -1.0)] {
            let s = init_state(2, label).unwrap();
            let out = apply_native(&s, &NativeOp::Cz { a: r[0], b: r[1] }, &r).unwrap();
            assert_eq!(out.amplitude(label).unwrap(), c(sign, 0.0));
        }
        let same = NativeOp::Cz { a: r[0], b: r[0] };
        assert!(matches!(apply_native(&init_state(2, "00").unwrap(), &same, &r), Err(QsimError::CzSameSite(_))));
    }

    #[test]
    fn opposite_phase_half_pulses_cancel() {
        let r = reg(2);
        let mut s = init_state(2, "01").unwrap();
        s.apply(&NativeOp::GlobalRot { phi: 0.4, theta: PI / 2.0 }, &r).unwrap();
        s.apply(&NativeOp::GlobalRot { phi: 0.4 + PI, theta: PI / 2.0 }, &r).unwrap();
        assert!((s.amplitude("01").unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_site() {
        let r = reg(2);
        let op = NativeOp::LocalRz { site: SiteCoord::new(5, 5), theta: 1.0 };
        assert!(matches!(apply_native(&init_state(2, "00").unwrap(), &op, &r), Err(QsimError::InvalidSite(_))));
    }

    #[test]
    fn probabilities_examples() {
        let r = reg(1);
        let s = apply_native(&init_state(1, "0").unwrap(), &NativeOp::GlobalRot { phi: PI / 2.0, theta: PI / 2.0 }, &r).unwrap();
        let d = probabilities(&s);
        assert!((d.probability("0") - 0.5).abs() < 1e-12);
        assert!((d.probability("1") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sampling() {
        let d = Distribution::new(1, vec![1.0, 0.0]).unwrap();
        let h = sample_shots(&d, 100, 3).unwrap();
        assert_eq!(h.counts.get("0"), Some(&100));
        let d = Distribution::new(1, vec![0.5, 0.5]).unwrap();
        let h = sample_shots(&d, 100_000, 7).unwrap();
        let n0 = *h.counts.get("0").unwrap() as f64;
        assert!((n0 - 50_000.0).abs() < 5.0 * (100_000.0f64 * 0.25).sqrt());
        assert_eq!(h, sample_shots(&d, 100_000, 7).unwrap());
        assert_eq!(h.counts.values().sum::<u64>(), 100_000);
        assert!(matches!(sample_shots(&d, 0, 1), Err(QsimError::ZeroShots)));
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity("00"), 1);
        assert_eq!(parity("101"), 1);
        assert_eq!(parity("100"), -1);
        let total: i32 = (0..8).map(|i| parity(&index_to_label(i, 3)) as i32).sum();
        assert_eq!(total, 0);
    }

    #[test]
    fn marginals() {
        let d = Distribution::new(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = d.marginal(&[1]);
        assert!((m.probability("1") - 0.6).abs() < 1e-12);
        let m = d.marginal(&[1, 0]);
        assert!((m.probability("10") - 0.2).abs() < 1e-12);
    }

    #[test]
    fn projection() {
        let r = reg(1);
        let mut s = apply_native(&init_state(1, "0").unwrap(), &NativeOp::GlobalRot { phi: 0.0, theta: PI / 2.0 }, &r).unwrap();
        let p = s.project(0, true);
        assert!((p - 0.5).abs() < 1e-12);
        assert!((s.prob_one(0) - 1.0).abs() < 1e-12);
    }
}
