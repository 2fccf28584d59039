//! Analytic error models and a Monte-Carlo noise layer over native circuits.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::{compile, op_duration, wrap_angle, AbstractGate, Layout, TimingConfig};
use crate::constants::{HBAR, K_B, MU_B, NU_CLOCK_CS};
use crate::qsim::{
    global_rot_matrix, index_to_label, stream_rng, Distribution, NativeCircuit, NativeOp, ShotHistogram, SiteCoord,
    StateVector,
};

/// Trajectories per deterministic work block in [`noisy_run`].
const BLOCK: u64 = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("{field} = {value} is not a probability")]
    NotProbability { field: &'static str, value: f64 },
    #[error("{field} must be positive (got {value})")]
    NotPositive { field: &'static str, value: f64 },
    #[error("scattering probability {0:.3} >= 1: detuning too small for the formula")]
    ScatterDomain(f64),
    #[error("qubit_freq_offsets has {got} entries but the circuit has {expected} qubits")]
    OffsetCount { expected: usize, got: usize },
    #[error("shot count must be positive")]
    ZeroShots,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceInputs {
    /// Magnetic noise standard deviation (T).
    pub sigma_b: f64,
    /// Bias field (T).
    pub b0: f64,
    /// Atom temperature (K).
    pub t_atom: f64,
    /// Differential light-shift coefficient.
    pub eta: f64,
    pub nu_clock: f64,
}

impl CoherenceInputs {
    pub fn cs(sigma_b: f64, b0: f64, t_atom: f64) -> Self {
        Self { sigma_b, b0, t_atom, eta: -0.00079, nu_clock: NU_CLOCK_CS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherenceTimes {
    pub t2_magnetic: f64,
    pub t2_motion: f64,
    pub t2_star: f64,
}

/// Quasi-static magnetic and motional Ramsey dephasing times.
pub fn coherence_model(inp: &CoherenceInputs) -> CoherenceTimes {
    let t2_magnetic = if inp.sigma_b > 0.0 {
        2f64.sqrt() * PI * PI * HBAR * HBAR * inp.nu_clock / (MU_B * MU_B * inp.b0 * inp.sigma_b)
    } else {
        f64::INFINITY
    };
    let t2_motion = if inp.t_atom > 0.0 && inp.eta != 0.0 {
        1.947 * HBAR / (K_B * inp.t_atom * inp.eta.abs())
    } else {
        f64::INFINITY
    };
    let t2_star = combine(t2_magnetic, t2_motion);
    CoherenceTimes { t2_magnetic, t2_motion, t2_star }
}

fn combine(a: f64, b: f64) -> f64 {
    match (a.is_finite(), b.is_finite()) {
        (false, _) => b,
        (_, false) => a,
        _ => a * b / (a * a + b * b).sqrt(),
    }
}

/// Rabi amplitude factor under shot-to-shot relative intensity noise.
pub fn intensity_dephasing(theta0: f64, sigma_rel: f64) -> f64 {
    (-theta0 * theta0 * sigma_rel * sigma_rel / 2.0).exp()
}

/// Intermediate-state scattering probability in a pi pulse.
pub fn scattering_error(delta: f64, tau_7p: f64) -> Result<f64, NoiseError> {
    if !(delta > 0.0) {
        return Err(NoiseError::NotPositive { field: "delta", value: delta });
    }
    if !(tau_7p > 0.0) {
        return Err(NoiseError::NotPositive { field: "tau_7p", value: tau_7p });
    }
    let p = 0.5 * 2.0 * PI / (delta * tau_7p);
    if p >= 1.0 {
        return Err(NoiseError::ScatterDomain(p));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub epsilon_total: f64,
    /// Rabi frequency times coherence time giving this error per pi pulse.
    pub f_tau: f64,
}

pub fn error_budget(components: &[f64]) -> Result<ErrorBudget, NoiseError> {
    for &c in components {
        if !(0.0..1.0).contains(&c) {
            return Err(NoiseError::NotProbability { field: "component", value: c });
        }
    }
    let eps = components.iter().map(|c| c * c).sum::<f64>().sqrt();
    let f_tau = if eps > 0.0 { (1.0 / E) / (2.0 * eps) } else { f64::INFINITY };
    Ok(ErrorBudget { epsilon_total: eps, f_tau })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpamCorrection {
    pub corrected: f64,
    /// Set when the corrected value exceeded 1 and was clamped.
    pub clamped: bool,
}

pub fn spam_correct(raw: f64, n_qubits: u32, per_qubit: f64) -> Result<SpamCorrection, NoiseError> {
    if !(0.0..=1.0).contains(&raw) {
        return Err(NoiseError::NotProbability { field: "raw_fidelity", value: raw });
    }
    if !(0.0..1.0).contains(&per_qubit) {
        return Err(NoiseError::NotProbability { field: "per_qubit", value: per_qubit });
    }
    let c = raw / (1.0 - per_qubit).powi(n_qubits as i32);
    Ok(if c > 1.0 { SpamCorrection { corrected: 1.0, clamped: true } } else { SpamCorrection { corrected: c, clamped: false } })
}

fn bell_circuit() -> NativeCircuit {
    let layout = Layout::new(vec![SiteCoord::new(3, 3), SiteCoord::new(0, 3)]).expect("distinct sites");
    compile(&[AbstractGate::H(0), AbstractGate::Cnot { control: 0, target: 1 }], &layout).expect("connected pair")
}

/// Bell-pair error from SPAM alone, with ideal gates.
///
/// `early` is the per-atom probability of being missing from the start (the
/// gates then skip it; a C_Z with a missing partner does nothing), `late` the
/// probability of loss at the final readout. Missing atoms read "1". Loss
/// patterns are enumerated exactly and scored with the usual populations plus
/// parity-amplitude estimate.
pub fn bell_spam_error(early: f64, late: f64) -> f64 {
    let base = bell_circuit();
    let timing = TimingConfig::default();
    let ideal = NoiseParams::ideal();
    let mut rng = stream_rng(0, 0);
    let points = 16;
    let mut pops = 0.0;
    let mut coef = Complex64::new(0.0, 0.0);
    for k in 0..=points {
        let phi = 2.0 * PI * k as f64 / points as f64;
        let mut c = base.clone();
        if k < points {
            c.push(NativeOp::GlobalRot { phi, theta: PI / 2.0 }).expect("valid op");
        }
        let mut dist = [0.0; 4];
        for absent_mask in 0..4usize {
            let absent = [absent_mask & 2 != 0, absent_mask & 1 != 0];
            let w_early: f64 = absent.iter().map(|&a| if a { early } else { 1.0 - early }).product();
            let state = evolve(&c, &ideal, &timing, &absent, &[0.0, 0.0], &mut rng);
            for late_mask in 0..4usize {
                if late_mask & absent_mask != 0 {
                    continue;
                }
                let w_late: f64 = (0..2)
                    .filter(|q| !absent[*q])
                    .map(|q| if late_mask >> (1 - q) & 1 == 1 { late } else { 1.0 - late })
                    .product();
                let force = absent_mask | late_mask;
                for (i, a) in state.amplitudes().iter().enumerate() {
                    dist[i | force] += w_early * w_late * a.norm_sqr();
                }
            }
        }
        if k == points {
            pops = dist[0] + dist[3];
        } else {
            coef += Complex64::from_polar(dist[0] - dist[1] - dist[2] + dist[3], -2.0 * phi);
        }
    }
    let c = 2.0 * (coef / points as f64).norm();
    1.0 - (pops + c) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpamBounds {
    pub lo: f64,
    pub hi: f64,
}

/// Range of the Bell SPAM error over the unknowns of the process model: the
/// share of readout loss that happens before the gates (0 to 1) and the
/// pumping failure (0 to `pumping_max`, always before the gates).
pub fn spam_process_bounds(readout_loss: f64, pumping_max: f64) -> SpamBounds {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for pump in [0.0, pumping_max] {
        for j in 0..=10 {
            let f = j as f64 / 10.0;
            let early = 1.0 - (1.0 - f * readout_loss) * (1.0 - pump);
            let e = bell_spam_error(early, (1.0 - f) * readout_loss);
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    SpamBounds { lo, hi }
}

/// GHZ coherence time under fully correlated dephasing.
pub fn ghz_coherence_scaling(n: usize, t2_single: f64) -> f64 {
    t2_single / n.max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub readout_loss: f64,
    pub pumping_error: f64,
    /// Ramsey dephasing time (s); infinite disables dephasing.
    pub t2_star: f64,
    pub sigma_rel_intensity: f64,
    pub cz_depolarizing: f64,
    /// Static frequency offset per qubit (Hz); missing entries are 0.
    pub qubit_freq_offsets: Vec<f64>,
    pub scattering_per_rz_pi: f64,
    /// Fraction of the dephasing variance shared by all qubits.
    #[serde(default = "one")]
    pub dephasing_correlation: f64,
    /// Lost atoms read as "1".
    #[serde(default = "yes")]
    pub dark_on_loss: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            readout_loss: 0.015,
            pumping_error: 0.0025,
            t2_star: 3.5e-3,
            sigma_rel_intensity: 0.0045,
            cz_depolarizing: 0.055,
            qubit_freq_offsets: vec![0.0, 50.0, -40.0, 104.0, -20.0, 30.0],
            scattering_per_rz_pi: 0.0042,
            dephasing_correlation: 1.0,
            dark_on_loss: true,
        }
    }
}

impl NoiseParams {
    /// Every channel switched off.
    pub fn ideal() -> Self {
        Self {
            readout_loss: 0.0,
            pumping_error: 0.0,
            t2_star: f64::INFINITY,
            sigma_rel_intensity: 0.0,
            cz_depolarizing: 0.0,
            qubit_freq_offsets: Vec::new(),
            scattering_per_rz_pi: 0.0,
            dephasing_correlation: 1.0,
            dark_on_loss: true,
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let probs = [
            ("readout_loss", self.readout_loss),
            ("pumping_error", self.pumping_error),
            ("cz_depolarizing", self.cz_depolarizing),
            ("scattering_per_rz_pi", self.scattering_per_rz_pi),
            ("dephasing_correlation", self.dephasing_correlation),
        ];
        for (field, value) in probs {
            if !(0.0..=1.0).contains(&value) {
                return Err(NoiseError::NotProbability { field, value });
            }
        }
        if !(self.t2_star > 0.0) {
            return Err(NoiseError::NotPositive { field: "t2_star", value: self.t2_star });
        }
        if !(self.sigma_rel_intensity >= 0.0 && self.sigma_rel_intensity.is_finite()) {
            return Err(NoiseError::NotPositive { field: "sigma_rel_intensity", value: self.sigma_rel_intensity });
        }
        Ok(())
    }

    /// Multiplies every channel rate by `x` (probabilities clamped to 1).
    pub fn scaled(&self, x: f64) -> Self {
        let p = |v: f64| (v * x).clamp(0.0, 1.0);
        Self {
            readout_loss: p(self.readout_loss),
            pumping_error: p(self.pumping_error),
            t2_star: if x > 0.0 { self.t2_star / x } else { f64::INFINITY },
            sigma_rel_intensity: self.sigma_rel_intensity * x,
            cz_depolarizing: p(self.cz_depolarizing),
            qubit_freq_offsets: self.qubit_freq_offsets.iter().map(|f| f * x).collect(),
            scattering_per_rz_pi: p(self.scattering_per_rz_pi),
            dephasing_correlation: self.dephasing_correlation,
            dark_on_loss: self.dark_on_loss,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn flush_phases(state: &mut StateVector, pending: &mut [f64]) {
    for (q, ph) in pending.iter_mut().enumerate() {
        if *ph != 0.0 {
            state.apply_rz(q, *ph);
            *ph = 0.0;
        }
    }
}

fn evolve(
    circuit: &NativeCircuit,
    params: &NoiseParams,
    timing: &TimingConfig,
    absent: &[bool],
    detuning: &[f64],
    rng: &mut ChaCha8Rng,
) -> StateVector {
    let n = circuit.n_qubits();
    let mut state = StateVector::zeros(n).expect("circuit size checked");
    let mut pending = vec![0.0; n];
    for op in circuit.ops() {
        let dt = op_duration(op, timing);
        for q in 0..n {
            pending[q] += detuning[q] * dt;
        }
        match *op {
            NativeOp::GlobalRot { phi, theta } => {
                flush_phases(&mut state, &mut pending);
                let m = global_rot_matrix(phi, theta);
                for q in (0..n).filter(|q| !absent[*q]) {
                    state.apply_1q(q, &m);
                }
            }
            NativeOp::LocalRz { site, theta } => {
                let q = circuit.qubit_of(site).expect("validated circuit");
                let jitter = normal(rng);
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                if absent[q] {
                    continue;
                }
                state.apply_rz(q, theta * (1.0 + params.sigma_rel_intensity * jitter));
                if u < params.scattering_per_rz_pi * wrap_angle(theta).abs() / PI {
                    let p1 = state.prob_one(q);
                    state.project(q, v < p1);
                }
            }
            NativeOp::Cz { a, b } => {
                let (qa, qb) = (circuit.qubit_of(a).expect("validated"), circuit.qubit_of(b).expect("validated"));
                let u: f64 = rng.random();
                let k: u8 = rng.random_range(1..16);
                if absent[qa] || absent[qb] {
                    continue;
                }
                state.apply_cz(qa, qb);
                if u < params.cz_depolarizing {
                    state.apply_pauli(qa, k / 4);
                    state.apply_pauli(qb, k % 4);
                }
            }
            NativeOp::MeasureAll => {}
        }
    }
    state
}

/// One noisy trajectory: returns the exact readout distribution for the
/// sampled noise realization.
///
/// Atoms that fail pumping sit out the whole circuit; readout loss strikes
/// at the end. Both read "1" when `dark_on_loss` is set and are ignored
/// otherwise.
pub fn noisy_trajectory(
    circuit: &NativeCircuit,
    params: &NoiseParams,
    timing: &TimingConfig,
    rng: &mut ChaCha8Rng,
) -> Distribution {
    let n = circuit.n_qubits();
    let mut absent = vec![false; n];
    let mut lost_mask = 0usize;
    for q in 0..n {
        let pump: f64 = rng.random();
        let read: f64 = rng.random();
        if !params.dark_on_loss {
            continue;
        }
        absent[q] = pump < params.pumping_error;
        if absent[q] || read < params.readout_loss {
            lost_mask |= 1 << (n - 1 - q);
        }
    }
    let sigma = if params.t2_star.is_finite() { 2f64.sqrt() / params.t2_star } else { 0.0 };
    let shared = normal(rng);
    let c = params.dephasing_correlation;
    let detuning: Vec<f64> = (0..n)
        .map(|q| {
            let own = normal(rng);
            let static_hz = params.qubit_freq_offsets.get(q).copied().unwrap_or(0.0);
            sigma * (c.sqrt() * shared + (1.0 - c).sqrt() * own) + 2.0 * PI * static_hz
        })
        .collect();
    let state = evolve(circuit, params, timing, &absent, &detuning, rng);
    let mut probs = vec![0.0; 1 << n];
    for (i, a) in state.amplitudes().iter().enumerate() {
        probs[i | lost_mask] += a.norm_sqr();
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Distribution::new(n, probs).expect("normalized")
}

fn sample_index(dist: &Distribution, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in dist.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.probs().len() - 1
}

/// One shot of the noisy circuit for stream `shot_index` of `seed`.
pub fn noisy_shot_indexed(circuit: &NativeCircuit, params: &NoiseParams, timing: &TimingConfig, seed: u64, shot_index: u64) -> String {
    let mut rng = stream_rng(seed, shot_index);
    let d = noisy_trajectory(circuit, params, timing, &mut rng);
    index_to_label(sample_index(&d, &mut rng), circuit.n_qubits())
}

pub fn noisy_shot(circuit: &NativeCircuit, params: &NoiseParams, timing: &TimingConfig, seed: u64) -> String {
    noisy_shot_indexed(circuit, params, timing, seed, 0)
}

#[derive(Debug, Clone)]
pub struct NoisyRun {
    pub histogram: ShotHistogram,
    /// Average of the per-trajectory readout distributions.
    pub mean: Distribution,
}

/// `shots` trajectories, each sampled once; shot k uses stream k of `seed`.
pub fn noisy_run(
    circuit: &NativeCircuit,
    params: &NoiseParams,
    timing: &TimingConfig,
    shots: u64,
    seed: u64,
) -> Result<NoisyRun, NoiseError> {
    if shots == 0 {
        return Err(NoiseError::ZeroShots);
    }
    params.validate()?;
    let n = circuit.n_qubits();
    let dim = 1usize << n;
    let blocks: Vec<(Vec<f64>, Vec<u64>)> = (0..shots.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; dim];
            let mut counts = vec![0u64; dim];
            for s in b * BLOCK..((b + 1) * BLOCK).min(shots) {
                let mut rng = stream_rng(seed, s);
                let d = noisy_trajectory(circuit, params, timing, &mut rng);
                for (a, p) in acc.iter_mut().zip(d.probs()) {
                    *a += p;
                }
                counts[sample_index(&d, &mut rng)] += 1;
            }
            (acc, counts)
        })
        .collect();
    let mut mean = vec![0.0; dim];
    let mut counts = vec![0u64; dim];
    for (acc, cts) in &blocks {
        for i in 0..dim {
            mean[i] += acc[i];
            counts[i] += cts[i];
        }
    }
    for m in &mut mean {
        *m /= shots as f64;
    }
    let histogram = ShotHistogram {
        counts: counts.iter().enumerate().filter(|(_, c)| **c > 0).map(|(i, c)| (index_to_label(i, n), *c)).collect(),
        shots,
        seed,
    };
    Ok(NoisyRun { histogram, mean: Distribution::new(n, mean).expect("normalized") })
}

/// Monte-Carlo GHZ coherence time: 1/e time of the |0..0><1..1| coherence
/// under static Gaussian detunings, fitted to exp(-(t/tau)^2).
pub fn mc_ghz_coherence_time(n: usize, t2_star: f64, correlation: f64, samples: usize, seed: u64) -> f64 {
    let sigma = 2f64.sqrt() / t2_star;
    let mut rng = stream_rng(seed, n as u64);
    let sums: Vec<f64> = (0..samples)
        .map(|_| {
            let shared = normal(&mut rng);
            (0..n).map(|_| sigma * (correlation.sqrt() * shared + (1.0 - correlation).sqrt() * normal(&mut rng))).sum()
        })
        .collect();
    // |0..0><1..1| picks up the summed phase of all qubits
    let coherence = |t: f64| -> f64 {
        let acc: Complex64 = sums.iter().map(|s| Complex64::from_polar(1.0, s * t)).sum();
        (acc / samples as f64).norm()
    };
    let scale = t2_star / (n as f64).sqrt();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 1..=80 {
        let t = j as f64 * scale / 16.0;
        let c = coherence(t);
        if c > 0.15 && c < 0.98 {
            xs.push(t * t);
            ys.push(-c.ln());
        }
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    (sxx / sxy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{probabilities, run_ideal};

    #[test]
    fn coherence_examples() {
        let t = coherence_model(&CoherenceInputs::cs(0.0, 1.6e-3, 5e-6));
        assert_eq!(t.t2_star, t.t2_motion);
        assert!((t.t2_motion - 3.8e-3).abs() < 0.1e-3, "{}", t.t2_motion);
        let t = coherence_model(&CoherenceInputs::cs(2e-6, 1.6e-3, 5e-6));
        assert!(t.t2_star > 2.8e-3 && t.t2_star < 3.6e-3, "{}", t.t2_star);
    }

    #[test]
    fn intensity_examples() {
        assert_eq!(intensity_dephasing(PI, 0.0), 1.0);
        let err = 1.0 - intensity_dephasing(PI, 0.0045);
        assert!((err - 1.0e-4).abs() < 1e-5);
        let mut last = 0.0;
        for k in 1..20 {
            let e = 1.0 - intensity_dephasing(k as f64 * 0.5, 0.0045);
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn scattering_examples() {
        let e = scattering_error(2.0 * PI * 760e6, 155e-9).unwrap();
        assert!((e - 0.0042).abs() < 1e-4);
        let e2 = scattering_error(2.0 * PI * 1520e6, 155e-9).unwrap();
        assert!((e2 - e / 2.0).abs() < 1e-15);
        assert!((e2 - 0.0021).abs() < 1e-4);
        assert!(matches!(scattering_error(1.0, 1e-9), Err(NoiseError::ScatterDomain(_))));
    }

    #[test]
    fn budget_examples() {
        assert!((error_budget(&[0.0046]).unwrap().f_tau - 40.0).abs() < 0.5);
        let b = error_budget(&[0.0001, 0.0040, 0.0042]).unwrap();
        assert!((b.epsilon_total - 0.0058).abs() < 1e-4);
        assert_eq!(error_budget(&[]).unwrap().epsilon_total, 0.0);
    }

    #[test]
    fn spam_examples() {
        assert!((spam_correct(0.927, 2, 0.015).unwrap().corrected - 0.955).abs() < 0.002);
        assert_eq!(spam_correct(0.8, 3, 0.0).unwrap().corrected, 0.8);
        assert!((spam_correct(0.90, 2, 0.015).unwrap().corrected - 0.925).abs() < 0.003);
        let c = spam_correct(0.999, 4, 0.1).unwrap();
        assert!(c.clamped && c.corrected == 1.0);
        let raw = 0.71;
        let back = spam_correct(raw * 0.985f64.powi(3), 3, 0.015).unwrap().corrected;
        assert!((back - raw).abs() < 1e-12);
    }

    #[test]
    fn late_loss_closed_form() {
        // dark-reading loss L after the gates gives 1 - F = 1.5 L - L^2
        for l in [0.0, 0.015, 0.1] {
            assert!((bell_spam_error(0.0, l) - (1.5 * l - l * l)).abs() < 1e-12);
        }
    }

    #[test]
    fn early_loss_hurts_more() {
        // a missing control leaves the target in |0>, so no Bell population survives
        assert!(bell_spam_error(0.015, 0.0) > bell_spam_error(0.0, 0.015));
        let b = spam_process_bounds(0.015, 0.005);
        assert!(b.lo <= 0.0225 && b.hi >= 0.031, "{b:?}");
        assert_eq!(b.lo, bell_spam_error(0.0, 0.015));
    }

    #[test]
    fn ghz_scaling_rule() {
        assert_eq!(ghz_coherence_scaling(1, 3.5e-3), 3.5e-3);
        assert!((ghz_coherence_scaling(6, 3.5e-3) - 583e-6).abs() < 1e-6);
        for n in 1..=6 {
            let mc = mc_ghz_coherence_time(n, 3.5e-3, 1.0, 4000, 9);
            let rule = ghz_coherence_scaling(n, 3.5e-3);
            assert!((mc / rule - 1.0).abs() < 0.1, "{n} {mc} {rule}");
        }
    }

    #[test]
    fn zero_noise_matches_ideal() {
        let c = bell_circuit();
        let run = noisy_run(&c, &NoiseParams::ideal(), &TimingConfig::default(), 20_000, 3).unwrap();
        let ideal = probabilities(&run_ideal(&c).unwrap());
        let tv: f64 = run.mean.probs().iter().zip(ideal.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        assert!(tv < 1e-12);
        let hist_tv: f64 = ideal
            .to_map()
            .iter()
            .map(|(k, p)| (run.histogram.frequency(k) - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(hist_tv < 0.01);
    }

    #[test]
    fn total_loss_reads_dark() {
        let c = bell_circuit();
        let p = NoiseParams { readout_loss: 1.0, ..NoiseParams::ideal() };
        let run = noisy_run(&c, &p, &TimingConfig::default(), 500, 1).unwrap();
        assert_eq!(run.histogram.counts.get("11"), Some(&500));
    }

    #[test]
    fn reproducible_shots() {
        let c = bell_circuit();
        let p = NoiseParams::default();
        let t = TimingConfig::default();
        assert_eq!(noisy_shot_indexed(&c, &p, &t, 5, 17), noisy_shot_indexed(&c, &p, &t, 5, 17));
        let a = noisy_run(&c, &p, &t, 3000, 11).unwrap();
        let b = noisy_run(&c, &p, &t, 3000, 11).unwrap();
        assert_eq!(a.histogram, b.histogram);
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn validation() {
        assert!(NoiseParams { readout_loss: 1.5, ..NoiseParams::default() }.validate().is_err());
        assert!(NoiseParams { t2_star: 0.0, ..NoiseParams::default() }.validate().is_err());
        assert!(NoiseParams::default().validate().is_ok());
    }
}
