//! Two-atom, three-level Rydberg dynamics for the two-pulse detuned C_Z gate.
//!
//! Basis index is `3 * level_a + level_b` with levels 0 = |0>, 1 = |1>, 2 = |r>.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{Matrix4, SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::wrap_angle;
use crate::optim::{bisect, golden_section};

pub type Vec9 = SVector<Complex64, 9>;
pub type Mat9 = SMatrix<Complex64, 9, 9>;

const COMP: [usize; 4] = [0, 1, 3, 4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("integrator did not converge: amplitude change {change:.3e} after {steps} steps")]
    NoConvergence { steps: usize, change: f64 },
    #[error("norm drift {0:.3e} exceeds 1e-8")]
    NormDrift(f64),
    #[error("invalid pulse parameter: {0}")]
    BadParams(&'static str),
    #[error("tuning reached min return population {min_return:.4} < 0.99 (best delta/omega {:.4}, tau*omega/2pi {:.4}, xi {:.4}, objective {objective:.5})",
        best.delta / best.omega_r, best.tau * best.omega_r / (2.0 * PI), best.xi)]
    TuningFailed { best: RydbergParams, objective: f64, min_return: f64 },
    #[error("no phase-condition root found for delta/omega in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RydbergParams {
    /// Resonant single-atom Rabi frequency (rad/s).
    pub omega_r: f64,
    /// |rr> interaction shift (rad/s).
    pub blockade_b: f64,
    /// Enters the Hamiltonian as -delta |r><r| (rad/s).
    pub delta: f64,
    /// Length of each of the two pulses (s).
    pub tau: f64,
    /// Drive phase of the second pulse.
    pub xi: f64,
    /// Rabi frequency of atom b relative to atom a.
    pub omega_ratio_b: f64,
}

impl RydbergParams {
    pub fn new(omega_r: f64, blockade_b: f64, delta: f64, tau: f64, xi: f64) -> Self {
        Self { omega_r, blockade_b, delta, tau, xi, omega_ratio_b: 1.0 }
    }

    fn validate(&self) -> Result<(), PulseError> {
        if !(self.omega_r >= 0.0 && self.omega_r.is_finite()) {
            return Err(PulseError::BadParams("omega_r must be finite and non-negative"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(PulseError::BadParams("tau must be positive"));
        }
        if !(self.delta.is_finite() && self.blockade_b.is_finite() && self.xi.is_finite() && self.omega_ratio_b.is_finite()) {
            return Err(PulseError::BadParams("non-finite parameter"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    /// RK4 steps per period of the fastest frequency in H.
    pub steps_per_cycle: f64,
    /// Allowed amplitude change between n and 2n steps.
    pub tol: f64,
    pub max_doublings: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { steps_per_cycle: 512.0, tol: 1e-7, max_doublings: 6 }
    }
}

pub fn hamiltonian(p: &RydbergParams, drive_phase: f64) -> Mat9 {
    let mut h = Mat9::zeros();
    let oa = p.omega_r / 2.0;
    let ob = p.omega_r * p.omega_ratio_b / 2.0;
    let up = Complex64::from_polar(1.0, drive_phase);
    for la in 0..3 {
        for lb in 0..3 {
            let i = 3 * la + lb;
            let n_r = (la == 2) as u8 + (lb == 2) as u8;
            let mut e = -p.delta * n_r as f64;
            if n_r == 2 {
                e += p.blockade_b;
            }
            h[(i, i)] = Complex64::new(e, 0.0);
        }
    }
    for other in 0..3 {
        // atom a |1> <-> |r>
        let (i1, ir) = (3 + other, 6 + other);
        h[(i1, ir)] = up * oa;
        h[(ir, i1)] = up.conj() * oa;
        // atom b
        let (j1, jr) = (3 * other + 1, 3 * other + 2);
        h[(j1, jr)] = up * ob;
        h[(jr, j1)] = up.conj() * ob;
    }
    h
}

/// Row-sum bound on the spectral radius.
pub fn gershgorin(h: &Mat9) -> f64 {
    (0..9).map(|i| (0..9).map(|j| h[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// One RK4 step for dpsi/dt = -i H psi with constant H, as a matrix.
pub fn rk4_step_matrix(h: &Mat9, dt: f64) -> Mat9 {
    let a = h * Complex64::new(0.0, -dt);
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    Mat9::identity() + a + a2 * Complex64::new(0.5, 0.0) + a3 * Complex64::new(1.0 / 6.0, 0.0) + a4 * Complex64::new(1.0 / 24.0, 0.0)
}

fn mat_pow(m: &Mat9, mut n: usize) -> Mat9 {
    let mut base = *m;
    let mut acc = Mat9::identity();
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base = base * base;
        n >>= 1;
    }
    acc
}

fn base_steps(h: &Mat9, tau: f64, cfg: &IntegratorConfig) -> usize {
    let w = gershgorin(h);
    ((cfg.steps_per_cycle * w * tau / (2.0 * PI)).ceil() as usize).max(16)
}

/// n fixed RK4 steps of constant H over tau, using repeated squaring of the step matrix.
pub fn rk4_propagator(h: &Mat9, tau: f64, n: usize) -> Mat9 {
    mat_pow(&rk4_step_matrix(h, tau / n as f64), n)
}

/// Classic RK4 for a time-dependent Hamiltonian.
pub fn rk4_evolve<F: Fn(f64) -> Mat9>(h_of_t: F, psi: &Vec9, t0: f64, t1: f64, steps: usize) -> Vec9 {
    let dt = (t1 - t0) / steps as f64;
    let mi = Complex64::new(0.0, -1.0);
    let mut y = *psi;
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let hm = h_of_t(t + 0.5 * dt);
        let k1 = h_of_t(t) * y * mi;
        let k2 = hm * (y + k1 * Complex64::new(0.5 * dt, 0.0)) * mi;
        let k3 = hm * (y + k2 * Complex64::new(0.5 * dt, 0.0)) * mi;
        let k4 = h_of_t(t + dt) * (y + k3 * Complex64::new(dt, 0.0)) * mi;
        y += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0);
    }
    y
}

/// Single-pulse propagator at the default step rule, without a convergence check.
pub fn pulse_propagator(p: &RydbergParams, drive_phase: f64, cfg: &IntegratorConfig) -> Mat9 {
    let h = hamiltonian(p, drive_phase);
    rk4_propagator(&h, p.tau, base_steps(&h, p.tau, cfg))
}

/// Checked propagator: doubles the step count until results agree within `cfg.tol`.
pub fn checked_propagator(p: &RydbergParams, drive_phase: f64, cfg: &IntegratorConfig) -> Result<Mat9, PulseError> {
    p.validate()?;
    let h = hamiltonian(p, drive_phase);
    let mut n = base_steps(&h, p.tau, cfg);
    let mut u = rk4_propagator(&h, p.tau, n);
    let mut change = f64::INFINITY;
    for _ in 0..=cfg.max_doublings {
        let u2 = rk4_propagator(&h, p.tau, 2 * n);
        change = (u2 - u).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if change < cfg.tol {
            let drift = (u2.adjoint() * u2 - Mat9::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if drift > 1e-8 {
                return Err(PulseError::NormDrift(drift));
            }
            return Ok(u2);
        }
        n *= 2;
        u = u2;
    }
    Err(PulseError::NoConvergence { steps: n, change })
}

/// One pulse of length tau with drive phase `params.xi`.
pub fn evolve_pulse(psi: &Vec9, params: &RydbergParams) -> Result<Vec9, PulseError> {
    evolve_pulse_with(psi, params, &IntegratorConfig::default())
}

pub fn evolve_pulse_with(psi: &Vec9, params: &RydbergParams, cfg: &IntegratorConfig) -> Result<Vec9, PulseError> {
    let u = checked_propagator(params, params.xi, cfg)?;
    let out = u * psi;
    let drift = (out.norm_squared() - psi.norm_squared()).abs();
    if drift > 1e-8 {
        return Err(PulseError::NormDrift(drift));
    }
    Ok(out)
}

fn rydberg_count(i: usize) -> usize {
    (i / 3 == 2) as usize + (i % 3 == 2) as usize
}

/// Two-pulse unitary from the first-pulse propagator: U2 = D U1 D^dag with
/// D = diag(e^{-i xi n_r}).
pub fn two_pulse(u1: &Mat9, xi: f64) -> Mat9 {
    let d: Vec<Complex64> = (0..9).map(|i| Complex64::from_polar(1.0, -xi * rydberg_count(i) as f64)).collect();
    let u2 = Mat9::from_fn(|i, j| d[i] * u1[(i, j)] * d[j].conj());
    u2 * u1
}

fn diag_amp(u1: &Mat9, xi: f64, i: usize) -> Complex64 {
    (0..9)
        .map(|j| {
            let ph = Complex64::from_polar(1.0, -xi * (rydberg_count(i) as f64 - rydberg_count(j) as f64));
            ph * u1[(i, j)] * u1[(j, i)]
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatePhases {
    pub phi01: f64,
    pub phi10: f64,
    pub phi11: f64,
    pub return01: f64,
    pub return10: f64,
    pub return11: f64,
    /// Mean population left outside the computational subspace over the
    /// four computational inputs.
    pub leakage: f64,
}

impl GatePhases {
    /// phi11 - phi01 - phi10 - pi, wrapped to (-pi, pi].
    pub fn phase_error(&self) -> f64 {
        wrap_angle(self.phi11 - self.phi01 - self.phi10 - PI)
    }

    pub fn objective(&self) -> f64 {
        self.return01 * self.return10 * self.return11 * (self.phase_error() / 2.0).cos().powi(2)
    }

    pub fn min_return(&self) -> f64 {
        self.return01.min(self.return10).min(self.return11)
    }
}

fn phases_from_total(u: &Mat9) -> GatePhases {
    let a01 = u[(1, 1)];
    let a10 = u[(3, 3)];
    let a11 = u[(4, 4)];
    let mut leak = 0.0;
    for &j in &COMP {
        let inside: f64 = COMP.iter().map(|&i| u[(i, j)].norm_sqr()).sum();
        leak += 1.0 - inside;
    }
    GatePhases {
        phi01: a01.arg(),
        phi10: a10.arg(),
        phi11: a11.arg(),
        return01: a01.norm_sqr(),
        return10: a10.norm_sqr(),
        return11: a11.norm_sqr(),
        leakage: (leak / 4.0).max(0.0),
    }
}

/// Runs pulse 1 (phase 0) then pulse 2 (phase xi) and reports returns and phases.
pub fn cz_phases(params: &RydbergParams) -> Result<GatePhases, PulseError> {
    let u1 = checked_propagator(params, 0.0, &IntegratorConfig::default())?;
    Ok(phases_from_total(&two_pulse(&u1, params.xi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunedGate {
    pub pulse: RydbergParams,
    /// Phase applied to |1> of atom a after the pulses.
    pub comp_phase_a: f64,
    /// Phase applied to |1> of atom b after the pulses.
    pub comp_phase_b: f64,
    pub phases: GatePhases,
    pub objective: f64,
}

/// Compensation that zeroes the single-atom phases of `params`.
pub fn compensate(params: &RydbergParams) -> Result<TunedGate, PulseError> {
    let ph = cz_phases(params)?;
    Ok(TunedGate { pulse: *params, comp_phase_a: -ph.phi10, comp_phase_b: -ph.phi01, phases: ph, objective: ph.objective() })
}

#[derive(Debug, Clone)]
pub struct TuneOptions {
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub delta_points: usize,
    /// tau search window in units of 2 pi / omega_r.
    pub tau_window: (f64, f64),
    pub tau_points: usize,
    pub xi_points: usize,
    pub delta_tol: f64,
    pub integrator: IntegratorConfig,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            delta_lo: -0.6,
            delta_hi: 0.0,
            delta_points: 31,
            tau_window: (0.3, 1.3),
            tau_points: 401,
            xi_points: 721,
            delta_tol: 1e-6,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuneRow {
    pub delta_over_omega: f64,
    pub tau_omega_over_2pi: f64,
    pub xi: f64,
    pub phase_error: f64,
    pub return01: f64,
    pub return10: f64,
    pub return11: f64,
    pub objective: f64,
    pub bell_fidelity: f64,
}

#[derive(Debug, Clone)]
pub struct TuneReport {
    pub gate: TunedGate,
    pub scan: Vec<TuneRow>,
}

struct Candidate {
    params: RydbergParams,
    u1: Mat9,
    phases: GatePhases,
}

/// Single-pulse |11> return as a function of tau.
fn single_return11(base: &RydbergParams, tau: f64, cfg: &IntegratorConfig) -> f64 {
    let p = RydbergParams { tau, ..*base };
    pulse_propagator(&p, 0.0, cfg)[(4, 4)].norm_sqr()
}

fn argmax_grid<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let step = (hi - lo) / (points - 1) as f64;
    let (mut bx, mut bf) = (lo, f64::MIN);
    for k in 0..points {
        let x = lo + k as f64 * step;
        let v = f(x);
        if v > bf {
            bx = x;
            bf = v;
        }
    }
    let (x, fx) = golden_section(|x| -f(x), bx - step, bx + step, 1e-11);
    if -fx > bf {
        (x, -fx)
    } else {
        (bx, bf)
    }
}

/// Tau from the single-pulse |11> return peak, then xi from the two-pulse
/// |10> return peak, at fixed detuning.
fn candidate(omega: f64, b: f64, ratio: f64, delta: f64, opts: &TuneOptions) -> Candidate {
    let base = RydbergParams { omega_r: omega, blockade_b: b, delta, tau: 1.0, xi: 0.0, omega_ratio_b: ratio };
    let period = 2.0 * PI / omega;
    let (tau, _) = argmax_grid(
        |t| single_return11(&base, t, &opts.integrator),
        opts.tau_window.0 * period,
        opts.tau_window.1 * period,
        opts.tau_points,
    );
    let p = RydbergParams { tau, ..base };
    let u1 = pulse_propagator(&p, 0.0, &opts.integrator);
    let (xi, _) = argmax_grid(|x| diag_amp(&u1, x, 3).norm_sqr(), 0.0, 2.0 * PI, opts.xi_points);
    let xi = xi.rem_euclid(2.0 * PI);
    let params = RydbergParams { xi, ..p };
    let phases = phases_from_total(&two_pulse(&u1, xi));
    Candidate { params, u1, phases }
}

fn gate_matrix(u_total: &Mat9, comp_a: f64, comp_b: f64) -> Matrix4<Complex64> {
    let comp = [0.0, comp_b, comp_a, comp_a + comp_b];
    Matrix4::from_fn(|i, j| u_total[(COMP[i], COMP[j])] * Complex64::from_polar(1.0, comp[i]))
}

fn row(c: &Candidate) -> TuneRow {
    let total = two_pulse(&c.u1, c.params.xi);
    let m = gate_matrix(&total, -c.phases.phi10, -c.phases.phi01);
    TuneRow {
        delta_over_omega: c.params.delta / c.params.omega_r,
        tau_omega_over_2pi: c.params.tau * c.params.omega_r / (2.0 * PI),
        xi: c.params.xi,
        phase_error: c.phases.phase_error(),
        return01: c.phases.return01,
        return10: c.phases.return10,
        return11: c.phases.return11,
        objective: c.phases.objective(),
        bell_fidelity: bell_test(&m, 64).fidelity,
    }
}

/// Tunes detuning, pulse length, second-pulse phase and compensation.
pub fn tune_cz(omega_r: f64, blockade_b: f64) -> Result<TunedGate, PulseError> {
    tune_cz_with(omega_r, blockade_b, 1.0, &TuneOptions::default()).map(|r| r.gate)
}

/// Sequential tuning: for each detuning pick tau then xi, then solve the
/// phase condition for the detuning on a grid plus bisection.
pub fn tune_cz_with(omega_r: f64, blockade_b: f64, omega_ratio_b: f64, opts: &TuneOptions) -> Result<TuneReport, PulseError> {
    if !(omega_r > 0.0 && blockade_b > 0.0) {
        return Err(PulseError::BadParams("omega_r and blockade_b must be positive"));
    }
    let grid: Vec<f64> = (0..opts.delta_points)
        .map(|k| opts.delta_lo + (opts.delta_hi - opts.delta_lo) * k as f64 / (opts.delta_points - 1) as f64)
        .collect();
    let cands: Vec<Candidate> = grid.iter().map(|d| candidate(omega_r, blockade_b, omega_ratio_b, d * omega_r, opts)).collect();
    let scan: Vec<TuneRow> = cands.iter().map(row).collect();

    let mut best: Option<Candidate> = None;
    for k in 0..cands.len() - 1 {
        let (e0, e1) = (cands[k].phases.phase_error(), cands[k + 1].phases.phase_error());
        // a sign change through zero, not a wrap at +-pi
        if e0.signum() == e1.signum() || e0.abs() + e1.abs() > PI {
            continue;
        }
        let root = bisect(
            |d| candidate(omega_r, blockade_b, omega_ratio_b, d * omega_r, opts).phases.phase_error(),
            grid[k],
            grid[k + 1],
            opts.delta_tol,
        );
        if let Some(d) = root {
            let c = candidate(omega_r, blockade_b, omega_ratio_b, d * omega_r, opts);
            if c.phases.phase_error().abs() > 0.05 {
                continue;
            }
            if best.as_ref().is_none_or(|b| c.phases.objective() > b.phases.objective()) {
                best = Some(c);
            }
        }
    }
    let best = match best {
        Some(b) => b,
        None => {
            let top = cands.iter().max_by(|a, b| a.phases.objective().total_cmp(&b.phases.objective()));
            return match top {
                Some(c) => Err(PulseError::TuningFailed {
                    best: c.params,
                    objective: c.phases.objective(),
                    min_return: c.phases.min_return(),
                }),
                None => Err(PulseError::NoRoot { lo: opts.delta_lo, hi: opts.delta_hi }),
            };
        }
    };
    // final numbers from the convergence-checked integrator
    let gate = compensate(&best.params)?;
    if gate.phases.min_return() < 0.99 {
        return Err(PulseError::TuningFailed { best: best.params, objective: gate.objective, min_return: gate.phases.min_return() });
    }
    Ok(TuneReport { gate, scan })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateUnitary {
    /// Computational-subspace block with compensation applied.
    pub matrix: Matrix4<Complex64>,
    pub leakage: f64,
    /// Max entrywise deviation from diag(1,1,1,-1), phase anchored at |00>.
    pub distance_to_cz: f64,
}

pub fn cz_matrix() -> Matrix4<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    Matrix4::from_diagonal(&nalgebra::Vector4::new(one, one, one, -one))
}

pub fn distance_to_cz(m: &Matrix4<Complex64>) -> f64 {
    let anchor = if m[(0, 0)].norm() > 1e-12 { m[(0, 0)].conj() / m[(0, 0)].norm() } else { Complex64::new(1.0, 0.0) };
    (m * anchor - cz_matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn pulse_gate_unitary(gate: &TunedGate) -> Result<GateUnitary, PulseError> {
    let u1 = checked_propagator(&gate.pulse, 0.0, &IntegratorConfig::default())?;
    let total = two_pulse(&u1, gate.pulse.xi);
    let matrix = gate_matrix(&total, gate.comp_phase_a, gate.comp_phase_b);
    let leakage = 1.0 - matrix.norm_squared() / 4.0;
    Ok(GateUnitary { distance_to_cz: distance_to_cz(&matrix), matrix, leakage: leakage.max(0.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellResult {
    pub p00: f64,
    pub p11: f64,
    pub c: f64,
    pub fidelity: f64,
}

fn apply_1q_4(psi: &mut [Complex64; 4], q: usize, m: &[[Complex64; 2]; 2]) {
    let pairs: [(usize, usize); 2] = if q == 0 { [(0, 2), (1, 3)] } else { [(0, 1), (2, 3)] };
    for (i, j) in pairs {
        let (a, b) = (psi[i], psi[j]);
        psi[i] = m[0][0] * a + m[0][1] * b;
        psi[j] = m[1][0] * a + m[1][1] * b;
    }
}

/// Bell preparation H(q0) H(q1), gate, H(q1), then a parity scan with a
/// global pi/2 analysis rotation of phase phi.
pub fn bell_test(gate: &Matrix4<Complex64>, parity_points: usize) -> BellResult {
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let h = [[r, r], [r, -r]];
    let mut psi = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
    apply_1q_4(&mut psi, 0, &h);
    apply_1q_4(&mut psi, 1, &h);
    let v = gate * nalgebra::Vector4::from_row_slice(&psi);
    psi = [v[0], v[1], v[2], v[3]];
    apply_1q_4(&mut psi, 1, &h);
    let p00 = psi[0].norm_sqr();
    let p11 = psi[3].norm_sqr();
    let k = parity_points.max(5);
    let mut coef = Complex64::new(0.0, 0.0);
    for j in 0..k {
        let phi = 2.0 * PI * j as f64 / k as f64;
        let g = crate::qsim::global_rot_matrix(phi, PI / 2.0);
        let mut s = psi;
        apply_1q_4(&mut s, 0, &g);
        apply_1q_4(&mut s, 1, &g);
        let par = s[0].norm_sqr() - s[1].norm_sqr() - s[2].norm_sqr() + s[3].norm_sqr();
        coef += Complex64::from_polar(par, -2.0 * phi);
    }
    let c = 2.0 * (coef / k as f64).norm();
    BellResult { p00, p11, c, fidelity: (p00 + p11 + c) / 2.0 }
}

pub fn bell_test_tuned(gate: &TunedGate, parity_points: usize) -> Result<BellResult, PulseError> {
    Ok(bell_test(&pulse_gate_unitary(gate)?.matrix, parity_points))
}
