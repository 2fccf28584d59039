//! Benchmark harnesses: GHZ parity, phase estimation and QAOA MaxCut.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::{
    compile, controlled_unitary, estimate_duration, mat2_mul, CompileError, AbstractGate, Layout, TimingConfig,
};
use crate::noise::{noisy_run, NoiseError, NoiseParams};
use crate::optim::{bisect, golden_section, NelderMead};
use crate::qsim::{
    derive_seed, global_rot_matrix, index_to_label, probabilities, run_ideal, sample_shots, stream_rng, Distribution,
    Gate1, NativeCircuit, NativeOp, QsimError, ShotHistogram, SiteCoord, StateVector,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("{0}")]
    BadInput(String),
    #[error("fit is singular: c = {c} sits on a data point")]
    SingularFit { c: f64 },
    #[error("calibration target {target} is outside the reachable range [{lo}, {hi}]")]
    Unreachable { target: f64, lo: f64, hi: f64 },
}

fn bad(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::BadInput(msg.into())
}

fn site(row: usize, col: usize) -> SiteCoord {
    SiteCoord::new(row, col)
}

/// Ideal or noisy execution of native circuits.
#[derive(Debug, Clone, Default)]
pub struct Backend {
    pub timing: TimingConfig,
    pub noise: Option<NoiseParams>,
    /// Run circuits on |1...1>, the state optical pumping leaves behind.
    pub start_in_ones: bool,
}

#[derive(Debug, Clone)]
pub struct Execution {
    /// Exact (ideal) or trajectory-averaged (noisy) readout distribution.
    pub dist: Distribution,
    pub histogram: ShotHistogram,
}

impl Backend {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn noisy(params: NoiseParams) -> Self {
        Self { noise: Some(params), ..Self::default() }
    }

    pub fn execute(&self, circuit: &NativeCircuit, shots: u64, seed: u64) -> Result<Execution, ExperimentError> {
        // |0...0> followed by a global pi flip stands in for a |1...1> start
        let flipped;
        let circuit = if self.start_in_ones {
            let mut ops = vec![NativeOp::GlobalRot { phi: 0.0, theta: PI }];
            ops.extend_from_slice(circuit.ops());
            flipped = NativeCircuit::with_ops(circuit.sites().to_vec(), ops)?;
            &flipped
        } else {
            circuit
        };
        match &self.noise {
            None => {
                let dist = probabilities(&run_ideal(circuit)?);
                let histogram = sample_shots(&dist, shots, seed)?;
                Ok(Execution { dist, histogram })
            }
            Some(p) => {
                let run = noisy_run(circuit, p, &self.timing, shots, seed)?;
                Ok(Execution { dist: run.mean, histogram: run.histogram })
            }
        }
    }
}

fn with_measure(mut c: NativeCircuit) -> NativeCircuit {
    c.push(NativeOp::MeasureAll).expect("measure is always valid");
    c
}

// ---------------------------------------------------------------- GHZ

const GHZ_PAIRS: [(usize, usize); 5] = [(0, 1), (0, 2), (0, 3), (0, 4), (4, 5)];

/// Centre site first, then the four neighbours on its row and column and one
/// more site sharing a column with qubit 4.
pub fn ghz_layout() -> Layout {
    Layout::new(vec![site(3, 3), site(0, 3), site(6, 3), site(3, 0), site(3, 6), site(6, 6)]).expect("distinct sites")
}

pub fn ghz_program(n: usize) -> Vec<AbstractGate> {
    let mut p = vec![AbstractGate::H(0)];
    p.extend(GHZ_PAIRS.iter().filter(|(_, t)| *t < n).map(|&(control, target)| AbstractGate::Cnot { control, target }));
    p
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityScan {
    pub n: usize,
    pub phases: Vec<f64>,
    pub parities: Vec<f64>,
}

impl ParityScan {
    fn coefficient(&self, freq: usize) -> Complex64 {
        let s: Complex64 =
            self.phases.iter().zip(&self.parities).map(|(phi, p)| Complex64::from_polar(*p, -(freq as f64) * phi)).sum();
        s / self.phases.len() as f64
    }

    /// Oscillation amplitude at `freq` (twice the DFT coefficient magnitude).
    pub fn amplitude(&self, freq: usize) -> f64 {
        2.0 * self.coefficient(freq).norm()
    }

    /// Share of the non-constant spectral power found at `freq`.
    pub fn spectral_fraction(&self, freq: usize) -> f64 {
        let m = self.phases.len();
        let total: f64 = (1..m).map(|f| self.coefficient(f).norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mirror = if 2 * freq == m { 0.0 } else { self.coefficient(m - freq).norm_sqr() };
        (self.coefficient(freq).norm_sqr() + mirror) / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GhzResult {
    pub n: usize,
    pub p_all0: f64,
    pub p_all1: f64,
    pub c_n: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone)]
pub struct GhzRun {
    pub result: GhzResult,
    pub scan: ParityScan,
    pub histogram: ShotHistogram,
    pub duration_s: f64,
    pub cz_count: usize,
}

pub fn ghz_experiment(
    n: usize,
    shots: u64,
    scan_points: usize,
    backend: &Backend,
    seed: u64,
) -> Result<GhzRun, ExperimentError> {
    ghz_experiment_on(&ghz_layout(), n, shots, scan_points, backend, seed)
}

/// As [`ghz_experiment`] on the first `n` sites of `layout`.
pub fn ghz_experiment_on(
    layout: &Layout,
    n: usize,
    shots: u64,
    scan_points: usize,
    backend: &Backend,
    seed: u64,
) -> Result<GhzRun, ExperimentError> {
    if !(2..=6).contains(&n) {
        return Err(bad(format!("GHZ size {n} outside 2..=6")));
    }
    if scan_points < 4 * n + 1 {
        return Err(bad(format!("need at least {} scan points for n = {n}", 4 * n + 1)));
    }
    let prep = compile(&ghz_program(n), &layout.truncated(n)?)?;
    let direct = backend.execute(&with_measure(prep.clone()), shots, derive_seed(seed, 0))?;
    let phases: Vec<f64> = (0..scan_points).map(|k| 2.0 * PI * k as f64 / scan_points as f64).collect();
    let parities = phases
        .iter()
        .enumerate()
        .map(|(k, &phi)| {
            let mut c = prep.clone();
            c.push(NativeOp::GlobalRot { phi, theta: PI / 2.0 })?;
            let ex = backend.execute(&with_measure(c), shots, derive_seed(seed, 1 + k as u64))?;
            Ok(ex.dist.parity_expectation())
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let scan = ParityScan { n, phases, parities };
    let p_all0 = direct.dist.probs()[0];
    let p_all1 = direct.dist.probs()[(1 << n) - 1];
    let c_n = scan.amplitude(n);
    let fidelity = ((p_all0 + p_all1 + c_n) / 2.0).clamp(0.0, 1.0);
    Ok(GhzRun {
        result: GhzResult { n, p_all0, p_all1, c_n, fidelity },
        scan,
        histogram: direct.histogram,
        duration_s: estimate_duration(&prep, &backend.timing),
        cz_count: prep.cz_count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GhzFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub residuals: Vec<f64>,
}

fn fit_ab(points: &[(f64, f64)], c: f64) -> (f64, f64, f64) {
    let m = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(n, y) in points {
        let x = 1.0 / (n - c);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = m * sxx - sx * sx;
    let (a, b) = if det.abs() < 1e-300 { (sy / m, 0.0) } else { ((sxx * sy - sx * sxy) / det, (m * sxy - sx * sy) / det) };
    let sse = points.iter().map(|&(n, y)| (a + b / (n - c) - y).powi(2)).sum();
    (a, b, sse)
}

/// Least-squares a + b/(N - c) with c restricted below the smallest N.
///
/// For fixed c the model is linear in (a, b), so only c is searched.
pub fn fit_ghz_decay(points: &[(f64, f64)]) -> Result<GhzFit, ExperimentError> {
    if points.len() < 4 {
        return Err(bad("need at least 4 points"));
    }
    let n_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let lo = n_min - 50.0;
    let grid = 4000;
    let sse = |c: f64| fit_ab(points, c).2;
    // spacing dense near n_min, where the model bends fastest
    let at = |k: usize| n_min - 50.0 * (1.0 - k as f64 / grid as f64).powi(3) - 1e-6;
    let best = (0..grid).min_by(|&i, &j| sse(at(i)).total_cmp(&sse(at(j)))).expect("grid");
    let (a_c, b_c) = (at(best.saturating_sub(1)).max(lo), at((best + 1).min(grid - 1)));
    let (c, _) = golden_section(sse, a_c, b_c, 1e-13);
    if (n_min - c).abs() < 1e-5 {
        return Err(ExperimentError::SingularFit { c });
    }
    let (a, b, _) = fit_ab(points, c);
    let residuals = points.iter().map(|&(n, y)| y - (a + b / (n - c))).collect();
    Ok(GhzFit { a, b, c, residuals })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CzCalibration {
    pub cz_depolarizing: f64,
    pub bell_fidelity: f64,
}

/// Bisects `cz_depolarizing` so the noisy two-qubit GHZ fidelity hits
/// `target`. Trajectories share random numbers across evaluations.
pub fn calibrate_cz_depolarizing(
    base: &NoiseParams,
    timing: &TimingConfig,
    target: f64,
    trajectories: u64,
    seed: u64,
) -> Result<CzCalibration, ExperimentError> {
    let fid = |p: f64| -> Result<f64, ExperimentError> {
        let backend = Backend { timing: *timing, noise: Some(NoiseParams { cz_depolarizing: p, ..base.clone() }), start_in_ones: false };
        Ok(ghz_experiment(2, trajectories, 9, &backend, seed)?.result.fidelity)
    };
    let (f_lo, f_hi) = (fid(0.0)?, fid(0.5)?);
    if !(f_hi <= target && target <= f_lo) {
        return Err(ExperimentError::Unreachable { target, lo: f_hi, hi: f_lo });
    }
    let mut err = None;
    let p = bisect(
        |p| match fid(p) {
            Ok(f) => f - target,
            Err(e) => {
                err = Some(e);
                0.0
            }
        },
        0.0,
        0.5,
        1e-4,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let p = p.ok_or(ExperimentError::Unreachable { target, lo: f_hi, hi: f_lo })?;
    Ok(CzCalibration { cz_depolarizing: p, bell_fidelity: fid(p)? })
}

// ---------------------------------------------------------------- QPE

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2Problem {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub t0: f64,
}

impl H2Problem {
    pub fn new(a0: f64, a1: f64, a2: f64) -> Self {
        Self { a0, a1, a2, t0: PI / (a1.abs() + a2.abs()) }
    }

    /// H2 coefficients at the equilibrium bond length with t0 = pi/0.9693.
    pub fn reference() -> Self {
        Self { a0: -0.328717, a1: 0.787967, a2: 0.181289, t0: PI / 0.9693 }
    }

    /// exp(i a2 t0 X) exp(i a1 t0 Z).
    pub fn trotter_unitary(&self) -> Gate1 {
        let (x, z) = (self.a2 * self.t0, self.a1 * self.t0);
        let ex = [[Complex64::new(x.cos(), 0.0), Complex64::new(0.0, x.sin())], [Complex64::new(0.0, x.sin()), Complex64::new(x.cos(), 0.0)]];
        let ez = [[Complex64::from_polar(1.0, z), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, -z)]];
        mat2_mul(&ex, &ez)
    }

    /// Eigenphases of the Trotterized unitary as fractions of a turn, largest first.
    pub fn eigen_fractions(&self) -> (f64, f64) {
        let u = self.trotter_unitary();
        let tr = u[0][0] + u[1][1];
        let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
        let disc = (tr * tr - 4.0 * det).sqrt();
        let frac = |l: Complex64| l.arg().rem_euclid(2.0 * PI) / (2.0 * PI);
        let (f1, f2) = (frac((tr + disc) / 2.0), frac((tr - disc) / 2.0));
        (f1.max(f2), f1.min(f2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum UnitarySpec {
    /// Z raised to a real power: diag(1, e^{i pi k}).
    ZPower(f64),
    H2(H2Problem),
}

impl UnitarySpec {
    pub fn matrix(&self) -> Gate1 {
        match self {
            UnitarySpec::ZPower(k) => [
                [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                [Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, PI * k)],
            ],
            UnitarySpec::H2(p) => p.trotter_unitary(),
        }
    }
}

fn mat_pow(u: &Gate1, e: u32) -> Gate1 {
    let mut out = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
    for _ in 0..e {
        out = mat2_mul(u, &out);
    }
    out
}

/// Register at the first four sites of one row, state qubit last.
pub fn qpe_layout() -> Layout {
    Layout::new(vec![site(3, 0), site(3, 2), site(3, 4), site(3, 6)]).expect("distinct sites")
}

/// Register qubit k controls U^(2^k); the state qubit (index m) starts in |1>.
pub fn qpe_program(spec: &UnitarySpec, m: usize) -> Vec<AbstractGate> {
    let u = spec.matrix();
    let mut p = vec![AbstractGate::X(m)];
    p.extend((0..m).map(AbstractGate::H));
    for k in 0..m {
        p.extend(controlled_unitary(k, m, &mat_pow(&u, 1 << k)));
    }
    p.push(AbstractGate::QftInverse((0..m).collect()));
    p
}

#[derive(Debug, Clone)]
pub struct QpeRun {
    pub histogram: ShotHistogram,
    pub dist: Distribution,
    pub modal_bits: String,
    pub phase_fraction: f64,
    pub duration_s: f64,
    pub cz_count: usize,
}

impl QpeRun {
    pub fn probability(&self, bits: &str) -> f64 {
        self.dist.probability(bits)
    }
}

pub fn qpe_run(spec: &UnitarySpec, m: usize, shots: u64, backend: &Backend, seed: u64) -> Result<QpeRun, ExperimentError> {
    qpe_run_on(&qpe_layout(), spec, m, shots, backend, seed)
}

pub fn qpe_run_on(
    layout: &Layout,
    spec: &UnitarySpec,
    m: usize,
    shots: u64,
    backend: &Backend,
    seed: u64,
) -> Result<QpeRun, ExperimentError> {
    if !(2..=3).contains(&m) {
        return Err(bad(format!("m_bits {m} outside 2..=3")));
    }
    let circuit = compile(&qpe_program(spec, m), &layout.truncated(m + 1)?)?;
    let ex = backend.execute(&with_measure(circuit.clone()), shots, seed)?;
    let reg: Vec<usize> = (0..m).collect();
    let dist = ex.dist.marginal(&reg);
    let modal_bits = dist.mode();
    let phase_fraction = usize::from_str_radix(&modal_bits, 2).expect("binary label") as f64 / (1 << m) as f64;
    Ok(QpeRun {
        histogram: ex.histogram.marginal(&reg),
        dist,
        modal_bits,
        phase_fraction,
        duration_s: estimate_duration(&circuit, &backend.timing),
        cz_count: circuit.cz_count(),
    })
}

/// Energy from a measured phase register, with the phase mapped to (-pi, pi].
pub fn h2_energy(bits: &str, problem: &H2Problem) -> Result<f64, ExperimentError> {
    if bits.is_empty() || !bits.chars().all(|c| c == '0' || c == '1') {
        return Err(bad(format!("bad phase register '{bits}'")));
    }
    let f = usize::from_str_radix(bits, 2).expect("binary") as f64 / (1u64 << bits.len()) as f64;
    let phi = if f <= 0.5 { 2.0 * PI * f } else { 2.0 * PI * (f - 1.0) };
    Ok(phi / problem.t0 + problem.a0)
}

// ---------------------------------------------------------------- QAOA

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl GraphSpec {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self, ExperimentError> {
        let mut seen = std::collections::BTreeSet::new();
        for &(a, b) in &edges {
            if a == b {
                return Err(bad(format!("self-loop on vertex {a}")));
            }
            if a >= n_vertices || b >= n_vertices {
                return Err(bad(format!("edge ({a}, {b}) names a missing vertex")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(bad(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(Self { n_vertices, edges })
    }

    pub fn line3() -> Self {
        Self { n_vertices: 3, edges: vec![(0, 1), (1, 2)] }
    }

    /// Centre vertex 1 joined to 0, 2 and 3.
    pub fn t4() -> Self {
        Self { n_vertices: 4, edges: vec![(0, 1), (1, 2), (1, 3)] }
    }

    pub fn single_edge() -> Self {
        Self { n_vertices: 2, edges: vec![(0, 1)] }
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "line3" => Some(Self::line3()),
            "t4" => Some(Self::t4()),
            "edge" => Some(Self::single_edge()),
            _ => None,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn cut_value(&self, bits: &str) -> usize {
        let b = bits.as_bytes();
        self.edges.iter().filter(|(i, j)| b[*i] != b[*j]).count()
    }

    /// Line graph on one row, T graph with vertex 3 above the centre; other
    /// graphs go on a single row.
    pub fn layout(&self) -> Result<Layout, ExperimentError> {
        if *self == Self::t4() {
            return Ok(Layout::new(vec![site(3, 0), site(3, 3), site(3, 6), site(0, 3)])?);
        }
        if *self == Self::line3() {
            return Ok(Layout::new(vec![site(3, 0), site(3, 3), site(3, 6)])?);
        }
        if self.n_vertices > 7 {
            return Err(bad(format!("{} vertices do not fit one row of the array", self.n_vertices)));
        }
        Ok(Layout::new((0..self.n_vertices).map(|c| site(3, c)).collect())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxCut {
    pub s_max: usize,
    pub partitions: Vec<String>,
}

pub fn maxcut_oracle(g: &GraphSpec) -> Result<MaxCut, ExperimentError> {
    if g.n_vertices > 20 {
        return Err(bad(format!("{} vertices exceed the enumeration cap of 20", g.n_vertices)));
    }
    let mut s_max = 0;
    let mut partitions = Vec::new();
    for i in 0..1usize << g.n_vertices {
        let bits = index_to_label(i, g.n_vertices);
        let s = g.cut_value(&bits);
        if s > s_max {
            s_max = s;
            partitions.clear();
        }
        if s == s_max {
            partitions.push(bits);
        }
    }
    Ok(MaxCut { s_max, partitions })
}

/// Angles are in half turns: each edge gets ZZ(pi*gamma), each qubit an X
/// rotation by pi*beta.
pub fn qaoa_program(g: &GraphSpec, betas: &[f64], gammas: &[f64]) -> Vec<AbstractGate> {
    let mut p: Vec<AbstractGate> = (0..g.n_vertices).map(AbstractGate::H).collect();
    for (beta, gamma) in betas.iter().zip(gammas) {
        p.extend(g.edges.iter().map(|&(a, b)| AbstractGate::Zz { a, b, gamma: PI * gamma }));
        p.extend((0..g.n_vertices).map(|q| AbstractGate::Rphi { q, phi: 0.0, theta: PI * beta }));
    }
    p
}

fn ratio_from_probs(g: &GraphSpec, s_max: usize, probs: impl Iterator<Item = (String, f64)>) -> f64 {
    probs.map(|(k, p)| p * g.cut_value(&k) as f64).sum::<f64>() / s_max as f64
}

fn ratio_from_correlators(g: &GraphSpec, s_max: usize, probs: &[(String, f64)]) -> f64 {
    let cut: f64 = g
        .edges
        .iter()
        .map(|&(a, b)| {
            let zz: f64 = probs.iter().map(|(k, p)| if k.as_bytes()[a] == k.as_bytes()[b] { *p } else { -*p }).sum();
            0.5 * (1.0 - zz)
        })
        .sum();
    cut / s_max as f64
}

#[derive(Debug, Clone)]
pub struct QaoaRun {
    pub histogram: ShotHistogram,
    pub dist: Distribution,
    pub s_max: usize,
    /// Expected cut over s_max from the exact distribution.
    pub ratio: f64,
    /// Same quantity from the sampled histogram.
    pub ratio_sampled: f64,
    /// Histogram ratio recomputed from edge correlators.
    pub ratio_sampled_edges: f64,
    pub duration_s: f64,
    pub cz_count: usize,
}

impl QaoaRun {
    pub fn cross_check_ok(&self) -> bool {
        (self.ratio_sampled - self.ratio_sampled_edges).abs() < 1e-12 && self.ratio <= 1.0 + 1e-12
    }
}

pub fn qaoa_run(
    g: &GraphSpec,
    betas: &[f64],
    gammas: &[f64],
    shots: u64,
    backend: &Backend,
    seed: u64,
) -> Result<QaoaRun, ExperimentError> {
    qaoa_run_on(&g.layout()?, g, betas, gammas, shots, backend, seed)
}

pub fn qaoa_run_on(
    layout: &Layout,
    g: &GraphSpec,
    betas: &[f64],
    gammas: &[f64],
    shots: u64,
    backend: &Backend,
    seed: u64,
) -> Result<QaoaRun, ExperimentError> {
    if betas.len() != gammas.len() {
        return Err(bad(format!("{} betas but {} gammas", betas.len(), gammas.len())));
    }
    let mc = maxcut_oracle(g)?;
    if mc.s_max == 0 {
        return Err(bad("graph has no edges"));
    }
    let circuit = compile(&qaoa_program(g, betas, gammas), &layout.truncated(g.n_vertices)?)?;
    let ex = backend.execute(&with_measure(circuit.clone()), shots, seed)?;
    let ratio = ratio_from_probs(g, mc.s_max, ex.dist.to_map().into_iter());
    let freq: Vec<(String, f64)> = ex.histogram.counts.iter().map(|(k, c)| (k.clone(), *c as f64 / shots as f64)).collect();
    Ok(QaoaRun {
        ratio,
        ratio_sampled: ratio_from_probs(g, mc.s_max, freq.iter().cloned()),
        ratio_sampled_edges: ratio_from_correlators(g, mc.s_max, &freq),
        histogram: ex.histogram,
        dist: ex.dist,
        s_max: mc.s_max,
        duration_s: estimate_duration(&circuit, &backend.timing),
        cz_count: circuit.cz_count(),
    })
}

/// Ideal expected approximation ratio by direct statevector evolution.
pub fn qaoa_expected_ratio(g: &GraphSpec, betas: &[f64], gammas: &[f64]) -> f64 {
    let n = g.n_vertices;
    let dim = 1usize << n;
    let s_max = maxcut_oracle(g).map(|m| m.s_max).unwrap_or(0).max(1) as f64;
    let cuts: Vec<f64> = (0..dim).map(|i| g.cut_value(&index_to_label(i, n)) as f64).collect();
    let amp = 1.0 / (dim as f64).sqrt();
    let mut s = StateVector::from_amplitudes(vec![Complex64::new(amp, 0.0); dim]).expect("power of two");
    for (beta, gamma) in betas.iter().zip(gammas) {
        let ne = g.edges.len() as f64;
        // ZZ(pi*gamma) on every edge: phase exp(-i pi gamma/2 (|E| - 2 cut))
        let amps: Vec<Complex64> = s
            .amplitudes()
            .iter()
            .zip(&cuts)
            .map(|(a, cut)| a * Complex64::from_polar(1.0, -PI * gamma / 2.0 * (ne - 2.0 * cut)))
            .collect();
        s = StateVector::from_amplitudes(amps).expect("same size");
        let mix = global_rot_matrix(0.0, PI * beta);
        for q in 0..n {
            s.apply_1q(q, &mix);
        }
    }
    s.amplitudes().iter().zip(&cuts).map(|(a, c)| a.norm_sqr() * c).sum::<f64>() / s_max
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaoaOptimum {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub ratio: f64,
}

/// Seeded Nelder-Mead restarts over half-turn angles in [0, 2)^(2p).
pub fn qaoa_optimize(g: &GraphSpec, p: usize, restarts: usize, seed: u64) -> Result<QaoaOptimum, ExperimentError> {
    if p == 0 || p > 3 {
        return Err(bad(format!("depth {p} outside 1..=3")));
    }
    if restarts == 0 {
        return Err(bad("need at least one restart"));
    }
    maxcut_oracle(g)?;
    let nm = NelderMead { initial_step: 0.25, f_tol: 1e-12, x_tol: 1e-9, max_evals: 6000 };
    let best = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let x0: Vec<f64> = (0..2 * p).map(|_| rng.random_range(0.0..2.0)).collect();
            let m = nm.minimize(|x| -qaoa_expected_ratio(g, &x[..p], &x[p..]), &x0);
            (r, m)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f).then(a.0.cmp(&b.0)))
        .expect("restarts > 0")
        .1;
    let wrap = |x: f64| x.rem_euclid(2.0);
    Ok(QaoaOptimum {
        betas: best.x[..p].iter().map(|&x| wrap(x)).collect(),
        gammas: best.x[p..].iter().map(|&x| wrap(x)).collect(),
        ratio: -best.f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::abstract_unitary;
    use crate::qsim::circuit_unitary;

    #[test]
    fn ghz_ideal_small() {
        let r = ghz_experiment(3, 1000, 13, &Backend::ideal(), 1).unwrap();
        assert!((r.result.fidelity - 1.0).abs() < 1e-9);
        assert!(r.scan.spectral_fraction(3) > 0.999);
        assert!((r.scan.amplitude(3) - 1.0).abs() < 1e-9);
        assert!(ghz_experiment(3, 1000, 12, &Backend::ideal(), 1).is_err());
        assert!(ghz_experiment(7, 1000, 40, &Backend::ideal(), 1).is_err());
    }

    #[test]
    fn pumped_start() {
        let layout = Layout::new(vec![site(3, 3), site(0, 3)]).unwrap();
        let c = with_measure(compile(&[AbstractGate::X(0)], &layout).unwrap());
        for b in [Backend::ideal(), Backend::noisy(NoiseParams::ideal())] {
            let b = Backend { start_in_ones: true, ..b };
            assert!((b.execute(&c, 100, 2).unwrap().dist.probability("01") - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decay_fit_roundtrip() {
        for (a, b, c) in [(0.192, 2.21, -1.014), (0.269, 1.96, -0.872)] {
            let pts: Vec<(f64, f64)> = (2..=6).map(|n| (n as f64, a + b / (n as f64 - c))).collect();
            let f = fit_ghz_decay(&pts).unwrap();
            assert!((f.a - a).abs() < 1e-6 && (f.b - b).abs() < 1e-6 && (f.c - c).abs() < 1e-6, "{f:?}");
        }
        let flat: Vec<(f64, f64)> = (2..=6).map(|n| (n as f64, 0.5)).collect();
        let f = fit_ghz_decay(&flat).unwrap();
        assert!(f.b.abs() < 1e-9 && (f.a - 0.5).abs() < 1e-9);
        assert!(fit_ghz_decay(&flat[..3]).is_err());
    }

    #[test]
    fn qpe_z_examples() {
        let b = Backend::ideal();
        let r = qpe_run(&UnitarySpec::ZPower(1.0), 2, 100, &b, 0).unwrap();
        assert!((r.probability("10") - 1.0).abs() < 1e-9);
        let r = qpe_run(&UnitarySpec::ZPower(0.0), 2, 100, &b, 0).unwrap();
        assert!((r.probability("00") - 1.0).abs() < 1e-9);
        assert!(qpe_run(&UnitarySpec::ZPower(0.0), 4, 100, &b, 0).is_err());
    }

    #[test]
    fn qpe_program_compiles_exactly() {
        let spec = UnitarySpec::H2(H2Problem::reference());
        let prog = qpe_program(&spec, 3);
        let c = compile(&prog, &qpe_layout()).unwrap();
        let d = crate::qsim::operator_distance(&circuit_unitary(&c).unwrap(), &abstract_unitary(&prog, 4).unwrap());
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn h2_phases_and_energy() {
        let p = H2Problem::reference();
        let (hi, lo) = p.eigen_fractions();
        assert!((hi - 0.6282).abs() < 5e-5 && (lo - 0.3718).abs() < 5e-5, "{hi} {lo}");
        assert!((h2_energy("101", &p).unwrap() + 1.06).abs() < 0.01);
        assert_eq!(h2_energy("000", &p).unwrap(), p.a0);
        assert!((h2_energy("011", &p).unwrap() - 0.40).abs() < 0.01);
        assert!(h2_energy("1a", &p).is_err());
        let q = H2Problem::new(0.0, 0.5, -0.25);
        assert!((q.t0 - PI / 0.75).abs() < 1e-15);
    }

    #[test]
    fn maxcut_examples() {
        let m = maxcut_oracle(&GraphSpec::line3()).unwrap();
        assert_eq!(m.s_max, 2);
        assert_eq!(m.partitions, vec!["010".to_string(), "101".to_string()]);
        assert_eq!(maxcut_oracle(&GraphSpec::single_edge()).unwrap().s_max, 1);
        assert_eq!(maxcut_oracle(&GraphSpec::t4()).unwrap().s_max, 3);
        assert!(GraphSpec::new(2, vec![(0, 0)]).is_err());
        assert!(GraphSpec::new(3, vec![(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn qaoa_zero_depth_is_uniform() {
        for g in [GraphSpec::line3(), GraphSpec::t4()] {
            let s_max = maxcut_oracle(&g).unwrap().s_max as f64;
            let n = g.n_vertices();
            let avg = (0..1usize << n).map(|i| g.cut_value(&index_to_label(i, n)) as f64).sum::<f64>() / (1 << n) as f64;
            let r = qaoa_run(&g, &[], &[], 1000, &Backend::ideal(), 2).unwrap();
            assert!((r.ratio - avg / s_max).abs() < 1e-12);
        }
    }

    #[test]
    fn qaoa_fast_path_matches_compiled() {
        let g = GraphSpec::t4();
        let (b, gm) = ([1.71, 1.19], [0.700, 0.624]);
        let r = qaoa_run(&g, &b, &gm, 4000, &Backend::ideal(), 3).unwrap();
        assert!((r.ratio - qaoa_expected_ratio(&g, &b, &gm)).abs() < 1e-9);
        assert!(r.cross_check_ok());
    }

    #[test]
    fn single_edge_optimum() {
        let o = qaoa_optimize(&GraphSpec::single_edge(), 1, 4, 1).unwrap();
        assert!((o.ratio - 1.0).abs() < 1e-6, "{o:?}");
    }
}
