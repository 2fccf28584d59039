//! Lowering of abstract gates to the native set, peephole cancellation,
//! duration estimates and the plain-text circuit format.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{Gate1, NativeCircuit, NativeOp, QsimError, SiteCoord, StateVector};

const ANGLE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("qubits {a} at {site_a} and {b} at {site_b} share neither a row nor a column")]
    Connectivity { a: usize, b: usize, site_a: SiteCoord, site_b: SiteCoord },
    #[error("logical qubit {0} has no site in the layout")]
    UnmappedQubit(usize),
    #[error("gate acts twice on qubit {0}")]
    RepeatedQubit(usize),
    #[error("layout maps two qubits to site {0}")]
    LayoutNotInjective(SiteCoord),
    #[error("timing field {0} must be positive")]
    BadTiming(&'static str),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AbstractGate {
    H(usize),
    X(usize),
    Rz(usize, f64),
    Rphi { q: usize, phi: f64, theta: f64 },
    Cnot { control: usize, target: usize },
    Cz(usize, usize),
    /// exp(-i gamma/2 Z Z)
    Zz { a: usize, b: usize, gamma: f64 },
    /// Inverse of the swap-free QFT on the listed register. The first listed
    /// qubit ends up holding the most significant bit.
    QftInverse(Vec<usize>),
}

impl AbstractGate {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            AbstractGate::H(q) | AbstractGate::X(q) | AbstractGate::Rz(q, _) => vec![*q],
            AbstractGate::Rphi { q, .. } => vec![*q],
            AbstractGate::Cnot { control, target } => vec![*control, *target],
            AbstractGate::Cz(a, b) | AbstractGate::Zz { a, b, .. } => vec![*a, *b],
            AbstractGate::QftInverse(r) => r.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    sites: Vec<SiteCoord>,
}

impl Layout {
    pub fn new(sites: Vec<SiteCoord>) -> Result<Self, CompileError> {
        for (i, s) in sites.iter().enumerate() {
            if sites[..i].contains(s) {
                return Err(CompileError::LayoutNotInjective(*s));
            }
        }
        Ok(Self { sites })
    }

    pub fn sites(&self) -> &[SiteCoord] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, q: usize) -> Result<SiteCoord, CompileError> {
        self.sites.get(q).copied().ok_or(CompileError::UnmappedQubit(q))
    }

    /// First `n` qubits of this layout.
    pub fn truncated(&self, n: usize) -> Result<Layout, CompileError> {
        if n > self.sites.len() {
            return Err(CompileError::UnmappedQubit(n - 1));
        }
        Ok(Layout { sites: self.sites[..n].to_vec() })
    }

    fn pair(&self, a: usize, b: usize) -> Result<(SiteCoord, SiteCoord), CompileError> {
        if a == b {
            return Err(CompileError::RepeatedQubit(a));
        }
        let (sa, sb) = (self.site(a)?, self.site(b)?);
        if !sa.shares_line(&sb) {
            return Err(CompileError::Connectivity { a, b, site_a: sa, site_b: sb });
        }
        Ok((sa, sb))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    /// Microwave Rabi frequency of the global rotations (Hz).
    pub rabi_hz: f64,
    /// Differential Stark shift driving local RZ (Hz).
    pub stark_hz: f64,
    /// Rydberg pulses plus phase compensation (s).
    pub cz_duration_s: f64,
    pub latency_s: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { rabi_hz: 76.5e3, stark_hz: 600e3, cz_duration_s: 1.5e-6, latency_s: 1.5e-6 }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<(), CompileError> {
        let fields = [
            ("rabi_hz", self.rabi_hz),
            ("stark_hz", self.stark_hz),
            ("cz_duration_s", self.cz_duration_s),
            ("latency_s", self.latency_s),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(CompileError::BadTiming(name));
            }
        }
        Ok(())
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn is_zero_angle(x: f64) -> bool {
    wrap_angle(x).abs() < ANGLE_EPS
}

/// Local rotation exp(-i theta/2 (cos phi X + sin phi Y)) on one site, in time order.
pub fn synth_local_rot(site: SiteCoord, phi: f64, theta: f64) -> Vec<NativeOp> {
    let axis = phi + FRAC_PI_2;
    vec![
        NativeOp::GlobalRot { phi: axis, theta: -FRAC_PI_2 },
        NativeOp::LocalRz { site, theta },
        NativeOp::GlobalRot { phi: axis, theta: FRAC_PI_2 },
    ]
}

/// Hadamard up to global phase: Z first, then a local pi/2 rotation about Y.
pub fn hadamard(site: SiteCoord) -> Vec<NativeOp> {
    let mut ops = vec![NativeOp::LocalRz { site, theta: PI }];
    ops.extend(synth_local_rot(site, FRAC_PI_2, FRAC_PI_2));
    ops
}

pub fn decompose_cnot(control: SiteCoord, target: SiteCoord) -> Vec<NativeOp> {
    let mut ops = hadamard(target);
    ops.push(NativeOp::Cz { a: control, b: target });
    ops.extend(hadamard(target));
    ops
}

pub fn decompose_zz(a: SiteCoord, b: SiteCoord, gamma: f64) -> Vec<NativeOp> {
    let mut ops = decompose_cnot(a, b);
    ops.push(NativeOp::LocalRz { site: b, theta: gamma });
    ops.extend(decompose_cnot(a, b));
    ops
}

/// diag(1, 1, 1, e^{i lambda}) up to global phase.
pub fn controlled_phase(a: usize, b: usize, lambda: f64) -> Vec<AbstractGate> {
    if is_zero_angle(lambda) {
        return Vec::new();
    }
    if is_zero_angle(lambda - PI) {
        return vec![AbstractGate::Cz(a, b)];
    }
    vec![
        AbstractGate::Rz(a, lambda / 2.0),
        AbstractGate::Rz(b, lambda / 2.0),
        AbstractGate::Zz { a, b, gamma: -lambda / 2.0 },
    ]
}

/// Angles with u = e^{i alpha} Rz(beta) Ry(gamma) Rz(delta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zyz {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

fn rz_mat(t: f64) -> Gate1 {
    let z = Complex64::new(0.0, 0.0);
    [[Complex64::from_polar(1.0, -t / 2.0), z], [z, Complex64::from_polar(1.0, t / 2.0)]]
}

fn ry_mat(t: f64) -> Gate1 {
    let (s, c) = (t / 2.0).sin_cos();
    [[Complex64::new(c, 0.0), Complex64::new(-s, 0.0)], [Complex64::new(s, 0.0), Complex64::new(c, 0.0)]]
}

pub fn mat2_mul(a: &Gate1, b: &Gate1) -> Gate1 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

impl Zyz {
    pub fn matrix(&self) -> Gate1 {
        let m = mat2_mul(&mat2_mul(&rz_mat(self.beta), &ry_mat(self.gamma)), &rz_mat(self.delta));
        let p = Complex64::from_polar(1.0, self.alpha);
        [[m[0][0] * p, m[0][1] * p], [m[1][0] * p, m[1][1] * p]]
    }
}

pub fn zyz_decompose(u: &Gate1) -> Zyz {
    let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    let alpha = det.arg() / 2.0;
    let f = Complex64::from_polar(1.0, -alpha);
    let v = [[u[0][0] * f, u[0][1] * f], [u[1][0] * f, u[1][1] * f]];
    let gamma = 2.0 * v[1][0].norm().atan2(v[0][0].norm());
    let sum = if v[0][0].norm() > 1e-12 { v[1][1].arg() - v[0][0].arg() } else { 0.0 };
    let diff = if v[1][0].norm() > 1e-12 { v[1][0].arg() - (-v[0][1]).arg() } else { 0.0 };
    let mut z = Zyz { alpha, beta: (sum + diff) / 2.0, gamma, delta: (sum - diff) / 2.0 };
    let m = z.matrix();
    let err: f64 = (0..4).map(|k| (m[k / 2][k % 2] - u[k / 2][k % 2]).norm()).sum();
    if err > 1e-9 {
        z.beta += 2.0 * PI;
    }
    z
}

/// Controlled-u with `control` selecting; two CNOTs in general, a single
/// controlled phase when u is diagonal.
pub fn controlled_unitary(control: usize, target: usize, u: &Gate1) -> Vec<AbstractGate> {
    if u[1][0].norm() < 1e-12 && u[0][1].norm() < 1e-12 {
        let a = u[0][0].arg();
        let mut g = vec![AbstractGate::Rz(control, a)];
        g.extend(controlled_phase(control, target, u[1][1].arg() - a));
        return g;
    }
    let z = zyz_decompose(u);
    let ry = |q: usize, t: f64| AbstractGate::Rphi { q, phi: FRAC_PI_2, theta: t };
    vec![
        AbstractGate::Rz(target, (z.delta - z.beta) / 2.0),
        AbstractGate::Cnot { control, target },
        AbstractGate::Rz(target, -(z.delta + z.beta) / 2.0),
        ry(target, -z.gamma / 2.0),
        AbstractGate::Cnot { control, target },
        ry(target, z.gamma / 2.0),
        AbstractGate::Rz(target, z.beta),
        AbstractGate::Rz(control, z.alpha),
    ]
}

/// Expansion of the inverse swap-free QFT into H and controlled phases.
pub fn qft_inverse_gates(register: &[usize]) -> Vec<AbstractGate> {
    let m = register.len();
    let mut out = Vec::new();
    for j in (0..m).rev() {
        for k in (j + 1..m).rev() {
            let lambda = -PI / f64::powi(2.0, (k - j) as i32);
            out.extend(controlled_phase(register[k], register[j], lambda));
        }
        out.push(AbstractGate::H(register[j]));
    }
    out
}

fn lower(gate: &AbstractGate, layout: &Layout, out: &mut Vec<NativeOp>) -> Result<(), CompileError> {
    let qs = gate.qubits();
    for (i, q) in qs.iter().enumerate() {
        if qs[..i].contains(q) {
            return Err(CompileError::RepeatedQubit(*q));
        }
    }
    match gate {
        AbstractGate::H(q) => out.extend(hadamard(layout.site(*q)?)),
        AbstractGate::X(q) => out.extend(synth_local_rot(layout.site(*q)?, 0.0, PI)),
        AbstractGate::Rz(q, t) => out.push(NativeOp::LocalRz { site: layout.site(*q)?, theta: *t }),
        AbstractGate::Rphi { q, phi, theta } => out.extend(synth_local_rot(layout.site(*q)?, *phi, *theta)),
        AbstractGate::Cnot { control, target } => {
            let (c, t) = layout.pair(*control, *target)?;
            out.extend(decompose_cnot(c, t));
        }
        AbstractGate::Cz(a, b) => {
            let (sa, sb) = layout.pair(*a, *b)?;
            out.push(NativeOp::Cz { a: sa, b: sb });
        }
        AbstractGate::Zz { a, b, gamma } => {
            let (sa, sb) = layout.pair(*a, *b)?;
            out.extend(decompose_zz(sa, sb, *gamma));
        }
        AbstractGate::QftInverse(reg) => {
            for g in qft_inverse_gates(reg) {
                lower(&g, layout, out)?;
            }
        }
    }
    Ok(())
}

/// Lowers, cancels and binds a program to the layout's sites.
pub fn compile(program: &[AbstractGate], layout: &Layout) -> Result<NativeCircuit, CompileError> {
    let ops = lower_program(program, layout)?;
    Ok(NativeCircuit::with_ops(layout.sites().to_vec(), cancel_redundant(&ops))?)
}

/// Lowering without the cancellation pass.
pub fn lower_program(program: &[AbstractGate], layout: &Layout) -> Result<Vec<NativeOp>, CompileError> {
    let mut ops = Vec::new();
    for g in program {
        lower(g, layout, &mut ops)?;
    }
    Ok(ops)
}

fn same_angle(a: f64, b: f64) -> bool {
    is_zero_angle(a - b)
}

/// Peephole pass: drops zero rotations, merges adjacent global rotations on
/// a common axis and merges RZ on one site across diagonal ops.
pub fn cancel_redundant(ops: &[NativeOp]) -> Vec<NativeOp> {
    let mut cur: Vec<NativeOp> = ops.to_vec();
    loop {
        let next = cancel_once(&cur);
        if next.len() == cur.len() {
            return next;
        }
        cur = next;
    }
}

fn cancel_once(ops: &[NativeOp]) -> Vec<NativeOp> {
    let mut out: Vec<NativeOp> = Vec::with_capacity(ops.len());
    for op in ops {
        match *op {
            NativeOp::GlobalRot { phi, theta } => {
                if is_zero_angle(theta) {
                    continue;
                }
                if let Some(NativeOp::GlobalRot { phi: p0, theta: t0 }) = out.last().copied() {
                    let merged = if same_angle(p0, phi) {
                        Some(t0 + theta)
                    } else if same_angle(p0, phi + PI) {
                        Some(t0 - theta)
                    } else {
                        None
                    };
                    if let Some(t) = merged {
                        out.pop();
                        if !is_zero_angle(t) {
                            out.push(NativeOp::GlobalRot { phi: p0, theta: wrap_angle(t) });
                        }
                        continue;
                    }
                }
                out.push(*op);
            }
            NativeOp::LocalRz { site, theta } => {
                if is_zero_angle(theta) {
                    continue;
                }
                let mut merged = false;
                for i in (0..out.len()).rev() {
                    match out[i] {
                        NativeOp::LocalRz { site: s, theta: t0 } if s == site => {
                            let t = t0 + theta;
                            if is_zero_angle(t) {
                                out.remove(i);
                            } else {
                                out[i] = NativeOp::LocalRz { site, theta: wrap_angle(t) };
                            }
                            merged = true;
                            break;
                        }
                        NativeOp::LocalRz { .. } | NativeOp::Cz { .. } => continue,
                        _ => break,
                    }
                }
                if !merged {
                    out.push(*op);
                }
            }
            _ => out.push(*op),
        }
    }
    out
}

pub fn op_duration(op: &NativeOp, timing: &TimingConfig) -> f64 {
    let pulse = match *op {
        NativeOp::GlobalRot { theta, .. } => wrap_angle(theta).abs() / (2.0 * PI * timing.rabi_hz),
        NativeOp::LocalRz { theta, .. } => wrap_angle(theta).abs() / (2.0 * PI * timing.stark_hz),
        NativeOp::Cz { .. } => timing.cz_duration_s,
        NativeOp::MeasureAll => return 0.0,
    };
    pulse + timing.latency_s
}

pub fn estimate_duration(circuit: &NativeCircuit, timing: &TimingConfig) -> f64 {
    circuit.ops().iter().map(|op| op_duration(op, timing)).sum()
}

/// Text form: `SITE q row col` lines, then one op per line.
pub fn to_text(circuit: &NativeCircuit) -> String {
    let mut s = String::new();
    for (q, site) in circuit.sites().iter().enumerate() {
        let _ = writeln!(s, "SITE {} {} {}", q, site.row, site.col);
    }
    for op in circuit.ops() {
        let _ = match *op {
            NativeOp::GlobalRot { phi, theta } => writeln!(s, "GR {phi:?} {theta:?}"),
            NativeOp::LocalRz { site, theta } => writeln!(s, "RZ {} {} {theta:?}", site.row, site.col),
            NativeOp::Cz { a, b } => writeln!(s, "CZ {} {} {} {}", a.row, a.col, b.row, b.col),
            NativeOp::MeasureAll => writeln!(s, "M"),
        };
    }
    s
}

/// Parses the text form. Without `SITE` lines the register is the sites in
/// order of first appearance.
pub fn parse_text(text: &str) -> Result<NativeCircuit, CompileError> {
    let mut declared: Vec<(usize, SiteCoord)> = Vec::new();
    let mut ops = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let err = |msg: String| CompileError::Parse { line, msg };
        let num = |t: &str| t.parse::<f64>().map_err(|_| err(format!("bad number {t:?}")));
        let idx = |t: &str| t.parse::<usize>().map_err(|_| err(format!("bad index {t:?}")));
        let want = |n: usize| {
            if toks.len() != n {
                Err(err(format!("{} expects {} fields, got {}", toks[0], n - 1, toks.len() - 1)))
            } else {
                Ok(())
            }
        };
        match toks[0] {
            "SITE" => {
                want(4)?;
                declared.push((idx(toks[1])?, SiteCoord::new(idx(toks[2])?, idx(toks[3])?)));
            }
            "GR" => {
                want(3)?;
                ops.push(NativeOp::GlobalRot { phi: num(toks[1])?, theta: num(toks[2])? });
            }
            "RZ" => {
                want(4)?;
                ops.push(NativeOp::LocalRz { site: SiteCoord::new(idx(toks[1])?, idx(toks[2])?), theta: num(toks[3])? });
            }
            "CZ" => {
                want(5)?;
                let a = SiteCoord::new(idx(toks[1])?, idx(toks[2])?);
                let b = SiteCoord::new(idx(toks[3])?, idx(toks[4])?);
                if a == b {
                    return Err(err(format!("CZ on identical sites {a}")));
                }
                ops.push(NativeOp::Cz { a, b });
            }
            "M" => {
                want(1)?;
                ops.push(NativeOp::MeasureAll);
            }
            other => return Err(err(format!("unknown op {other:?}"))),
        }
    }
    let sites = if declared.is_empty() {
        let mut sites: Vec<SiteCoord> = Vec::new();
        for op in &ops {
            let touched = match *op {
                NativeOp::LocalRz { site, .. } => vec![site],
                NativeOp::Cz { a, b } => vec![a, b],
                _ => vec![],
            };
            for s in touched {
                if !sites.contains(&s) {
                    sites.push(s);
                }
            }
        }
        sites
    } else {
        declared.sort_by_key(|d| d.0);
        for (k, d) in declared.iter().enumerate() {
            if d.0 != k {
                return Err(CompileError::Parse { line: 0, msg: format!("SITE indices must be 0..n without gaps (missing {k})") });
            }
        }
        declared.into_iter().map(|d| d.1).collect()
    };
    Ok(NativeCircuit::with_ops(sites, ops)?)
}

pub fn two_qubit_sites_ok(circuit: &NativeCircuit) -> bool {
    circuit.ops().iter().all(|op| match op {
        NativeOp::Cz { a, b } => a.shares_line(b),
        _ => true,
    })
}

fn h_mat() -> Gate1 {
    let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[r, r], [r, -r]]
}

fn x_mat() -> Gate1 {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    [[z, o], [o, z]]
}

/// Dense matrix of a k-qubit operator acting on `qubits` (listed order = MSB first).
fn apply_dense(state: &mut StateVector, qubits: &[usize], m: &DMatrix<Complex64>) {
    let n = state.n_qubits();
    let k = qubits.len();
    let amps = state.amplitudes().to_vec();
    let mask: usize = qubits.iter().map(|q| 1 << (n - 1 - q)).sum();
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        let embed = |j: usize| -> usize {
            let mut idx = base;
            for (p, q) in qubits.iter().enumerate() {
                if j >> (k - 1 - p) & 1 == 1 {
                    idx |= 1 << (n - 1 - q);
                }
            }
            idx
        };
        for j in 0..1 << k {
            let a = amps[embed(j)];
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..1 << k {
                out[embed(i)] += m[(i, j)] * a;
            }
        }
    }
    *state = StateVector::from_amplitudes(out).expect("same size");
}

/// Matrix of the inverse swap-free QFT on m qubits.
pub fn qft_inverse_matrix(m: usize) -> DMatrix<Complex64> {
    let dim = 1usize << m;
    let rev = |y: usize| (0..m).fold(0, |acc, b| acc << 1 | (y >> b & 1));
    DMatrix::from_fn(dim, dim, |x, j| {
        let ang = -2.0 * PI * (x * rev(j)) as f64 / dim as f64;
        Complex64::from_polar(1.0 / (dim as f64).sqrt(), ang)
    })
}

/// Unitary of an abstract program from gate definitions alone (no lowering).
pub fn abstract_unitary(program: &[AbstractGate], n_qubits: usize) -> Result<DMatrix<Complex64>, CompileError> {
    let dim = 1usize << n_qubits;
    let mut u = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[j] = Complex64::new(1.0, 0.0);
        let mut s = StateVector::from_amplitudes(amps)?;
        for g in program {
            for q in g.qubits() {
                if q >= n_qubits {
                    return Err(CompileError::UnmappedQubit(q));
                }
            }
            match g {
                AbstractGate::H(q) => s.apply_1q(*q, &h_mat()),
                AbstractGate::X(q) => s.apply_1q(*q, &x_mat()),
                AbstractGate::Rz(q, t) => s.apply_rz(*q, *t),
                AbstractGate::Rphi { q, phi, theta } => s.apply_1q(*q, &crate::qsim::global_rot_matrix(*phi, *theta)),
                AbstractGate::Cnot { control, target } => {
                    let m = DMatrix::from_fn(4, 4, |i, k| {
                        let img = if k >= 2 { k ^ 1 } else { k };
                        Complex64::new(if i == img { 1.0 } else { 0.0 }, 0.0)
                    });
                    apply_dense(&mut s, &[*control, *target], &m);
                }
                AbstractGate::Cz(a, b) => s.apply_cz(*a, *b),
                AbstractGate::Zz { a, b, gamma } => {
                    let m = DMatrix::from_fn(4, 4, |i, k| {
                        if i != k {
                            return Complex64::new(0.0, 0.0);
                        }
                        let zz = if i == 0 || i == 3 { 1.0 } else { -1.0 };
                        Complex64::from_polar(1.0, -gamma / 2.0 * zz)
                    });
                    apply_dense(&mut s, &[*a, *b], &m);
                }
                AbstractGate::QftInverse(reg) => apply_dense(&mut s, reg, &qft_inverse_matrix(reg.len())),
            }
        }
        for (i, a) in s.amplitudes().iter().enumerate() {
            u[(i, j)] = *a;
        }
    }
    Ok(u)
}
