//! Command-line front end: config loading, subcommands and run records.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::compiler::{compile, estimate_duration, to_text, two_qubit_sites_ok, AbstractGate, CompileError, Layout, TimingConfig};
use crate::experiments::{
    ghz_experiment_on, ghz_program, h2_energy, qaoa_optimize, qaoa_program, qaoa_run_on, qpe_program, qpe_run_on,
    Backend, ExperimentError, GraphSpec, H2Problem, UnitarySpec,
};
use crate::hardware::{plan_rearrangement, trap_profile, ArrayOccupancy, HardwareError, TrapArrayConfig};
use crate::noise::{coherence_model, spam_correct, CoherenceInputs, NoiseError, NoiseParams};
use crate::pulse::{bell_test_tuned, pulse_gate_unitary, tune_cz_with, PulseError, TuneOptions};
use crate::qsim::{stream_rng, ShotHistogram, SiteCoord};

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Groups every config must define, with their minimum size.
const REQUIRED_GROUPS: [(&str, usize); 4] = [("ghz", 6), ("qpe", 4), ("line3", 3), ("t4", 4)];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Hardware(#[from] HardwareError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub sites: Vec<[usize; 2]>,
    #[serde(default)]
    pub pairs: Vec<[usize; 2]>,
}

impl GroupConfig {
    pub fn layout(&self) -> Result<Layout, CompileError> {
        Layout::new(self.sites.iter().map(|s| SiteCoord::new(s[0], s[1])).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub omega_r_hz: f64,
    pub blockade_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceConfig {
    pub b0: f64,
    pub sigma_b: f64,
    pub eta: f64,
    pub t_atom_grid: Vec<f64>,
    pub sigma_b_grid: Vec<f64>,
}

/// Register state circuits start from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    #[default]
    Zeros,
    /// All atoms in |1>, as left by optical pumping.
    Ones,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    pub seed: u64,
    #[serde(default)]
    pub initial_state: InitialState,
    pub array: ArrayConfig,
    pub groups: BTreeMap<String, GroupConfig>,
    pub timing: TimingConfig,
    pub trap: TrapArrayConfig,
    pub pulse: PulseConfig,
    pub noise: NoiseParams,
    pub coherence: CoherenceConfig,
}

impl MachineConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |m: String| CliError::Config(m);
        if self.array.rows == 0 || self.array.cols == 0 || !(self.array.spacing_m > 0.0) {
            return Err(cfg("array: rows, cols and spacing_m must be positive".into()));
        }
        for (name, min) in REQUIRED_GROUPS {
            match self.groups.get(name) {
                None => return Err(cfg(format!("missing group `{name}`"))),
                Some(g) if g.sites.len() < min => {
                    return Err(cfg(format!("group `{name}` needs at least {min} sites")));
                }
                _ => {}
            }
        }
        for (name, g) in &self.groups {
            for s in &g.sites {
                if s[0] >= self.array.rows || s[1] >= self.array.cols {
                    return Err(cfg(format!("group `{name}`: site ({}, {}) is outside the array", s[0], s[1])));
                }
            }
            let layout = g.layout().map_err(|e| cfg(format!("group `{name}`: {e}")))?;
            for p in &g.pairs {
                let (a, b) = (p[0], p[1]);
                let (sa, sb) = match (layout.site(a), layout.site(b)) {
                    (Ok(sa), Ok(sb)) if a != b => (sa, sb),
                    _ => return Err(cfg(format!("group `{name}`: pair ({a}, {b}) is not two distinct qubits"))),
                };
                if !sa.shares_line(&sb) {
                    return Err(cfg(format!("group `{name}`: C_Z pair ({a}, {b}) at {sa} and {sb} shares no row or column")));
                }
            }
        }
        self.timing.validate().map_err(|e| cfg(format!("timing: {e}")))?;
        self.noise.validate().map_err(|e| cfg(format!("noise: {e}")))?;
        trap_profile(&self.trap).map_err(|e| cfg(format!("trap: {e}")))?;
        if !(self.pulse.omega_r_hz > 0.0 && self.pulse.blockade_hz > 0.0) {
            return Err(cfg("pulse: omega_r_hz and blockade_hz must be positive".into()));
        }
        Ok(())
    }

    pub fn layout(&self, group: &str) -> Result<Layout, CliError> {
        let g = self.groups.get(group).ok_or_else(|| CliError::Config(format!("missing group `{group}`")))?;
        Ok(g.layout()?)
    }
}

pub fn parse_config(text: &str) -> Result<MachineConfig, CliError> {
    let cfg: MachineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<MachineConfig, CliError> {
    parse_config(&fs::read_to_string(path).map_err(io_err(path))?)
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

// ---------------------------------------------------------------- argv

#[derive(Debug, Parser)]
#[command(name = "atomtwin", version, about = "Neutral-atom quantum computer digital twin")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Machine config (TOML); the built-in default when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Switch all noise channels off.
    #[arg(long, global = true)]
    pub ideal: bool,
    /// Multiply every noise rate by this factor.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub noise_scale: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// GHZ preparation with parity analysis.
    Ghz {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        shots: u64,
        /// Parity scan points (default 4n+4).
        #[arg(long)]
        scan_points: Option<usize>,
    },
    /// Phase estimation of Z^k or the Trotterized H2 unitary.
    Qpe {
        /// Power k of U = Z^k.
        #[arg(long, conflicts_with = "h2")]
        z_power: Option<f64>,
        #[arg(long)]
        h2: bool,
        #[arg(long, default_value_t = 3)]
        bits: usize,
        #[arg(long, default_value_t = 2000)]
        shots: u64,
    },
    /// QAOA MaxCut on a named graph.
    Qaoa {
        /// line3, t4 or edge.
        #[arg(long, default_value = "t4")]
        graph: String,
        #[arg(long, default_value_t = 1)]
        p: usize,
        /// Mixer angles in half turns (comma separated).
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        /// Cost angles in half turns (comma separated).
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        /// Search for angles instead of using the reference ones.
        #[arg(long)]
        optimize: bool,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[arg(long, default_value_t = 2000)]
        shots: u64,
    },
    /// Tune the two-pulse Rydberg C_Z gate.
    TuneCz {
        /// Rydberg Rabi frequency Omega/2pi (Hz); config value when omitted.
        #[arg(long)]
        omega_hz: Option<f64>,
        /// Blockade shift B/2pi (Hz); config value when omitted.
        #[arg(long)]
        blockade_hz: Option<f64>,
    },
    /// Trap-array profile and T2* grid.
    TrapReport,
    /// T2* over atom temperature and field noise.
    CoherenceReport,
    /// Plan atom moves from a random loading pattern onto a site group.
    Rearrange {
        /// Loading probability per site.
        #[arg(long, default_value_t = 0.6)]
        fill: f64,
        #[arg(long, default_value = "ghz")]
        group: String,
    },
    /// Compile an abstract program to native text.
    Compile {
        /// JSON list of abstract gates.
        #[arg(long, conflicts_with = "builtin")]
        program: Option<PathBuf>,
        /// ghz-N, qpe-h2, qpe-zK, qaoa-line3-pP or qaoa-t4-pP.
        #[arg(long)]
        builtin: Option<String>,
        /// Site group for `--program`.
        #[arg(long, default_value = "ghz")]
        group: String,
    },
}

/// Reference angles (half turns) for the line and T graphs.
pub fn reference_angles(graph: &str, p: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let (b, g): (&[f64], &[f64]) = match (graph, p) {
        ("line3", 1) => (&[1.25], &[1.67]),
        ("line3", 2) => (&[0.331, 0.229], &[1.66, 1.44]),
        ("t4", 1) => (&[0.750], &[0.696]),
        ("t4", 2) => (&[1.71, 1.19], &[0.700, 0.624]),
        ("t4", 3) => (&[1.63, 1.77, 0.172], &[0.194, 0.424, 1.39]),
        _ => return None,
    };
    Some((b.to_vec(), g.to_vec()))
}

// ---------------------------------------------------------------- output

struct Record {
    command: &'static str,
    inputs: Value,
    histogram: Option<ShotHistogram>,
    metrics: Value,
    duration: Option<f64>,
    tables: Vec<(String, Vec<String>, Vec<Vec<String>>)>,
    extra_files: Vec<(String, String)>,
    summary: String,
}

impl Record {
    fn new(command: &'static str, inputs: Value, metrics: Value, summary: String) -> Self {
        Self { command, inputs, histogram: None, metrics, duration: None, tables: Vec::new(), extra_files: Vec::new(), summary }
    }

    fn table(mut self, suffix: &str, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        self.tables.push((suffix.to_string(), header.iter().map(|h| h.to_string()).collect(), rows));
        self
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Paths of the files written by one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub json: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn write_record(rec: Record, common: &Common, cfg_hash: &str, seed: u64) -> Result<RunOutput, CliError> {
    let dir = &common.out_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let histogram: Value = match &rec.histogram {
        Some(h) => json!({ "shots": h.shots, "counts": h.counts }),
        None => Value::Null,
    };
    let doc = json!({
        "command": rec.command,
        "version": VERSION,
        "config_hash": cfg_hash,
        "seed": seed,
        "inputs": rec.inputs,
        "histogram": histogram,
        "metrics": rec.metrics,
        "duration_estimate": rec.duration,
    });
    let stem = rec.command.replace('-', "_");
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&json_path, serde_json::to_string_pretty(&doc)? + "\n").map_err(io_err(&json_path))?;
    let mut files = vec![json_path.clone()];
    for (suffix, header, rows) in rec.tables {
        let path = dir.join(format!("{stem}_{suffix}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush().map_err(io_err(&path))?;
        files.push(path);
    }
    for (name, body) in rec.extra_files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        files.push(path);
    }
    Ok(RunOutput { json: json_path, files, summary: rec.summary })
}

// ---------------------------------------------------------------- commands

fn backend(cfg: &MachineConfig, common: &Common) -> Result<Backend, CliError> {
    if !(common.noise_scale >= 0.0 && common.noise_scale.is_finite()) {
        return Err(CliError::Usage(format!("--noise-scale {} must be a non-negative number", common.noise_scale)));
    }
    let noise = (!common.ideal).then(|| cfg.noise.scaled(common.noise_scale));
    Ok(Backend { timing: cfg.timing, noise, start_in_ones: cfg.initial_state == InitialState::Ones })
}

fn noise_inputs(b: &Backend, common: &Common) -> Value {
    json!({ "ideal": b.noise.is_none(), "noise_scale": common.noise_scale })
}

fn cmd_ghz(cfg: &MachineConfig, common: &Common, seed: u64, n: usize, shots: u64, scan: Option<usize>) -> Result<Record, CliError> {
    let b = backend(cfg, common)?;
    let points = scan.unwrap_or(4 * n + 4);
    let run = ghz_experiment_on(&cfg.layout("ghz")?, n, shots, points, &b, seed)?;
    let r = run.result;
    let corrected = spam_correct(r.fidelity, n as u32, cfg.noise.readout_loss)?;
    let metrics = json!({
        "fidelity": r.fidelity,
        "p_all0": r.p_all0,
        "p_all1": r.p_all1,
        "c_n": r.c_n,
        "spectral_fraction": run.scan.spectral_fraction(n),
        "spam_corrected_fidelity": corrected.corrected,
        "spam_clamped": corrected.clamped,
        "cz_count": run.cz_count,
    });
    let rows = run.scan.phases.iter().zip(&run.scan.parities).map(|(p, q)| vec![num(*p), num(*q)]).collect();
    let mut rec = Record::new(
        "ghz",
        json!({ "n": n, "shots": shots, "scan_points": points, "noise": noise_inputs(&b, common) }),
        metrics,
        format!("ghz n={n} fidelity={:.4}", r.fidelity),
    )
    .table("parity", &["phi", "parity"], rows);
    rec.histogram = Some(run.histogram);
    rec.duration = Some(run.duration_s);
    Ok(rec)
}

fn cmd_qpe(cfg: &MachineConfig, common: &Common, seed: u64, z_power: Option<f64>, h2: bool, bits: usize, shots: u64) -> Result<Record, CliError> {
    let b = backend(cfg, common)?;
    let problem = H2Problem::reference();
    let spec = match (z_power, h2) {
        (_, true) => UnitarySpec::H2(problem),
        (Some(k), false) => UnitarySpec::ZPower(k),
        (None, false) => return Err(CliError::Usage("qpe needs --z-power K or --h2".into())),
    };
    let run = qpe_run_on(&cfg.layout("qpe")?, &spec, bits, shots, &b, seed)?;
    let mut metrics = json!({
        "modal_bits": run.modal_bits,
        "modal_probability": run.probability(&run.modal_bits),
        "phase_fraction": run.phase_fraction,
        "cz_count": run.cz_count,
    });
    if h2 {
        let (hi, lo) = problem.eigen_fractions();
        metrics["energy_ha"] = json!(h2_energy(&run.modal_bits, &problem)?);
        metrics["exact_phase_fractions"] = json!([hi, lo]);
    }
    let rows = run.dist.to_map().into_iter().map(|(k, p)| vec![k.clone(), num(p), run.histogram.counts.get(&k).copied().unwrap_or(0).to_string()]).collect();
    let summary = format!("qpe modal={} p={:.4}", run.modal_bits, run.probability(&run.modal_bits));
    let mut rec = Record::new(
        "qpe",
        json!({ "unitary": spec, "bits": bits, "shots": shots, "noise": noise_inputs(&b, common) }),
        metrics,
        summary,
    )
    .table("register", &["bits", "probability", "count"], rows);
    rec.histogram = Some(run.histogram);
    rec.duration = Some(run.duration_s);
    Ok(rec)
}

#[allow(clippy::too_many_arguments)]
fn cmd_qaoa(
    cfg: &MachineConfig,
    common: &Common,
    seed: u64,
    graph: &str,
    p: usize,
    betas: Option<Vec<f64>>,
    gammas: Option<Vec<f64>>,
    optimize: bool,
    restarts: usize,
    shots: u64,
) -> Result<Record, CliError> {
    let b = backend(cfg, common)?;
    let g = GraphSpec::named(graph).ok_or_else(|| CliError::Usage(format!("unknown graph `{graph}` (line3, t4, edge)")))?;
    let (betas, gammas, optimized) = match (betas, gammas, optimize) {
        (_, _, true) => {
            let o = qaoa_optimize(&g, p, restarts, seed)?;
            (o.betas, o.gammas, Some(o.ratio))
        }
        (Some(bs), Some(gs), false) => (bs, gs, None),
        (None, None, false) => {
            let (bs, gs) = reference_angles(graph, p)
                .ok_or_else(|| CliError::Usage(format!("no reference angles for {graph} p={p}; pass --betas/--gammas or --optimize")))?;
            (bs, gs, None)
        }
        _ => return Err(CliError::Usage("--betas and --gammas go together".into())),
    };
    let layout = match graph {
        "line3" | "t4" => cfg.layout(graph)?,
        _ => g.layout()?,
    };
    let run = qaoa_run_on(&layout, &g, &betas, &gammas, shots, &b, seed)?;
    let metrics = json!({
        "approximation_ratio": run.ratio,
        "approximation_ratio_sampled": run.ratio_sampled,
        "approximation_ratio_edges": run.ratio_sampled_edges,
        "cross_check_ok": run.cross_check_ok(),
        "s_max": run.s_max,
        "optimizer_ratio": optimized,
        "cz_count": run.cz_count,
    });
    let rows = run
        .dist
        .to_map()
        .into_iter()
        .map(|(k, pr)| vec![k.clone(), g.cut_value(&k).to_string(), num(pr), run.histogram.counts.get(&k).copied().unwrap_or(0).to_string()])
        .collect();
    let mut rec = Record::new(
        "qaoa",
        json!({ "graph": graph, "p": p, "betas": betas, "gammas": gammas, "optimize": optimize, "shots": shots, "noise": noise_inputs(&b, common) }),
        metrics,
        format!("qaoa {graph} p={p} R_a={:.4}", run.ratio),
    )
    .table("cuts", &["bits", "cut", "probability", "count"], rows);
    rec.histogram = Some(run.histogram);
    rec.duration = Some(run.duration_s);
    Ok(rec)
}

fn cmd_tune(cfg: &MachineConfig, omega_hz: Option<f64>, blockade_hz: Option<f64>) -> Result<Record, CliError> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let omega = omega_hz.unwrap_or(cfg.pulse.omega_r_hz);
    let blockade = blockade_hz.unwrap_or(cfg.pulse.blockade_hz);
    let report = tune_cz_with(two_pi * omega, two_pi * blockade, 1.0, &TuneOptions::default())?;
    let g = report.gate;
    let bell = bell_test_tuned(&g, 64)?;
    let u = pulse_gate_unitary(&g)?;
    let metrics = json!({
        "delta_over_omega": g.pulse.delta / g.pulse.omega_r,
        "tau_omega_over_2pi": g.pulse.tau * g.pulse.omega_r / two_pi,
        "xi": g.pulse.xi,
        "phase_error": g.phases.phase_error(),
        "comp_phase_a": g.comp_phase_a,
        "comp_phase_b": g.comp_phase_b,
        "return01": g.phases.return01,
        "return10": g.phases.return10,
        "return11": g.phases.return11,
        "leakage": u.leakage,
        "distance_to_cz": u.distance_to_cz,
        "bell_fidelity": bell.fidelity,
    });
    let rows = report
        .scan
        .iter()
        .map(|r| {
            [r.delta_over_omega, r.tau_omega_over_2pi, r.xi, r.phase_error, r.return01, r.return10, r.return11, r.objective, r.bell_fidelity]
                .iter()
                .map(|x| num(*x))
                .collect()
        })
        .collect();
    Ok(Record::new(
        "tune-cz",
        json!({ "omega_r_hz": omega, "blockade_hz": blockade }),
        metrics,
        format!("tune-cz delta/omega={:.4} F_bell={:.4}", g.pulse.delta / g.pulse.omega_r, bell.fidelity),
    )
    .table(
        "scan",
        &["delta_over_omega", "tau_omega_over_2pi", "xi", "phase_error", "return01", "return10", "return11", "objective", "bell_fidelity"],
        rows,
    ))
}

fn t2_grid(cfg: &MachineConfig) -> Vec<Vec<String>> {
    let c = &cfg.coherence;
    let mut rows = Vec::new();
    for &t in &c.t_atom_grid {
        for &sb in &c.sigma_b_grid {
            let times = coherence_model(&CoherenceInputs { eta: c.eta, ..CoherenceInputs::cs(sb, c.b0, t) });
            rows.push(vec![num(t), num(sb), num(times.t2_magnetic), num(times.t2_motion), num(times.t2_star)]);
        }
    }
    rows
}

const T2_HEADER: [&str; 5] = ["t_atom_k", "sigma_b_t", "t2_magnetic_s", "t2_motion_s", "t2_star_s"];

fn cmd_trap(cfg: &MachineConfig) -> Result<Record, CliError> {
    let p = trap_profile(&cfg.trap)?;
    let metrics = serde_json::to_value(p)?;
    let rows = match &metrics {
        Value::Object(m) => m.iter().map(|(k, v)| vec![k.clone(), v.to_string()]).collect(),
        _ => Vec::new(),
    };
    Ok(Record::new(
        "trap-report",
        json!({ "trap": cfg.trap, "s": cfg.trap.s() }),
        metrics,
        format!("trap-report It/Id={:.3} f_radial={:.0} Hz f_axial={:.0} Hz", p.it_ratio, p.f_vib_radial, p.f_vib_axial),
    )
    .table("profile", &["quantity", "value"], rows)
    .table("t2", &T2_HEADER, t2_grid(cfg)))
}

fn cmd_coherence(cfg: &MachineConfig) -> Result<Record, CliError> {
    let c = &cfg.coherence;
    let at = coherence_model(&CoherenceInputs { eta: c.eta, ..CoherenceInputs::cs(c.sigma_b, c.b0, cfg.trap.t_atom) });
    Ok(Record::new(
        "coherence-report",
        json!({ "coherence": c, "t_atom": cfg.trap.t_atom }),
        serde_json::to_value(at)?,
        format!("coherence-report T2*={:.3} ms", at.t2_star * 1e3),
    )
    .table("t2", &T2_HEADER, t2_grid(cfg)))
}

fn cmd_rearrange(cfg: &MachineConfig, seed: u64, fill: f64, group: &str) -> Result<Record, CliError> {
    if !(0.0..=1.0).contains(&fill) {
        return Err(CliError::Usage(format!("--fill {fill} is not a probability")));
    }
    let (rows, cols) = (cfg.array.rows, cfg.array.cols);
    let mut rng = stream_rng(seed, 0);
    let occupied: BTreeSet<SiteCoord> =
        (0..rows).flat_map(|r| (0..cols).map(move |c| SiteCoord::new(r, c))).filter(|_| rng.random::<f64>() < fill).collect();
    let targets: BTreeSet<SiteCoord> = cfg.layout(group)?.sites().iter().copied().collect();
    let occ = ArrayOccupancy { rows, cols, occupied, targets };
    let plan = plan_rearrangement(&occ)?;
    let ok = plan.execute(&occ.occupied).is_some_and(|f| occ.targets.is_subset(&f));
    let rows_out = plan
        .moves
        .iter()
        .enumerate()
        .map(|(i, (a, b))| vec![i.to_string(), a.row.to_string(), a.col.to_string(), b.row.to_string(), b.col.to_string()])
        .collect();
    Ok(Record::new(
        "rearrange",
        json!({ "fill": fill, "group": group, "occupied": occ.occupied.iter().map(|s| [s.row, s.col]).collect::<Vec<_>>() }),
        json!({ "moves": plan.moves.len(), "total_cost_sites2": plan.total_cost, "targets_filled": ok }),
        format!("rearrange {} moves, cost {}", plan.moves.len(), plan.total_cost),
    )
    .table("moves", &["step", "from_row", "from_col", "to_row", "to_col"], rows_out))
}

fn builtin_program(name: &str, cfg: &MachineConfig) -> Result<(Vec<AbstractGate>, Layout), CliError> {
    let bad = || CliError::Usage(format!("unknown builtin `{name}`"));
    if let Some(n) = name.strip_prefix("ghz-") {
        let n: usize = n.parse().map_err(|_| bad())?;
        if !(2..=6).contains(&n) {
            return Err(bad());
        }
        return Ok((ghz_program(n), cfg.layout("ghz")?.truncated(n)?));
    }
    if name == "qpe-h2" {
        return Ok((qpe_program(&UnitarySpec::H2(H2Problem::reference()), 3), cfg.layout("qpe")?));
    }
    if let Some(k) = name.strip_prefix("qpe-z") {
        let k: f64 = k.parse().map_err(|_| bad())?;
        return Ok((qpe_program(&UnitarySpec::ZPower(k), 3), cfg.layout("qpe")?));
    }
    for graph in ["line3", "t4"] {
        if let Some(p) = name.strip_prefix(&format!("qaoa-{graph}-p")) {
            let p: usize = p.parse().map_err(|_| bad())?;
            let (b, g) = reference_angles(graph, p).ok_or_else(bad)?;
            let spec = GraphSpec::named(graph).expect("known graph");
            return Ok((qaoa_program(&spec, &b, &g), cfg.layout(graph)?));
        }
    }
    Err(bad())
}

fn cmd_compile(cfg: &MachineConfig, program: Option<PathBuf>, builtin: Option<String>, group: &str) -> Result<Record, CliError> {
    let (prog, layout, source) = match (program, builtin) {
        (Some(path), None) => {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let prog: Vec<AbstractGate> = serde_json::from_str(&text)?;
            let n = prog.iter().flat_map(|g| g.qubits()).max().map_or(0, |q| q + 1);
            (prog, cfg.layout(group)?.truncated(n)?, path.display().to_string())
        }
        (None, Some(name)) => {
            let (p, l) = builtin_program(&name, cfg)?;
            (p, l, name)
        }
        _ => return Err(CliError::Usage("compile needs exactly one of --program or --builtin".into())),
    };
    let circuit = compile(&prog, &layout)?;
    let duration = estimate_duration(&circuit, &cfg.timing);
    let mut rec = Record::new(
        "compile",
        json!({ "source": source, "sites": layout.sites().iter().map(|s| [s.row, s.col]).collect::<Vec<_>>() }),
        json!({ "ops": circuit.ops().len(), "cz_count": circuit.cz_count(), "connectivity_ok": two_qubit_sites_ok(&circuit) }),
        format!("compile {} ops, {} C_Z, {:.1} us", circuit.ops().len(), circuit.cz_count(), duration * 1e6),
    );
    rec.duration = Some(duration);
    rec.extra_files.push(("compile_circuit.txt".into(), to_text(&circuit)));
    Ok(rec)
}

/// Runs a parsed command line and writes its outputs.
pub fn execute(cli: Cli) -> Result<RunOutput, CliError> {
    let (text, cfg) = match &cli.common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            let cfg = parse_config(&text)?;
            (text, cfg)
        }
        None => (DEFAULT_CONFIG.to_string(), parse_config(DEFAULT_CONFIG)?),
    };
    let seed = cli.common.seed.unwrap_or(cfg.seed);
    let common = &cli.common;
    let rec = match cli.command {
        Command::Ghz { n, shots, scan_points } => cmd_ghz(&cfg, common, seed, n, shots, scan_points)?,
        Command::Qpe { z_power, h2, bits, shots } => cmd_qpe(&cfg, common, seed, z_power, h2, bits, shots)?,
        Command::Qaoa { graph, p, betas, gammas, optimize, restarts, shots } => {
            cmd_qaoa(&cfg, common, seed, &graph, p, betas, gammas, optimize, restarts, shots)?
        }
        Command::TuneCz { omega_hz, blockade_hz } => cmd_tune(&cfg, omega_hz, blockade_hz)?,
        Command::TrapReport => cmd_trap(&cfg)?,
        Command::CoherenceReport => cmd_coherence(&cfg)?,
        Command::Rearrange { fill, group } => cmd_rearrange(&cfg, seed, fill, &group)?,
        Command::Compile { program, builtin, group } => cmd_compile(&cfg, program, builtin, &group)?,
    };
    write_record(rec, common, &config_hash(&text), seed)
}

/// Entry point shared by the binary and tests; returns the exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(out) => {
            println!("{} -> {}", out.summary, out.json.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
