//! Trap-array, addressing-optics and rearrangement calculators (SI units).

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{CS_MASS, K_B};
use crate::qsim::SiteCoord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HardwareError {
    #[error("aspect ratio s = {0} must exceed 1")]
    AspectRatio(f64),
    #[error("{field} must be positive (got {value})")]
    NotPositive { field: &'static str, value: f64 },
    #[error("diffraction orders {m1} and {m2} must have opposite signs")]
    SameOrders { m1: i32, m2: i32 },
    #[error("detuning {0} rad/s is too close to a pole of the light-shift formula")]
    NearPole(f64),
    #[error("{sources} sources cannot fill {targets} targets")]
    Infeasible { sources: usize, targets: usize },
    #[error("cost matrix is ragged or has a non-finite or negative entry")]
    BadCost,
    #[error("no free site is available to break a move cycle")]
    NoScratchSite,
    #[error("site {0} lies outside the {1}x{2} array")]
    OutOfArray(SiteCoord, usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapArrayConfig {
    /// Line spacing (m).
    pub d: f64,
    /// Line waist (m).
    pub w: f64,
    pub lambda_trap: f64,
    /// Spatially averaged light-shift depth (J).
    pub u_d: f64,
    pub t_atom: f64,
    pub atom_mass: f64,
}

impl Default for TrapArrayConfig {
    fn default() -> Self {
        Self { d: 3e-6, w: 1e-6, lambda_trap: 825e-9, u_d: K_B * 300e-6, t_atom: 5e-6, atom_mass: CS_MASS }
    }
}

impl TrapArrayConfig {
    pub fn s(&self) -> f64 {
        self.d / self.w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapProfile {
    pub ic_ratio: f64,
    pub is_ratio: f64,
    pub it_ratio: f64,
    pub itz_ratio: f64,
    pub z_max: f64,
    pub kappa_x: f64,
    pub kappa_z: f64,
    /// Vibration frequencies omega/2pi (Hz).
    pub f_vib_radial: f64,
    pub f_vib_axial: f64,
    /// Thermal position spreads (m).
    pub sigma_x: f64,
    pub sigma_z: f64,
}

pub fn trap_profile(cfg: &TrapArrayConfig) -> Result<TrapProfile, HardwareError> {
    for (field, value) in [
        ("d", cfg.d),
        ("w", cfg.w),
        ("lambda_trap", cfg.lambda_trap),
        ("u_d", cfg.u_d),
        ("t_atom", cfg.t_atom),
        ("atom_mass", cfg.atom_mass),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(HardwareError::NotPositive { field, value });
        }
    }
    let s = cfg.s();
    if !(s > 1.0) {
        return Err(HardwareError::AspectRatio(s));
    }
    let g = (-s * s / 2.0).exp();
    let r2pi = (2.0 * PI).sqrt();
    let ic_ratio = 4.0 * s / r2pi * g;
    let is_ratio = s / r2pi * (1.0 + 2.0 * g);
    let it_ratio = is_ratio - ic_ratio;
    let itz_ratio = 4.0 / r2pi * (1.0 / 1f64.exp().sqrt() - s * g);
    let z_max = PI * cfg.w * cfg.w / cfg.lambda_trap * (s * s - 1.0).sqrt();
    let core = (s * s - 1.0) * g;
    let kappa_x = cfg.u_d / cfg.d.powi(2) * 32f64.sqrt() * s.powi(3) / PI.sqrt() * core;
    let kappa_z = cfg.u_d * cfg.lambda_trap.powi(2) / cfg.d.powi(4) * 8f64.sqrt() * s.powi(5) / PI.powf(2.5) * core;
    let freq = |k: f64| (k / cfg.atom_mass).sqrt() / (2.0 * PI);
    let kt = K_B * cfg.t_atom;
    Ok(TrapProfile {
        ic_ratio,
        is_ratio,
        it_ratio,
        itz_ratio,
        z_max,
        kappa_x,
        kappa_z,
        f_vib_radial: freq(kappa_x),
        f_vib_axial: freq(kappa_z),
        sigma_x: (kt / kappa_x).sqrt(),
        sigma_z: (kt / kappa_z).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AodMatch {
    /// Required M2/M1.
    pub mag_ratio: f64,
    /// Required input waist ratio w2/w1.
    pub waist_ratio: f64,
}

/// Magnification and waist ratios that make two AOD-scanned beams of
/// different colour overlap with cancelling frequency shifts.
pub fn aod_magnification(lambda1: f64, lambda2: f64, n1: f64, n2: f64, m1: i32, m2: i32) -> Result<AodMatch, HardwareError> {
    if m1 * m2 >= 0 {
        return Err(HardwareError::SameOrders { m1, m2 });
    }
    for (field, value) in [("lambda1", lambda1), ("lambda2", lambda2), ("n1", n1), ("n2", n2)] {
        if !(value > 0.0) {
            return Err(HardwareError::NotPositive { field, value });
        }
    }
    let mag_ratio = -(m1 as f64) * lambda1 * n2 / (m2 as f64 * lambda2 * n1);
    Ok(AodMatch { mag_ratio, waist_ratio: n2 / n1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarkPhase {
    pub theta: f64,
    /// Differential light shift theta/t (rad/s).
    pub rate: f64,
}

/// Differential light-shift phase from an off-resonant beam detuned by
/// `delta` from one qubit level and `delta - omega_q` from the other.
pub fn stark_phase(omega: f64, delta: f64, omega_q: f64, t: f64) -> Result<StarkPhase, HardwareError> {
    let scale = omega.abs().max(omega_q.abs()).max(delta.abs());
    for pole in [delta, delta - omega_q] {
        if pole.abs() <= 1e-9 * scale {
            return Err(HardwareError::NearPole(pole));
        }
    }
    let o2 = omega * omega;
    let rate = o2 / (4.0 * delta) - o2 / (4.0 * (delta - omega_q));
    Ok(StarkPhase { theta: rate * t, rate })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    /// Source row assigned to each target column.
    pub rows: Vec<usize>,
    pub total: f64,
}

/// Minimum-cost assignment of every column to a distinct row (rows >= cols).
///
/// Shortest augmenting paths with potentials, O(m^2 n).
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Assignment, HardwareError> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != m || r.iter().any(|c| !c.is_finite() || *c < 0.0)) {
        return Err(HardwareError::BadCost);
    }
    if m > n {
        return Err(HardwareError::Infeasible { sources: n, targets: m });
    }
    // columns play the "worker" role; 1-based with slot 0 as the virtual start
    let a = |j: usize, i: usize| cost[i - 1][j - 1];
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for j in 1..=m {
        owner[0] = j;
        let mut i0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[i0] = true;
            let j0 = owner[i0];
            let mut delta = f64::INFINITY;
            let mut i1 = 0;
            for i in 1..=n {
                if !used[i] {
                    let cur = a(j0, i) - u[j0] - v[i];
                    if cur < minv[i] {
                        minv[i] = cur;
                        way[i] = i0;
                    }
                    if minv[i] < delta {
                        delta = minv[i];
                        i1 = i;
                    }
                }
            }
            for i in 0..=n {
                if used[i] {
                    u[owner[i]] += delta;
                    v[i] -= delta;
                } else {
                    minv[i] -= delta;
                }
            }
            i0 = i1;
            if owner[i0] == 0 {
                break;
            }
        }
        loop {
            let i1 = way[i0];
            owner[i0] = owner[i1];
            i0 = i1;
            if i0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![0; m];
    for i in 1..=n {
        if owner[i] != 0 {
            rows[owner[i] - 1] = i - 1;
        }
    }
    let total = rows.iter().enumerate().map(|(j, &i)| cost[i][j]).sum();
    Ok(Assignment { rows, total })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayOccupancy {
    pub rows: usize,
    pub cols: usize,
    pub occupied: BTreeSet<SiteCoord>,
    pub targets: BTreeSet<SiteCoord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MovePlan {
    pub moves: Vec<(SiteCoord, SiteCoord)>,
    /// Summed squared site distances of the optimal assignment.
    pub total_cost: f64,
}

impl MovePlan {
    /// Replays the moves; fails on a move from an empty site or onto an
    /// occupied one.
    pub fn execute(&self, start: &BTreeSet<SiteCoord>) -> Option<BTreeSet<SiteCoord>> {
        let mut occ = start.clone();
        for (from, to) in &self.moves {
            if !occ.remove(from) || !occ.insert(*to) {
                return None;
            }
        }
        Some(occ)
    }
}

/// Plans tweezer moves filling every target. Assignment minimizes summed
/// squared distances; moves run in an order that never lands on an occupied
/// site, with cycles broken through the nearest free non-target site.
pub fn plan_rearrangement(occ: &ArrayOccupancy) -> Result<MovePlan, HardwareError> {
    for s in occ.occupied.iter().chain(&occ.targets) {
        if s.row >= occ.rows || s.col >= occ.cols {
            return Err(HardwareError::OutOfArray(*s, occ.rows, occ.cols));
        }
    }
    let sources: Vec<SiteCoord> = occ.occupied.iter().copied().collect();
    let targets: Vec<SiteCoord> = occ.targets.iter().copied().collect();
    if sources.len() < targets.len() {
        return Err(HardwareError::Infeasible { sources: sources.len(), targets: targets.len() });
    }
    if targets.is_empty() {
        return Ok(MovePlan { moves: Vec::new(), total_cost: 0.0 });
    }
    let cost: Vec<Vec<f64>> = sources.iter().map(|s| targets.iter().map(|t| s.dist_sq(t)).collect()).collect();
    let asg = hungarian(&cost)?;
    let mut pending: Vec<(SiteCoord, SiteCoord)> =
        asg.rows.iter().enumerate().map(|(j, &i)| (sources[i], targets[j])).filter(|(a, b)| a != b).collect();
    let mut current = occ.occupied.clone();
    let mut moves = Vec::new();
    while !pending.is_empty() {
        if let Some(k) = pending.iter().position(|(_, to)| !current.contains(to)) {
            let (from, to) = pending.remove(k);
            current.remove(&from);
            current.insert(to);
            moves.push((from, to));
            continue;
        }
        // every remaining destination is held by an atom that must move: a cycle
        let (from, to) = pending[0];
        let scratch = (0..occ.rows)
            .flat_map(|r| (0..occ.cols).map(move |c| SiteCoord::new(r, c)))
            .filter(|s| !current.contains(s) && !occ.targets.contains(s))
            .min_by(|a, b| from.dist_sq(a).total_cmp(&from.dist_sq(b)).then(a.cmp(b)))
            .ok_or(HardwareError::NoScratchSite)?;
        current.remove(&from);
        current.insert(scratch);
        moves.push((from, scratch));
        pending[0] = (scratch, to);
    }
    Ok(MovePlan { moves, total_cost: asg.total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trap_examples() {
        let p = trap_profile(&TrapArrayConfig::default()).unwrap();
        assert!((p.it_ratio - 1.17).abs() < 0.01 && (p.itz_ratio - 0.91).abs() < 0.01, "{p:?}");
        assert!((p.it_ratio - (p.is_ratio - p.ic_ratio)).abs() < 1e-15);
        assert!((p.f_vib_radial - 20e3).abs() < 0.1 * 20e3, "{}", p.f_vib_radial);
        assert!((p.f_vib_axial - 3.7e3).abs() < 0.1 * 3.7e3, "{}", p.f_vib_axial);
        let wide = TrapArrayConfig { w: 3e-6 / 40.0, ..TrapArrayConfig::default() };
        assert!((trap_profile(&wide).unwrap().itz_ratio - 4.0 / (2.0 * PI * 1f64.exp()).sqrt()).abs() < 1e-9);
        let flat = TrapArrayConfig { w: 3e-6, ..TrapArrayConfig::default() };
        assert_eq!(trap_profile(&flat), Err(HardwareError::AspectRatio(1.0)));
    }

    #[test]
    fn trap_scaling() {
        let base = TrapArrayConfig::default();
        let p = trap_profile(&base).unwrap();
        let q = trap_profile(&TrapArrayConfig { u_d: 2.0 * base.u_d, ..base }).unwrap();
        assert!((q.kappa_x / p.kappa_x - 2.0).abs() < 1e-12);
        assert!((q.f_vib_axial / p.f_vib_axial - 2f64.sqrt()).abs() < 1e-12);
        let h = trap_profile(&TrapArrayConfig { t_atom: 3.0 * base.t_atom, ..base }).unwrap();
        assert!((h.sigma_x.powi(2) / p.sigma_x.powi(2) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn aod_examples() {
        let m = aod_magnification(1.038e-6, 0.459e-6, 1.0, 1.0, 1, -1).unwrap();
        assert!((m.mag_ratio - 2.262).abs() < 1e-3 && m.waist_ratio == 1.0);
        assert_eq!(aod_magnification(1.0, 1.0, 2.2, 2.2, 1, -1).unwrap().mag_ratio, 1.0);
        assert!(aod_magnification(1.0, 1.0, 1.0, 1.0, 1, 1).is_err());
    }

    #[test]
    fn stark_examples() {
        let (omega, delta, wq) = (2.0 * PI * 200e6, 2.0 * PI * 10e9, 2.0 * PI * 9.19e9);
        assert_eq!(stark_phase(omega, delta, wq, 0.0).unwrap().theta, 0.0);
        let r = stark_phase(omega, delta, wq, 1e-6).unwrap();
        assert!((stark_phase(omega, delta, wq, 2e-6).unwrap().theta - 2.0 * r.theta).abs() < 1e-12);
        // pick the drive so the shift is 2 pi x 600 kHz
        let unit = stark_phase(1.0, delta, wq, 1.0).unwrap().rate;
        let omega600 = (2.0 * PI * 600e3 / unit).abs().sqrt();
        let s = stark_phase(omega600, delta, wq, 0.0).unwrap();
        assert!((PI / s.rate.abs() - 833e-9).abs() < 1e-9);
        assert!(stark_phase(omega, wq, wq, 1e-6).is_err());
    }

    #[test]
    fn hungarian_examples() {
        let a = hungarian(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(a.rows, vec![1, 0]);
        assert_eq!(a.total, 4.0);
        let d = hungarian(&[vec![0.0, 5.0, 5.0], vec![5.0, 0.0, 5.0], vec![5.0, 5.0, 0.0]]).unwrap();
        assert_eq!(d.rows, vec![0, 1, 2]);
        let rect = hungarian(&[vec![3.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(rect.rows, vec![1]);
        assert!(hungarian(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn rearrangement_examples() {
        let s = |r, c| SiteCoord::new(r, c);
        let mut occ = ArrayOccupancy {
            rows: 7,
            cols: 7,
            occupied: [s(0, 0), s(1, 1)].into(),
            targets: [s(0, 0), s(1, 1)].into(),
        };
        assert!(plan_rearrangement(&occ).unwrap().moves.is_empty());
        occ.occupied = [s(5, 5)].into();
        occ.targets = [s(2, 3)].into();
        let p = plan_rearrangement(&occ).unwrap();
        assert_eq!(p.moves, vec![(s(5, 5), s(2, 3))]);
        assert_eq!(p.total_cost, 13.0);
        // chain: the atom on the first target must move on first
        occ.occupied = [s(0, 0), s(0, 1)].into();
        occ.targets = [s(0, 1), s(0, 2)].into();
        let p = plan_rearrangement(&occ).unwrap();
        let done = p.execute(&occ.occupied).unwrap();
        assert!(occ.targets.is_subset(&done));
        occ.targets = [s(0, 1), s(0, 2), s(0, 3)].into();
        assert!(plan_rearrangement(&occ).is_err());
    }
}
