//! Reference implementations shared by the integration tests. Everything here
//! is built from textbook gate matrices and brute force, without touching the
//! simulator or compiler internals.
#![allow(dead_code)]

use std::f64::consts::PI;

use atomtwin::compiler::AbstractGate;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Embeds a gate on `qubits` (first listed = most significant sub-index)
/// into n qubits, qubit 0 being the leftmost label bit.
pub fn embed(g: &CMat, qubits: &[usize], n: usize) -> CMat {
    let dim = 1usize << n;
    let sub = |i: usize| qubits.iter().fold(0, |acc, &q| acc << 1 | (i >> (n - 1 - q) & 1));
    let mask: usize = qubits.iter().map(|&q| 1usize << (n - 1 - q)).sum();
    DMatrix::from_fn(dim, dim, |i, j| if i & !mask == j & !mask { g[(sub(i), sub(j))] } else { c(0.0, 0.0) })
}

pub fn rot(phi: f64, theta: f64) -> CMat {
    let (co, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -s) * Complex64::from_polar(1.0, -phi), c(0.0, -s) * Complex64::from_polar(1.0, phi), c(co, 0.0)])
}

pub fn gate_matrix(g: &AbstractGate) -> (CMat, Vec<usize>) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    match g {
        AbstractGate::H(q) => (DMatrix::from_row_slice(2, 2, &[c(r, 0.0), c(r, 0.0), c(r, 0.0), c(-r, 0.0)]), vec![*q]),
        AbstractGate::X(q) => (DMatrix::from_row_slice(2, 2, &[z, o, o, z]), vec![*q]),
        AbstractGate::Rz(q, t) => {
            (DMatrix::from_row_slice(2, 2, &[Complex64::from_polar(1.0, -t / 2.0), z, z, Complex64::from_polar(1.0, t / 2.0)]), vec![*q])
        }
        AbstractGate::Rphi { q, phi, theta } => (rot(*phi, *theta), vec![*q]),
        AbstractGate::Cnot { control, target } => (
            DMatrix::from_row_slice(4, 4, &[o, z, z, z, z, o, z, z, z, z, z, o, z, z, o, z]),
            vec![*control, *target],
        ),
        AbstractGate::Cz(a, b) => (DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![o, o, o, -o])), vec![*a, *b]),
        AbstractGate::Zz { a, b, gamma } => {
            let p = Complex64::from_polar(1.0, -gamma / 2.0);
            let m = Complex64::from_polar(1.0, gamma / 2.0);
            (DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![p, m, m, p])), vec![*a, *b])
        }
        AbstractGate::QftInverse(reg) => (iqft(reg.len()), reg.clone()),
    }
}

/// Inverse QFT without the final swaps: the register's first qubit carries
/// the least significant input bit and the most significant output bit.
pub fn iqft(m: usize) -> CMat {
    let dim = 1usize << m;
    let rev = |y: usize| (0..m).fold(0, |acc, b| acc << 1 | (y >> b & 1));
    DMatrix::from_fn(dim, dim, |x, y| Complex64::from_polar(1.0 / (dim as f64).sqrt(), -2.0 * PI * (x * rev(y)) as f64 / dim as f64))
}

pub fn reference_unitary(program: &[AbstractGate], n: usize) -> CMat {
    let mut u = CMat::identity(1 << n, 1 << n);
    for g in program {
        let (m, q) = gate_matrix(g);
        u = embed(&m, &q, n) * u;
    }
    u
}

/// Frobenius distance after removing the best global phase.
pub fn phase_distance(u: &CMat, v: &CMat) -> f64 {
    let tr: Complex64 = (v.adjoint() * u).trace();
    let ph = if tr.norm() > 0.0 { tr / tr.norm() } else { c(1.0, 0.0) };
    (u - v * ph).norm()
}

pub fn random_program<R: Rng>(rng: &mut R, n: usize, len: usize) -> Vec<AbstractGate> {
    let angle = |rng: &mut R| rng.random_range(-2.0 * PI..2.0 * PI);
    let pair = |rng: &mut R| {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        (a, b)
    };
    (0..len)
        .map(|_| {
            let q = rng.random_range(0..n);
            match rng.random_range(0..if n > 1 { 8 } else { 4 }) {
                0 => AbstractGate::H(q),
                1 => AbstractGate::X(q),
                2 => AbstractGate::Rz(q, angle(rng)),
                3 => AbstractGate::Rphi { q, phi: angle(rng), theta: angle(rng) },
                4 => {
                    let (control, target) = pair(rng);
                    AbstractGate::Cnot { control, target }
                }
                5 => {
                    let (a, b) = pair(rng);
                    AbstractGate::Cz(a, b)
                }
                6 => {
                    let (a, b) = pair(rng);
                    AbstractGate::Zz { a, b, gamma: angle(rng) }
                }
                _ => {
                    let (a, b) = pair(rng);
                    AbstractGate::QftInverse(vec![a, b])
                }
            }
        })
        .collect()
}

/// Minimum assignment cost over all permutations (square matrices).
pub fn brute_assignment(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], col: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if col == cost[0].len() {
            *best = acc;
            return;
        }
        for r in 0..cost.len() {
            if !used[r] {
                used[r] = true;
                go(cost, col + 1, used, acc + cost[r][col], best);
                used[r] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

/// Largest cut over all 2^n partitions.
pub fn brute_maxcut(n: usize, edges: &[(usize, usize)]) -> usize {
    (0..1usize << n).map(|m| edges.iter().filter(|&&(a, b)| (m >> a & 1) != (m >> b & 1)).count()).max().unwrap_or(0)
}

/// QAOA expected cut ratio from dense matrices; angles in half turns.
pub fn qaoa_reference(n: usize, edges: &[(usize, usize)], betas: &[f64], gammas: &[f64]) -> f64 {
    let mut prog: Vec<AbstractGate> = (0..n).map(AbstractGate::H).collect();
    for (b, g) in betas.iter().zip(gammas) {
        prog.extend(edges.iter().map(|&(a, bb)| AbstractGate::Zz { a, b: bb, gamma: PI * g }));
        prog.extend((0..n).map(|q| AbstractGate::Rphi { q, phi: 0.0, theta: PI * b }));
    }
    let u = reference_unitary(&prog, n);
    let s_max = brute_maxcut(n, edges) as f64;
    (0..1usize << n)
        .map(|i| {
            let bits: Vec<usize> = (0..n).map(|q| i >> (n - 1 - q) & 1).collect();
            let cut = edges.iter().filter(|&&(a, b)| bits[a] != bits[b]).count() as f64;
            u[(i, 0)].norm_sqr() * cut
        })
        .sum::<f64>()
        / s_max
}
