mod common;

use std::collections::BTreeSet;

use atomtwin::compiler::{abstract_unitary, compile, parse_text, to_text, two_qubit_sites_ok, Layout};
use atomtwin::experiments::{maxcut_oracle, qaoa_expected_ratio, qaoa_run, Backend, GraphSpec};
use atomtwin::hardware::{hungarian, plan_rearrangement, ArrayOccupancy};
use atomtwin::qsim::{circuit_unitary, SiteCoord};
use common::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn row_layout(n: usize) -> Layout {
    Layout::new((0..n).map(|i| SiteCoord::new(3, 2 * i)).collect()).unwrap()
}

#[test]
fn compiled_programs_match_textbook_unitaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let n = 1 + case % 4;
        let len = rng.random_range(1..=12);
        let prog = random_program(&mut rng, n, len);
        let want = reference_unitary(&prog, n);
        let circuit = compile(&prog, &row_layout(n)).unwrap();
        assert!(two_qubit_sites_ok(&circuit));
        let got = circuit_unitary(&circuit).unwrap();
        let d = phase_distance(&got, &want);
        assert!(d < 1e-9, "case {case}: {d} for {prog:?}");
        assert!(phase_distance(&abstract_unitary(&prog, n).unwrap(), &want) < 1e-9);
    }
}

#[test]
fn text_form_roundtrips_compiled_circuits() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let prog = random_program(&mut rng, 3, 8);
        let c = compile(&prog, &row_layout(3)).unwrap();
        let back = parse_text(&to_text(&c)).unwrap();
        assert_eq!(back.sites(), c.sites());
        assert!(phase_distance(&circuit_unitary(&back).unwrap(), &circuit_unitary(&c).unwrap()) < 1e-9);
    }
}

#[test]
fn hungarian_matches_brute_force_7x7() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let cost: Vec<Vec<f64>> = (0..7).map(|_| (0..7).map(|_| rng.random_range(0.0..100.0)).collect()).collect();
        let a = hungarian(&cost).unwrap();
        let brute = brute_assignment(&cost);
        assert!((a.total - brute).abs() < 1e-9, "{} vs {brute}", a.total);
        let rows: BTreeSet<usize> = a.rows.iter().copied().collect();
        assert_eq!(rows.len(), 7);
        let sum: f64 = a.rows.iter().enumerate().map(|(c, &r)| cost[r][c]).sum();
        assert!((sum - a.total).abs() < 1e-9);
    }
}

#[test]
fn hungarian_integer_ties_and_rectangles() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        // small integer costs produce many ties
        let cost: Vec<Vec<f64>> = (0..6).map(|_| (0..6).map(|_| rng.random_range(0..4) as f64).collect()).collect();
        assert_eq!(hungarian(&cost).unwrap().total, brute_assignment(&cost));
    }
    for _ in 0..50 {
        // more rows than columns: brute force over row subsets via squaring with zero columns
        let cols = rng.random_range(1..=4);
        let cost: Vec<Vec<f64>> = (0..6).map(|_| (0..cols).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let padded: Vec<Vec<f64>> = cost.iter().map(|r| r.iter().copied().chain(std::iter::repeat_n(0.0, 6 - cols)).collect()).collect();
        assert!((hungarian(&cost).unwrap().total - brute_assignment(&padded)).abs() < 1e-9);
    }
}

#[test]
fn hungarian_recovers_planted_permutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let n = rng.random_range(1..=7);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        // zero on the planted entries, positive elsewhere
        let cost: Vec<Vec<f64>> =
            (0..n).map(|r| (0..n).map(|c| if perm[c] == r { 0.0 } else { rng.random_range(0.5..5.0) }).collect()).collect();
        let a = hungarian(&cost).unwrap();
        assert_eq!(a.rows, perm);
        assert_eq!(a.total, 0.0);
    }
}

#[test]
fn rearrangement_fills_targets_on_random_arrays() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let all: Vec<SiteCoord> = (0..7).flat_map(|r| (0..7).map(move |c| SiteCoord::new(r, c))).collect();
    for _ in 0..100 {
        let occupied: BTreeSet<SiteCoord> = all.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        let k = rng.random_range(0..=occupied.len().min(30));
        let targets: BTreeSet<SiteCoord> = all.choose_multiple(&mut rng, k).copied().collect();
        let occ = ArrayOccupancy { rows: 7, cols: 7, occupied: occupied.clone(), targets: targets.clone() };
        let plan = plan_rearrangement(&occ).unwrap();
        let done = plan.execute(&occupied).expect("legal move sequence");
        assert!(targets.is_subset(&done));
        assert_eq!(done.len(), occupied.len());
        // optimal assignment cost from an independent solve
        let src: Vec<SiteCoord> = occupied.iter().copied().collect();
        let tgt: Vec<SiteCoord> = targets.iter().copied().collect();
        if !tgt.is_empty() {
            let cost: Vec<Vec<f64>> = src.iter().map(|s| tgt.iter().map(|t| s.dist_sq(t)).collect()).collect();
            assert!((hungarian(&cost).unwrap().total - plan.total_cost).abs() < 1e-9);
        }
    }
}

#[test]
fn maxcut_and_qaoa_against_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let n = rng.random_range(2..=5);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(0.5) {
                    edges.push((a, b));
                }
            }
        }
        if edges.is_empty() {
            edges.push((0, 1));
        }
        let g = GraphSpec::new(n, edges.clone()).unwrap();
        assert_eq!(maxcut_oracle(&g).unwrap().s_max, brute_maxcut(n, &edges));
        let betas = [rng.random_range(0.0..2.0)];
        let gammas = [rng.random_range(0.0..2.0)];
        let want = qaoa_reference(n, &edges, &betas, &gammas);
        assert!((qaoa_expected_ratio(&g, &betas, &gammas) - want).abs() < 1e-9);
    }
    for (g, b, gm) in [(GraphSpec::t4(), vec![0.75], vec![0.696]), (GraphSpec::line3(), vec![1.25], vec![1.67])] {
        let run = qaoa_run(&g, &b, &gm, 4000, &Backend::ideal(), 3).unwrap();
        let want = qaoa_reference(g.n_vertices(), g.edges(), &b, &gm);
        assert!((run.ratio - want).abs() < 1e-9);
        assert!(run.cross_check_ok());
    }
}
