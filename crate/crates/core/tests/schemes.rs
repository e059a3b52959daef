mod common;

use crslab_core::analysis::{estimate_selection, exact_oracle, Mode};
use crslab_core::constants::ALPHA;
use crslab_core::generators::{cycle, path, star, tree_hard};
use crslab_core::orders::phase_based_tree;
use crslab_core::realization::Realization;
use crslab_core::schemes::{
    couple_two_round, couple_with, fractional_matching_with_step, make_exactly_c, run_fractional_matching, run_greedy,
    run_scheme, run_tree_ocrs, run_vanishing_reduction, ReductionParams,
};
use crslab_core::{validate, ArrivalModel, CoinStream, DrawnOrder, Error, Instance, SchemeSpec};
use rand::Rng;

fn canon(m: usize) -> DrawnOrder {
    DrawnOrder::from_permutation(m, (0..m).collect()).unwrap()
}

fn world(states: Vec<bool>, seed: u64) -> Realization {
    Realization { states, coins: CoinStream::new(seed, 0) }
}

#[test]
fn greedy_examples() {
    let e = Instance::new("e", 2, &[(0, 1, 0.4)]);
    assert_eq!(run_greedy(&e, &canon(1), &world(vec![true], 0)).unwrap().selected, vec![0]);
    let p = path(2, 0.5).unwrap();
    let r = run_greedy(&p, &canon(2), &world(vec![true, true], 0)).unwrap();
    assert_eq!(r.selected, vec![0]);
    assert!(r.per_edge[1].was_active && !r.per_edge[1].selected);
    assert_eq!(r.per_edge[1].arrival_rank, 1);
}

#[test]
fn greedy_ignores_scheme_coins() {
    let mut rng = common::rng(11);
    for k in 0..20u64 {
        let inst = common::random_instance(15, 30, 1.0, &mut rng);
        let m = inst.edges.len();
        let states: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
        let order = DrawnOrder::from_permutation(m, common::shuffled(m, &mut rng)).unwrap();
        let a = run_greedy(&inst, &order, &world(states.clone(), k)).unwrap();
        let b = run_greedy(&inst, &order, &world(states, k + 1000)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn outputs_are_matchings_of_active_edges() {
    let mut rng = common::rng(12);
    for k in 0..20u64 {
        let inst = common::random_instance(30, 80, 0.1, &mut rng);
        let m = inst.edges.len();
        let real = Realization::sample(&inst, CoinStream::new(12, k));
        let order = DrawnOrder::from_permutation(m, common::shuffled(m, &mut rng)).unwrap();
        for r in [
            run_greedy(&inst, &order, &real).unwrap(),
            run_tree_ocrs(&inst, &order, &real).unwrap(),
            run_vanishing_reduction(&inst, &order, &real, None).unwrap(),
        ] {
            assert!(r.is_matching(&inst));
            assert!(r.selected.iter().all(|&e| real.states[e] && r.per_edge[e].was_active));
        }
    }
}

#[test]
fn tree_ocrs_examples() {
    let e = Instance::new("e", 2, &[(0, 1, 0.7)]);
    let v = exact_oracle(&SchemeSpec::tree_ocrs(), &e, &ArrivalModel::canonical(1), 0).unwrap();
    assert!((v - ALPHA).abs() < 1e-15);
    // K_{1,2}: (1 - alpha/2) * alpha / (1 - alpha/2) = alpha
    let s = star(2, 0.5).unwrap();
    let v = exact_oracle(&SchemeSpec::tree_ocrs(), &s, &ArrivalModel::Fixed(vec![0, 1]), 1).unwrap();
    assert!((v - ALPHA).abs() < 1e-15);
}

#[test]
fn tree_ocrs_exact_on_small_trees() {
    let mut rng = common::rng(13);
    for k in 0..15u64 {
        let t = crslab_core::generators::random_tree(rng.gen_range(2..=7), k).unwrap();
        let order = ArrivalModel::Fixed(common::shuffled(t.edges.len(), &mut rng));
        for e in 0..t.edges.len() {
            let v = exact_oracle(&SchemeSpec::tree_ocrs(), &t, &order, e).unwrap();
            assert!((v - ALPHA).abs() <= 1e-12, "tree {k} edge {e}: {v}");
        }
    }
}

#[test]
fn tree_ocrs_rejects_large_constant() {
    let err = run_scheme(&SchemeSpec::TreeOcrs { c: 0.5 }, &star(1, 0.1).unwrap(), &canon(1), &world(vec![true], 0)).unwrap_err();
    assert!(matches!(err, Error::Invalid(_)), "{err}");
}

#[test]
fn cycle_respects_alpha_ell() {
    let c = cycle(31, 0.5).unwrap();
    let r = estimate_selection(&SchemeSpec::tree_ocrs(), &c, &ArrivalModel::canonical(31), 200_000, Mode::Forced, 3).unwrap();
    let a15 = crslab_core::constants::alpha_ell(15).unwrap().value;
    for e in &r.per_edge {
        let sigma = (a15 * (1.0 - a15) / 200_000.0).sqrt();
        assert!(e.estimate >= a15 - 3.0 * sigma, "edge {} {}", e.edge_id, e.estimate);
    }
}

#[test]
fn coupling_examples() {
    let coins = CoinStream::new(1, 1);
    for e in 0..1000 {
        let (y, z) = couple_two_round(0.3, 0.6, 0.4, false, &coins, e).unwrap();
        assert!(!(y && z));
    }
    assert_eq!(couple_with(1.0, 1.0, 1.0, true, 0.3, 0.7).unwrap(), (true, true));
    assert!(matches!(couple_two_round(0.1, 0.6, 0.5, true, &coins, 0), Err(Error::NumericLimit(_))));
    assert!(couple_two_round(1.5, 0.6, 0.5, true, &coins, 0).is_err());
}

#[test]
fn coupling_marginals() {
    let (x, y, z) = (0.2, 0.5, 0.4);
    let n = 1_000_000u64;
    let (mut cy, mut cz, mut cyz) = (0u64, 0u64, 0u64);
    for t in 0..n {
        let coins = CoinStream::new(77, t);
        let state = coins.lane(crslab_core::Purpose::State).uniform(0) < x;
        let (a, b) = couple_two_round(x, y, z, state, &coins, 0).unwrap();
        assert!(!(a && b) || state);
        cy += a as u64;
        cz += b as u64;
        cyz += (a && b) as u64;
    }
    let nf = n as f64;
    let (py, pz, pyz) = (cy as f64 / nf, cz as f64 / nf, cyz as f64 / nf);
    assert!((py - y).abs() <= 3.0 * (y * (1.0 - y) / nf).sqrt());
    assert!((pz - z).abs() <= 3.0 * (z * (1.0 - z) / nf).sqrt());
    assert!((pyz - y * z).abs() <= 4.0 * (y * z * (1.0 - y * z) / nf).sqrt());
}

#[test]
fn fractional_matching_examples() {
    let s = star(12, 0.05).unwrap();
    let none = run_fractional_matching(&s, &canon(12), &[false; 12], (-10.0f64).exp()).unwrap();
    assert!(none.iter().all(|&z| z == 0.0));
    let e = Instance::new("e", 2, &[(0, 1, 0.01)]);
    let one = run_fractional_matching(&e, &canon(1), &[true], (-10.0f64).exp()).unwrap();
    assert!((one[0] - 0.1).abs() < 1e-12);
    let all = run_fractional_matching(&s, &canon(12), &[true; 12], (-10.0f64).exp()).unwrap();
    let up: Vec<usize> = (0..12).filter(|&i| all[i] > 0.0).collect();
    assert_eq!(up, (0..10).collect::<Vec<_>>());
    assert!(run_fractional_matching(&s, &canon(12), &[true; 12], 0.5).is_err());
}

#[test]
fn fractional_output_validates() {
    let mut rng = common::rng(14);
    for _ in 0..30 {
        let inst = common::random_instance(20, 60, 1.0, &mut rng);
        let m = inst.edges.len();
        let ys: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.8)).collect();
        let order = DrawnOrder::from_permutation(m, common::shuffled(m, &mut rng)).unwrap();
        let zp = fractional_matching_with_step(&inst, &order, &ys, 1.0 / rng.gen_range(1.5..8.0)).unwrap();
        let support: Vec<(usize, usize, f64)> =
            inst.edges.iter().filter(|e| zp[e.id] > 0.0).map(|e| (e.u, e.v, zp[e.id])).collect();
        assert!(validate(&Instance::new("z", inst.vertex_count, &support)).ok);
        assert!((0..m).all(|i| zp[i] == 0.0 || ys[i]));
    }
}

#[test]
fn reduction_precondition() {
    let p = path(2, 0.5).unwrap();
    let err = run_vanishing_reduction(&p, &canon(2), &world(vec![true, true], 0), None).unwrap_err();
    assert!(err.to_string().contains("eps"), "{err}");
    assert!(ReductionParams::new(&p, Some(0.5)).is_err());
    let small = star(3, 0.001).unwrap();
    let params = ReductionParams::new(&small, None).unwrap();
    assert!(params.y(0.001) <= 1.0);
    assert_eq!(params.ell, (1000f64.ln().ln()).round() as u32);
}

#[test]
fn prefix_replay_is_bitwise() {
    let mut rng = common::rng(15);
    for k in 0..40u64 {
        let m = rng.gen_range(2..=200);
        let inst = common::random_instance(50, m, 0.1, &mut rng);
        let m = inst.edges.len();
        let real = Realization::sample(&inst, CoinStream::new(15, k));
        for spec in [
            SchemeSpec::Greedy,
            SchemeSpec::tree_ocrs(),
            SchemeSpec::VanishingReduction { epsilon: None, log_inv_epsilon: Some(2.0) },
        ] {
            let full = run_scheme(&spec, &inst, &canon(m), &real).unwrap();
            for cut in [1, m / 2, m] {
                let cut = cut.max(1);
                let pre = Instance::new("pre", inst.vertex_count, &inst.edges[..cut].iter().map(|e| (e.u, e.v, e.x)).collect::<Vec<_>>());
                let pr = Realization { states: real.states[..cut].to_vec(), coins: real.coins };
                let part = run_scheme(&spec, &pre, &canon(cut), &pr).unwrap();
                assert_eq!(part.per_edge[..], full.per_edge[..cut]);
            }
        }
    }
}

#[test]
fn exactly_c_examples() {
    // Tree-OCRS is already exactly alpha on a tree
    let t = crslab_core::generators::random_tree(6, 3).unwrap();
    let model = ArrivalModel::canonical(t.edges.len());
    let wrapped = make_exactly_c(SchemeSpec::tree_ocrs(), &t, &model, ALPHA - 0.005, 200_000, 1).unwrap();
    let SchemeSpec::ExactlyC { drops, .. } = &wrapped else { panic!() };
    assert!(drops.values().all(|&d| d < 0.03), "{drops:?}");
    assert!(make_exactly_c(SchemeSpec::Greedy, &t, &model, 0.999, 20_000, 1).is_err());
}

#[test]
fn exactly_c_normalizes_greedy_on_tree_hard() {
    let inst = tree_hard(10).unwrap();
    let model = phase_based_tree(&inst, &[]).unwrap();
    let pilot = estimate_selection(&SchemeSpec::Greedy, &inst, &model, 1_000_000, Mode::Forced, 21).unwrap();
    let c = pilot.min_estimate;
    let spec = crslab_core::schemes::exactly_c_from_report(SchemeSpec::Greedy, &pilot, c).unwrap();
    let after = estimate_selection(&spec, &inst, &model, 1_000_000, Mode::Forced, 22).unwrap();
    for e in &after.per_edge {
        assert!((e.estimate - c).abs() <= 0.01, "edge {} {} vs {c}", e.edge_id, e.estimate);
    }
    let text = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<SchemeSpec>(&text).unwrap(), spec);
}
