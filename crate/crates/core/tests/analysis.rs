mod common;

use std::collections::BTreeMap;

use crslab_core::analysis::{
    covariance_diagnostics, estimate_selection, estimate_selection_on, exact_oracle, find_low_variance_subset, wilson,
    AvailabilityStats, Mode,
};
use crslab_core::generators::{complete_bipartite, general_hard, path, random_tree, star, tree_hard};
use crslab_core::orders::{phase_based_general, phase_based_tree};
use crslab_core::{ArrivalModel, Error, Instance, SchemeSpec};
use rand::Rng;

#[test]
fn single_edge_is_always_selected() {
    let e = Instance::new("e", 2, &[(0, 1, 0.3)]);
    for mode in [Mode::Forced, Mode::Aggregate] {
        let r = estimate_selection(&SchemeSpec::Greedy, &e, &ArrivalModel::UniformTimes, 20_000, mode, 1).unwrap();
        let est = r.per_edge[0].estimate;
        if mode == Mode::Forced {
            assert_eq!(est, 1.0);
        } else {
            assert!((est - 1.0).abs() < 0.05, "{est}");
        }
    }
}

#[test]
fn path_of_two_under_uniform() {
    let p = path(2, 0.5).unwrap();
    let r = estimate_selection(&SchemeSpec::Greedy, &p, &ArrivalModel::UniformTimes, 100_000, Mode::Forced, 2).unwrap();
    for e in &r.per_edge {
        assert!((e.estimate - 0.75).abs() <= 4.0 * (0.75 * 0.25 / 1e5f64).sqrt());
        assert!(e.ci_low <= e.estimate && e.estimate <= e.ci_high);
    }
    assert_eq!(r.min_estimate, r.per_edge.iter().map(|e| e.estimate).fold(1.0, f64::min));
}

#[test]
fn complete_bipartite_min_near_half() {
    let k = complete_bipartite(100).unwrap();
    let targets: Vec<usize> = (0..20).map(|i| i * 499).collect();
    let r = estimate_selection_on(&SchemeSpec::Greedy, &k, &ArrivalModel::UniformTimes, 20_000, Mode::Forced, 3, &targets)
        .unwrap();
    assert_eq!(r.per_edge.len(), 20);
    assert!((r.min_estimate - 0.5).abs() <= 0.02, "{}", r.min_estimate);
}

#[test]
fn unknown_mode_and_zero_trials() {
    assert!(matches!("sideways".parse::<Mode>(), Err(Error::Invalid(_))));
    let e = star(2, 0.5).unwrap();
    assert!(estimate_selection(&SchemeSpec::Greedy, &e, &ArrivalModel::UniformTimes, 0, Mode::Forced, 0).is_err());
}

#[test]
fn forced_and_aggregate_agree() {
    let mut rng = common::rng(4);
    let inst = common::random_instance(8, 12, 1.0, &mut rng);
    let trials = 200_000;
    let f = estimate_selection(&SchemeSpec::tree_ocrs(), &inst, &ArrivalModel::UniformTimes, trials, Mode::Forced, 5).unwrap();
    let a = estimate_selection(&SchemeSpec::tree_ocrs(), &inst, &ArrivalModel::UniformTimes, trials, Mode::Aggregate, 6)
        .unwrap();
    for (x, y) in f.per_edge.iter().zip(&a.per_edge).filter(|(x, _)| x.x >= 0.2) {
        let sd_f = (x.estimate * (1.0 - x.estimate) / trials as f64).sqrt();
        // aggregate is a ratio with a Ber(x) numerator scaled by 1/x
        let sd_a = (y.estimate * (1.0 / x.x - y.estimate) / trials as f64).sqrt();
        assert!((x.estimate - y.estimate).abs() <= 4.0 * (sd_f * sd_f + sd_a * sd_a).sqrt(), "edge {}", x.edge_id);
    }
}

#[test]
fn same_seed_same_report() {
    let t = tree_hard(6).unwrap();
    let run = |seed| estimate_selection(&SchemeSpec::tree_ocrs(), &t, &ArrivalModel::LexSeeds, 5000, Mode::Forced, seed).unwrap();
    assert_eq!(run(9).to_json(), run(9).to_json());
    assert_ne!(run(9).to_json(), run(10).to_json());
}

#[test]
fn csv_columns() {
    let p = path(3, 0.5).unwrap();
    let r = estimate_selection(&SchemeSpec::Greedy, &p, &ArrivalModel::canonical(3), 1000, Mode::Forced, 7).unwrap();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "edge_id,u,v,x,mode,trials,estimate,ci_low,ci_high");
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("0,0,1,0.5,forced,1000,1,"));
}

#[test]
fn wilson_interval() {
    let i = wilson(0, 100);
    assert_eq!(i.low, 0.0);
    assert!(i.high > 0.0 && i.high < 0.05);
    let j = wilson(50, 100);
    assert!((j.low + j.high - 1.0).abs() < 1e-12);
}

#[test]
fn never_selecting_scheme_has_full_availability() {
    let t = tree_hard(8).unwrap();
    let model = phase_based_tree(&t, &[]).unwrap();
    let drops: BTreeMap<usize, f64> = (0..t.edges.len()).map(|e| (e, 1.0)).collect();
    let never = SchemeSpec::ExactlyC { inner: Box::new(SchemeSpec::Greedy), c: 1e-9, drops };
    let r = covariance_diagnostics(&never, &t, &model, 2000, 1, 50).unwrap();
    assert!(r.means.iter().all(|&m| m == 1.0));
    assert_eq!(r.var_sum, 0.0);
    assert_eq!(r.phase1_selection_rate, 0.0);
}

#[test]
fn covariance_matrix_is_symmetric() {
    let g = general_hard(12).unwrap();
    let model = phase_based_general(&g, 12).unwrap();
    let r = covariance_diagnostics(&SchemeSpec::Greedy, &g, &model, 5000, 2, 100).unwrap();
    let c = r.stats.covariance();
    for i in 0..12 {
        assert!(c[i][i] >= 0.0);
        for j in 0..12 {
            assert!((c[i][j] - c[j][i]).abs() < 1e-15);
        }
    }
    assert!(covariance_diagnostics(&SchemeSpec::Greedy, &g, &ArrivalModel::UniformTimes, 10, 2, 10).is_err());
    assert!(covariance_diagnostics(&SchemeSpec::Greedy, &path(3, 0.5).unwrap(), &model, 10, 2, 10).is_err());
}

#[test]
fn greedy_availability_on_tree_hard() {
    let t = tree_hard(50).unwrap();
    let model = phase_based_tree(&t, &[]).unwrap();
    let r = covariance_diagnostics(&SchemeSpec::Greedy, &t, &model, 20_000, 3, 200).unwrap();
    let se = (r.availability_se.powi(2) + r.phase1_selection_se.powi(2) * r.phase1_degree.powi(2)).sqrt();
    assert!((r.observed_availability - r.expected_availability).abs() <= 3.0 * se, "{r:?}");
    assert!(r.subset.within_bound);
}

#[test]
fn subset_search_on_synthetic_samples() {
    let mut rng = common::rng(5);
    let iid: Vec<Vec<bool>> = (0..4000).map(|_| (0..30).map(|_| rng.gen_bool(0.5)).collect()).collect();
    let stats = AvailabilityStats::from_samples(&iid).unwrap();
    let s = find_low_variance_subset(&stats, 10, 500, 1).unwrap();
    assert_eq!(s.members.len(), 10);
    assert!(s.members.iter().all(|&v| (1..=30).contains(&v)));
    // about 10 * 1/4 for independent fair coins
    assert!((s.variance - 2.5).abs() < 0.5, "{}", s.variance);
    let constant = vec![vec![true; 30]; 100];
    let c = find_low_variance_subset(&AvailabilityStats::from_samples(&constant).unwrap(), 5, 10, 1).unwrap();
    assert_eq!(c.variance, 0.0);
    assert!(c.within_bound_raw);
    assert!(find_low_variance_subset(&stats, 31, 10, 1).is_err());
    assert!(find_low_variance_subset(&stats, 3, 0, 1).is_err());
    assert!(AvailabilityStats::from_samples(&[vec![true, false], vec![true]]).is_err());
}

#[test]
fn greedy_tree_hard_meets_subset_bound() {
    let t = tree_hard(100).unwrap();
    let model = phase_based_tree(&t, &[]).unwrap();
    let r = covariance_diagnostics(&SchemeSpec::Greedy, &t, &model, 5000, 4, 500).unwrap();
    assert!(r.subset.within_bound, "{:?}", r.subset);
}

#[test]
fn oracle_matches_simulation() {
    let mut rng = common::rng(6);
    let trials = 40_000u64;
    let mut worst = 0.0f64;
    for k in 0..24u64 {
        let inst = if k % 3 == 2 {
            random_tree(rng.gen_range(3..=6), k).unwrap()
        } else {
            let m = rng.gen_range(2..=6);
            common::random_instance(5, m, 1.0, &mut rng)
        };
        let m = inst.edges.len();
        let scheme = if k % 2 == 0 { SchemeSpec::Greedy } else { SchemeSpec::tree_ocrs() };
        let model = match k % 4 {
            0 => ArrivalModel::Fixed(common::shuffled(m, &mut rng)),
            1 => ArrivalModel::UniformTimes,
            _ => ArrivalModel::LexSeeds,
        };
        let rep = estimate_selection(&scheme, &inst, &model, trials, Mode::Forced, 100 + k).unwrap();
        for e in &rep.per_edge {
            let exact = exact_oracle(&scheme, &inst, &model, e.edge_id).unwrap();
            let sigma = (exact * (1.0 - exact) / trials as f64).sqrt().max(1e-12);
            let z = (e.estimate - exact).abs() / sigma;
            worst = worst.max(z);
            assert!(z <= 4.5, "fixture {k} edge {}: mc {} exact {exact}", e.edge_id, e.estimate);
        }
    }
    assert!(worst > 0.0);
}
