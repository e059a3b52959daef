use crslab_core::orders::draw_order;
use crslab_core::schemes::couple_with;
use crslab_core::{run_scheme, validate, ArrivalModel, CoinStream, DrawnOrder, Instance, Realization, SchemeSpec};
use proptest::prelude::*;

/// Random feasible instance: raw weights scaled so every vertex degree is at most `cap`.
fn instance() -> impl Strategy<Value = Instance> {
    (3usize..12, 1usize..30).prop_flat_map(|(n, m)| {
        prop::collection::vec((0..n, 0..n, 0.01f64..1.0), m).prop_map(move |raw| {
            let mut seen = std::collections::HashSet::new();
            let pairs: Vec<(usize, usize, f64)> =
                raw.into_iter().filter(|&(u, v, _)| u != v && seen.insert((u.min(v), u.max(v)))).collect();
            let mut deg = vec![0.0; n];
            for &(u, v, w) in &pairs {
                deg[u] += w;
                deg[v] += w;
            }
            let top = deg.iter().cloned().fold(0.0, f64::max).max(1.0);
            let edges: Vec<_> = pairs.iter().map(|&(u, v, w)| (u, v, 0.9 * w / top)).collect();
            Instance::new("prop", n, &edges)
        })
    })
    .prop_filter("needs an edge", |i| !i.edges.is_empty())
}

fn schemes() -> impl Strategy<Value = SchemeSpec> {
    prop_oneof![
        Just(SchemeSpec::Greedy),
        Just(SchemeSpec::tree_ocrs()),
        Just(SchemeSpec::VanishingReduction { epsilon: None, log_inv_epsilon: Some(1.05) }),
    ]
}

fn models() -> impl Strategy<Value = ArrivalModel> {
    prop_oneof![Just(ArrivalModel::UniformTimes), Just(ArrivalModel::LexSeeds)]
}

fn prefix(inst: &Instance, cut: usize) -> Instance {
    let edges: Vec<_> = inst.edges[..cut].iter().map(|e| (e.u, e.v, e.x)).collect();
    Instance::new("prefix", inst.vertex_count, &edges)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn round_trip(inst in instance()) {
        prop_assert!(validate(&inst).ok);
        let text = inst.to_json();
        let back = Instance::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn drawn_orders_are_permutations(inst in instance(), model in models(), seed in any::<u64>()) {
        let o = draw_order(&model, &inst, &CoinStream::new(seed, 0)).unwrap();
        let mut p = o.permutation.clone();
        p.sort_unstable();
        prop_assert_eq!(p, (0..inst.edges.len()).collect::<Vec<_>>());
        for w in o.permutation.windows(2) {
            prop_assert!(o.keys[w[0]].cmp_with(w[0], &o.keys[w[1]], w[1]).is_lt());
        }
    }

    #[test]
    fn outputs_are_matchings(inst in instance(), spec in schemes(), model in models(), seed in any::<u64>()) {
        let (order, real) = Realization::draw(&inst, &model, seed, 0).unwrap();
        let r = run_scheme(&spec, &inst, &order, &real).unwrap();
        prop_assert!(r.is_matching(&inst));
        for &e in &r.selected {
            prop_assert!(real.states[e]);
        }
        for (e, out) in r.per_edge.iter().enumerate() {
            prop_assert_eq!(out.was_active, real.states[e]);
            prop_assert_eq!(out.arrival_rank, order.ranks()[e]);
        }
    }

    /// A decision depends only on what arrived before it.
    #[test]
    fn prefix_consistency(inst in instance(), spec in schemes(), seed in any::<u64>(), frac in 0.0f64..1.0) {
        let m = inst.edges.len();
        let cut = ((frac * m as f64) as usize).clamp(1, m);
        let real = Realization::sample(&inst, CoinStream::new(seed, 1));
        let full = run_scheme(&spec, &inst, &DrawnOrder::from_permutation(m, (0..m).collect()).unwrap(), &real).unwrap();
        let pre = prefix(&inst, cut);
        let pr = Realization { states: real.states[..cut].to_vec(), coins: real.coins };
        let part = run_scheme(&spec, &pre, &DrawnOrder::from_permutation(cut, (0..cut).collect()).unwrap(), &pr).unwrap();
        prop_assert_eq!(&part.per_edge[..], &full.per_edge[..cut]);
    }

    /// Flipping the state of a not-yet-arrived edge never changes earlier decisions.
    #[test]
    fn strong_online_replay(inst in instance(), spec in schemes(), seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let m = inst.edges.len();
        let order = DrawnOrder::from_permutation(m, (0..m).collect()).unwrap();
        let real = Realization::sample(&inst, CoinStream::new(seed, 2));
        let k = pick.index(m);
        let mut flipped = real.clone();
        flipped.states[k] = !flipped.states[k];
        let a = run_scheme(&spec, &inst, &order, &real).unwrap();
        let b = run_scheme(&spec, &inst, &order, &flipped).unwrap();
        prop_assert_eq!(&a.per_edge[..k], &b.per_edge[..k]);
    }

    #[test]
    fn coupling_dominates(x in 0.01f64..=1.0, y in 0.0f64..=1.0, z in 0.0f64..=1.0, state: bool, thin in 0.0f64..1.0, split in 0.0f64..1.0) {
        match couple_with(x, y, z, state, thin, split) {
            Ok((a, b)) => prop_assert!(!(a && b) || state),
            Err(_) => prop_assert!(x < y * z),
        }
    }
}
