mod common;

use crslab_core::generators::{complete_bipartite, path, star};
use crslab_core::instance::fractional_degree_prefix;
use crslab_core::{validate, Instance, Violation};

#[test]
fn single_edge_ok_not_regular() {
    let r = validate(&Instance::new("e", 2, &[(0, 1, 0.3)]));
    assert!(r.ok && !r.one_regular);
}

#[test]
fn heavy_triangle_flags_every_vertex() {
    let t = Instance::new("tri", 3, &[(0, 1, 0.6), (1, 2, 0.6), (0, 2, 0.6)]);
    let r = validate(&t);
    assert!(!r.ok);
    let mut vs: Vec<usize> = r
        .violations
        .iter()
        .filter_map(|v| match v {
            Violation::DegreeExceeded { vertex, degree } => {
                assert!((degree - 1.2).abs() < 1e-12);
                Some(*vertex)
            }
            _ => None,
        })
        .collect();
    vs.sort_unstable();
    assert_eq!(vs, vec![0, 1, 2]);
}

#[test]
fn bipartite_is_one_regular() {
    for n in [1, 3, 10] {
        let r = validate(&complete_bipartite(n).unwrap());
        assert!(r.ok && r.one_regular);
    }
}

#[test]
fn structural_violations() {
    let loops = Instance::new("l", 2, &[(1, 1, 0.2)]);
    assert!(validate(&loops).violations.contains(&Violation::SelfLoop { edge: 0 }));
    let par = Instance::new("p", 2, &[(0, 1, 0.2), (1, 0, 0.2)]);
    assert!(validate(&par).violations.contains(&Violation::ParallelEdge { edge: 1, first: 0 }));
    let far = Instance::new("f", 2, &[(0, 5, 0.2)]);
    assert!(validate(&far).violations.contains(&Violation::VertexOutOfRange { edge: 0 }));
    let zero = Instance::new("z", 2, &[(0, 1, 0.0)]);
    assert!(matches!(validate(&zero).violations[0], Violation::ValueOutOfRange { .. }));
}

#[test]
fn prefix_examples() {
    let s = star(3, 0.2).unwrap();
    let p = fractional_degree_prefix(&s, &[0, 1, 2]).unwrap();
    assert_eq!(p[0], (0.0, 0.0));
    assert!((p[2].0 - 0.4).abs() < 1e-15);
    let ab = path(2, 0.5).unwrap();
    let p = fractional_degree_prefix(&ab, &[0, 1]).unwrap();
    assert_eq!(p[1].0, 0.5);
    assert!(fractional_degree_prefix(&ab, &[0, 0]).is_err());
    assert!(fractional_degree_prefix(&ab, &[0]).is_err());
}

#[test]
fn json_round_trip_is_byte_identical() {
    let mut r = common::rng(1);
    for _ in 0..20 {
        let inst = common::random_instance(12, 20, 1.0, &mut r).with_meta("family", "random");
        let text = inst.to_json();
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json(), text);
    }
}

#[test]
fn json_layout() {
    let inst = Instance::new("e", 2, &[(0, 1, 0.1)]);
    let text = inst.to_json();
    assert!(text.ends_with('\n'));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["edges"][0]["u"], 0);
    assert_eq!(v["vertex_count"], 2);
    assert!(text.contains("0.10000000000000001"), "{text}");
}

#[test]
fn file_io() {
    let dir = std::env::temp_dir().join(format!("crslab-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("i.json");
    let inst = star(4, 0.25).unwrap();
    inst.write(&p).unwrap();
    assert_eq!(Instance::read(&p).unwrap(), inst);
    assert!(Instance::read(&dir.join("missing.json")).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}
