//! Graphs with fractional edge values and their JSON representation.

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack allowed on every vertex constraint.
pub const DEGREE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub u: usize,
    pub v: usize,
    pub x: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub name: String,
    pub vertex_count: usize,
    pub edges: Vec<Edge>,
    pub metadata: BTreeMap<String, String>,
}

impl Instance {
    /// Build from endpoint/value triples; ids follow list position.
    pub fn new(name: impl Into<String>, vertex_count: usize, edges: &[(usize, usize, f64)]) -> Self {
        Instance {
            name: name.into(),
            vertex_count,
            edges: edges
                .iter()
                .enumerate()
                .map(|(id, &(u, v, x))| Edge { id, u, v, x })
                .collect(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn max_x(&self) -> f64 {
        self.edges.iter().map(|e| e.x).fold(0.0, f64::max)
    }

    pub fn xs(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.x).collect()
    }

    /// Fractional degree of every vertex, summed in edge-id order.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.vertex_count];
        for e in &self.edges {
            if e.u < self.vertex_count && e.v < self.vertex_count {
                d[e.u] += e.x;
                d[e.v] += e.x;
            }
        }
        d
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn meta_usize(&self, key: &str) -> Option<usize> {
        self.metadata.get(key).and_then(|s| s.parse().ok())
    }

    pub fn incidence(&self) -> Incidence {
        Incidence::new(self)
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            name: self.name.clone(),
            vertex_count: self.vertex_count,
            edges: self.edges.iter().map(|e| EdgeFile { u: e.u, v: e.v, x: e.x }).collect(),
            metadata: self.metadata.clone(),
        };
        let mut out = to_json_17g(&file);
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let triples: Vec<_> = file.edges.iter().map(|e| (e.u, e.v, e.x)).collect();
        let mut inst = Instance::new(file.name, file.vertex_count, &triples);
        inst.metadata = file.metadata;
        Ok(inst)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    u: usize,
    v: usize,
    x: f64,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    name: String,
    vertex_count: usize,
    edges: Vec<EdgeFile>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

/// Compressed incident-edge lists.
#[derive(Clone, Debug)]
pub struct Incidence {
    offsets: Vec<usize>,
    edges: Vec<usize>,
}

impl Incidence {
    pub fn new(inst: &Instance) -> Self {
        let n = inst.vertex_count;
        let mut counts = vec![0usize; n + 1];
        for e in &inst.edges {
            counts[e.u + 1] += 1;
            counts[e.v + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut edges = vec![0; counts[n]];
        for e in &inst.edges {
            edges[fill[e.u]] = e.id;
            fill[e.u] += 1;
            edges[fill[e.v]] = e.id;
            fill[e.v] += 1;
        }
        Incidence { offsets: counts, edges }
    }

    pub fn of(&self, v: usize) -> &[usize] {
        &self.edges[self.offsets[v]..self.offsets[v + 1]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    IdMismatch { position: usize, id: usize },
    VertexOutOfRange { edge: usize },
    SelfLoop { edge: usize },
    ParallelEdge { edge: usize, first: usize },
    ValueOutOfRange { edge: usize, x: f64 },
    DegreeExceeded { vertex: usize, degree: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub one_regular: bool,
    pub violations: Vec<Violation>,
}

/// Check every structural and fractional-matching invariant. Never fails.
pub fn validate(inst: &Instance) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::with_capacity(inst.edges.len());
    for (pos, e) in inst.edges.iter().enumerate() {
        if e.id != pos {
            violations.push(Violation::IdMismatch { position: pos, id: e.id });
        }
        if e.u >= inst.vertex_count || e.v >= inst.vertex_count {
            violations.push(Violation::VertexOutOfRange { edge: pos });
            continue;
        }
        if e.u == e.v {
            violations.push(Violation::SelfLoop { edge: pos });
        }
        if !(e.x > 0.0 && e.x <= 1.0) {
            violations.push(Violation::ValueOutOfRange { edge: pos, x: e.x });
        }
        let key = (e.u.min(e.v), e.u.max(e.v));
        if let Some(&first) = seen.get(&key) {
            violations.push(Violation::ParallelEdge { edge: pos, first });
        } else {
            seen.insert(key, pos);
        }
    }
    let deg = inst.degrees();
    for (v, &d) in deg.iter().enumerate() {
        if d > 1.0 + DEGREE_TOL {
            violations.push(Violation::DegreeExceeded { vertex: v, degree: d });
        }
    }
    let one_regular = !deg.is_empty() && deg.iter().all(|d| (d - 1.0).abs() <= DEGREE_TOL);
    ValidationReport { ok: violations.is_empty(), one_regular, violations }
}

/// Error unless `order` lists every edge id exactly once.
pub fn check_permutation(m: usize, order: &[usize]) -> Result<()> {
    if order.len() != m {
        return Err(Error::invalid(format!("order has {} entries for {} edges", order.len(), m)));
    }
    let mut seen = vec![false; m];
    for &e in order {
        if e >= m || seen[e] {
            return Err(Error::invalid(format!("order is not a permutation (edge {e})")));
        }
        seen[e] = true;
    }
    Ok(())
}

/// For each edge e=(u,v), the pair (x_u(e), x_v(e)) of endpoint fractional
/// degrees over edges arriving strictly before e. Indexed by edge id.
pub fn fractional_degree_prefix(inst: &Instance, order: &[usize]) -> Result<Vec<(f64, f64)>> {
    check_permutation(inst.edges.len(), order)?;
    let mut deg = vec![0.0f64; inst.vertex_count];
    let mut out = vec![(0.0, 0.0); inst.edges.len()];
    for &id in order {
        let e = &inst.edges[id];
        out[id] = (deg[e.u], deg[e.v]);
        deg[e.u] += e.x;
        deg[e.v] += e.x;
    }
    Ok(out)
}

/// JSON writer whose floats follow C's `%.17g`.
pub struct G17;

impl serde_json::ser::Formatter for G17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_g17(value).as_bytes())
    }
}

pub fn to_json_17g<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("utf-8 output")
}

/// `%.17g` formatting: 17 significant digits, trailing zeros stripped.
pub fn format_g17(v: f64) -> String {
    if !v.is_finite() {
        return "null".into();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
