//! Graph encoding of a search state for the learned child ranking.
//!
//! Nodes: unscheduled controllables, pending uncontrollables, one
//! intermediary per open disjunct, one intermediary per conjunct of a
//! multi-conjunct disjunct, and a WAIT node. Times are made relative to the
//! current time and scaled by the largest finite magnitude in the state.

use num_traits::Signed;
use serde_json::{json, Value};

use crate::model::{Conjunct, Dtnu, TpId};
use crate::ordering::Choice;
use crate::search::DtnuState;
use crate::time::{Rational, TimeValue};

pub const NODE_FEATURES: usize = 5;
pub const EDGE_FEATURES: usize = 26;
pub const DISTANCE_CLASSES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeType {
    Controllable = 0,
    Uncontrollable = 1,
    Disjunct = 2,
    Conjunct = 3,
    Wait = 4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeType {
    Constraint = 0,
    Membership = 1,
    Contingency = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphEdge {
    /// `i < j`; edges are undirected
    pub i: usize,
    pub j: usize,
    pub features: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphEncoding {
    pub node_features: Vec<Vec<f32>>,
    pub edges: Vec<GraphEdge>,
    /// graph node index of each d-OR child
    pub active: Vec<(usize, Choice)>,
}

impl GraphEncoding {
    pub fn node_count(&self) -> usize {
        self.node_features.len()
    }

    /// Dense symmetric 0/1 adjacency.
    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        let n = self.node_count();
        let mut adj = vec![vec![0u8; n]; n];
        for e in &self.edges {
            adj[e.i][e.j] = 1;
            adj[e.j][e.i] = 1;
        }
        adj
    }

    pub fn node_of(&self, choice: Choice) -> Option<usize> {
        self.active.iter().find(|(_, c)| *c == choice).map(|(n, _)| *n)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("value {0} is outside [0, 1]")]
    OutOfRange(String),
    #[error("state has no non-zero finite time value to normalize by")]
    DegenerateHorizon,
    #[error("bad graph record: {0}")]
    Record(String),
}

/// Bin of a normalized distance: `floor(10 x)`, with 1 itself in the last bin.
pub fn distance_class(x: f64) -> Result<usize, EncodeError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(EncodeError::OutOfRange(x.to_string()));
    }
    Ok(((x * DISTANCE_CLASSES as f64).floor() as usize).min(DISTANCE_CLASSES - 1))
}

/// Same bin computed exactly on a rational.
fn exact_class(x: Rational) -> usize {
    let scaled = (x * Rational::from_integer(DISTANCE_CLASSES as i128)).floor().to_integer();
    (scaled.max(0) as usize).min(DISTANCE_CLASSES - 1)
}

struct PendingEdge {
    i: usize,
    j: usize,
    kind: EdgeType,
    lb: TimeValue,
    ub: TimeValue,
}

fn edge_features(kind: EdgeType, lb: TimeValue, ub: TimeValue, d_max: Rational) -> Vec<f32> {
    let mut f = vec![0.0f32; EDGE_FEATURES];
    let mut unbounded = false;
    for (slot, v) in [lb, ub].into_iter().enumerate() {
        let class = match v {
            TimeValue::Finite(r) => exact_class(r.abs() / d_max),
            _ => {
                unbounded = true;
                DISTANCE_CLASSES - 1
            }
        };
        f[slot * DISTANCE_CLASSES + class] = 1.0;
        if v < TimeValue::ZERO {
            f[2 * DISTANCE_CLASSES + 3 + slot] = 1.0;
        }
    }
    f[2 * DISTANCE_CLASSES + kind as usize] = 1.0;
    if unbounded {
        f[EDGE_FEATURES - 1] = 1.0;
    }
    f
}

/// Encodes the state at a DTNU node about to expand its d-OR child.
pub fn to_graph(d: &Dtnu, n: &DtnuState) -> Result<GraphEncoding, EncodeError> {
    let t = n.time;
    let mut types: Vec<NodeType> = Vec::new();
    let mut index = vec![usize::MAX; d.len()];
    let mut active = Vec::new();
    for a in n.unscheduled(d) {
        index[a.index()] = types.len();
        active.push((types.len(), Choice::Schedule(a)));
        types.push(NodeType::Controllable);
    }
    for u in d.uncontrollables().filter(|u| !n.occurred.contains(u)) {
        index[u.index()] = types.len();
        types.push(NodeType::Uncontrollable);
    }
    let wait = usize::MAX; // patched once every node is placed
    let mut edges: Vec<PendingEdge> = Vec::new();
    let node = |tp: TpId| index[tp.index()];

    for disjunct in n.constraints.open() {
        let dn = types.len();
        types.push(NodeType::Disjunct);
        let multi = disjunct.conjuncts.len() > 1;
        for c in &disjunct.conjuncts {
            let anchor = if multi {
                let k = types.len();
                types.push(NodeType::Conjunct);
                edges.push(PendingEdge { i: k, j: dn, kind: EdgeType::Membership, lb: TimeValue::ZERO, ub: TimeValue::ZERO });
                k
            } else {
                dn
            };
            match *c {
                Conjunct::Distance { to, from, lb, ub } => {
                    edges.push(PendingEdge { i: node(to), j: anchor, kind: EdgeType::Constraint, lb, ub });
                    edges.push(PendingEdge { i: node(from), j: anchor, kind: EdgeType::Constraint, lb: -ub, ub: -lb });
                }
                Conjunct::Bounded { tp, lb, ub } => {
                    let (lb, ub) = (lb.shift(-t), ub.shift(-t));
                    edges.push(PendingEdge { i: node(tp), j: anchor, kind: EdgeType::Constraint, lb, ub });
                    edges.push(PendingEdge { i: anchor, j: wait, kind: EdgeType::Constraint, lb, ub });
                }
                Conjunct::True | Conjunct::False => {}
            }
        }
    }

    for link in d.contingencies() {
        if n.occurred.contains(&link.target) {
            continue;
        }
        let u = node(link.target);
        let (from, intervals): (usize, Vec<(TimeValue, TimeValue)>) = match n.activated.get(&link.target) {
            Some(windows) => (
                wait,
                windows
                    .iter()
                    .map(|iv| (iv.lb.max(TimeValue::Finite(t)).shift(-t), iv.ub.shift(-t)))
                    .collect(),
            ),
            None => (node(link.source), link.intervals.iter().map(|iv| (iv.lb, iv.ub)).collect()),
        };
        if let [(lb, ub)] = intervals.as_slice() {
            edges.push(PendingEdge { i: from, j: u, kind: EdgeType::Contingency, lb: *lb, ub: *ub });
        } else {
            for (lb, ub) in intervals {
                let k = types.len();
                types.push(NodeType::Conjunct);
                edges.push(PendingEdge { i: from, j: k, kind: EdgeType::Contingency, lb, ub });
                edges.push(PendingEdge { i: k, j: u, kind: EdgeType::Membership, lb: TimeValue::ZERO, ub: TimeValue::ZERO });
            }
        }
    }

    let wait_node = types.len();
    types.push(NodeType::Wait);
    active.push((wait_node, Choice::Wait));

    let d_max = edges
        .iter()
        .filter(|e| e.kind != EdgeType::Membership)
        .flat_map(|e| [e.lb, e.ub])
        .filter_map(|v| v.finite())
        .map(|r| r.abs())
        .max()
        .filter(|m| *m > Rational::from_integer(0))
        .ok_or(EncodeError::DegenerateHorizon)?;

    let node_features = types
        .iter()
        .map(|&ty| {
            let mut f = vec![0.0f32; NODE_FEATURES];
            f[ty as usize] = 1.0;
            f
        })
        .collect();
    let edges = edges
        .into_iter()
        .map(|e| {
            let (i, j) = (if e.i == wait { wait_node } else { e.i }, if e.j == wait { wait_node } else { e.j });
            GraphEdge { i: i.min(j), j: i.max(j), features: edge_features(e.kind, e.lb, e.ub, d_max) }
        })
        .collect();
    Ok(GraphEncoding { node_features, edges, active })
}

// ---------------------------------------------------------------- records

fn choice_name(d: &Dtnu, c: Choice) -> Value {
    match c {
        Choice::Schedule(a) => json!(d.name(a)),
        Choice::Wait => json!("WAIT"),
    }
}

/// The graph record shared with dataset files and the training side.
pub fn graph_to_record(d: &Dtnu, g: &GraphEncoding) -> Value {
    json!({
        "node_features": g.node_features,
        "edges": g.edges.iter().map(|e| json!({"i": e.i, "j": e.j, "features": e.features})).collect::<Vec<_>>(),
        "active": g.active.iter().map(|&(n, c)| json!({"node": n, "choice": choice_name(d, c)})).collect::<Vec<_>>(),
    })
}

pub fn graph_from_record(d: &Dtnu, v: &Value) -> Result<GraphEncoding, EncodeError> {
    let bad = |m: &str| EncodeError::Record(m.to_string());
    let floats = |v: &Value| -> Result<Vec<f32>, EncodeError> {
        v.as_array()
            .ok_or_else(|| bad("expected a list of numbers"))?
            .iter()
            .map(|x| x.as_f64().map(|x| x as f32).ok_or_else(|| bad("expected a number")))
            .collect()
    };
    let index = |v: Option<&Value>| -> Result<usize, EncodeError> {
        v.and_then(Value::as_u64).map(|x| x as usize).ok_or_else(|| bad("expected a node index"))
    };
    let node_features = v
        .get("node_features")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing node_features"))?
        .iter()
        .map(floats)
        .collect::<Result<Vec<_>, _>>()?;
    let n = node_features.len();
    let mut edges = Vec::new();
    for e in v.get("edges").and_then(Value::as_array).ok_or_else(|| bad("missing edges"))? {
        let (i, j) = (index(e.get("i"))?, index(e.get("j"))?);
        if i >= j || j >= n {
            return Err(bad("edge endpoints must satisfy i < j < node count"));
        }
        edges.push(GraphEdge { i, j, features: floats(e.get("features").ok_or_else(|| bad("edge needs features"))?)? });
    }
    let mut active = Vec::new();
    for a in v.get("active").and_then(Value::as_array).ok_or_else(|| bad("missing active"))? {
        let node = index(a.get("node"))?;
        let choice = match a.get("choice").and_then(Value::as_str) {
            Some("WAIT") => Choice::Wait,
            Some(name) => Choice::Schedule(d.lookup(name).ok_or_else(|| bad("unknown timepoint in active"))?),
            None => return Err(bad("active entry needs a choice")),
        };
        if node >= n {
            return Err(bad("active node out of range"));
        }
        active.push((node, choice));
    }
    Ok(GraphEncoding { node_features, edges, active })
}
