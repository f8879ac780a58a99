//! Test-side oracles and fixtures, written independently of the library's
//! algorithms.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtdc_core::dtn::DtnProblem;
use rtdc_core::encode::{GraphEdge, GraphEncoding, EDGE_FEATURES, NODE_FEATURES};
use rtdc_core::ordering::Choice;
use rtdc_core::gen::{generate_dtnu, GeneratorConfig};
use rtdc_core::model::{Conjunct, Disjunct, TpId};
use rtdc_core::mpnn::Model;
use rtdc_core::time::{Rational, TimeValue};
use rtdc_core::{parse_dtnu, Dtnu};

pub const FIXED_OFFSET: &str = r#"{"controllables": ["a1", "a2"], "uncontrollables": ["u1"],
 "constraints": [[{"kind": "bounded", "tp": "a1", "lb": 0, "ub": 1}],
                 [{"kind": "distance", "to": "a2", "from": "u1", "lb": 3, "ub": 3}]],
 "contingencies": [{"source": "a1", "target": "u1", "intervals": [[2, 4]]}]}"#;

pub const REACTIVE: &str = r#"{"controllables": ["a1", "a2"], "uncontrollables": ["u1"],
 "constraints": [[{"kind": "distance", "to": "u1", "from": "a2", "lb": 0, "ub": 10}]],
 "contingencies": [{"source": "a1", "target": "u1", "intervals": [[2, 4]]}]}"#;

pub const NO_UNCERTAINTY: &str =
    r#"{"controllables": ["a1"], "constraints": [[{"kind": "bounded", "tp": "a1", "lb": 0, "ub": 5}]]}"#;

pub fn fixture(text: &str) -> Dtnu {
    parse_dtnu(text).expect("fixture parses")
}

// ---------------------------------------------------------------- DTN

fn bound(rng: &mut ChaCha8Rng) -> Rational {
    Rational::new(rng.gen_range(-12..=12), if rng.gen_bool(0.2) { 2 } else { 1 })
}

fn interval(rng: &mut ChaCha8Rng) -> (TimeValue, TimeValue) {
    let lo = bound(rng);
    let hi = lo + Rational::from_integer(rng.gen_range(0..=4));
    let lb = if rng.gen_bool(0.05) { TimeValue::NegInf } else { TimeValue::Finite(lo) };
    let ub = if rng.gen_bool(0.05) { TimeValue::PosInf } else { TimeValue::Finite(hi) };
    (lb, ub)
}

/// A random leaf problem: ≤ 6 variables, ≤ 3 disjuncts of ≤ 3 conjuncts.
pub fn random_dtn(seed: u64) -> DtnProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=6u32);
    let disjuncts = (0..rng.gen_range(1..=3))
        .map(|_| {
            Disjunct::new(
                (0..rng.gen_range(1..=3))
                    .map(|_| {
                        let (lb, ub) = interval(&mut rng);
                        let a = TpId(rng.gen_range(0..n));
                        let b = TpId(rng.gen_range(0..n));
                        if a == b || rng.gen_bool(0.3) {
                            Conjunct::bounded(a, lb, ub)
                        } else {
                            Conjunct::distance(a, b, lb, ub)
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    DtnProblem { variables: (0..n).map(TpId).collect(), disjuncts, floor: Rational::from_integer(rng.gen_range(-5..=5)) }
}

type Weight = Option<Rational>;

fn min_weight(a: Weight, b: Weight) -> Weight {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Floyd-Warshall on the distance graph of one conjunct per disjunct; node 0
/// is the zero reference.
fn stn_feasible(n: usize, conjuncts: &[Conjunct], floor: Rational) -> bool {
    let size = n + 1;
    let mut w: Vec<Vec<Weight>> = vec![vec![None; size]; size];
    for (i, row) in w.iter_mut().enumerate() {
        row[i] = Some(Rational::from_integer(0));
    }
    // edge u -> v with weight c means t_v - t_u ≤ c
    let mut edge = |u: usize, v: usize, c: TimeValue| {
        if let TimeValue::Finite(c) = c {
            w[u][v] = min_weight(w[u][v], Some(c));
        }
    };
    for x in 1..size {
        edge(x, 0, TimeValue::Finite(-floor));
    }
    for c in conjuncts {
        match *c {
            Conjunct::Bounded { tp, lb, ub } => {
                if lb == TimeValue::PosInf || ub == TimeValue::NegInf {
                    return false;
                }
                edge(0, tp.index() + 1, ub);
                edge(tp.index() + 1, 0, negate(lb));
            }
            Conjunct::Distance { to, from, lb, ub } => {
                if lb == TimeValue::PosInf || ub == TimeValue::NegInf {
                    return false;
                }
                edge(from.index() + 1, to.index() + 1, ub);
                edge(to.index() + 1, from.index() + 1, negate(lb));
            }
            Conjunct::True => {}
            Conjunct::False => return false,
        }
    }
    for k in 0..size {
        for i in 0..size {
            for j in 0..size {
                if let (Some(a), Some(b)) = (w[i][k], w[k][j]) {
                    w[i][j] = min_weight(w[i][j], Some(a + b));
                }
            }
        }
    }
    (0..size).all(|i| w[i][i].is_some_and(|d| d >= Rational::from_integer(0)))
}

fn negate(t: TimeValue) -> TimeValue {
    match t {
        TimeValue::NegInf => TimeValue::PosInf,
        TimeValue::PosInf => TimeValue::NegInf,
        TimeValue::Finite(r) => TimeValue::Finite(-r),
    }
}

/// Exhaustive satisfiability over every choice of one conjunct per disjunct.
pub fn dtn_oracle(p: &DtnProblem) -> bool {
    let n = p.variables.len();
    let sizes: Vec<usize> = p.disjuncts.iter().map(|d| d.conjuncts.len()).collect();
    if sizes.iter().any(|&s| s == 0) {
        return false;
    }
    let total: usize = sizes.iter().product();
    (0..total).any(|mut k| {
        let pick: Vec<Conjunct> = p
            .disjuncts
            .iter()
            .map(|d| {
                let c = d.conjuncts[k % d.conjuncts.len()];
                k /= d.conjuncts.len();
                c
            })
            .collect();
        stn_feasible(n, &pick, p.floor)
    })
}

// ---------------------------------------------------------------- DTNU

/// Instances with at most four timepoints.
pub fn tiny_dtnu(seed: u64) -> Dtnu {
    generate_dtnu(&GeneratorConfig {
        controllables: (1, 3),
        uncontrollables: (0, 1),
        bounds: (0, 10),
        max_conjuncts: 3,
        extra_disjunct_prob: 0.5,
        seed,
    })
}

// ---------------------------------------------------------------- MPNN

/// Random one-hot nodes and sparse binary edge features.
pub fn random_graph(rng: &mut ChaCha8Rng) -> GraphEncoding {
    let n = rng.gen_range(2..=24);
    let node_features = (0..n)
        .map(|_| {
            let mut f = vec![0.0; NODE_FEATURES];
            f[rng.gen_range(0..NODE_FEATURES)] = 1.0;
            f
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.2) {
                let features = (0..EDGE_FEATURES).map(|_| if rng.gen_bool(0.2) { 1.0 } else { 0.0 }).collect();
                edges.push(GraphEdge { i, j, features });
            }
        }
    }
    GraphEncoding { node_features, edges, active: vec![(n - 1, Choice::Wait)] }
}

/// Straight-line f64 evaluation of the message-passing stack.
pub fn naive_forward(m: &Model, g: &GraphEncoding) -> Vec<f64> {
    let n = g.node_features.len();
    let mut h: Vec<Vec<f64>> = g.node_features.iter().map(|f| f.iter().map(|&x| x as f64).collect()).collect();
    let mut input = m.node_feature_dim;
    for (k, layer) in m.layers.iter().enumerate() {
        let out = m.widths[k];
        let mut next = vec![vec![0.0f64; out]; n];
        for v in 0..n {
            let mut msg = vec![0.0f64; out];
            for e in &g.edges {
                let w = if e.i == v {
                    e.j
                } else if e.j == v {
                    e.i
                } else {
                    continue;
                };
                let hidden: Vec<f64> = (0..layer.w1.rows)
                    .map(|r| {
                        let s: f64 = (0..layer.w1.cols)
                            .map(|c| layer.w1.data[r * layer.w1.cols + c] as f64 * e.features[c] as f64)
                            .sum();
                        (s + layer.b1[r] as f64).max(0.0)
                    })
                    .collect();
                for o in 0..out {
                    for i in 0..input {
                        let row = o * input + i;
                        let entry: f64 = (0..layer.w2.cols)
                            .map(|c| layer.w2.data[row * layer.w2.cols + c] as f64 * hidden[c])
                            .sum::<f64>()
                            + layer.b2[row] as f64;
                        msg[o] += entry * h[w][i];
                    }
                }
            }
            for o in 0..out {
                let bn = &layer.bn;
                let mut y = bn.gamma[o] as f64 * (msg[o] - bn.mean[o] as f64) / (bn.var[o] as f64 + 1e-5).sqrt()
                    + bn.beta[o] as f64;
                y += match &layer.skip_proj {
                    Some(p) => (0..input).map(|i| p.data[o * input + i] as f64 * h[v][i]).sum(),
                    None if input == out => h[v][o],
                    None => 0.0,
                };
                next[v][o] = if k + 1 == m.layers.len() { y } else { y.max(0.0) };
            }
        }
        h = next;
        input = out;
    }
    h.iter().map(|v| 1.0 / (1.0 + (-v[0]).exp())).collect()
}

/// The same graph with node `k` renamed to `perm[k]`.
pub fn permute_graph(g: &GraphEncoding, perm: &[usize]) -> GraphEncoding {
    let mut node_features = vec![Vec::new(); perm.len()];
    for (k, f) in g.node_features.iter().enumerate() {
        node_features[perm[k]] = f.clone();
    }
    let mut edges = g.edges.clone();
    for e in &mut edges {
        let (i, j) = (perm[e.i], perm[e.j]);
        e.i = i.min(j);
        e.j = i.max(j);
    }
    edges.reverse();
    GraphEncoding {
        node_features,
        edges,
        active: g.active.iter().map(|&(k, c)| (perm[k], c)).collect(),
    }
}
