//! Leaf solver for disjunctive temporal networks without uncertainty.
//!
//! Depth-first over one conjunct per disjunct; every partial selection is
//! checked for simple-temporal consistency with Bellman-Ford on the distance
//! graph, in exact arithmetic.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use crate::model::{Conjunct, Disjunct, TpId};
use crate::time::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DtnProblem {
    /// unscheduled controllables
    pub variables: Vec<TpId>,
    pub disjuncts: Vec<Disjunct>,
    /// every variable must be placed at or after this time
    pub floor: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DtnSolution {
    pub assignment: BTreeMap<TpId, Rational>,
}

impl DtnSolution {
    pub fn time(&self, tp: TpId) -> Option<Rational> {
        self.assignment.get(&tp).copied()
    }

    /// Substitutes the assignment into every disjunct. Timepoints the
    /// assignment does not cover are looked up in `fixed`.
    pub fn satisfies(&self, disjuncts: &[Disjunct], fixed: &BTreeMap<TpId, Rational>) -> bool {
        let n = self
            .assignment
            .keys()
            .chain(fixed.keys())
            .copied()
            .chain(disjuncts.iter().flat_map(|d| d.conjuncts.iter()).flat_map(|c| c.timepoints()))
            .map(|t| t.index() + 1)
            .max()
            .unwrap_or(0);
        let mut times = vec![None; n];
        for (tp, t) in fixed.iter().chain(self.assignment.iter()) {
            times[tp.index()] = Some(*t);
        }
        disjuncts.iter().all(|d| d.holds(&times))
    }
}

/// The deadline passed before the leaf solver finished.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DtnTimeout;

struct Edge {
    from: usize,
    to: usize,
    weight: Rational,
}

/// Distance graph over node 0 (the origin) and one node per variable.
struct DistanceGraph {
    nodes: usize,
    edges: Vec<Edge>,
}

impl DistanceGraph {
    fn new(variables: usize, floor: Rational) -> Self {
        // x_v >= floor  <=>  0 - x_v <= -floor
        let edges = (1..=variables).map(|v| Edge { from: v, to: 0, weight: -floor }).collect();
        DistanceGraph { nodes: variables + 1, edges }
    }

    /// Adds the edges of a conjunct; returns false for the `False` literal.
    fn add(&mut self, c: &Conjunct, node: &impl Fn(TpId) -> usize) -> bool {
        // edge u -> v with weight w reads x_v - x_u <= w
        let mut push = |from: usize, to: usize, w: Option<Rational>| {
            if let Some(weight) = w {
                self.edges.push(Edge { from, to, weight });
            }
        };
        match *c {
            Conjunct::True => {}
            Conjunct::False => return false,
            Conjunct::Distance { to, from, lb, ub } => {
                push(node(from), node(to), ub.finite());
                push(node(to), node(from), lb.finite().map(|x| -x));
            }
            Conjunct::Bounded { tp, lb, ub } => {
                push(0, node(tp), ub.finite());
                push(node(tp), 0, lb.finite().map(|x| -x));
            }
        }
        true
    }

    fn truncate(&mut self, len: usize) {
        self.edges.truncate(len);
    }

    /// Earliest solution `x_v = -dist(v, origin)`, or `None` on a negative cycle.
    fn earliest(&self) -> Option<Vec<Rational>> {
        let mut dist: Vec<Option<Rational>> = vec![None; self.nodes];
        dist[0] = Some(Rational::from_integer(0));
        for round in 0..=self.nodes {
            let mut changed = false;
            for e in &self.edges {
                if let Some(dv) = dist[e.to] {
                    let candidate = e.weight + dv;
                    if dist[e.from].is_none_or(|du| candidate < du) {
                        dist[e.from] = Some(candidate);
                        changed = true;
                    }
                }
            }
            if !changed {
                return Some(dist.into_iter().map(|d| -d.expect("every node reaches the origin")).collect());
            }
            if round == self.nodes {
                break;
            }
        }
        None
    }
}

/// Simple temporal consistency of a conjunction; returns the earliest
/// satisfying assignment.
pub fn stn_consistent(variables: &[TpId], conjuncts: &[Conjunct], floor: Rational) -> Option<DtnSolution> {
    let index: HashMap<TpId, usize> = variables.iter().enumerate().map(|(i, &v)| (v, i + 1)).collect();
    let node = |tp: TpId| *index.get(&tp).expect("conjunct references a non-variable timepoint");
    let mut graph = DistanceGraph::new(variables.len(), floor);
    for c in conjuncts {
        if !graph.add(c, &node) {
            return None;
        }
    }
    graph.earliest().map(|x| DtnSolution {
        assignment: variables.iter().enumerate().map(|(i, &v)| (v, x[i + 1])).collect(),
    })
}

/// Satisfiability of a leaf problem.
pub fn solve_dtn(p: &DtnProblem) -> Option<DtnSolution> {
    solve_dtn_until(p, None).expect("no deadline was set")
}

/// [`solve_dtn`] that gives up once `deadline` passes.
pub fn solve_dtn_until(p: &DtnProblem, deadline: Option<Instant>) -> Result<Option<DtnSolution>, DtnTimeout> {
    let index: HashMap<TpId, usize> = p.variables.iter().enumerate().map(|(i, &v)| (v, i + 1)).collect();
    let node = |tp: TpId| *index.get(&tp).expect("conjunct references a non-variable timepoint");
    let mut graph = DistanceGraph::new(p.variables.len(), p.floor);

    let mut branching: Vec<&Disjunct> = Vec::new();
    for d in &p.disjuncts {
        if d.is_true() {
            continue;
        }
        if d.is_false() {
            return Ok(None);
        }
        if let [only] = d.conjuncts.as_slice() {
            // forced choice
            if !graph.add(only, &node) {
                return Ok(None);
            }
        } else {
            branching.push(d);
        }
    }
    if graph.earliest().is_none() {
        return Ok(None);
    }

    let mut search = Search { graph, branching, node: &node, deadline, steps: 0 };
    let found = search.descend(0)?;
    Ok(found.map(|x| DtnSolution {
        assignment: p.variables.iter().enumerate().map(|(i, &v)| (v, x[i + 1])).collect(),
    }))
}

struct Search<'a, F: Fn(TpId) -> usize> {
    graph: DistanceGraph,
    branching: Vec<&'a Disjunct>,
    node: &'a F,
    deadline: Option<Instant>,
    steps: u64,
}

impl<F: Fn(TpId) -> usize> Search<'_, F> {
    fn descend(&mut self, depth: usize) -> Result<Option<Vec<Rational>>, DtnTimeout> {
        self.steps += 1;
        if self.steps % 256 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(DtnTimeout);
        }
        if depth == self.branching.len() {
            return Ok(self.graph.earliest());
        }
        let disjunct = self.branching[depth];
        for c in &disjunct.conjuncts {
            let mark = self.graph.edges.len();
            if self.graph.add(c, self.node) && self.graph.earliest().is_some() {
                if let Some(found) = self.descend(depth + 1)? {
                    return Ok(Some(found));
                }
            }
            self.graph.truncate(mark);
        }
        Ok(None)
    }
}
