//! Wait eligibility and duration.

use std::collections::HashSet;

use crate::model::{Conjunct, TpId};
use crate::time::{Rational, TimeValue};

use super::state::DtnuState;

/// Bound on the backward chaining walk; cyclic distance chains with small
/// bounds can otherwise produce a very large number of milestones.
const CHAIN_LIMIT: usize = 50_000;

/// Candidate wait lengths from the three milestone rules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WaitComputation {
    /// activation windows
    pub delta1: Option<Rational>,
    /// unary windows `v ∈ [x, y]`
    pub delta2: Option<Rational>,
    /// backward chains through distance conjuncts
    pub delta3: Option<Rational>,
}

impl WaitComputation {
    pub fn duration(&self) -> Option<Rational> {
        [self.delta1, self.delta2, self.delta3].into_iter().flatten().min()
    }
}

fn keep_min(best: &mut Option<Rational>, candidate: Rational) {
    if candidate > Rational::from_integer(0) && best.is_none_or(|b| candidate < b) {
        *best = Some(candidate);
    }
}

fn keep_bound(best: &mut Option<Rational>, bound: TimeValue, t: Rational) {
    if let Some(x) = bound.finite() {
        keep_min(best, x - t);
    }
}

/// Milestone candidates at a DTNU node; `None` when no rule yields a
/// positive value.
pub fn wait_duration(n: &DtnuState) -> Option<WaitComputation> {
    let t = n.time;
    let mut w = WaitComputation::default();

    for iv in n.activated.values().flatten() {
        keep_bound(&mut w.delta1, iv.lb, t);
        keep_bound(&mut w.delta1, iv.ub, t);
    }

    let mut roots = Vec::new();
    for c in n.constraints.open_conjuncts() {
        if let Conjunct::Bounded { tp, lb, ub } = *c {
            keep_bound(&mut w.delta2, lb, t);
            keep_bound(&mut w.delta2, ub, t);
            roots.extend(lb.finite().map(|x| (tp, x)));
            roots.extend(ub.finite().map(|y| (tp, y)));
        }
    }

    let distances: Vec<(TpId, TpId, Rational, TimeValue)> = n
        .constraints
        .open_conjuncts()
        .filter_map(|c| match *c {
            Conjunct::Distance { to, from, lb: TimeValue::Finite(lb), ub } if lb >= Rational::from_integer(0) => {
                Some((to, from, lb, ub))
            }
            _ => None,
        })
        .collect();
    let mut visited: HashSet<(TpId, Rational)> = HashSet::new();
    let mut stack = roots;
    while let Some((v, x)) = stack.pop() {
        if !visited.insert((v, x)) || visited.len() > CHAIN_LIMIT {
            continue;
        }
        for &(to, from, lb, ub) in &distances {
            if to != v {
                continue;
            }
            // v - from ∈ [lb, ub]: `from` has to happen within [x - ub, x - lb]
            let mut next = vec![x - lb];
            next.extend(ub.finite().map(|y| x - y));
            for value in next {
                keep_min(&mut w.delta3, value - t);
                // chained values never increase, so non-positive ones are dead ends
                if value > t {
                    stack.push((from, value));
                }
            }
        }
    }

    w.duration().map(|_| w)
}

/// The wait length if a WAIT child may be added at this node.
pub fn eligible_wait(n: &DtnuState) -> Option<Rational> {
    if n.activated.is_empty() && !n.has_bounded_conjunct() {
        return None;
    }
    wait_duration(n).and_then(|w| w.duration())
}
