//! Rewriting of constraint lists as timepoints get scheduled or bounded.
//!
//! A timepoint is *resolved* once it has an occurrence window: a point for
//! controllables scheduled at a decision, a wait interval for uncontrollables
//! that occurred during a wait (and for controllables executed reactively on
//! them). Conjuncts touching resolved timepoints are rewritten with the tight
//! bound rule so that they hold for every value the window allows.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Conjunct, Disjunct, TpId};
use crate::time::{Rational, TimeValue, Window};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Satisfied,
    Violated,
    Open,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PropagationError {
    #[error("timepoint #{0} is already scheduled")]
    AlreadyScheduled(u32),
}

/// Where and with whom a resolved timepoint happened.
///
/// `anchor` names the timepoint whose instant this one shares: itself in
/// general, the trigger for reactive executions. Two timepoints with the same
/// anchor happened at the same instant even when their window is wide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Occurrence {
    pub window: Window,
    pub anchor: TpId,
}

/// Exact times of scheduled controllables and occurrence windows of
/// everything that happened during waits.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScheduleMemory {
    pub exact: BTreeMap<TpId, Rational>,
    pub bounded: BTreeMap<TpId, Occurrence>,
}

impl ScheduleMemory {
    pub fn contains(&self, tp: TpId) -> bool {
        self.exact.contains_key(&tp) || self.bounded.contains_key(&tp)
    }

    pub fn occurrence(&self, tp: TpId) -> Option<Occurrence> {
        if let Some(&t) = self.exact.get(&tp) {
            return Some(Occurrence { window: Window::point(t), anchor: tp });
        }
        self.bounded.get(&tp).copied()
    }

    pub fn len(&self) -> usize {
        self.exact.len() + self.bounded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Rewritten constraints with their aggregate status.
///
/// Disjuncts are kept normalized: one holding a `True` conjunct collapses to
/// `[True]`, `False` conjuncts are dropped, and a disjunct left with nothing
/// becomes `[False]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstraintState {
    disjuncts: Vec<Disjunct>,
    status: Status,
}

impl ConstraintState {
    pub fn new(disjuncts: Vec<Disjunct>) -> Self {
        let disjuncts: Vec<Disjunct> = disjuncts.into_iter().map(normalize).collect();
        let status = evaluate(&disjuncts);
        ConstraintState { disjuncts, status }
    }

    pub fn disjuncts(&self) -> &[Disjunct] {
        &self.disjuncts
    }

    pub fn status(&self) -> Status {
        self.status
    }

    /// Disjuncts that are neither satisfied nor violated.
    pub fn open(&self) -> impl Iterator<Item = &Disjunct> {
        self.disjuncts.iter().filter(|d| !d.is_true() && !d.is_false())
    }

    /// Unresolved conjuncts of open disjuncts.
    pub fn open_conjuncts(&self) -> impl Iterator<Item = &Conjunct> {
        self.open().flat_map(|d| d.conjuncts.iter())
    }

    fn rewrite(&self, lookup: impl Fn(TpId) -> Option<Occurrence>, now: Rational) -> ConstraintState {
        let disjuncts = self
            .disjuncts
            .iter()
            .map(|d| {
                if d.is_true() || d.is_false() {
                    return d.clone();
                }
                normalize(Disjunct::new(d.conjuncts.iter().map(|c| rewrite_conjunct(c, &lookup, now)).collect()))
            })
            .collect::<Vec<_>>();
        let status = evaluate(&disjuncts);
        ConstraintState { disjuncts, status }
    }
}

fn normalize(d: Disjunct) -> Disjunct {
    if d.is_true() {
        return Disjunct::new(vec![Conjunct::True]);
    }
    let kept: Vec<Conjunct> = d.conjuncts.into_iter().filter(|c| *c != Conjunct::False).collect();
    if kept.is_empty() {
        Disjunct::new(vec![Conjunct::False])
    } else {
        Disjunct::new(kept)
    }
}

/// Status of a constraint list; a pure function of its disjuncts.
pub fn evaluate(disjuncts: &[Disjunct]) -> Status {
    if disjuncts.iter().any(Disjunct::is_false) {
        Status::Violated
    } else if disjuncts.iter().all(Disjunct::is_true) {
        Status::Satisfied
    } else {
        Status::Open
    }
}

/// Rewrites one conjunct given the occurrences known so far.
///
/// `now` is the current time: a remaining `v ∈ [x, y]` with `y < now` can no
/// longer be met by a timepoint that has not happened yet.
pub fn rewrite_conjunct(c: &Conjunct, lookup: impl Fn(TpId) -> Option<Occurrence>, now: Rational) -> Conjunct {
    let rewritten = match *c {
        Conjunct::True | Conjunct::False => return *c,
        Conjunct::Bounded { tp, lb, ub } => match lookup(tp) {
            Some(occ) => literal(lb <= occ.window.lo && ub >= occ.window.hi),
            None => *c,
        },
        Conjunct::Distance { to, from, lb, ub } => match (lookup(to), lookup(from)) {
            (None, None) => *c,
            (Some(t), Some(f)) => {
                if t.anchor == f.anchor {
                    literal(lb <= Rational::from_integer(0) && ub >= Rational::from_integer(0))
                } else {
                    // every difference to - from must land in [lb, ub]
                    literal(lb <= t.window.lo - f.window.hi && ub >= t.window.hi - f.window.lo)
                }
            }
            // from happened somewhere in [l, h]: to ∈ [h + lb, l + ub]
            (None, Some(f)) => bounded(to, lb.shift(f.window.hi), ub.shift(f.window.lo)),
            // to happened somewhere in [l, h]: from ∈ [h - ub, l - lb]
            (Some(t), None) => bounded(from, (-ub).shift(t.window.hi), (-lb).shift(t.window.lo)),
        },
    };
    match rewritten {
        Conjunct::Bounded { tp, ub, .. } if lookup(tp).is_none() && ub < now => Conjunct::False,
        other => other,
    }
}

fn literal(b: bool) -> Conjunct {
    if b {
        Conjunct::True
    } else {
        Conjunct::False
    }
}

fn bounded(tp: TpId, lb: TimeValue, ub: TimeValue) -> Conjunct {
    if lb > ub {
        Conjunct::False
    } else {
        Conjunct::Bounded { tp, lb, ub }
    }
}

/// Schedules controllable `a` exactly at `t`.
pub fn apply_schedule(
    c: &ConstraintState,
    memory: &ScheduleMemory,
    a: TpId,
    t: Rational,
) -> Result<ConstraintState, PropagationError> {
    if memory.contains(a) {
        return Err(PropagationError::AlreadyScheduled(a.0));
    }
    let occ = Occurrence { window: Window::point(t), anchor: a };
    Ok(c.rewrite(|tp| (tp == a).then_some(occ), t))
}

/// Applies the outcome of a wait ending at `now`.
///
/// `occurred` lists each timepoint that happened during the wait with its
/// (clipped) occurrence window. `reactive` maps a trigger to the controllables
/// executed at the trigger's instant; they inherit its window, and any
/// conjunct relating them to the trigger sees a zero difference.
pub fn apply_wait(
    c: &ConstraintState,
    occurred: &[(TpId, Window)],
    reactive: &BTreeMap<TpId, Vec<TpId>>,
    now: Rational,
) -> ConstraintState {
    let mut resolved: BTreeMap<TpId, Occurrence> = BTreeMap::new();
    for &(tp, window) in occurred {
        resolved.insert(tp, Occurrence { window, anchor: tp });
        for &phi in reactive.get(&tp).map(Vec::as_slice).unwrap_or(&[]) {
            resolved.insert(phi, Occurrence { window, anchor: tp });
        }
    }
    c.rewrite(|tp| resolved.get(&tp).copied(), now)
}
