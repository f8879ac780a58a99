use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Dtnu, Interval, TpId};
use crate::propagation::{apply_schedule, apply_wait, ConstraintState, Occurrence, ScheduleMemory};
use crate::time::{Rational, TimeValue, Window};

use super::outcomes::OutcomeSets;

/// The partial schedule carried by a DTNU tree node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DtnuState {
    pub time: Rational,
    pub memory: ScheduleMemory,
    pub constraints: ConstraintState,
    /// Activated uncontrollables that have not occurred, with the absolute
    /// intervals in which they still may.
    pub activated: BTreeMap<TpId, Vec<Interval>>,
    /// Controllables scheduled so far, including reactive executions.
    pub scheduled: BTreeSet<TpId>,
    pub occurred: BTreeSet<TpId>,
}

impl DtnuState {
    pub fn root(d: &Dtnu) -> Self {
        DtnuState {
            time: Rational::from_integer(0),
            memory: ScheduleMemory::default(),
            constraints: ConstraintState::new(d.constraints().to_vec()),
            activated: BTreeMap::new(),
            scheduled: BTreeSet::new(),
            occurred: BTreeSet::new(),
        }
    }

    pub fn unscheduled<'a>(&'a self, d: &'a Dtnu) -> impl Iterator<Item = TpId> + 'a {
        d.controllables().filter(move |a| !self.scheduled.contains(a))
    }

    pub fn all_occurred(&self, d: &Dtnu) -> bool {
        self.occurred.len() == d.uncontrollables().count()
    }

    pub fn has_bounded_conjunct(&self) -> bool {
        self.constraints.open_conjuncts().any(|c| matches!(c, crate::model::Conjunct::Bounded { .. }))
    }

    /// Schedules controllable `a` at the current time.
    pub fn schedule(&self, d: &Dtnu, a: TpId) -> DtnuState {
        debug_assert!(d.is_controllable(a));
        let constraints = apply_schedule(&self.constraints, &self.memory, a, self.time)
            .expect("search only schedules unscheduled controllables");
        let mut next = DtnuState { constraints, ..self.clone() };
        next.memory.exact.insert(a, self.time);
        next.scheduled.insert(a);
        for link in d.contingencies().iter().filter(|l| l.source == a) {
            let windows = link
                .intervals
                .iter()
                .map(|iv| Interval::new(iv.lb.shift(self.time), iv.ub.shift(self.time)))
                .collect();
            next.activated.insert(link.target, windows);
        }
        next
    }

    /// The state after a wait in which exactly `outcome` occurred, with
    /// `reactive` executions attached to their triggers.
    pub fn after_wait(
        &self,
        outcomes: &OutcomeSets,
        outcome: &[TpId],
        reactive: &BTreeMap<TpId, Vec<TpId>>,
    ) -> DtnuState {
        let now = self.time + outcomes.delta;
        let occurred: Vec<(TpId, Window)> = outcome.iter().map(|&u| (u, outcomes.windows[&u])).collect();
        let fired: BTreeMap<TpId, Vec<TpId>> = reactive
            .iter()
            .filter(|(u, _)| outcome.contains(u))
            .map(|(u, phis)| (*u, phis.clone()))
            .collect();
        let constraints = apply_wait(&self.constraints, &occurred, &fired, now);

        let mut next = DtnuState { time: now, constraints, ..self.clone() };
        for &(u, window) in &occurred {
            next.memory.bounded.insert(u, Occurrence { window, anchor: u });
            next.occurred.insert(u);
            next.activated.remove(&u);
            for &phi in fired.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
                next.memory.bounded.insert(phi, Occurrence { window, anchor: u });
                next.scheduled.insert(phi);
            }
        }
        // whatever did not happen in [time, now] happens strictly later
        for windows in next.activated.values_mut() {
            windows.retain(|iv| iv.ub > now);
            for iv in windows.iter_mut() {
                if iv.lb < now {
                    iv.lb = TimeValue::Finite(now);
                }
            }
        }
        next
    }
}
