//! What may happen during a wait, and which controllables can react to it.

use std::collections::BTreeMap;

use crate::model::{Conjunct, Dtnu, TpId};
use crate::time::{Rational, TimeValue, Window};

use super::state::DtnuState;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeSets {
    pub delta: Rational,
    /// may or may not occur before the wait ends
    pub z: Vec<TpId>,
    /// must occur before the wait ends
    pub h: Vec<TpId>,
    /// where each member of `z ∪ h` can occur within the wait
    pub windows: BTreeMap<TpId, Window>,
    /// `h ∪ Υ` for every subset `Υ` of `z`; each list is sorted
    pub combinations: Vec<Vec<TpId>>,
}

impl OutcomeSets {
    /// Uncontrollables whose occurrence is observed by this wait.
    pub fn watched(&self) -> Vec<TpId> {
        let mut all: Vec<TpId> = self.z.iter().chain(&self.h).copied().collect();
        all.sort();
        all
    }
}

pub fn enumerate_outcomes(n: &DtnuState, delta: Rational) -> OutcomeSets {
    let (t, end) = (n.time, n.time + delta);
    let mut sets = OutcomeSets { delta, z: vec![], h: vec![], windows: BTreeMap::new(), combinations: vec![] };
    for (&u, intervals) in &n.activated {
        let Some(last) = intervals.iter().map(|iv| iv.ub).max() else { continue };
        let inside: Vec<_> = intervals.iter().filter(|iv| iv.lb <= end && iv.ub >= t).collect();
        let hull = |ivs: &[&crate::model::Interval]| {
            let lo = ivs.iter().filter_map(|iv| iv.lb.finite()).min().unwrap_or(t).max(t);
            let hi = ivs.iter().map(|iv| iv.ub).max().and_then(|ub| ub.finite()).unwrap_or(end).min(end);
            Window::new(lo, hi)
        };
        if last <= TimeValue::Finite(end) {
            debug_assert!(!inside.is_empty(), "activated timepoint missed its window");
            let window = if inside.is_empty() { Window::new(t, end) } else { hull(&inside) };
            sets.h.push(u);
            sets.windows.insert(u, window);
        } else if intervals.iter().any(|iv| iv.lb < end && iv.ub >= t) {
            sets.z.push(u);
            sets.windows.insert(u, hull(&inside));
        }
    }
    for mask in 0u64..(1u64 << sets.z.len()) {
        let mut lambda = sets.h.clone();
        lambda.extend(sets.z.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &u)| u));
        lambda.sort();
        sets.combinations.push(lambda);
    }
    sets
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReactiveChoice {
    /// controllables that may execute the instant their trigger is observed,
    /// paired with that trigger
    pub eligible: Vec<(TpId, TpId)>,
    /// one map `trigger -> controllables` per subset of `eligible`
    pub strategies: Vec<BTreeMap<TpId, Vec<TpId>>>,
}

pub fn enumerate_reactive(d: &Dtnu, n: &DtnuState, outcomes: &OutcomeSets) -> ReactiveChoice {
    let watched = outcomes.watched();
    let mut eligible = Vec::new();
    for phi in n.unscheduled(d) {
        // a source reacting mid-wait would activate a link the wait never saw
        if d.is_source(phi) {
            continue;
        }
        let trigger = n.constraints.open_conjuncts().find_map(|c| match *c {
            Conjunct::Distance { to, from, lb, ub }
                if from == phi && watched.contains(&to) && lb == TimeValue::ZERO && ub >= TimeValue::ZERO =>
            {
                Some(to)
            }
            _ => None,
        });
        if let Some(u) = trigger {
            eligible.push((phi, u));
        }
    }
    let strategies = (0u64..(1u64 << eligible.len()))
        .map(|mask| {
            let mut map: BTreeMap<TpId, Vec<TpId>> = BTreeMap::new();
            for (i, &(phi, u)) in eligible.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    map.entry(u).or_default().push(phi);
                }
            }
            map
        })
        .collect();
    ReactiveChoice { eligible, strategies }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Interval;
    use crate::time::int;

    fn with_windows(t: i64, windows: Vec<(u32, Vec<(i64, i64)>)>) -> DtnuState {
        let d = crate::model::parse_dtnu(r#"{"controllables": [], "uncontrollables": [], "constraints": [], "contingencies": []}"#)
            .unwrap();
        let mut n = DtnuState::root(&d);
        n.time = int(t);
        for (u, ivs) in windows {
            n.activated.insert(TpId(u), ivs.into_iter().map(|(a, b)| Interval::finite(int(a), int(b))).collect());
        }
        n
    }

    #[test]
    fn splits_into_must_and_may() {
        let n = with_windows(0, vec![(0, vec![(1, 2)]), (1, vec![(1, 8)]), (2, vec![(3, 9)]), (3, vec![(6, 9)])]);
        let o = enumerate_outcomes(&n, int(5));
        assert_eq!(o.h, vec![TpId(0)]);
        assert_eq!(o.z, vec![TpId(1), TpId(2)]);
        assert_eq!(o.windows[&TpId(1)], Window::new(int(1), int(5)));
        assert_eq!(
            o.combinations,
            vec![
                vec![TpId(0)],
                vec![TpId(0), TpId(1)],
                vec![TpId(0), TpId(2)],
                vec![TpId(0), TpId(1), TpId(2)],
            ]
        );
    }

    #[test]
    fn window_starting_at_wait_end_is_not_observed() {
        let n = with_windows(0, vec![(0, vec![(5, 9)])]);
        let o = enumerate_outcomes(&n, int(5));
        assert!(o.z.is_empty() && o.h.is_empty());
        assert_eq!(o.combinations, vec![Vec::<TpId>::new()]);
    }

    #[test]
    fn multi_interval_hull() {
        let n = with_windows(2, vec![(0, vec![(0, 3), (6, 7), (9, 12)])]);
        let o = enumerate_outcomes(&n, int(6));
        assert_eq!(o.z, vec![TpId(0)]);
        assert_eq!(o.windows[&TpId(0)], Window::new(int(2), int(7)));
    }

    #[test]
    fn reactive_subsets() {
        let d = crate::model::parse_dtnu(
            r#"{"controllables": ["a1", "a2", "a3"], "uncontrollables": ["u1"],
                "constraints": [[{"kind": "distance", "to": "u1", "from": "a2", "lb": 0, "ub": 10}],
                                [{"kind": "distance", "to": "u1", "from": "a3", "lb": 0, "ub": "inf"}],
                                [{"kind": "distance", "to": "u1", "from": "a1", "lb": 1, "ub": 10}]],
                "contingencies": [{"source": "a1", "target": "u1", "intervals": [[2, 4]]}]}"#,
        )
        .unwrap();
        let (a1, a2, a3, u1) = (TpId(0), TpId(1), TpId(2), TpId(3));
        let n = DtnuState::root(&d).schedule(&d, a1);
        let o = enumerate_outcomes(&n, int(3));
        assert_eq!(o.z, vec![u1]);
        let r = enumerate_reactive(&d, &n, &o);
        assert_eq!(r.eligible, vec![(a2, u1), (a3, u1)]);
        assert_eq!(r.strategies.len(), 4);
        assert!(r.strategies[0].is_empty());
        assert_eq!(r.strategies[3][&u1], vec![a2, a3]);
    }
}
