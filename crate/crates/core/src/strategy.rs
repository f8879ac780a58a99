//! Execution strategies: representation, JSON form, and replay against
//! sampled uncontrollable durations.

use std::collections::BTreeMap;

use rand::Rng;
use serde_json::{json, Map, Value};

use crate::model::{Dtnu, Interval, TpId};
use crate::time::{rational_from_json, rational_to_json, Rational, TimeValue};

/// A tree of decisions. Each node executes controllables from `start`
/// onwards and then either stops or waits until `end`, branching on the
/// set of uncontrollables observed in `[start, end]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strategy {
    pub root: StrategyNode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyNode {
    /// uncontrollables observed by the wait that led here
    pub outcome: Vec<TpId>,
    pub start: Rational,
    /// `(controllable, time)`; times are at least `start`
    pub executions: Vec<(TpId, Rational)>,
    pub wait: Option<WaitStep>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WaitStep {
    pub end: Rational,
    /// occurrences of these timepoints within the wait select the branch
    pub watch: Vec<TpId>,
    /// controllables executed at the instant their trigger is observed
    pub reactive: BTreeMap<TpId, Vec<TpId>>,
    pub branches: Vec<StrategyNode>,
}

impl Strategy {
    pub fn node_count(&self) -> usize {
        fn count(n: &StrategyNode) -> usize {
            1 + n.wait.as_ref().map_or(0, |w| w.branches.iter().map(count).sum())
        }
        count(&self.root)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StrategyError {
    #[error("malformed strategy: {0}")]
    Malformed(String),
    #[error("no delay given for `{0}`")]
    MissingDelay(String),
}

fn malformed(msg: impl Into<String>) -> StrategyError {
    StrategyError::Malformed(msg.into())
}

// ---------------------------------------------------------------- JSON

pub fn strategy_to_json(d: &Dtnu, s: &Strategy) -> Value {
    fn node(d: &Dtnu, n: &StrategyNode) -> Value {
        let mut obj = Map::new();
        obj.insert("start".into(), rational_to_json(&n.start));
        obj.insert("outcome".into(), n.outcome.iter().map(|&u| json!(d.name(u))).collect());
        obj.insert(
            "execute".into(),
            n.executions.iter().map(|(a, t)| json!({"tp": d.name(*a), "at": rational_to_json(t)})).collect(),
        );
        if let Some(w) = &n.wait {
            let reactive: Map<String, Value> = w
                .reactive
                .iter()
                .map(|(u, phis)| (d.name(*u).to_string(), phis.iter().map(|&p| json!(d.name(p))).collect()))
                .collect();
            obj.insert(
                "wait".into(),
                json!({
                    "until": rational_to_json(&w.end),
                    "watch": w.watch.iter().map(|&u| d.name(u)).collect::<Vec<_>>(),
                    "reactive": reactive,
                    "branches": w.branches.iter().map(|b| node(d, b)).collect::<Vec<_>>(),
                }),
            );
        }
        Value::Object(obj)
    }
    node(d, &s.root)
}

pub fn strategy_from_json(d: &Dtnu, v: &Value) -> Result<Strategy, StrategyError> {
    let tp = |v: &Value| -> Result<TpId, StrategyError> {
        let name = v.as_str().ok_or_else(|| malformed("timepoint names must be strings"))?;
        d.lookup(name).ok_or_else(|| malformed(format!("unknown timepoint `{name}`")))
    };
    let time = |v: Option<&Value>, what: &str| -> Result<Rational, StrategyError> {
        let v = v.ok_or_else(|| malformed(format!("missing `{what}`")))?;
        rational_from_json(v).map_err(|e| malformed(format!("bad `{what}`: {}", e.0)))
    };
    let list = |v: Option<&Value>| -> Result<Vec<TpId>, StrategyError> {
        match v {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items.iter().map(tp).collect(),
            Some(_) => Err(malformed("expected a list of timepoints")),
        }
    };
    fn node(
        v: &Value,
        tp: &dyn Fn(&Value) -> Result<TpId, StrategyError>,
        time: &dyn Fn(Option<&Value>, &str) -> Result<Rational, StrategyError>,
        list: &dyn Fn(Option<&Value>) -> Result<Vec<TpId>, StrategyError>,
    ) -> Result<StrategyNode, StrategyError> {
        let obj = v.as_object().ok_or_else(|| malformed("strategy node must be an object"))?;
        let mut outcome = list(obj.get("outcome"))?;
        outcome.sort();
        let mut executions = Vec::new();
        for e in obj.get("execute").and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[]) {
            let e = e.as_object().ok_or_else(|| malformed("execution must be an object"))?;
            executions.push((tp(e.get("tp").ok_or_else(|| malformed("execution needs `tp`"))?)?, time(e.get("at"), "at")?));
        }
        let wait = match obj.get("wait") {
            None | Some(Value::Null) => None,
            Some(w) => {
                let w = w.as_object().ok_or_else(|| malformed("wait must be an object"))?;
                let mut reactive = BTreeMap::new();
                if let Some(r) = w.get("reactive") {
                    let r = r.as_object().ok_or_else(|| malformed("reactive must be an object"))?;
                    for (u, phis) in r {
                        reactive.insert(tp(&Value::String(u.clone()))?, list(Some(phis))?);
                    }
                }
                let branches = w
                    .get("branches")
                    .and_then(Value::as_array)
                    .ok_or_else(|| malformed("wait needs `branches`"))?
                    .iter()
                    .map(|b| node(b, tp, time, list))
                    .collect::<Result<_, _>>()?;
                let mut watch = list(w.get("watch"))?;
                watch.sort();
                Some(WaitStep { end: time(w.get("until"), "until")?, watch, reactive, branches })
            }
        };
        Ok(StrategyNode { outcome, start: time(obj.get("start"), "start")?, executions, wait })
    }
    Ok(Strategy { root: node(v, &tp, &time, &list)? })
}

// ---------------------------------------------------------------- sampling

/// Resolution of sampled durations within an interval.
const SAMPLE_STEPS: i64 = 1_000_000;
/// Width used in place of an unbounded interval when sampling.
const UNBOUNDED_SPAN: i128 = 1000;

fn sampling_span(iv: &Interval) -> (Rational, Rational) {
    let lo = iv.lb.finite().unwrap_or_else(|| Rational::from_integer(0));
    let hi = match iv.ub {
        TimeValue::Finite(h) => h,
        _ => lo + Rational::from_integer(UNBOUNDED_SPAN),
    };
    (lo, hi)
}

/// Draws one duration per contingency link, uniformly over the union of its
/// intervals.
pub fn sample_outcome<R: Rng + ?Sized>(d: &Dtnu, rng: &mut R) -> BTreeMap<TpId, Rational> {
    d.contingencies()
        .iter()
        .map(|link| {
            let spans: Vec<_> = link.intervals.iter().map(sampling_span).collect();
            let total: Rational = spans.iter().map(|(lo, hi)| hi - lo).sum();
            let delay = if total == Rational::from_integer(0) {
                spans[rng.gen_range(0..spans.len())].0
            } else {
                let mut offset = total * Rational::new(rng.gen_range(0..=SAMPLE_STEPS) as i128, SAMPLE_STEPS as i128);
                let mut pick = spans[spans.len() - 1].1;
                for (lo, hi) in &spans {
                    if offset <= hi - lo {
                        pick = lo + offset;
                        break;
                    }
                    offset -= hi - lo;
                }
                pick
            };
            (link.target, delay)
        })
        .collect()
}

/// Duration assignments built from interval endpoints: every combination
/// when there are at most `limit`, otherwise `limit` random ones.
pub fn corner_outcomes<R: Rng + ?Sized>(d: &Dtnu, limit: usize, rng: &mut R) -> Vec<BTreeMap<TpId, Rational>> {
    let options: Vec<(TpId, Vec<Rational>)> = d
        .contingencies()
        .iter()
        .map(|link| {
            let mut ends: Vec<Rational> = link
                .intervals
                .iter()
                .flat_map(|iv| {
                    let (lo, hi) = sampling_span(iv);
                    [lo, hi]
                })
                .collect();
            ends.sort();
            ends.dedup();
            (link.target, ends)
        })
        .collect();
    let total = options.iter().try_fold(1usize, |acc, (_, e)| acc.checked_mul(e.len()));
    match total {
        Some(n) if n <= limit => (0..n)
            .map(|mut k| {
                options
                    .iter()
                    .map(|(u, ends)| {
                        let pick = ends[k % ends.len()];
                        k /= ends.len();
                        (*u, pick)
                    })
                    .collect()
            })
            .collect(),
        _ => (0..limit)
            .map(|_| options.iter().map(|(u, ends)| (*u, ends[rng.gen_range(0..ends.len())])).collect())
            .collect(),
    }
}

// ---------------------------------------------------------------- replay

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Execution {
    /// indexed by timepoint; `None` when the timepoint never happened
    pub times: Vec<Option<Rational>>,
    /// indices of constraints that do not hold
    pub violated: Vec<usize>,
}

impl Execution {
    pub fn satisfied(&self) -> bool {
        self.violated.is_empty()
    }
}

/// Executes `s` against fixed contingency durations and checks every
/// constraint on the resulting exact times.
pub fn simulate_execution(
    d: &Dtnu,
    s: &Strategy,
    delays: &BTreeMap<TpId, Rational>,
) -> Result<Execution, StrategyError> {
    let mut times: Vec<Option<Rational>> = vec![None; d.len()];
    // activated uncontrollables and when they will occur
    let mut pending: BTreeMap<TpId, Rational> = BTreeMap::new();
    let execute = |a: TpId, t: Rational, times: &mut Vec<Option<Rational>>, pending: &mut BTreeMap<TpId, Rational>| {
        if !d.is_controllable(a) {
            return Err(malformed(format!("`{}` is not controllable", d.name(a))));
        }
        if times[a.index()].is_some() {
            return Err(malformed(format!("`{}` executed twice", d.name(a))));
        }
        times[a.index()] = Some(t);
        for link in d.contingencies().iter().filter(|l| l.source == a) {
            let delay = delays.get(&link.target).ok_or_else(|| StrategyError::MissingDelay(d.name(link.target).into()))?;
            pending.insert(link.target, t + delay);
        }
        Ok(())
    };

    let mut node = &s.root;
    loop {
        for &(a, t) in &node.executions {
            if t < node.start {
                return Err(malformed(format!("`{}` executed before its node starts", d.name(a))));
            }
            execute(a, t, &mut times, &mut pending)?;
        }
        let Some(wait) = &node.wait else { break };
        if let Some((u, _)) = pending.iter().find(|(_, &o)| o < node.start) {
            return Err(malformed(format!("`{}` occurred before anything watched it", d.name(*u))));
        }
        let observed: Vec<TpId> = pending
            .iter()
            .filter(|(u, &o)| o <= wait.end && wait.watch.contains(u))
            .map(|(&u, _)| u)
            .collect();
        for &u in &observed {
            let o = pending.remove(&u).expect("observed timepoints are pending");
            times[u.index()] = Some(o);
            for &phi in wait.reactive.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
                execute(phi, o, &mut times, &mut pending)?;
            }
        }
        node = wait
            .branches
            .iter()
            .find(|b| b.outcome == observed)
            .ok_or_else(|| malformed(format!("no branch for outcome at {}", wait.end)))?;
        if node.start != wait.end {
            return Err(malformed("branch does not start where its wait ends"));
        }
    }
    for (u, o) in pending {
        times[u.index()] = Some(o);
    }
    let violated = d
        .constraints()
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.holds(&times))
        .map(|(i, _)| i)
        .collect();
    Ok(Execution { times, violated })
}
