//! Problem representation: timepoints, disjunctive constraints and
//! contingency links, plus the JSON problem file format.

use std::collections::HashMap;
use std::fmt;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::time::{Rational, TimeValue};

/// Index of a timepoint inside its [`Dtnu`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TpId(pub u32);

impl TpId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimepointKind {
    Controllable,
    Uncontrollable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Timepoint {
    pub name: String,
    pub kind: TimepointKind,
}

/// Closed interval over extended time values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lb: TimeValue,
    pub ub: TimeValue,
}

impl Interval {
    pub fn new(lb: TimeValue, ub: TimeValue) -> Self {
        Interval { lb, ub }
    }

    pub fn finite(lb: Rational, ub: Rational) -> Self {
        Interval { lb: lb.into(), ub: ub.into() }
    }

    pub fn contains(&self, t: Rational) -> bool {
        self.lb <= t && self.ub >= t
    }
}

/// An atomic relation. `Distance` reads `to - from ∈ [lb, ub]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Conjunct {
    Distance { to: TpId, from: TpId, lb: TimeValue, ub: TimeValue },
    Bounded { tp: TpId, lb: TimeValue, ub: TimeValue },
    True,
    False,
}

impl Conjunct {
    pub fn distance(to: TpId, from: TpId, lb: TimeValue, ub: TimeValue) -> Self {
        Conjunct::Distance { to, from, lb, ub }
    }

    pub fn bounded(tp: TpId, lb: TimeValue, ub: TimeValue) -> Self {
        Conjunct::Bounded { tp, lb, ub }
    }

    pub fn is_resolved(&self) -> bool {
        matches!(self, Conjunct::True | Conjunct::False)
    }

    /// Timepoints mentioned by the conjunct.
    pub fn timepoints(&self) -> impl Iterator<Item = TpId> {
        let (a, b) = match *self {
            Conjunct::Distance { to, from, .. } => (Some(to), Some(from)),
            Conjunct::Bounded { tp, .. } => (Some(tp), None),
            _ => (None, None),
        };
        a.into_iter().chain(b)
    }

    /// Checks the conjunct against exact times; missing timepoints fail it.
    pub fn holds(&self, times: &[Option<Rational>]) -> bool {
        match *self {
            Conjunct::True => true,
            Conjunct::False => false,
            Conjunct::Bounded { tp, lb, ub } => {
                times[tp.index()].is_some_and(|v| lb <= v && ub >= v)
            }
            Conjunct::Distance { to, from, lb, ub } => {
                match (times[to.index()], times[from.index()]) {
                    (Some(a), Some(b)) => lb <= a - b && ub >= a - b,
                    _ => false,
                }
            }
        }
    }
}

/// Logical OR of conjuncts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Disjunct {
    pub conjuncts: Vec<Conjunct>,
}

impl Disjunct {
    pub fn new(conjuncts: Vec<Conjunct>) -> Self {
        Disjunct { conjuncts }
    }

    pub fn holds(&self, times: &[Option<Rational>]) -> bool {
        self.conjuncts.iter().any(|c| c.holds(times))
    }

    pub fn is_true(&self) -> bool {
        self.conjuncts.iter().any(|c| *c == Conjunct::True)
    }

    pub fn is_false(&self) -> bool {
        self.conjuncts.iter().all(|c| *c == Conjunct::False)
    }
}

/// `target` occurs within one of `intervals` after `source` executes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyLink {
    pub source: TpId,
    pub target: TpId,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown timepoint `{0}`")]
    UnknownTimepoint(String),
    #[error("constraint #{0} has no conjuncts")]
    EmptyDisjunct(usize),
    #[error("bad interval in {context}: [{lb}, {ub}]")]
    BadInterval { context: String, lb: TimeValue, ub: TimeValue },
    #[error("uncontrollable `{target}` is the target of {links} contingency links, expected exactly one")]
    DuplicateContingency { target: String, links: usize },
}

/// A disjunctive temporal network with uncertainty.
///
/// Timepoint ids index `timepoints`; problem files list controllables first,
/// so parsed instances always number controllables before uncontrollables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dtnu {
    timepoints: Vec<Timepoint>,
    constraints: Vec<Disjunct>,
    contingencies: Vec<ContingencyLink>,
    /// contingency index per uncontrollable
    link_of: Vec<Option<usize>>,
}

impl Dtnu {
    pub fn new(
        timepoints: Vec<Timepoint>,
        constraints: Vec<Disjunct>,
        contingencies: Vec<ContingencyLink>,
    ) -> Result<Self, ModelError> {
        let mut seen = HashMap::new();
        for (i, tp) in timepoints.iter().enumerate() {
            if seen.insert(tp.name.as_str(), i).is_some() {
                return Err(ModelError::Syntax(format!("duplicate timepoint `{}`", tp.name)));
            }
        }
        let n = timepoints.len();
        let name = |id: TpId| {
            timepoints.get(id.index()).map(|t| t.name.clone()).unwrap_or_else(|| format!("#{}", id.0))
        };
        let check_id = |id: TpId| {
            if id.index() < n { Ok(()) } else { Err(ModelError::UnknownTimepoint(name(id))) }
        };
        let check_interval = |context: String, lb: TimeValue, ub: TimeValue| {
            if lb > ub || lb == TimeValue::PosInf || ub == TimeValue::NegInf {
                Err(ModelError::BadInterval { context, lb, ub })
            } else {
                Ok(())
            }
        };
        for (k, d) in constraints.iter().enumerate() {
            if d.conjuncts.is_empty() {
                return Err(ModelError::EmptyDisjunct(k));
            }
            for c in &d.conjuncts {
                match *c {
                    Conjunct::Distance { to, from, lb, ub } => {
                        check_id(to)?;
                        check_id(from)?;
                        check_interval(format!("constraint #{k}"), lb, ub)?;
                    }
                    Conjunct::Bounded { tp, lb, ub } => {
                        check_id(tp)?;
                        check_interval(format!("constraint #{k}"), lb, ub)?;
                    }
                    _ => {
                        return Err(ModelError::Syntax(format!(
                            "constraint #{k} contains a resolved literal"
                        )))
                    }
                }
            }
        }
        let mut link_of = vec![None; n];
        let mut counts = vec![0usize; n];
        for (k, link) in contingencies.iter().enumerate() {
            check_id(link.source)?;
            check_id(link.target)?;
            if timepoints[link.source.index()].kind != TimepointKind::Controllable {
                return Err(ModelError::UnknownTimepoint(format!(
                    "{} (contingency source must be controllable)",
                    name(link.source)
                )));
            }
            if timepoints[link.target.index()].kind != TimepointKind::Uncontrollable {
                return Err(ModelError::UnknownTimepoint(format!(
                    "{} (contingency target must be uncontrollable)",
                    name(link.target)
                )));
            }
            let context = format!("contingency {} -> {}", name(link.source), name(link.target));
            if link.intervals.is_empty() {
                return Err(ModelError::BadInterval {
                    context,
                    lb: TimeValue::PosInf,
                    ub: TimeValue::NegInf,
                });
            }
            let mut prev_ub = TimeValue::ZERO;
            for iv in &link.intervals {
                let ordered = iv.lb.is_finite() && iv.lb >= prev_ub && iv.lb <= iv.ub && iv.ub != TimeValue::NegInf;
                if !ordered {
                    return Err(ModelError::BadInterval { context, lb: iv.lb, ub: iv.ub });
                }
                prev_ub = iv.ub;
            }
            counts[link.target.index()] += 1;
            link_of[link.target.index()] = Some(k);
        }
        for (i, tp) in timepoints.iter().enumerate() {
            if tp.kind == TimepointKind::Uncontrollable && counts[i] != 1 {
                return Err(ModelError::DuplicateContingency { target: tp.name.clone(), links: counts[i] });
            }
        }
        Ok(Dtnu { timepoints, constraints, contingencies, link_of })
    }

    pub fn timepoints(&self) -> &[Timepoint] {
        &self.timepoints
    }

    pub fn constraints(&self) -> &[Disjunct] {
        &self.constraints
    }

    pub fn contingencies(&self) -> &[ContingencyLink] {
        &self.contingencies
    }

    pub fn len(&self) -> usize {
        self.timepoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timepoints.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = TpId> + '_ {
        (0..self.timepoints.len() as u32).map(TpId)
    }

    pub fn kind(&self, id: TpId) -> TimepointKind {
        self.timepoints[id.index()].kind
    }

    pub fn is_controllable(&self, id: TpId) -> bool {
        self.kind(id) == TimepointKind::Controllable
    }

    pub fn name(&self, id: TpId) -> &str {
        &self.timepoints[id.index()].name
    }

    pub fn controllables(&self) -> impl Iterator<Item = TpId> + '_ {
        self.ids().filter(|&id| self.is_controllable(id))
    }

    pub fn uncontrollables(&self) -> impl Iterator<Item = TpId> + '_ {
        self.ids().filter(|&id| !self.is_controllable(id))
    }

    pub fn lookup(&self, name: &str) -> Option<TpId> {
        self.timepoints.iter().position(|t| t.name == name).map(|i| TpId(i as u32))
    }

    /// The contingency link whose target is `u`.
    pub fn link_for(&self, u: TpId) -> Option<&ContingencyLink> {
        self.link_of.get(u.index()).copied().flatten().map(|k| &self.contingencies[k])
    }

    /// Whether `a` is the source of some contingency link.
    pub fn is_source(&self, a: TpId) -> bool {
        self.contingencies.iter().any(|l| l.source == a)
    }

    pub fn conjunct_to_string(&self, c: &Conjunct) -> String {
        match *c {
            Conjunct::Distance { to, from, lb, ub } => {
                format!("{} - {} in [{lb}, {ub}]", self.name(to), self.name(from))
            }
            Conjunct::Bounded { tp, lb, ub } => format!("{} in [{lb}, {ub}]", self.name(tp)),
            Conjunct::True => "true".into(),
            Conjunct::False => "false".into(),
        }
    }
}

impl fmt::Display for Dtnu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_dtnu(self))
    }
}

/// Parses and validates a problem file.
pub fn parse_dtnu(text: &str) -> Result<Dtnu, ModelError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ModelError::Syntax(e.to_string()))?;
    let obj = doc.as_object().ok_or_else(|| syntax("top level must be an object"))?;

    let mut timepoints = Vec::new();
    let mut index = HashMap::new();
    for (key, kind) in [
        ("controllables", TimepointKind::Controllable),
        ("uncontrollables", TimepointKind::Uncontrollable),
    ] {
        for v in optional_array(obj, key)? {
            let name = v.as_str().ok_or_else(|| syntax(&format!("`{key}` entries must be strings")))?;
            if index.insert(name.to_string(), TpId(timepoints.len() as u32)).is_some() {
                return Err(syntax(&format!("duplicate timepoint `{name}`")));
            }
            timepoints.push(Timepoint { name: name.to_string(), kind });
        }
    }
    let resolve = |v: &Value| -> Result<TpId, ModelError> {
        let name = v.as_str().ok_or_else(|| syntax("timepoint reference must be a string"))?;
        index.get(name).copied().ok_or_else(|| ModelError::UnknownTimepoint(name.to_string()))
    };

    let mut constraints = Vec::new();
    for (k, d) in optional_array(obj, "constraints")?.iter().enumerate() {
        let items = d.as_array().ok_or_else(|| syntax(&format!("constraint #{k} must be an array")))?;
        let mut conjuncts = Vec::with_capacity(items.len());
        for c in items {
            let c = c.as_object().ok_or_else(|| syntax("conjunct must be an object"))?;
            let lb = time_field(c, "lb")?;
            let ub = time_field(c, "ub")?;
            let kind = c.get("kind").and_then(Value::as_str).ok_or_else(|| syntax("conjunct needs `kind`"))?;
            conjuncts.push(match kind {
                "distance" => Conjunct::Distance {
                    to: resolve(c.get("to").ok_or_else(|| syntax("distance conjunct needs `to`"))?)?,
                    from: resolve(c.get("from").ok_or_else(|| syntax("distance conjunct needs `from`"))?)?,
                    lb,
                    ub,
                },
                "bounded" => Conjunct::Bounded {
                    tp: resolve(c.get("tp").ok_or_else(|| syntax("bounded conjunct needs `tp`"))?)?,
                    lb,
                    ub,
                },
                other => return Err(syntax(&format!("unknown conjunct kind `{other}`"))),
            });
        }
        constraints.push(Disjunct { conjuncts });
    }

    let mut contingencies = Vec::new();
    for l in optional_array(obj, "contingencies")? {
        let l = l.as_object().ok_or_else(|| syntax("contingency must be an object"))?;
        let source = resolve(l.get("source").ok_or_else(|| syntax("contingency needs `source`"))?)?;
        let target = resolve(l.get("target").ok_or_else(|| syntax("contingency needs `target`"))?)?;
        let raw = l
            .get("intervals")
            .and_then(Value::as_array)
            .ok_or_else(|| syntax("contingency needs `intervals`"))?;
        let mut intervals = Vec::with_capacity(raw.len());
        for iv in raw {
            match iv.as_array().map(Vec::as_slice) {
                Some([lb, ub]) => intervals.push(Interval::new(time_value(lb)?, time_value(ub)?)),
                _ => return Err(syntax("contingency interval must be a [lb, ub] pair")),
            }
        }
        contingencies.push(ContingencyLink { source, target, intervals });
    }

    Dtnu::new(timepoints, constraints, contingencies)
}

/// Writes the problem file format; `parse_dtnu` inverts it exactly.
pub fn serialize_dtnu(d: &Dtnu) -> String {
    let names = |kind| -> Vec<Value> {
        d.timepoints.iter().filter(|t| t.kind == kind).map(|t| Value::String(t.name.clone())).collect()
    };
    let constraints: Vec<Value> = d
        .constraints
        .iter()
        .map(|disj| {
            Value::Array(
                disj.conjuncts
                    .iter()
                    .map(|c| match *c {
                        Conjunct::Distance { to, from, lb, ub } => json!({
                            "kind": "distance", "to": d.name(to), "from": d.name(from),
                            "lb": lb.to_json(), "ub": ub.to_json()
                        }),
                        Conjunct::Bounded { tp, lb, ub } => json!({
                            "kind": "bounded", "tp": d.name(tp), "lb": lb.to_json(), "ub": ub.to_json()
                        }),
                        // validated instances never hold literals
                        Conjunct::True | Conjunct::False => unreachable!("resolved literal in Dtnu"),
                    })
                    .collect(),
            )
        })
        .collect();
    let contingencies: Vec<Value> = d
        .contingencies
        .iter()
        .map(|l| {
            json!({
                "source": d.name(l.source),
                "target": d.name(l.target),
                "intervals": l.intervals.iter().map(|iv| json!([iv.lb.to_json(), iv.ub.to_json()])).collect::<Vec<_>>()
            })
        })
        .collect();
    let doc = json!({
        "controllables": names(TimepointKind::Controllable),
        "uncontrollables": names(TimepointKind::Uncontrollable),
        "constraints": constraints,
        "contingencies": contingencies,
    });
    serde_json::to_string_pretty(&doc).expect("problem document serializes")
}

fn syntax(msg: &str) -> ModelError {
    ModelError::Syntax(msg.to_string())
}

fn optional_array<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a [Value], ModelError> {
    match obj.get(key) {
        None => Ok(&[]),
        Some(Value::Array(items)) => Ok(items),
        Some(_) => Err(syntax(&format!("`{key}` must be an array"))),
    }
}

fn time_value(v: &Value) -> Result<TimeValue, ModelError> {
    TimeValue::from_json(v).map_err(|e| ModelError::Syntax(e.to_string()))
}

fn time_field(obj: &Map<String, Value>, key: &str) -> Result<TimeValue, ModelError> {
    time_value(obj.get(key).ok_or_else(|| syntax(&format!("conjunct needs `{key}`")))?)
}
