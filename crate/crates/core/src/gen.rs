//! Random instance generation and self-supervised labeling of root
//! decisions.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::encode::{graph_to_record, to_graph, EncodeError, GraphEncoding};
use crate::model::{Conjunct, ContingencyLink, Disjunct, Dtnu, Interval, Timepoint, TimepointKind, TpId};
use crate::ordering::{Choice, OrderingParams};
use crate::search::{check_rtdc, eligible_wait, DtnuState, PruningRules, SearchConfig, Verdict};
use crate::time::{Rational, TimeValue};

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub controllables: (usize, usize),
    pub uncontrollables: (usize, usize),
    /// bounds are drawn from this range with two decimals
    pub bounds: (i64, i64),
    pub max_conjuncts: usize,
    /// chance that an already constrained timepoint gets another disjunct
    pub extra_disjunct_prob: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            controllables: (10, 20),
            uncontrollables: (1, 3),
            bounds: (0, 100),
            max_conjuncts: 5,
            extra_disjunct_prob: 0.2,
            seed: 0,
        }
    }
}

fn draw_bound(rng: &mut impl Rng, (lo, hi): (i64, i64)) -> Rational {
    Rational::new(rng.gen_range(lo * 100..=hi * 100) as i128, 100)
}

fn draw_interval(rng: &mut impl Rng, range: (i64, i64)) -> (TimeValue, TimeValue) {
    let (a, b) = (draw_bound(rng, range), draw_bound(rng, range));
    (TimeValue::Finite(a.min(b)), TimeValue::Finite(a.max(b)))
}

fn draw_conjunct(rng: &mut impl Rng, cfg: &GeneratorConfig, v: TpId, n: usize) -> Conjunct {
    let (lb, ub) = draw_interval(rng, cfg.bounds);
    if n > 1 && rng.gen_bool(0.5) {
        let mut other = rng.gen_range(0..n - 1) as u32;
        if other >= v.0 {
            other += 1;
        }
        Conjunct::distance(v, TpId(other), lb, ub)
    } else {
        Conjunct::bounded(v, lb, ub)
    }
}

/// A random instance; the same configuration always yields the same instance.
pub fn generate_dtnu(cfg: &GeneratorConfig) -> Dtnu {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n1 = rng.gen_range(cfg.controllables.0..=cfg.controllables.1);
    let n2 = rng.gen_range(cfg.uncontrollables.0..=cfg.uncontrollables.1).min(n1);
    let n = n1 + n2;
    let mut timepoints: Vec<Timepoint> =
        (1..=n1).map(|i| Timepoint { name: format!("a{i}"), kind: TimepointKind::Controllable }).collect();
    timepoints.extend((1..=n2).map(|i| Timepoint { name: format!("u{i}"), kind: TimepointKind::Uncontrollable }));

    let mut appears = vec![false; n];
    let mut sources: Vec<u32> = (0..n1 as u32).collect();
    let mut contingencies = Vec::new();
    for k in 0..n2 {
        let source = TpId(sources.swap_remove(rng.gen_range(0..sources.len())));
        let target = TpId((n1 + k) as u32);
        let (lb, ub) = draw_interval(&mut rng, cfg.bounds);
        appears[source.index()] = true;
        appears[target.index()] = true;
        contingencies.push(ContingencyLink { source, target, intervals: vec![Interval::new(lb, ub)] });
    }

    let mut constraints = Vec::new();
    for i in 0..n {
        if appears[i] && !rng.gen_bool(cfg.extra_disjunct_prob) {
            continue;
        }
        let v = TpId(i as u32);
        let size = rng.gen_range(1..=cfg.max_conjuncts);
        let mut conjuncts = vec![draw_conjunct(&mut rng, cfg, v, n)];
        for _ in 1..size {
            let w = TpId(rng.gen_range(0..n) as u32);
            conjuncts.push(draw_conjunct(&mut rng, cfg, w, n));
        }
        for c in &conjuncts {
            for tp in c.timepoints() {
                appears[tp.index()] = true;
            }
        }
        constraints.push(Disjunct::new(conjuncts));
    }
    Dtnu::new(timepoints, constraints, contingencies).expect("generated instances are well formed")
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelingConfig {
    /// explorations per root child
    pub runs: usize,
    /// time limit per exploration
    pub timeout: Duration,
    pub seed: u64,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        LabelingConfig { runs: 25, timeout: Duration::from_secs(3), seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Label {
    pub node: usize,
    pub y: u8,
    /// every exploration of this child timed out
    pub timeout: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub graph: GraphEncoding,
    /// one per active node, in `graph.active` order
    pub labels: Vec<Label>,
    pub seed: u64,
}

impl TrainingExample {
    pub fn to_record(&self, d: &Dtnu) -> Value {
        let mut v = graph_to_record(d, &self.graph);
        v["labels"] = self.labels.iter().map(|l| json!({"node": l.node, "y": l.y, "timeout": l.timeout})).collect();
        v["seed"] = json!(self.seed);
        v
    }
}

/// Labels every child of the root d-OR node by exploring it with random
/// orderings below. A choice the root does not offer (WAIT without a
/// milestone) is labeled 0.
pub fn label_instance(d: &Dtnu, seed: u64, lcfg: &LabelingConfig) -> Result<TrainingExample, EncodeError> {
    let root = DtnuState::root(d);
    let graph = to_graph(d, &root)?;
    let wait_offered = eligible_wait(&root).is_some();
    let mut labels = Vec::with_capacity(graph.active.len());
    for (k, &(node, choice)) in graph.active.iter().enumerate() {
        if choice == Choice::Wait && !wait_offered {
            labels.push(Label { node, y: 0, timeout: false });
            continue;
        }
        let mut label = Label { node, y: 0, timeout: true };
        for run in 0..lcfg.runs {
            let cfg = SearchConfig {
                timeout: Some(lcfg.timeout),
                ordering: "random".into(),
                ordering_params: OrderingParams {
                    seed: lcfg.seed ^ ((k as u64) << 32) ^ run as u64,
                    model: None,
                    max_depth: 0,
                },
                rules: PruningRules::ALL,
                root_choice: Some(choice),
            };
            match check_rtdc(d, &cfg).expect("random ordering is registered").verdict {
                Verdict::Rtdc(_) => {
                    label = Label { node, y: 1, timeout: false };
                    break;
                }
                Verdict::NotRtdc => {
                    label = Label { node, y: 0, timeout: false };
                    break;
                }
                Verdict::Timeout(_) => {}
            }
        }
        labels.push(label);
    }
    Ok(TrainingExample { graph, labels, seed })
}

/// Structural check of one dataset line.
pub fn validate_record(v: &Value) -> Result<(), String> {
    let nodes = v.get("node_features").and_then(Value::as_array).ok_or("missing node_features")?;
    let active: Vec<u64> = v
        .get("active")
        .and_then(Value::as_array)
        .ok_or("missing active")?
        .iter()
        .map(|a| a.get("node").and_then(Value::as_u64).ok_or("active entry needs a node"))
        .collect::<Result<_, _>>()?;
    let labels = v.get("labels").and_then(Value::as_array).ok_or("missing labels")?;
    if labels.len() != active.len() {
        return Err(format!("{} labels for {} active nodes", labels.len(), active.len()));
    }
    for (l, a) in labels.iter().zip(&active) {
        if l.get("node").and_then(Value::as_u64) != Some(*a) {
            return Err("labels must follow the active node order".into());
        }
        if !matches!(l.get("y").and_then(Value::as_u64), Some(0 | 1)) {
            return Err("label y must be 0 or 1".into());
        }
        if *a as usize >= nodes.len() {
            return Err("active node out of range".into());
        }
    }
    v.get("seed").and_then(Value::as_u64).ok_or("missing seed")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_links() {
        for seed in 0..50 {
            let d = generate_dtnu(&GeneratorConfig { seed, ..Default::default() });
            let n1 = d.controllables().count();
            let n2 = d.uncontrollables().count();
            assert!((10..=20).contains(&n1) && (1..=3).contains(&n2));
            let mut sources: Vec<_> = d.contingencies().iter().map(|l| l.source).collect();
            sources.sort();
            sources.dedup();
            assert_eq!(sources.len(), n2);
            assert!(d.constraints().iter().all(|c| (1..=5).contains(&c.conjuncts.len())));
        }
    }

    #[test]
    fn seeded() {
        let cfg = GeneratorConfig { seed: 42, ..Default::default() };
        assert_eq!(generate_dtnu(&cfg), generate_dtnu(&cfg));
    }

    #[test]
    fn every_timepoint_appears() {
        for seed in 0..50 {
            let d = generate_dtnu(&GeneratorConfig { seed, ..Default::default() });
            let mut seen = vec![false; d.len()];
            for c in d.constraints().iter().flat_map(|c| &c.conjuncts) {
                c.timepoints().for_each(|t| seen[t.index()] = true);
            }
            for l in d.contingencies() {
                seen[l.source.index()] = true;
                seen[l.target.index()] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }
}
