//! Depth-first AND/OR tree search for restricted time-based dynamic
//! controllability.
//!
//! Node kinds alternate as
//! `DTNU -> d-OR -> {DTNU (schedule a controllable now), WAIT}` and
//! `WAIT -> w-OR -> AND (reactive strategy) -> DTNU (one per outcome)`.
//! A DTNU node is true when the partial schedule can be completed whatever
//! the remaining uncontrollables do.

mod extract;
mod outcomes;
mod state;
mod tree;
mod wait;

use std::collections::HashSet;
use std::time::{Duration, Instant};

pub use extract::extract_strategy;
pub use outcomes::{enumerate_outcomes, enumerate_reactive, OutcomeSets, ReactiveChoice};
pub use state::DtnuState;
pub use tree::{Action, NodeId, NodeKind, Tree, Truth};
pub use wait::{eligible_wait, wait_duration, WaitComputation};

use crate::dtn::{solve_dtn_until, DtnProblem, DtnSolution};
use crate::model::{Dtnu, TpId};
use crate::ordering::{ChildOrdering, Choice, DorView, OrderingError, OrderingParams, OrderingRegistry};
use crate::propagation::Status;
use crate::strategy::Strategy;
use tree::Payload;

/// Optimizations that may be switched off individually; the verdict does
/// not depend on them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PruningRules {
    /// only expand children while the parent is undecided
    pub truth_checks: bool,
    /// prune DTNU nodes whose constraints are already violated
    pub constraint_check: bool,
    /// skip schedules that only permute controllables within one instant
    pub symmetry: bool,
}

impl PruningRules {
    pub const ALL: PruningRules = PruningRules { truth_checks: true, constraint_check: true, symmetry: true };
    pub const NONE: PruningRules = PruningRules { truth_checks: false, constraint_check: false, symmetry: false };
}

impl Default for PruningRules {
    fn default() -> Self {
        PruningRules::ALL
    }
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub timeout: Option<Duration>,
    /// name in the [`OrderingRegistry`]
    pub ordering: String,
    pub ordering_params: OrderingParams,
    pub rules: PruningRules,
    /// restricts the root d-OR node to a single child
    pub root_choice: Option<Choice>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            timeout: Some(Duration::from_secs(20)),
            ordering: "declaration".into(),
            ordering_params: OrderingParams { seed: 0, model: None, max_depth: 15 },
            rules: PruningRules::ALL,
            root_choice: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Rtdc(Strategy),
    NotRtdc,
    Timeout(Duration),
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Rtdc(_) => "rtdc",
            Verdict::NotRtdc => "not-rtdc",
            Verdict::Timeout(_) => "timeout",
        }
    }

    pub fn strategy(&self) -> Option<&Strategy> {
        match self {
            Verdict::Rtdc(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchReport {
    pub verdict: Verdict,
    pub elapsed: Duration,
    /// nodes expanded, of any kind
    pub expanded: u64,
    /// most tree nodes alive at once
    pub peak_nodes: usize,
}

/// Runs the search with the ordering named in `cfg`.
pub fn check_rtdc(d: &Dtnu, cfg: &SearchConfig) -> Result<SearchReport, OrderingError> {
    let ordering = OrderingRegistry::default().build(&cfg.ordering, &cfg.ordering_params)?;
    Ok(check_rtdc_with(d, cfg, ordering))
}

/// Runs the search with a caller-supplied ordering strategy.
pub fn check_rtdc_with(d: &Dtnu, cfg: &SearchConfig, ordering: Box<dyn ChildOrdering>) -> SearchReport {
    // recursion depth grows with the number of decisions; keep it off small
    // worker-thread stacks
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(256 << 20)
            .spawn_scoped(s, || run(d, cfg, ordering))
            .expect("spawn search thread")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    })
}

fn run(d: &Dtnu, cfg: &SearchConfig, ordering: Box<dyn ChildOrdering>) -> SearchReport {
    let started = Instant::now();
    let mut s = Searcher {
        d,
        cfg,
        order: ordering,
        tree: Tree::new(),
        deadline: cfg.timeout.map(|t| started + t),
        expanded: 0,
    };
    let root = s.tree.add(None, s.dtnu_payload(tree::Action::Root, crate::time::int(0), None, vec![]));
    s.set_chain_root(root);
    let outcome = s.explore(root);
    let elapsed = started.elapsed();
    let verdict = match (outcome, s.tree.truth(root)) {
        (Err(Interrupted), _) => Verdict::Timeout(elapsed),
        (Ok(()), Truth::True) => Verdict::Rtdc(extract_strategy(d, &s.tree, root)),
        (Ok(()), Truth::False) => Verdict::NotRtdc,
        (Ok(()), Truth::Unknown) => unreachable!("the root is decided once its subtree is explored"),
    };
    SearchReport { verdict, elapsed, expanded: s.expanded, peak_nodes: s.tree.peak() }
}

struct Interrupted;

fn state_of(tree: &Tree, dtnu: NodeId) -> &DtnuState {
    match tree.payload(dtnu) {
        Payload::Dtnu { state: Some(s), .. } => s,
        _ => panic!("DTNU state requested outside exploration"),
    }
}

struct Searcher<'a> {
    d: &'a Dtnu,
    cfg: &'a SearchConfig,
    order: Box<dyn ChildOrdering>,
    tree: Tree,
    deadline: Option<Instant>,
    expanded: u64,
}

impl Searcher<'_> {
    fn dtnu_payload(&self, action: Action, time: crate::time::Rational, chain_root: Option<NodeId>, chain_set: Vec<TpId>) -> Payload {
        Payload::Dtnu {
            action,
            time,
            state: None,
            solution: None,
            chain_root: chain_root.unwrap_or(NodeId(usize::MAX)),
            chain_set,
            memo: None,
        }
    }

    /// Makes `id` the root of its own scheduling chain.
    fn set_chain_root(&mut self, id: NodeId) {
        let symmetry = self.cfg.rules.symmetry;
        if let Payload::Dtnu { chain_root, memo, .. } = self.tree.payload_mut(id) {
            *chain_root = id;
            *memo = symmetry.then(HashSet::new);
        }
    }

    fn state(&self, dtnu: NodeId) -> &DtnuState {
        state_of(&self.tree, dtnu)
    }

    fn outcomes(&self, wait: NodeId) -> &OutcomeSets {
        match self.tree.payload(wait) {
            Payload::Wait { outcomes: Some(o), .. } => o,
            _ => panic!("outcomes requested before the wait was expanded"),
        }
    }

    fn up(&self, id: NodeId, steps: usize) -> NodeId {
        (0..steps).fold(id, |n, _| self.tree.parent(n).expect("missing ancestor"))
    }

    fn explore(&mut self, id: NodeId) -> Result<(), Interrupted> {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Interrupted);
        }
        self.expanded += 1;
        let result = match self.tree.kind(id) {
            NodeKind::Dtnu => self.explore_dtnu(id),
            NodeKind::DOr => self.explore_dor(id),
            NodeKind::Wait => self.explore_wait(id),
            NodeKind::WOr => self.explore_wor(id),
            NodeKind::And => self.explore_and(id),
        };
        if result.is_ok() && self.tree.truth(id) != Truth::True {
            self.tree.free_descendants(id);
        }
        result
    }

    fn explore_children(&mut self, id: NodeId) -> Result<(), Interrupted> {
        let children = self.tree.children(id).to_vec();
        for c in children {
            if self.cfg.rules.truth_checks && self.tree.truth(id).is_known() {
                break;
            }
            self.explore(c)?;
        }
        Ok(())
    }

    fn compute_state(&self, id: NodeId) -> DtnuState {
        let Payload::Dtnu { action, .. } = self.tree.payload(id) else { unreachable!() };
        match action {
            Action::Root => DtnuState::root(self.d),
            Action::Schedule(a) => self.state(self.up(id, 2)).schedule(self.d, *a),
            Action::Outcome(lambda) => {
                let and = self.up(id, 1);
                let wait = self.up(id, 3);
                let Payload::And { reactive } = self.tree.payload(and) else { unreachable!() };
                self.state(self.up(id, 5)).after_wait(self.outcomes(wait), lambda, reactive)
            }
        }
    }

    fn explore_dtnu(&mut self, id: NodeId) -> Result<(), Interrupted> {
        let state = self.compute_state(id);
        let t = state.time;
        let status = state.constraints.status();
        let rules = self.cfg.rules;

        let decided = if status == Status::Satisfied {
            let rest = state.unscheduled(self.d).map(|a| (a, t)).collect();
            Some((Truth::True, Some(DtnSolution { assignment: rest })))
        } else if status == Status::Violated && rules.constraint_check {
            Some((Truth::False, None))
        } else if state.all_occurred(self.d) {
            if status == Status::Violated {
                Some((Truth::False, None))
            } else {
                let problem = DtnProblem {
                    variables: state.unscheduled(self.d).collect(),
                    disjuncts: state.constraints.open().cloned().collect(),
                    floor: t,
                };
                match solve_dtn_until(&problem, self.deadline) {
                    Err(_) => return Err(Interrupted),
                    Ok(Some(sol)) => Some((Truth::True, Some(sol))),
                    Ok(None) => Some((Truth::False, None)),
                }
            }
        } else {
            None
        };

        if let Some((truth, leaf)) = decided {
            if let Payload::Dtnu { solution, .. } = self.tree.payload_mut(id) {
                *solution = leaf;
            }
            self.tree.assign(id, truth);
            return Ok(());
        }

        if let Payload::Dtnu { state: slot, .. } = self.tree.payload_mut(id) {
            *slot = Some(Box::new(state));
        }
        let depth = self.dor_depth(id);
        let dor = self.tree.add(Some(id), Payload::DOr { depth });
        let result = self.explore(dor);
        if let Payload::Dtnu { state, chain_root, memo, .. } = self.tree.payload_mut(id) {
            *state = None;
            if *chain_root == id {
                *memo = None;
            }
        }
        result
    }

    /// Depth of a d-OR child of `dtnu`; the root's d-OR node has depth 1.
    fn dor_depth(&self, dtnu: NodeId) -> u32 {
        let mut n = dtnu;
        while let Some(p) = self.tree.parent(n) {
            if let Payload::DOr { depth } = self.tree.payload(p) {
                return depth + 1;
            }
            n = p;
        }
        1
    }

    fn explore_dor(&mut self, id: NodeId) -> Result<(), Interrupted> {
        let Payload::DOr { depth } = *self.tree.payload(id) else { unreachable!() };
        let dtnu = self.up(id, 1);
        let state = state_of(&self.tree, dtnu);
        let wait = eligible_wait(state);

        let mut choices: Vec<Choice> = state.unscheduled(self.d).map(Choice::Schedule).collect();
        if wait.is_some() {
            choices.push(Choice::Wait);
        }
        if depth == 1 {
            if let Some(only) = self.cfg.root_choice {
                choices.retain(|c| *c == only);
            }
        }
        let view = DorView { dtnu: self.d, state, depth, wait };
        self.order.order(&view, &mut choices);
        let time = state.time;

        let Payload::Dtnu { chain_root, chain_set, .. } = self.tree.payload(dtnu) else { unreachable!() };
        let (chain_root, chain_set) = (*chain_root, chain_set.clone());
        for choice in choices {
            let payload = match choice {
                Choice::Schedule(a) => {
                    let mut key = chain_set.clone();
                    key.push(a);
                    key.sort();
                    if let Payload::Dtnu { memo: Some(memo), .. } = self.tree.payload_mut(chain_root) {
                        if !memo.insert(key.clone()) {
                            continue;
                        }
                    }
                    self.dtnu_payload(Action::Schedule(a), time, Some(chain_root), key)
                }
                Choice::Wait => Payload::Wait { delta: wait.expect("wait offered only when eligible"), outcomes: None },
            };
            self.tree.add(Some(id), payload);
        }

        if self.tree.children(id).is_empty() {
            self.tree.assign(id, Truth::False);
            return Ok(());
        }
        self.explore_children(id)
    }

    fn explore_wait(&mut self, id: NodeId) -> Result<(), Interrupted> {
        let Payload::Wait { delta, .. } = *self.tree.payload(id) else { unreachable!() };
        let sets = enumerate_outcomes(self.state(self.up(id, 2)), delta);
        if let Payload::Wait { outcomes, .. } = self.tree.payload_mut(id) {
            *outcomes = Some(Box::new(sets));
        }
        let wor = self.tree.add(Some(id), Payload::WOr);
        self.explore(wor)
    }

    fn explore_wor(&mut self, id: NodeId) -> Result<(), Interrupted> {
        let wait = self.up(id, 1);
        let choice = enumerate_reactive(self.d, self.state(self.up(id, 3)), self.outcomes(wait));
        for reactive in choice.strategies {
            self.tree.add(Some(id), Payload::And { reactive });
        }
        self.explore_children(id)
    }

    fn explore_and(&mut self, id: NodeId) -> Result<(), Interrupted> {
        let wait = self.up(id, 2);
        let sets = self.outcomes(wait);
        let time = self.state(self.up(id, 4)).time + sets.delta;
        let combinations = sets.combinations.clone();
        for lambda in combinations {
            let payload = self.dtnu_payload(Action::Outcome(lambda), time, None, vec![]);
            let child = self.tree.add(Some(id), payload);
            self.set_chain_root(child);
        }
        self.explore_children(id)
    }
}
