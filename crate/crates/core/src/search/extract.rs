use crate::model::{Dtnu, TpId};
use crate::strategy::{Strategy, StrategyNode, WaitStep};

use super::tree::{Action, NodeId, Payload, Tree, Truth};

/// Reads an execution strategy off a tree whose root is true.
pub fn extract_strategy(d: &Dtnu, tree: &Tree, root: NodeId) -> Strategy {
    assert_eq!(tree.truth(root), Truth::True, "only a true tree has a strategy");
    Strategy { root: chain(d, tree, root, Vec::new()) }
}

fn first_true(tree: &Tree, id: NodeId) -> NodeId {
    *tree
        .children(id)
        .iter()
        .find(|&&c| tree.truth(c) == Truth::True)
        .expect("a true OR node has a true child")
}

/// Collapses the DTNU/d-OR chain that starts at `id` into one strategy node.
fn chain(d: &Dtnu, tree: &Tree, id: NodeId, outcome: Vec<TpId>) -> StrategyNode {
    let Payload::Dtnu { time: start, .. } = *tree.payload(id) else { panic!("chains start at DTNU nodes") };
    let mut node = StrategyNode { outcome, start, executions: Vec::new(), wait: None };
    let mut cur = id;
    loop {
        let Payload::Dtnu { solution, .. } = tree.payload(cur) else { unreachable!() };
        let Some(&dor) = tree.children(cur).first() else {
            let solution = solution.as_ref().expect("true leaves carry a solution");
            let mut leaf: Vec<_> = solution.assignment.iter().map(|(&a, &t)| (a, t)).collect();
            leaf.sort_by_key(|&(a, t)| (t, a));
            node.executions.extend(leaf);
            return node;
        };
        let next = first_true(tree, dor);
        match tree.payload(next) {
            Payload::Dtnu { action: Action::Schedule(a), .. } => {
                node.executions.push((*a, start));
                cur = next;
            }
            Payload::Wait { delta, outcomes } => {
                let sets = outcomes.as_ref().expect("expanded wait");
                let wor = tree.children(next)[0];
                let and = first_true(tree, wor);
                let Payload::And { reactive } = tree.payload(and) else { unreachable!() };
                let branches = tree
                    .children(and)
                    .iter()
                    .map(|&c| {
                        let Payload::Dtnu { action: Action::Outcome(lambda), .. } = tree.payload(c) else {
                            unreachable!()
                        };
                        chain(d, tree, c, lambda.clone())
                    })
                    .collect();
                node.wait = Some(WaitStep {
                    end: start + delta,
                    watch: sets.watched(),
                    reactive: reactive.clone(),
                    branches,
                });
                return node;
            }
            _ => unreachable!("d-OR children are DTNU or WAIT nodes"),
        }
    }
}
