//! Arena-backed AND/OR search tree with write-once truth values.

use std::collections::{BTreeMap, HashSet};

use crate::dtn::DtnSolution;
use crate::model::TpId;
use crate::time::Rational;

use super::outcomes::OutcomeSets;
use super::state::DtnuState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Truth {
    Unknown,
    True,
    False,
}

impl Truth {
    pub fn is_known(self) -> bool {
        self != Truth::Unknown
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Dtnu,
    DOr,
    Wait,
    WOr,
    And,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

/// How a DTNU node was reached from its parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Root,
    Schedule(TpId),
    /// the uncontrollables observed during the preceding wait
    Outcome(Vec<TpId>),
}

#[derive(Debug)]
pub(crate) enum Payload {
    Dtnu {
        action: Action,
        time: Rational,
        /// dropped once the node's subtree has been explored
        state: Option<Box<DtnuState>>,
        /// execution times for the remaining controllables at a leaf
        solution: Option<DtnSolution>,
        /// first DTNU node after the most recent wait
        chain_root: NodeId,
        /// controllables scheduled since `chain_root`, sorted
        chain_set: Vec<TpId>,
        /// at chain roots: every `chain_set` already created below
        memo: Option<HashSet<Vec<TpId>>>,
    },
    DOr {
        depth: u32,
    },
    Wait {
        delta: Rational,
        outcomes: Option<Box<OutcomeSets>>,
    },
    WOr,
    And {
        reactive: BTreeMap<TpId, Vec<TpId>>,
    },
}

#[derive(Debug)]
pub(crate) struct Node {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub truth: Truth,
    pub payload: Payload,
}

impl Node {
    pub fn kind(&self) -> NodeKind {
        match self.payload {
            Payload::Dtnu { .. } => NodeKind::Dtnu,
            Payload::DOr { .. } => NodeKind::DOr,
            Payload::Wait { .. } => NodeKind::Wait,
            Payload::WOr => NodeKind::WOr,
            Payload::And { .. } => NodeKind::And,
        }
    }
}

#[derive(Debug, Default)]
pub struct Tree {
    nodes: Vec<Option<Node>>,
    free: Vec<usize>,
    live: usize,
    peak: usize,
}

impl Tree {
    pub fn new() -> Self {
        Tree::default()
    }

    pub(crate) fn add(&mut self, parent: Option<NodeId>, payload: Payload) -> NodeId {
        let node = Node { parent, children: Vec::new(), truth: Truth::Unknown, payload };
        let id = match self.free.pop() {
            Some(slot) => {
                self.nodes[slot] = Some(node);
                NodeId(slot)
            }
            None => {
                self.nodes.push(Some(node));
                NodeId(self.nodes.len() - 1)
            }
        };
        if let Some(p) = parent {
            self.get_mut(p).children.push(id);
        }
        self.live += 1;
        self.peak = self.peak.max(self.live);
        id
    }

    pub(crate) fn get(&self, id: NodeId) -> &Node {
        self.nodes[id.0].as_ref().expect("freed node")
    }

    pub(crate) fn get_mut(&mut self, id: NodeId) -> &mut Node {
        self.nodes[id.0].as_mut().expect("freed node")
    }

    pub fn truth(&self, id: NodeId) -> Truth {
        self.get(id).truth
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.get(id).kind()
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.get(id).parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.get(id).children
    }

    /// Nodes currently allocated.
    pub fn live(&self) -> usize {
        self.live
    }

    /// Largest number of simultaneously allocated nodes.
    pub fn peak(&self) -> usize {
        self.peak
    }

    /// Write-once assignment. Returns whether the value changed; assigning a
    /// different value to an already decided node is a logic error.
    fn set(&mut self, id: NodeId, value: Truth) -> bool {
        let node = self.get_mut(id);
        match node.truth {
            Truth::Unknown => {
                node.truth = value;
                true
            }
            current => {
                assert_eq!(current, value, "conflicting truth assignment");
                false
            }
        }
    }

    /// Assigns `value` to `id` and pushes the consequences towards the root.
    pub fn assign(&mut self, id: NodeId, value: Truth) {
        assert!(value.is_known());
        if self.set(id, value) {
            self.propagate_truth(id);
        }
    }

    /// Re-evaluates the ancestors of `id`, which has just been decided.
    pub fn propagate_truth(&mut self, id: NodeId) {
        let mut child = id;
        while let Some(parent) = self.parent(child) {
            let value = self.truth(child);
            let derived = match self.kind(parent) {
                NodeKind::Dtnu | NodeKind::Wait => Some(value),
                NodeKind::DOr | NodeKind::WOr => match value {
                    Truth::True => Some(Truth::True),
                    _ if self.all_children(parent, Truth::False) => Some(Truth::False),
                    _ => None,
                },
                NodeKind::And => match value {
                    Truth::False => Some(Truth::False),
                    _ if self.all_children(parent, Truth::True) => Some(Truth::True),
                    _ => None,
                },
            };
            match derived {
                Some(v) if self.set(parent, v) => child = parent,
                _ => break,
            }
        }
    }

    fn all_children(&self, id: NodeId, value: Truth) -> bool {
        self.children(id).iter().all(|&c| self.truth(c) == value)
    }

    /// Releases everything below `id`, keeping `id` itself.
    pub fn free_descendants(&mut self, id: NodeId) {
        let mut stack = std::mem::take(&mut self.get_mut(id).children);
        while let Some(n) = stack.pop() {
            let node = self.nodes[n.0].take().expect("freed node");
            stack.extend(node.children);
            self.free.push(n.0);
            self.live -= 1;
        }
    }

    pub(crate) fn payload(&self, id: NodeId) -> &Payload {
        &self.get(id).payload
    }

    pub(crate) fn payload_mut(&mut self, id: NodeId) -> &mut Payload {
        &mut self.get_mut(id).payload
    }
}
