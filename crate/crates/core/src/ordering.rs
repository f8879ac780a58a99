//! Child-ordering strategies for d-OR nodes, selected by name.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encode::to_graph;
use crate::model::{Dtnu, TpId};
use crate::mpnn::{forward, rank_children, Model};
use crate::search::DtnuState;
use crate::time::Rational;

/// A child of a d-OR node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Choice {
    Schedule(TpId),
    Wait,
}

/// What an ordering strategy may inspect.
pub struct DorView<'a> {
    pub dtnu: &'a Dtnu,
    pub state: &'a DtnuState,
    /// 1 at the root d-OR node
    pub depth: u32,
    pub wait: Option<Rational>,
}

pub trait ChildOrdering: Send {
    fn name(&self) -> &str;

    /// Reorders `choices`, which arrive in declaration order with WAIT last.
    fn order(&mut self, view: &DorView<'_>, choices: &mut Vec<Choice>);
}

pub struct DeclarationOrder;

impl ChildOrdering for DeclarationOrder {
    fn name(&self) -> &str {
        "declaration"
    }

    fn order(&mut self, _: &DorView<'_>, _: &mut Vec<Choice>) {}
}

pub struct RandomOrder {
    rng: ChaCha8Rng,
}

impl RandomOrder {
    pub fn new(seed: u64) -> Self {
        RandomOrder { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl ChildOrdering for RandomOrder {
    fn name(&self) -> &str {
        "random"
    }

    fn order(&mut self, _: &DorView<'_>, choices: &mut Vec<Choice>) {
        choices.shuffle(&mut self.rng);
    }
}

/// Ranks children with a trained network up to `max_depth`, deferring to
/// `fallback` below that and whenever the graph cannot be normalized.
pub struct LearnedOrder {
    model: Arc<Model>,
    max_depth: u32,
    fallback: Box<dyn ChildOrdering>,
}

impl LearnedOrder {
    pub fn new(model: Arc<Model>, max_depth: u32, fallback: Box<dyn ChildOrdering>) -> Self {
        LearnedOrder { model, max_depth, fallback }
    }
}

impl ChildOrdering for LearnedOrder {
    fn name(&self) -> &str {
        "mpnn"
    }

    fn order(&mut self, view: &DorView<'_>, choices: &mut Vec<Choice>) {
        if view.depth <= self.max_depth {
            if let Ok(graph) = to_graph(view.dtnu, view.state) {
                if let Ok(pi) = forward(&self.model, &graph) {
                    *choices = rank_children(&graph, &pi, choices, view.depth, self.max_depth);
                    return;
                }
            }
        }
        self.fallback.order(view, choices);
    }
}

#[derive(Clone, Default)]
pub struct OrderingParams {
    pub seed: u64,
    pub model: Option<Arc<Model>>,
    pub max_depth: u32,
}

impl fmt::Debug for OrderingParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OrderingParams")
            .field("seed", &self.seed)
            .field("model", &self.model.is_some())
            .field("max_depth", &self.max_depth)
            .finish()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OrderingError {
    #[error("unknown ordering `{0}`")]
    Unknown(String),
    #[error("ordering `{0}` needs a weight file")]
    MissingModel(String),
}

pub type OrderingFactory = fn(&OrderingParams) -> Result<Box<dyn ChildOrdering>, OrderingError>;

pub struct OrderingRegistry {
    factories: BTreeMap<String, OrderingFactory>,
}

impl Default for OrderingRegistry {
    fn default() -> Self {
        let mut r = OrderingRegistry { factories: BTreeMap::new() };
        r.register("declaration", |_| Ok(Box::new(DeclarationOrder)));
        r.register("random", |p| Ok(Box::new(RandomOrder::new(p.seed))));
        r.register("mpnn", |p| {
            let model = p.model.clone().ok_or_else(|| OrderingError::MissingModel("mpnn".into()))?;
            Ok(Box::new(LearnedOrder::new(model, p.max_depth, Box::new(DeclarationOrder))))
        });
        r
    }
}

impl OrderingRegistry {
    pub fn register(&mut self, name: &str, factory: OrderingFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &OrderingParams) -> Result<Box<dyn ChildOrdering>, OrderingError> {
        let factory = self.factories.get(name).ok_or_else(|| OrderingError::Unknown(name.to_string()))?;
        factory(params)
    }
}
