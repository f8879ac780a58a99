//! Edge-conditioned message passing over [`GraphEncoding`]s, in `f32`.
//!
//! Each layer computes, for every node `v`,
//! `h'(v) = act(bn(Σ_{w ∈ N(v)} M(e_vw) h(w)) + skip(h(v)))`
//! where `M(e) = reshape(W2 relu(W1 e + b1) + b2)` is an `out × in` matrix
//! and `act` is ReLU on every layer but the last. The output of the last
//! (width 1) layer goes through the logistic function.

use std::cmp::Ordering;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::encode::{GraphEncoding, EDGE_FEATURES, NODE_FEATURES};
use crate::ordering::Choice;

pub const DEFAULT_WIDTHS: [usize; 5] = [32, 32, 32, 32, 1];
pub const DEFAULT_HIDDEN: usize = 128;
pub const BN_EPSILON: f32 = 1e-5;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MpnnError {
    #[error("weight file: {0}")]
    FormatError(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("layer {0} has no batch-norm statistics")]
    MissingStatistics(usize),
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · x`
    fn apply(&self, x: &[f32]) -> Vec<f32> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    fn to_json(&self) -> Value {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    fn from_json(v: &Value, what: &str) -> Result<Self, MpnnError> {
        let rows = v.as_array().ok_or_else(|| format_error(&format!("`{what}` must be a matrix")))?;
        let mut data = Vec::new();
        let mut cols = None;
        for row in rows {
            let row = floats(row, what)?;
            if *cols.get_or_insert(row.len()) != row.len() {
                return Err(format_error(&format!("`{what}` has ragged rows")));
            }
            data.extend(row);
        }
        Ok(Matrix { rows: rows.len(), cols: cols.unwrap_or(0), data })
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn format_error(msg: &str) -> MpnnError {
    MpnnError::FormatError(msg.to_string())
}

fn mismatch(msg: String) -> MpnnError {
    MpnnError::DimensionMismatch(msg)
}

fn floats(v: &Value, what: &str) -> Result<Vec<f32>, MpnnError> {
    v.as_array()
        .ok_or_else(|| format_error(&format!("`{what}` must be a list of numbers")))?
        .iter()
        .map(|x| x.as_f64().map(|x| x as f32).ok_or_else(|| format_error(&format!("`{what}` must hold numbers"))))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub w1: Matrix,
    pub b1: Vec<f32>,
    pub w2: Matrix,
    pub b2: Vec<f32>,
    pub bn: BatchNorm,
    /// `out × in`; absent means identity when the widths agree
    pub skip_proj: Option<Matrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub node_feature_dim: usize,
    pub edge_feature_dim: usize,
    pub widths: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl Model {
    /// Checks the shape of every layer against the width chain.
    pub fn new(node_feature_dim: usize, edge_feature_dim: usize, widths: Vec<usize>, layers: Vec<Layer>) -> Result<Self, MpnnError> {
        if widths.is_empty() || widths.last() != Some(&1) {
            return Err(format_error("widths must be non-empty and end in 1"));
        }
        if widths.len() != layers.len() {
            return Err(format_error(&format!("{} widths but {} layers", widths.len(), layers.len())));
        }
        let mut input = node_feature_dim;
        for (k, (l, &out)) in layers.iter().zip(&widths).enumerate() {
            let hidden = l.w1.rows;
            let checks = [
                (l.w1.cols == edge_feature_dim, "w1 columns"),
                (l.b1.len() == hidden, "b1 length"),
                (l.w2.cols == hidden, "w2 columns"),
                (l.w2.rows == out * input, "w2 rows"),
                (l.b2.len() == out * input, "b2 length"),
            ];
            if let Some((_, what)) = checks.iter().find(|(ok, _)| !ok) {
                return Err(mismatch(format!("layer {k}: {what} (input width {input}, output width {out})")));
            }
            for (v, name) in [(&l.bn.mean, "mean"), (&l.bn.var, "var"), (&l.bn.gamma, "gamma"), (&l.bn.beta, "beta")] {
                if v.len() != out {
                    return Err(mismatch(format!("layer {k}: batch-norm {name} has {} entries, expected {out}", v.len())));
                }
            }
            if l.bn.var.iter().any(|&v| !(v > 0.0)) {
                return Err(format_error(&format!("layer {k}: batch-norm variance must be positive")));
            }
            if let Some(p) = &l.skip_proj {
                if (p.rows, p.cols) != (out, input) {
                    return Err(mismatch(format!("layer {k}: skip projection is {}x{}, expected {out}x{input}", p.rows, p.cols)));
                }
            }
            input = out;
        }
        Ok(Model { node_feature_dim, edge_feature_dim, widths, layers })
    }

    /// Every weight zero, unit variance; outputs 0.5 everywhere.
    pub fn zeros() -> Self {
        Self::generate(|_| 0.0)
    }

    /// Small random weights, for tests and smoke runs.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::generate(move |_| rng.gen_range(-0.3..0.3))
    }

    fn generate(mut f: impl FnMut(usize) -> f32) -> Self {
        let mut fill = |n: usize| (0..n).map(&mut f).collect::<Vec<f32>>();
        let mut input = NODE_FEATURES;
        let mut layers = Vec::new();
        for &out in &DEFAULT_WIDTHS {
            let layer = Layer {
                w1: Matrix { rows: DEFAULT_HIDDEN, cols: EDGE_FEATURES, data: fill(DEFAULT_HIDDEN * EDGE_FEATURES) },
                b1: fill(DEFAULT_HIDDEN),
                w2: Matrix { rows: out * input, cols: DEFAULT_HIDDEN, data: fill(out * input * DEFAULT_HIDDEN) },
                b2: fill(out * input),
                bn: BatchNorm { mean: vec![0.0; out], var: vec![1.0; out], gamma: vec![1.0; out], beta: vec![0.0; out] },
                skip_proj: (out != input).then(|| Matrix { rows: out, cols: input, data: fill(out * input) }),
            };
            layers.push(layer);
            input = out;
        }
        Model::new(NODE_FEATURES, EDGE_FEATURES, DEFAULT_WIDTHS.to_vec(), layers).expect("generated shapes are consistent")
    }
}

// ---------------------------------------------------------------- weight file

pub fn model_to_json(m: &Model) -> Value {
    json!({
        "meta": {"node_feature_dim": m.node_feature_dim, "edge_feature_dim": m.edge_feature_dim, "widths": m.widths},
        "layers": m.layers.iter().map(|l| {
            let mut obj = json!({
                "mlp": {"w1": l.w1.to_json(), "b1": l.b1, "w2": l.w2.to_json(), "b2": l.b2},
                "bn": {"mean": l.bn.mean, "var": l.bn.var, "gamma": l.bn.gamma, "beta": l.bn.beta},
            });
            if let Some(p) = &l.skip_proj {
                obj["skip_proj"] = p.to_json();
            }
            obj
        }).collect::<Vec<_>>(),
    })
}

/// Reads a weight file value; the width list must be the default one.
pub fn model_from_json(v: &Value) -> Result<Model, MpnnError> {
    model_from_json_with(v, Some(&DEFAULT_WIDTHS))
}

/// Like [`model_from_json`], checking the width list against `expected`
/// instead. `None` accepts any chain that ends in width 1.
pub fn model_from_json_with(v: &Value, expected: Option<&[usize]>) -> Result<Model, MpnnError> {
    let meta = v.get("meta").ok_or_else(|| format_error("missing `meta`"))?;
    let dim = |k: &str| meta.get(k).and_then(Value::as_u64).map(|x| x as usize).ok_or_else(|| format_error(&format!("missing `meta.{k}`")));
    let (node_dim, edge_dim) = (dim("node_feature_dim")?, dim("edge_feature_dim")?);
    let widths = meta
        .get("widths")
        .and_then(Value::as_array)
        .ok_or_else(|| format_error("missing `meta.widths`"))?
        .iter()
        .map(|w| w.as_u64().map(|w| w as usize).ok_or_else(|| format_error("widths must be integers")))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(expected) = expected {
        if widths != expected {
            return Err(format_error(&format!("widths {widths:?}, expected {expected:?}")));
        }
    }
    let raw = v.get("layers").and_then(Value::as_array).ok_or_else(|| format_error("missing `layers`"))?;
    let mut layers = Vec::new();
    for (k, l) in raw.iter().enumerate() {
        let mlp = l.get("mlp").ok_or_else(|| format_error(&format!("layer {k} has no `mlp`")))?;
        let field = |obj: &Value, name: &str| obj.get(name).cloned().ok_or_else(|| format_error(&format!("layer {k} is missing `{name}`")));
        let bn = l.get("bn").filter(|b| !b.is_null()).ok_or(MpnnError::MissingStatistics(k))?;
        let stat = |name: &str| bn.get(name).ok_or(MpnnError::MissingStatistics(k)).and_then(|x| floats(x, name));
        layers.push(Layer {
            w1: Matrix::from_json(&field(mlp, "w1")?, "w1")?,
            b1: floats(&field(mlp, "b1")?, "b1")?,
            w2: Matrix::from_json(&field(mlp, "w2")?, "w2")?,
            b2: floats(&field(mlp, "b2")?, "b2")?,
            bn: BatchNorm { mean: stat("mean")?, var: stat("var")?, gamma: stat("gamma")?, beta: stat("beta")? },
            skip_proj: match l.get("skip_proj") {
                None | Some(Value::Null) => None,
                Some(p) => Some(Matrix::from_json(p, "skip_proj")?),
            },
        });
    }
    Model::new(node_dim, edge_dim, widths, layers)
}

pub fn load_weights(path: &Path) -> Result<Model, MpnnError> {
    load_weights_with(path, Some(&DEFAULT_WIDTHS))
}

pub fn load_weights_with(path: &Path, expected: Option<&[usize]>) -> Result<Model, MpnnError> {
    let text = std::fs::read_to_string(path).map_err(|e| format_error(&format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| format_error(&e.to_string()))?;
    model_from_json_with(&v, expected)
}

// ---------------------------------------------------------------- inference

fn sigmoid(x: f32) -> f32 {
    let y = 1.0 / (1.0 + (-x).exp());
    // keep the value strictly inside (0, 1) even where f32 saturates
    y.clamp(f32::MIN_POSITIVE, 1.0 - f32::EPSILON / 2.0)
}

/// Sums vectors in an order that does not depend on node numbering, so that
/// relabeling a graph permutes the outputs exactly.
fn canonical_sum(mut parts: Vec<Vec<f32>>, width: usize) -> Vec<f32> {
    parts.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal));
    let mut acc = vec![0.0f32; width];
    for p in parts {
        for (a, x) in acc.iter_mut().zip(p) {
            *a += x;
        }
    }
    acc
}

/// Per-node probabilities.
pub fn forward(m: &Model, g: &GraphEncoding) -> Result<Vec<f32>, MpnnError> {
    let n = g.node_count();
    if let Some(bad) = g.node_features.iter().find(|f| f.len() != m.node_feature_dim) {
        return Err(mismatch(format!("node features have {} entries, model expects {}", bad.len(), m.node_feature_dim)));
    }
    if let Some(bad) = g.edges.iter().find(|e| e.features.len() != m.edge_feature_dim) {
        return Err(mismatch(format!("edge features have {} entries, model expects {}", bad.features.len(), m.edge_feature_dim)));
    }
    if let Some(bad) = g.edges.iter().find(|e| e.i >= n || e.j >= n) {
        return Err(mismatch(format!("edge ({}, {}) outside a graph of {n} nodes", bad.i, bad.j)));
    }

    let mut h: Vec<Vec<f32>> = g.node_features.clone();
    let mut input = m.node_feature_dim;
    for (k, (layer, &out)) in m.layers.iter().zip(&m.widths).enumerate() {
        let mut inbox: Vec<Vec<Vec<f32>>> = vec![Vec::new(); n];
        for e in &g.edges {
            let hidden: Vec<f32> = layer.w1.apply(&e.features).iter().zip(&layer.b1).map(|(x, b)| (x + b).max(0.0)).collect();
            let flat: Vec<f32> = layer.w2.apply(&hidden).iter().zip(&layer.b2).map(|(x, b)| x + b).collect();
            let edge = Matrix { rows: out, cols: input, data: flat };
            inbox[e.i].push(edge.apply(&h[e.j]));
            inbox[e.j].push(edge.apply(&h[e.i]));
        }
        let last = k + 1 == m.layers.len();
        let bn = &layer.bn;
        h = inbox
            .into_iter()
            .zip(&h)
            .map(|(messages, prev)| {
                let msg = canonical_sum(messages, out);
                let skip: Option<Vec<f32>> = match &layer.skip_proj {
                    Some(p) => Some(p.apply(prev)),
                    None if input == out => Some(prev.clone()),
                    None => None,
                };
                (0..out)
                    .map(|o| {
                        let mut y = bn.gamma[o] * (msg[o] - bn.mean[o]) / (bn.var[o] + BN_EPSILON).sqrt() + bn.beta[o];
                        if let Some(s) = &skip {
                            y += s[o];
                        }
                        if last {
                            y
                        } else {
                            y.max(0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        input = out;
    }
    Ok(h.into_iter().map(|v| sigmoid(v[0])).collect())
}

/// Orders d-OR children by descending probability. `choices` must be in
/// baseline order; ties keep that order. Beyond `max_depth` the baseline is
/// returned unchanged.
pub fn rank_children(g: &GraphEncoding, pi: &[f32], choices: &[Choice], depth: u32, max_depth: u32) -> Vec<Choice> {
    let mut ranked = choices.to_vec();
    if depth > max_depth {
        return ranked;
    }
    let score = |c: &Choice| g.node_of(*c).map_or(f32::NEG_INFINITY, |n| pi[n]);
    ranked.sort_by(|a, b| score(b).total_cmp(&score(a)));
    ranked
}
