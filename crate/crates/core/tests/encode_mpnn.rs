mod common;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtdc_core::encode::{distance_class, graph_from_record, graph_to_record, to_graph, EncodeError, GraphEncoding, EDGE_FEATURES};
use rtdc_core::gen::{generate_dtnu, GeneratorConfig};
use rtdc_core::mpnn::{forward, load_weights, model_to_json, rank_children, Model, MpnnError};
use rtdc_core::ordering::Choice;
use rtdc_core::search::DtnuState;
use rtdc_core::{parse_dtnu, serialize_dtnu, Dtnu};
use serde_json::{json, Value};

fn generated_root(seed: u64) -> (Dtnu, GraphEncoding) {
    let d = generate_dtnu(&GeneratorConfig { seed, ..Default::default() });
    let g = to_graph(&d, &DtnuState::root(&d)).unwrap();
    (d, g)
}

#[test]
fn distance_class_boundaries() {
    let table = [(0.0, 0), (0.1, 1), (0.15, 1), (0.9, 9), (1.0, 9), (0.0999, 0), (0.5, 5)];
    for (x, class) in table {
        assert_eq!(distance_class(x), Ok(class), "x = {x}");
    }
    assert!(matches!(distance_class(1.0001), Err(EncodeError::OutOfRange(_))));
    assert!(matches!(distance_class(-0.01), Err(EncodeError::OutOfRange(_))));
}

#[test]
fn encoded_values_are_well_formed() {
    for seed in 0..40 {
        let (d, g) = generated_root(seed);
        let adj = g.adjacency();
        for (i, row) in adj.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                assert_eq!(a, adj[j][i]);
            }
        }
        for e in &g.edges {
            assert!(e.i < e.j);
            assert_eq!(e.features.len(), EDGE_FEATURES);
            assert!(e.features.iter().all(|&x| x == 0.0 || x == 1.0));
            assert_eq!(e.features[..10].iter().sum::<f32>(), 1.0);
            assert_eq!(e.features[10..20].iter().sum::<f32>(), 1.0);
            assert_eq!(e.features[20..23].iter().sum::<f32>(), 1.0);
        }
        let mut seen: Vec<usize> = g.active.iter().map(|a| a.0).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), g.active.len());
        assert_eq!(to_graph(&d, &DtnuState::root(&d)).unwrap(), g);
    }
}

type Signature = (Vec<u32>, Vec<(Vec<u32>, Vec<u32>)>);

/// Node signature independent of numbering: own features and the sorted
/// list of (edge features, neighbor features).
fn signatures(g: &GraphEncoding) -> Vec<Signature> {
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    (0..g.node_count())
        .map(|v| {
            let mut around: Vec<_> = g
                .edges
                .iter()
                .filter_map(|e| {
                    let w = if e.i == v { e.j } else if e.j == v { e.i } else { return None };
                    Some((bits(&e.features), bits(&g.node_features[w])))
                })
                .collect();
            around.sort();
            (bits(&g.node_features[v]), around)
        })
        .collect()
}

#[test]
fn relabeling_timepoints_gives_isomorphic_graph() {
    for seed in 0..20 {
        let (d, g) = generated_root(seed);
        let mut doc: Value = serde_json::from_str(&serialize_dtnu(&d)).unwrap();
        doc["controllables"].as_array_mut().unwrap().reverse();
        let e = parse_dtnu(&doc.to_string()).unwrap();
        let h = to_graph(&e, &DtnuState::root(&e)).unwrap();

        let (sg, sh) = (signatures(&g), signatures(&h));
        let (mut a, mut b) = (sg.clone(), sh.clone());
        a.sort();
        b.sort();
        assert_eq!(a, b, "seed {seed}");

        let named = |d: &Dtnu, g: &GraphEncoding, s: &[Signature]| -> BTreeMap<String, Signature> {
            g.active
                .iter()
                .map(|&(n, c)| {
                    let name = match c {
                        Choice::Schedule(x) => d.name(x).to_string(),
                        Choice::Wait => "WAIT".into(),
                    };
                    (name, s[n].clone())
                })
                .collect()
        };
        assert_eq!(named(&d, &g, &sg), named(&e, &h, &sh));
    }
}

#[test]
fn graph_record_roundtrip() {
    for seed in 0..10 {
        let (d, g) = generated_root(seed);
        let text = graph_to_record(&d, &g).to_string();
        let back = graph_from_record(&d, &serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, g);
    }
    let (d, _) = generated_root(0);
    let bad = json!({"node_features": [[1, 0, 0, 0, 0]], "edges": [{"i": 0, "j": 0, "features": []}], "active": []});
    assert!(matches!(graph_from_record(&d, &bad), Err(EncodeError::Record(_))));
}

#[test]
fn forward_matches_f64_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..20 {
        // keep activations near unit scale so f32 rounding stays small
        let mut m = Model::random(k);
        for l in &mut m.layers {
            l.w2.data.iter_mut().for_each(|x| *x *= 0.1);
        }
        let g = if k % 2 == 0 { common::random_graph(&mut rng) } else { generated_root(k).1 };
        let got = forward(&m, &g).unwrap();
        let want = common::naive_forward(&m, &g);
        let worst = got.iter().zip(&want).map(|(a, b)| (*a as f64 - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-5, "graph {k}: {worst:e}");
    }
}

#[test]
fn forward_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = Model::random(4);
    for _ in 0..50 {
        let g = common::random_graph(&mut rng);
        let mut perm: Vec<usize> = (0..g.node_count()).collect();
        perm.shuffle(&mut rng);
        let pg = common::permute_graph(&g, &perm);
        let (a, b) = (forward(&m, &g).unwrap(), forward(&m, &pg).unwrap());
        for v in 0..perm.len() {
            assert_eq!(a[v].to_bits(), b[perm[v]].to_bits());
        }
    }
}

#[test]
fn zero_model_is_one_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        assert!(forward(&Model::zeros(), &common::random_graph(&mut rng)).unwrap().iter().all(|&p| p == 0.5));
    }
}

#[test]
fn isolated_node_sees_empty_sum() {
    let mut m = Model::random(8);
    for l in &mut m.layers {
        l.bn.mean.iter_mut().for_each(|x| *x = 0.0);
        l.bn.beta.iter_mut().for_each(|x| *x = 0.0);
        if let Some(p) = &mut l.skip_proj {
            p.data.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut g = common::random_graph(&mut rng);
    let lonely = g.node_count();
    g.node_features.push(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    let pi = forward(&m, &g).unwrap();
    assert_eq!(pi[lonely], 0.5);
    assert!(pi.iter().all(|&p| p > 0.0 && p < 1.0));
}

#[test]
fn ranking_is_a_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..20 {
        let (d, g) = generated_root(seed);
        let pi: Vec<f32> = (0..g.node_count()).map(|_| rng.gen()).collect();
        let choices: Vec<Choice> = d.controllables().map(Choice::Schedule).chain([Choice::Wait]).collect();
        let mut ranked = rank_children(&g, &pi, &choices, 1, 15);
        assert!(ranked.windows(2).all(|w| pi[g.node_of(w[0]).unwrap()] >= pi[g.node_of(w[1]).unwrap()]));
        ranked.sort_by_key(|c| format!("{c:?}"));
        let mut sorted = choices.clone();
        sorted.sort_by_key(|c| format!("{c:?}"));
        assert_eq!(ranked, sorted);
    }
}

fn write_temp(name: &str, v: &Value) -> std::path::PathBuf {
    let path = std::env::temp_dir().join(format!("rtdc-{}-{name}.json", std::process::id()));
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn weight_file_interface() {
    let m = Model::random(6);
    let path = write_temp("ok", &model_to_json(&m));
    let loaded = load_weights(&path).unwrap();
    assert_eq!(loaded.layers.len(), 5);
    assert_eq!(loaded.widths, vec![32, 32, 32, 32, 1]);
    assert_eq!(loaded, m);

    // a 16-input layer after a 32-wide one
    let mut v = model_to_json(&m);
    let hidden = v["layers"][1]["mlp"]["w2"][0].as_array().unwrap().len();
    v["layers"][1]["mlp"]["w2"] = json!(vec![vec![0.0; hidden]; 32 * 16]);
    v["layers"][1]["mlp"]["b2"] = json!(vec![0.0; 32 * 16]);
    assert!(matches!(load_weights(&write_temp("dim", &v)), Err(MpnnError::DimensionMismatch(_))));

    let mut v = model_to_json(&m);
    v["layers"][0].as_object_mut().unwrap().remove("bn");
    assert_eq!(load_weights(&write_temp("bn", &v)), Err(MpnnError::MissingStatistics(0)));

    let mut v = model_to_json(&m);
    v["layers"].as_array_mut().unwrap().remove(2);
    v["meta"]["widths"] = json!([32, 32, 32, 1]);
    assert!(matches!(load_weights(&write_temp("four", &v)), Err(MpnnError::FormatError(_))));

    assert!(matches!(load_weights(std::path::Path::new("/nonexistent/w.json")), Err(MpnnError::FormatError(_))));
}
