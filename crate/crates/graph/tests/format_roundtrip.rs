use std::collections::BTreeMap;

use ispforge_graph::{load, save, EdgeRef, FormatError, GraphModel, Node, NodeKind};
use ispforge_tensor::{Pad, Shape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Small conv → relu → depth_to_space model with enough variety to exercise
/// the manifest grammar.
fn sample_model(seed: u64) -> GraphModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = GraphModel::new("sample");
    m.metadata.insert("note".into(), "tabs\tand\nnewlines \\ too".into());
    m.inputs.push(("raw".into(), Shape::new(1, 4, 8, 8)));
    m.weights.insert(
        "c1.w".into(),
        Tensor::random_uniform(Shape::new(12, 4, 3, 3), &mut rng),
    );
    m.weights.insert(
        "c1.b".into(),
        Tensor::random_uniform(Shape::new(1, 12, 1, 1), &mut rng),
    );
    m.nodes.push(Node {
        id: "c1".into(),
        kind: NodeKind::Conv2d {
            stride: 1,
            pad: Pad::uniform(1),
            groups: 1,
            weight: "c1.w".into(),
            bias: Some("c1.b".into()),
        },
        inputs: vec![EdgeRef::input("raw")],
    });
    m.nodes.push(Node {
        id: "act".into(),
        kind: NodeKind::Relu,
        inputs: vec![EdgeRef::node("c1")],
    });
    m.nodes.push(Node {
        id: "up".into(),
        kind: NodeKind::DepthToSpace { block: 2 },
        inputs: vec![EdgeRef::node("act")],
    });
    m.nodes.push(Node {
        id: "out".into(),
        kind: NodeKind::Clamp { lo: 0.0, hi: 1.0 },
        inputs: vec![EdgeRef::node("up")],
    });
    m.outputs.push(("rgb".into(), EdgeRef::node("out")));
    m
}

#[test]
fn roundtrip_is_structurally_equal_and_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ispm");
    let m = sample_model(1);
    save(&m, &path).unwrap();
    let loaded = load(&path).unwrap();
    assert_eq!(m.name, loaded.name);
    assert_eq!(m.metadata, loaded.metadata);
    assert_eq!(m.inputs, loaded.inputs);
    assert_eq!(m.outputs, loaded.outputs);
    assert_eq!(m.nodes, loaded.nodes);
    assert_eq!(m.weights.len(), loaded.weights.len());
    for (name, t) in &m.weights {
        assert!(t.bits_eq(&loaded.weights[name]), "weight {name} differs");
    }
}

#[test]
fn roundtrip_preserves_execution_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ispm");
    let m = sample_model(2);
    save(&m, &path).unwrap();
    let loaded = load(&path).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = Tensor::random_uniform(Shape::new(1, 4, 8, 8), &mut rng);
    let a = m.execute_single(&x).unwrap();
    let b = loaded.execute_single(&x).unwrap();
    assert!(a.bits_eq(&b));
}

#[test]
fn save_is_deterministic_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let m = sample_model(3);
    let p1 = dir.path().join("a.ispm");
    let p2 = dir.path().join("b.ispm");
    save(&m, &p1).unwrap();
    save(&m, &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("a.ispw")).unwrap(),
        std::fs::read(dir.path().join("b.ispw")).unwrap()
    );
}

#[test]
fn truncated_blob_reports_size_then_checksum_catches_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ispm");
    let m = sample_model(4);
    save(&m, &path).unwrap();

    let wpath = dir.path().join("m.ispw");
    let blob = std::fs::read(&wpath).unwrap();
    std::fs::write(&wpath, &blob[..blob.len() - 8]).unwrap();
    assert!(matches!(load(&path), Err(FormatError::BlobSize { .. })));

    // same length, one byte flipped
    let mut corrupted = blob.clone();
    corrupted[10] ^= 0xFF;
    std::fs::write(&wpath, &corrupted).unwrap();
    assert!(matches!(load(&path), Err(FormatError::Checksum { .. })));
}

#[test]
fn unknown_node_kind_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ispm");
    let m = sample_model(5);
    save(&m, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replace(" relu ", " warp_drive ")).unwrap();
    match load(&path) {
        Err(FormatError::UnknownKind { kind, .. }) => assert_eq!(kind, "warp_drive"),
        other => panic!("expected UnknownKind, got {other:?}"),
    }
}

#[test]
fn version_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ispm");
    let m = sample_model(6);
    save(&m, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replace("ispforge-model/1", "ispforge-model/9")).unwrap();
    assert!(matches!(load(&path), Err(FormatError::Version { .. })));
}

#[test]
fn execute_on_rebound_input_shape() {
    let m = sample_model(7);
    let big = m.with_input_shape("raw", Shape::new(1, 4, 16, 16)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor::random_uniform(Shape::new(1, 4, 16, 16), &mut rng);
    let out = big.execute_single(&x).unwrap();
    assert_eq!(out.shape(), Shape::new(1, 3, 32, 32));
    let mut map = BTreeMap::new();
    map.insert("raw".to_string(), x);
    assert_eq!(big.execute(&map).unwrap()[0].0, "rgb");
}
