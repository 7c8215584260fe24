use ispforge_metrics::LossSpec;
use ispforge_raw::{extract_patches, synth_raw, synth_rgb_image, SynthParams};
use ispforge_trainer::{fit, write_history_tsv, AdamConfig, FitOptions};

fn tiny_dataset(images: usize, seed: u64) -> Vec<ispforge_raw::PatchPair> {
    let mut pairs = Vec::new();
    for i in 0..images {
        let rgb = synth_rgb_image(32, 32, seed ^ i as u64);
        let frame = synth_raw(&rgb, &SynthParams::default(), seed ^ i as u64 ^ 0xAB).unwrap();
        pairs.extend(extract_patches(&frame, &rgb, 32, 32, None).unwrap());
    }
    pairs
}

#[test]
fn zero_steps_leaves_the_model_unchanged() {
    let model = ispforge_zoo::build_smallnet12(7);
    let model = model
        .with_input_shape("raw", ispforge_tensor::Shape::new(1, 4, 16, 16))
        .unwrap();
    let pairs = tiny_dataset(1, 1);
    let opts = FitOptions {
        steps: 0,
        ..Default::default()
    };
    let (trained, history) = fit(
        model.clone(),
        &pairs,
        &[],
        &LossSpec::l1_only(),
        &AdamConfig::default(),
        &opts,
    )
    .unwrap();
    assert!(history.is_empty());
    for (name, t) in &model.weights {
        assert!(t.bits_eq(&trained.weights[name]));
    }
}

#[test]
fn loss_decreases_on_a_single_sample() {
    let model = ispforge_zoo::build_smallnet12(3);
    let model = model
        .with_input_shape("raw", ispforge_tensor::Shape::new(1, 4, 16, 16))
        .unwrap();
    let pairs = tiny_dataset(1, 5);
    let opts = FitOptions {
        steps: 50,
        seed: 9,
        eval_every: 0,
        ..Default::default()
    };
    let adam = AdamConfig {
        lr: 1e-3,
        batch: 1,
        ..Default::default()
    };
    let (_, history) = fit(model, &pairs[..1], &[], &LossSpec::l1_only(), &adam, &opts).unwrap();
    let first = history.first().unwrap().loss;
    let last = history.last().unwrap().loss;
    assert!(
        last < first,
        "loss should decrease on one sample: {first} → {last}"
    );
}

#[test]
fn history_is_bit_reproducible() {
    let run = || {
        let model = ispforge_zoo::build_smallnet12(11);
        let model = model
            .with_input_shape("raw", ispforge_tensor::Shape::new(1, 4, 16, 16))
            .unwrap();
        let pairs = tiny_dataset(2, 3);
        let opts = FitOptions {
            steps: 12,
            seed: 21,
            eval_every: 6,
            ..Default::default()
        };
        let adam = AdamConfig {
            batch: 4,
            ..Default::default()
        };
        fit(
            model,
            &pairs,
            &pairs[..2],
            &LossSpec::l1_only(),
            &adam,
            &opts,
        )
        .unwrap()
    };
    let (m1, h1) = run();
    let (m2, h2) = run();
    assert_eq!(h1, h2);
    for (name, t) in &m1.weights {
        assert!(t.bits_eq(&m2.weights[name]));
    }

    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("h1.tsv");
    let p2 = dir.path().join("h2.tsv");
    write_history_tsv(&p1, &h1).unwrap();
    write_history_tsv(&p2, &h2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn masked_pretraining_runs_and_hands_off() {
    let model = ispforge_zoo::build_smallnet12(13);
    let model = model
        .with_input_shape("raw", ispforge_tensor::Shape::new(1, 4, 16, 16))
        .unwrap();
    let pairs = tiny_dataset(2, 7);
    let opts = FitOptions {
        steps: 10,
        seed: 1,
        eval_every: 0,
        pretrain_masked_steps: 5,
        ..Default::default()
    };
    let adam = AdamConfig {
        batch: 2,
        ..Default::default()
    };
    let (_, history) = fit(model, &pairs, &[], &LossSpec::l1_only(), &adam, &opts).unwrap();
    assert_eq!(history.len(), 10);
    assert!(history.iter().all(|r| r.loss.is_finite()));
}

#[test]
fn checkpoints_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let model = ispforge_zoo::build_smallnet12(17);
    let model = model
        .with_input_shape("raw", ispforge_tensor::Shape::new(1, 4, 16, 16))
        .unwrap();
    let pairs = tiny_dataset(1, 2);
    let opts = FitOptions {
        steps: 6,
        seed: 2,
        eval_every: 0,
        checkpoint_every: 3,
        out_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let adam = AdamConfig {
        batch: 1,
        ..Default::default()
    };
    fit(model, &pairs, &[], &LossSpec::l1_only(), &adam, &opts).unwrap();
    assert!(dir.path().join("ckpt_000003.ispm").exists());
    assert!(dir.path().join("ckpt_000006.ispw").exists());
    ispforge_graph::load(&dir.path().join("ckpt_000006.ispm")).unwrap();
}
