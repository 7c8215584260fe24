//! Seeded mini-batch training loop with periodic held-out evaluation,
//! optional masked-raw pretraining and checkpointing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ispforge_graph::GraphModel;
use ispforge_metrics::{psnr, ssim, LossSpec};
use ispforge_raw::{mask_patches, PatchPair};
use ispforge_tensor::{io::atomic_write, Shape, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adam::{AdamConfig, TrainState};
use crate::backward::backward;
use crate::TrainError;

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub steps: u64,
    pub seed: u64,
    /// Evaluate on the held-out split every this many steps (and at the end).
    pub eval_every: u64,
    /// Write a checkpoint every this many steps; 0 disables.
    pub checkpoint_every: u64,
    pub out_dir: Option<PathBuf>,
    /// Warm-up steps on the masked-raw recovery task (L1 loss) before the
    /// main objective.
    pub pretrain_masked_steps: u64,
    pub mask_fraction: f32,
    pub mask_cell: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            steps: 2000,
            seed: 0,
            eval_every: 100,
            checkpoint_every: 0,
            out_dir: None,
            pretrain_masked_steps: 0,
            mask_fraction: 0.5,
            mask_cell: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub step: u64,
    pub loss: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

/// Train `model` on patch pairs. Returns the trained model and the per-step
/// history; bit-reproducible for a fixed seed (single-threaded).
pub fn fit(
    model: GraphModel,
    train: &[PatchPair],
    val: &[PatchPair],
    spec: &LossSpec,
    adam: &AdamConfig,
    opts: &FitOptions,
) -> Result<(GraphModel, Vec<HistoryRow>), TrainError> {
    adam.validate()?;
    if train.is_empty() {
        return Err(TrainError::BadArgument("empty training set".into()));
    }
    if model.inputs.len() != 1 {
        return Err(TrainError::BadArgument(
            "fit expects a single-input model".into(),
        ));
    }
    let raw_shape = train[0].raw.shape();
    let rgb_shape = train[0].rgb.shape();
    for (i, p) in train.iter().enumerate() {
        if p.raw.shape() != raw_shape || p.rgb.shape() != rgb_shape {
            return Err(TrainError::BadArgument(format!(
                "pair {i} has inconsistent shape {} / {}",
                p.raw.shape(),
                p.rgb.shape()
            )));
        }
    }
    let port = model.inputs[0].0.clone();
    let batch = adam.batch.min(train.len());
    let batch_shape = Shape::new(batch, raw_shape.c, raw_shape.h, raw_shape.w);
    let batched = model.with_input_shape(&port, batch_shape)?;
    let mut state = TrainState::new(batched);
    let mut history = Vec::new();
    if opts.steps == 0 {
        let final_model = state.model.with_input_shape(&port, raw_shape)?;
        return Ok((final_model, history));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut indices: Vec<usize> = (0..train.len()).collect();
    let mut cursor = indices.len(); // trigger shuffle on first use

    for step in 1..=opts.steps {
        // assemble the batch, reshuffling at epoch boundaries
        let mut batch_raw = Tensor::zeros(batch_shape);
        let mut batch_rgb = Tensor::zeros(Shape::new(batch, rgb_shape.c, rgb_shape.h, rgb_shape.w));
        for b in 0..batch {
            if cursor >= indices.len() {
                indices.shuffle(&mut rng);
                cursor = 0;
            }
            let pair = &train[indices[cursor]];
            cursor += 1;
            copy_sample(&mut batch_raw, b, &pair.raw);
            copy_sample(&mut batch_rgb, b, &pair.rgb);
        }

        let pretraining = step <= opts.pretrain_masked_steps;
        let (step_spec, input_raw) = if pretraining {
            let (masked, _) = mask_patches(
                &batch_raw,
                opts.mask_cell,
                opts.mask_fraction,
                opts.seed ^ step ^ 0x6D61_736B,
            )?;
            (LossSpec::l1_only(), masked)
        } else {
            (spec.clone(), batch_raw)
        };

        let mut inputs = BTreeMap::new();
        inputs.insert(port.clone(), input_raw);
        let result = backward(&state.model, &inputs, &batch_rgb, &step_spec)?;
        state.adam_step(adam, &result.grads)?;
        if !result.loss.is_finite() || !state.weights_finite() {
            return Err(TrainError::NonFinite { step });
        }

        let eval_now = !val.is_empty()
            && opts.eval_every > 0
            && (step % opts.eval_every == 0 || step == opts.steps);
        let (psnr_v, ssim_v) = if eval_now {
            let eval_model = state.model.with_input_shape(&port, raw_shape)?;
            let (p, s) = eval_mean_metrics(&eval_model, val)?;
            (Some(p), Some(s))
        } else {
            (None, None)
        };
        history.push(HistoryRow {
            step,
            loss: result.loss,
            psnr: psnr_v,
            ssim: ssim_v,
        });

        if opts.checkpoint_every > 0 && step % opts.checkpoint_every == 0 {
            if let Some(dir) = &opts.out_dir {
                let ckpt = state.model.with_input_shape(&port, raw_shape)?;
                ispforge_graph::save(&ckpt, &dir.join(format!("ckpt_{step:06}.ispm")))?;
            }
        }
    }

    let final_model = state.model.with_input_shape(&port, raw_shape)?;
    Ok((final_model, history))
}

fn copy_sample(batch: &mut Tensor, b: usize, sample: &Tensor) {
    let s = sample.shape();
    for c in 0..s.c {
        batch.plane_mut(b, c).copy_from_slice(sample.plane(0, c));
    }
}

/// Mean PSNR/SSIM of a model over patch pairs, evaluated one pair at a time.
pub fn eval_mean_metrics(model: &GraphModel, pairs: &[PatchPair]) -> Result<(f64, f64), TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::BadArgument("empty evaluation set".into()));
    }
    let mut psnr_sum = 0.0;
    let mut ssim_sum = 0.0;
    for pair in pairs {
        let pred = model.execute_single(&pair.raw)?;
        psnr_sum += psnr(&pred, &pair.rgb)?;
        ssim_sum += ssim(&pred, &pair.rgb)?;
    }
    Ok((psnr_sum / pairs.len() as f64, ssim_sum / pairs.len() as f64))
}

/// TSV history: step, loss, psnr, ssim (metric columns empty between evals).
pub fn write_history_tsv(path: &Path, rows: &[HistoryRow]) -> Result<(), TrainError> {
    let mut out = String::from("step\tloss\tpsnr\tssim\n");
    for row in rows {
        let fmt_opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            row.step,
            row.loss,
            fmt_opt(row.psnr),
            fmt_opt(row.ssim)
        )
        .unwrap();
    }
    atomic_write(path, out.as_bytes())?;
    Ok(())
}
