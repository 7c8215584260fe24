//! Host-CPU wall-clock timing: warmup iterations, then the median over timed
//! runs of a fixed seeded input. Absolute numbers are machine-relative; only
//! paired comparisons on the same machine in the same process are meaningful.

use std::collections::BTreeMap;
use std::time::Instant;

use ispforge_graph::GraphModel;
use ispforge_tensor::{Shape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::BenchError;

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    pub warmup_iters: usize,
    pub timed_iters: usize,
    pub threads: usize,
    pub input_shape: Shape,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(input_shape: Shape) -> Self {
        BenchConfig {
            warmup_iters: 3,
            timed_iters: 10,
            threads: 1,
            input_shape,
            seed: 0xBE7C,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub median_ms: f64,
    pub times_ms: Vec<f64>,
    pub threads: usize,
    pub machine: String,
}

pub fn machine_descriptor() -> String {
    let cpus = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    format!(
        "os={} arch={} cpus={cpus}",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

/// Median wall-clock milliseconds for one forward pass.
pub fn bench_model(model: &GraphModel, cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    if cfg.timed_iters == 0 {
        return Err(BenchError::BadArgument("timed_iters must be ≥ 1".into()));
    }
    if model.inputs.len() != 1 {
        return Err(BenchError::BadArgument(format!(
            "bench expects a single-input model, got {}",
            model.inputs.len()
        )));
    }
    let port = model.inputs[0].0.clone();
    let model = model.with_input_shape(&port, cfg.input_shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let input = Tensor::random_uniform(cfg.input_shape, &mut rng);
    let mut inputs = BTreeMap::new();
    inputs.insert(port, input);

    let prev_threads = ispforge_tensor::threads();
    ispforge_tensor::set_threads(cfg.threads);
    let result = (|| {
        for _ in 0..cfg.warmup_iters {
            model.execute(&inputs)?;
        }
        let mut times = Vec::with_capacity(cfg.timed_iters);
        for _ in 0..cfg.timed_iters {
            let start = Instant::now();
            let out = model.execute(&inputs)?;
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            times.push(elapsed);
            drop(out);
        }
        Ok::<Vec<f64>, BenchError>(times)
    })();
    ispforge_tensor::set_threads(prev_threads);
    let times = result?;

    let mut sorted = times.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(BenchResult {
        median_ms: median,
        times_ms: times,
        threads: cfg.threads,
        machine: machine_descriptor(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivially_small_model_has_positive_runtime() {
        let model = ispforge_zoo::build_smallnet12(1);
        let cfg = BenchConfig {
            warmup_iters: 1,
            timed_iters: 3,
            ..BenchConfig::new(Shape::new(1, 4, 16, 16))
        };
        let result = bench_model(&model, &cfg).unwrap();
        assert!(result.median_ms > 0.0);
        assert_eq!(result.times_ms.len(), 3);
        assert!(result.machine.contains("arch="));
    }

    #[test]
    fn repeated_medians_are_reasonably_stable() {
        // advisory: printed, not asserted — scheduler noise on shared
        // machines makes a hard bound flaky
        let model = ispforge_zoo::build_smallnet12(1);
        let cfg = BenchConfig {
            warmup_iters: 2,
            ..BenchConfig::new(Shape::new(1, 4, 64, 64))
        };
        let a = bench_model(&model, &cfg).unwrap().median_ms;
        let b = bench_model(&model, &cfg).unwrap().median_ms;
        let spread = (a - b).abs() / a.max(b);
        println!("bench stability: {a:.3} ms vs {b:.3} ms (spread {:.1}%)", spread * 100.0);
    }
}
