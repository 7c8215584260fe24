//! Proof-by-execution: run two models on seeded random inputs and measure the
//! worst-case output deviation.

use std::collections::BTreeMap;

use ispforge_graph::{GraphError, GraphModel};
use ispforge_tensor::{Tensor, TensorError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::FusionReport;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("models differ in {what}: '{a}' vs '{b}'")]
    Signature {
        what: &'static str,
        a: String,
        b: String,
    },

    #[error("{0}")]
    Graph(#[from] GraphError),

    #[error("{0}")]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub trials: usize,
    pub tol: f64,
    /// Exclude a border band of this width from the comparison.
    pub interior_margin: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            trials: 20,
            tol: 1e-5,
            interior_margin: 0,
            seed: 0xF05E,
        }
    }
}

/// Execute both models on `trials` seeded uniform [0,1] inputs and record the
/// max abs deviation over all declared outputs. The check passes when
/// `report.within(opts.tol)`.
pub fn verify_equivalence(
    a: &GraphModel,
    b: &GraphModel,
    opts: &VerifyOptions,
) -> Result<FusionReport, VerifyError> {
    if a.inputs != b.inputs {
        return Err(VerifyError::Signature {
            what: "input ports",
            a: ports(&a.inputs),
            b: ports(&b.inputs),
        });
    }
    fn out_names(m: &GraphModel) -> Vec<&str> {
        m.outputs.iter().map(|(n, _)| n.as_str()).collect()
    }
    if out_names(a) != out_names(b) {
        return Err(VerifyError::Signature {
            what: "output ports",
            a: out_names(a).join(","),
            b: out_names(b).join(","),
        });
    }
    a.validate()?;
    b.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut max_dev = 0.0f64;
    for _ in 0..opts.trials {
        let mut inputs = BTreeMap::new();
        for (name, shape) in &a.inputs {
            inputs.insert(name.clone(), Tensor::random_uniform(*shape, &mut rng));
        }
        let ya = a.execute(&inputs)?;
        let yb = b.execute(&inputs)?;
        for ((name_a, ta), (name_b, tb)) in ya.iter().zip(&yb) {
            debug_assert_eq!(name_a, name_b);
            if ta.shape() != tb.shape() {
                return Err(VerifyError::Signature {
                    what: "output shape",
                    a: format!("{name_a}: {}", ta.shape()),
                    b: format!("{name_b}: {}", tb.shape()),
                });
            }
            max_dev = max_dev.max(masked_deviation(ta, tb, opts.interior_margin));
        }
    }

    Ok(FusionReport {
        label: format!("{} vs {}", a.name, b.name),
        params_before: a.param_count(),
        params_after: b.param_count(),
        max_abs_dev: max_dev,
        trials: opts.trials,
        interior_only: opts.interior_margin > 0,
    })
}

fn ports(inputs: &[(String, ispforge_tensor::Shape)]) -> String {
    inputs
        .iter()
        .map(|(n, s)| format!("{n}:{s}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn masked_deviation(a: &Tensor, b: &Tensor, margin: usize) -> f64 {
    let s = a.shape();
    if margin == 0 {
        return a.max_abs_diff(b) as f64;
    }
    if s.h <= 2 * margin || s.w <= 2 * margin {
        return 0.0;
    }
    let mut max = 0.0f64;
    for n in 0..s.n {
        for c in 0..s.c {
            for y in margin..s.h - margin {
                for x in margin..s.w - margin {
                    let d = (a.at(n, c, y, x) - b.at(n, c, y, x)).abs() as f64;
                    max = max.max(d);
                }
            }
        }
    }
    max
}
