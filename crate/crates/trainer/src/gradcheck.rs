//! Central finite-difference validation of the backward rules against the
//! f64 shadow evaluator.

use std::collections::BTreeMap;

use ispforge_graph::GraphModel;
use ispforge_metrics::LossSpec;
use ispforge_tensor::Tensor;

use crate::backward::backward;
use crate::shadow::shadow_loss;
use crate::TrainError;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step on the f64 shadow path.
    pub h: f64,
    pub rel_tol: f64,
    /// Denominator floor for the relative error.
    pub abs_floor: f64,
    /// Check at most this many elements per weight tensor (evenly strided);
    /// 0 checks everything.
    pub max_elems_per_weight: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            h: 1e-5,
            rel_tol: 1e-4,
            abs_floor: 1e-6,
            max_elems_per_weight: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_weight: String,
    pub worst_index: usize,
}

impl GradCheckReport {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_rel_err <= rel_tol
    }
}

/// Compare every analytic weight gradient against 64-bit central differences.
pub fn grad_check(
    model: &GraphModel,
    inputs: &BTreeMap<String, Tensor>,
    target: &Tensor,
    spec: &LossSpec,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, TrainError> {
    let result = backward(model, inputs, target, spec)?;
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst_weight: String::new(),
        worst_index: 0,
    };
    for (name, grad) in &result.grads {
        let len = grad.data().len();
        let stride = if opts.max_elems_per_weight == 0 || len <= opts.max_elems_per_weight {
            1
        } else {
            len.div_ceil(opts.max_elems_per_weight)
        };
        for idx in (0..len).step_by(stride) {
            let plus = shadow_loss(model, inputs, target, spec, Some((name, idx, opts.h)))?;
            let minus = shadow_loss(model, inputs, target, spec, Some((name, idx, -opts.h)))?;
            let fd = (plus - minus) / (2.0 * opts.h);
            let g = grad.data()[idx] as f64;
            let rel = (g - fd).abs() / fd.abs().max(opts.abs_floor);
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_weight = name.clone();
                report.worst_index = idx;
            }
        }
    }
    Ok(report)
}
