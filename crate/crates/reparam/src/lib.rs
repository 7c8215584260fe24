//! Structural re-parameterization: training-time multi-branch convolution
//! structures are algebraically collapsed into single inference-time
//! convolutions, and the equivalence is proven by executing both forms on
//! random inputs.

mod fuse;
mod pass;
mod verify;

pub use fuse::{
    fuse_kxk_then_1x1, fuse_parallel, fuse_sequential_1x1_then_kxk, ERepConvSpec, FuseError,
};
pub use pass::{reparam_pass, PassOptions};
pub use verify::{verify_equivalence, VerifyError, VerifyOptions};

/// Outcome of one fusion rewrite or equivalence check.
#[derive(Clone, Debug)]
pub struct FusionReport {
    /// What was fused or compared (node ids or "a vs b").
    pub label: String,
    pub params_before: usize,
    pub params_after: usize,
    /// Measured max abs output deviation; 0 when the rewrite was purely
    /// structural and not executed.
    pub max_abs_dev: f64,
    pub trials: usize,
    /// Equivalence holds on the interior only (border band excluded), either
    /// because a biased 1×1 was fused under padding or because the check ran
    /// with a margin.
    pub interior_only: bool,
}

impl FusionReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max_abs_dev <= tol
    }
}

/// Plain-text table of fusion reports, one row per rewrite.
pub fn render_report_table(reports: &[FusionReport]) -> String {
    let mut out = String::from(
        "label\tparams_before\tparams_after\tmax_abs_dev\ttrials\tinterior_only\n",
    );
    for r in reports {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.3e}\t{}\t{}\n",
            r.label, r.params_before, r.params_after, r.max_abs_dev, r.trials, r.interior_only
        ));
    }
    out
}
