//! The fusion algebra. All transforms operate on plain [`ConvSpec`]s; the
//! graph-level pattern matching lives in [`crate::pass`].

use ispforge_tensor::{ConvSpec, Pad, Shape, Tensor, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuseError {
    #[error("branch {index}: {msg}")]
    Branch { index: usize, msg: String },

    #[error("{0}")]
    NotEligible(String),

    #[error("{0}")]
    Tensor(#[from] TensorError),
}

/// A re-parameterizable multi-branch convolution: parallel stride-1,
/// same-padded branches with kernels up to `target_kernel`, plus an optional
/// identity branch when in == out. All branches are summed.
#[derive(Clone, Debug)]
pub struct ERepConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Odd target kernel size of the fused convolution (default 5).
    pub target_kernel: usize,
    pub branches: Vec<ConvSpec>,
    pub identity: bool,
}

impl ERepConvSpec {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        target_kernel: usize,
        branches: Vec<ConvSpec>,
        identity: bool,
    ) -> Result<Self, FuseError> {
        let spec = ERepConvSpec {
            in_channels,
            out_channels,
            target_kernel,
            branches,
            identity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), FuseError> {
        if self.target_kernel % 2 == 0 {
            return Err(FuseError::NotEligible(format!(
                "target kernel must be odd, got {}",
                self.target_kernel
            )));
        }
        if self.identity && self.in_channels != self.out_channels {
            return Err(FuseError::NotEligible(
                "identity branch requires in == out channels".into(),
            ));
        }
        for (i, b) in self.branches.iter().enumerate() {
            let err = |msg: String| FuseError::Branch { index: i, msg };
            b.validate().map_err(|e| err(e.to_string()))?;
            if b.in_channels != self.in_channels || b.out_channels != self.out_channels {
                return Err(err(format!(
                    "channels {}→{} do not match block {}→{}",
                    b.in_channels, b.out_channels, self.in_channels, self.out_channels
                )));
            }
            if b.stride != 1 {
                return Err(err(format!("stride must be 1, got {}", b.stride)));
            }
            if b.groups != 1 {
                return Err(err(format!("groups must be 1, got {}", b.groups)));
            }
            if b.kernel.0 > self.target_kernel || b.kernel.1 > self.target_kernel {
                return Err(err(format!(
                    "kernel {:?} exceeds target {}",
                    b.kernel, self.target_kernel
                )));
            }
            if b.pad != Pad::same(b.kernel.0, b.kernel.1) {
                return Err(err("branch must use same-padding".into()));
            }
        }
        Ok(())
    }

    pub fn params_before(&self) -> usize {
        self.branches.iter().map(ConvSpec::param_count).sum()
    }
}

/// Collapse all parallel branches into one same-padded K×K convolution.
///
/// Each branch kernel is zero-embedded into the K×K target so its taps keep
/// their spatial alignment under the same-padding convention (centered for
/// odd kernels, shifted by one extra for even ones); branch biases sum, and
/// the identity branch contributes Dirac kernels at the center.
pub fn fuse_parallel(spec: &ERepConvSpec) -> Result<ConvSpec, FuseError> {
    spec.validate()?;
    fuse_parallel_core(
        spec.in_channels,
        spec.out_channels,
        (spec.target_kernel, spec.target_kernel),
        &spec.branches,
        if spec.identity { 1 } else { 0 },
    )
}

pub(crate) fn fuse_parallel_core(
    in_channels: usize,
    out_channels: usize,
    target: (usize, usize),
    branches: &[ConvSpec],
    identity_count: usize,
) -> Result<ConvSpec, FuseError> {
    let (kh, kw) = target;
    let mut weight = Tensor::zeros(Shape::new(out_channels, in_channels, kh, kw));
    let any_bias = branches.iter().any(|b| b.bias.is_some());
    let mut bias = vec![0.0f32; out_channels];

    for (i, branch) in branches.iter().enumerate() {
        let (bkh, bkw) = branch.kernel;
        // same-pad alignment: a tap at (r, c) of the branch kernel lands at
        // (r + P_h − pt, c + P_w − pl) in the target kernel
        let embed_err = || FuseError::Branch {
            index: i,
            msg: format!("kernel {:?} does not embed into target {target:?}", branch.kernel),
        };
        let off_y = ((kh - 1) / 2).checked_sub(branch.pad.top).ok_or_else(embed_err)?;
        let off_x = ((kw - 1) / 2).checked_sub(branch.pad.left).ok_or_else(embed_err)?;
        if off_y + bkh > kh || off_x + bkw > kw {
            return Err(embed_err());
        }
        for o in 0..out_channels {
            for ic in 0..in_channels {
                for r in 0..bkh {
                    for c in 0..bkw {
                        *weight.at_mut(o, ic, off_y + r, off_x + c) += branch.weight.at(o, ic, r, c);
                    }
                }
            }
        }
        if let Some(b) = &branch.bias {
            for (acc, v) in bias.iter_mut().zip(b) {
                *acc += v;
            }
        }
    }
    if identity_count > 0 {
        if in_channels != out_channels {
            return Err(FuseError::NotEligible(
                "identity branch requires in == out channels".into(),
            ));
        }
        for o in 0..out_channels {
            *weight.at_mut(o, o, (kh - 1) / 2, (kw - 1) / 2) += identity_count as f32;
        }
    }

    Ok(ConvSpec::new(
        in_channels,
        out_channels,
        target,
        1,
        Pad::same(kh, kw),
        1,
        weight,
        if any_bias { Some(bias) } else { None },
    )?)
}

fn require_pointwise(spec: &ConvSpec, role: &str) -> Result<(), FuseError> {
    if spec.kernel != (1, 1) || spec.stride != 1 || !spec.pad.is_zero() || spec.groups != 1 {
        return Err(FuseError::NotEligible(format!(
            "{role} conv must be 1×1, stride 1, unpadded, ungrouped"
        )));
    }
    Ok(())
}

/// Fuse `first` (1×1) followed by `second` (K×K) into one K×K convolution.
///
/// Weights compose exactly. The bias does too — except that when `first`
/// carries a bias and `second` pads, the constant field the bias creates is
/// zero-padded by `second`, so the fused conv matches the pair on the
/// interior only (border band of width = padding deviates). The returned
/// flag is true in that case.
pub fn fuse_sequential_1x1_then_kxk(
    first: &ConvSpec,
    second: &ConvSpec,
) -> Result<(ConvSpec, bool), FuseError> {
    first.validate()?;
    second.validate()?;
    require_pointwise(first, "first")?;
    if second.groups != 1 {
        return Err(FuseError::NotEligible("second conv must be ungrouped".into()));
    }
    if first.out_channels != second.in_channels {
        return Err(FuseError::NotEligible(format!(
            "channel chain broken: {}→{} then {}→{}",
            first.in_channels, first.out_channels, second.in_channels, second.out_channels
        )));
    }
    let (kh, kw) = second.kernel;
    let cin = first.in_channels;
    let cout = second.out_channels;
    let mid = first.out_channels;

    let mut weight = Tensor::zeros(Shape::new(cout, cin, kh, kw));
    for o in 0..cout {
        for i in 0..cin {
            for r in 0..kh {
                for c in 0..kw {
                    let mut acc = 0.0f32;
                    for m in 0..mid {
                        acc += second.weight.at(o, m, r, c) * first.weight.at(m, i, 0, 0);
                    }
                    *weight.at_mut(o, i, r, c) = acc;
                }
            }
        }
    }

    let interior_only = first.bias.is_some() && !second.pad.is_zero();
    let bias = if first.bias.is_some() || second.bias.is_some() {
        let mut bias = vec![0.0f32; cout];
        if let Some(b2) = &second.bias {
            bias.copy_from_slice(b2);
        }
        if let Some(b1) = &first.bias {
            // interior value of second applied to the constant map b1
            for (o, acc) in bias.iter_mut().enumerate() {
                for m in 0..mid {
                    let mut ksum = 0.0f32;
                    for r in 0..kh {
                        for c in 0..kw {
                            ksum += second.weight.at(o, m, r, c);
                        }
                    }
                    *acc += ksum * b1[m];
                }
            }
        }
        Some(bias)
    } else {
        None
    };

    let fused = ConvSpec::new(
        cin,
        cout,
        second.kernel,
        second.stride,
        second.pad,
        1,
        weight,
        bias,
    )?;
    Ok((fused, interior_only))
}

/// Fuse `first` (K×K) followed by `second` (1×1) into one K×K convolution.
/// Exact everywhere: a pointwise conv commutes with zero padding.
pub fn fuse_kxk_then_1x1(first: &ConvSpec, second: &ConvSpec) -> Result<ConvSpec, FuseError> {
    first.validate()?;
    second.validate()?;
    require_pointwise(second, "second")?;
    if first.groups != 1 {
        return Err(FuseError::NotEligible("first conv must be ungrouped".into()));
    }
    if first.out_channels != second.in_channels {
        return Err(FuseError::NotEligible(format!(
            "channel chain broken: {}→{} then {}→{}",
            first.in_channels, first.out_channels, second.in_channels, second.out_channels
        )));
    }
    let (kh, kw) = first.kernel;
    let cin = first.in_channels;
    let cout = second.out_channels;
    let mid = first.out_channels;

    let mut weight = Tensor::zeros(Shape::new(cout, cin, kh, kw));
    for o in 0..cout {
        for i in 0..cin {
            for r in 0..kh {
                for c in 0..kw {
                    let mut acc = 0.0f32;
                    for m in 0..mid {
                        acc += second.weight.at(o, m, 0, 0) * first.weight.at(m, i, r, c);
                    }
                    *weight.at_mut(o, i, r, c) = acc;
                }
            }
        }
    }
    let bias = if first.bias.is_some() || second.bias.is_some() {
        let mut bias = vec![0.0f32; cout];
        if let Some(b2) = &second.bias {
            bias.copy_from_slice(b2);
        }
        if let Some(b1) = &first.bias {
            for (o, acc) in bias.iter_mut().enumerate() {
                for m in 0..mid {
                    *acc += second.weight.at(o, m, 0, 0) * b1[m];
                }
            }
        }
        Some(bias)
    } else {
        None
    };

    Ok(ConvSpec::new(
        cin,
        cout,
        first.kernel,
        first.stride,
        first.pad,
        1,
        weight,
        bias,
    )?)
}
