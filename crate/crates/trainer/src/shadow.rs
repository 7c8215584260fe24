//! f64 shadow evaluation of the differentiable graph subset, used only to
//! compute central finite differences. Deliberately naive (straight loops)
//! and independent of the f32 kernels it validates.

use std::collections::{BTreeMap, HashMap};

use ispforge_graph::{EdgeRef, GraphModel, NodeKind};
use ispforge_metrics::{LossSpec, LossTerm, PatchMode};
use ispforge_tensor::{Shape, Tensor};

use crate::TrainError;

#[derive(Clone)]
struct F64Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl F64Tensor {
    fn from_f32(t: &Tensor) -> Self {
        F64Tensor {
            shape: t.shape(),
            data: t.data().iter().map(|&v| v as f64).collect(),
        }
    }

    fn zeros(shape: Shape) -> Self {
        F64Tensor {
            shape,
            data: vec![0.0; shape.count()],
        }
    }

    #[inline]
    fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[((n * self.shape.c + c) * self.shape.h + y) * self.shape.w + x]
    }

    #[inline]
    fn set(&mut self, n: usize, c: usize, y: usize, x: usize, v: f64) {
        self.data[((n * self.shape.c + c) * self.shape.h + y) * self.shape.w + x] = v;
    }
}

/// Evaluate the model's loss entirely in f64, optionally with one weight
/// element perturbed by `delta`.
pub fn shadow_loss(
    model: &GraphModel,
    inputs: &BTreeMap<String, Tensor>,
    target: &Tensor,
    spec: &LossSpec,
    perturb: Option<(&str, usize, f64)>,
) -> Result<f64, TrainError> {
    let mut weights: HashMap<&str, F64Tensor> = model
        .weights
        .iter()
        .map(|(k, v)| (k.as_str(), F64Tensor::from_f32(v)))
        .collect();
    if let Some((name, index, delta)) = perturb {
        let w = weights
            .get_mut(name)
            .ok_or_else(|| TrainError::UnknownGradientKey(name.to_string()))?;
        w.data[index] += delta;
    }

    let mut values: HashMap<EdgeRef, F64Tensor> = HashMap::new();
    for (name, _) in &model.inputs {
        let t = inputs
            .get(name)
            .ok_or_else(|| TrainError::BadArgument(format!("missing input '{name}'")))?;
        values.insert(EdgeRef::input(name.clone()), F64Tensor::from_f32(t));
    }

    for idx in model.topo_order()? {
        let node = &model.nodes[idx];
        let arg = |i: usize| values[&node.inputs[i]].clone();
        let out = match &node.kind {
            NodeKind::Conv2d {
                stride,
                pad,
                groups,
                weight,
                bias,
            } => {
                let w = &weights[weight.as_str()];
                let b = bias.as_ref().map(|b| weights[b.as_str()].clone());
                shadow_conv(&arg(0), w, b.as_ref(), *stride, pad, *groups)
            }
            NodeKind::Relu => {
                let mut t = arg(0);
                for v in &mut t.data {
                    *v = v.max(0.0);
                }
                t
            }
            NodeKind::Sigmoid => {
                let mut t = arg(0);
                for v in &mut t.data {
                    *v = 1.0 / (1.0 + (-*v).exp());
                }
                t
            }
            NodeKind::Tanh => {
                let mut t = arg(0);
                for v in &mut t.data {
                    *v = v.tanh();
                }
                t
            }
            NodeKind::Add => {
                let mut acc = arg(0);
                for i in 1..node.inputs.len() {
                    let other = &values[&node.inputs[i]];
                    for (a, b) in acc.data.iter_mut().zip(&other.data) {
                        *a += b;
                    }
                }
                acc
            }
            NodeKind::Concat => {
                let parts: Vec<&F64Tensor> =
                    node.inputs.iter().map(|e| &values[e]).collect();
                let s0 = parts[0].shape;
                let c_total: usize = parts.iter().map(|p| p.shape.c).sum();
                let mut out = F64Tensor::zeros(Shape::new(s0.n, c_total, s0.h, s0.w));
                for n in 0..s0.n {
                    let mut co = 0;
                    for p in &parts {
                        for c in 0..p.shape.c {
                            for y in 0..s0.h {
                                for x in 0..s0.w {
                                    out.set(n, co, y, x, p.at(n, c, y, x));
                                }
                            }
                            co += 1;
                        }
                    }
                }
                out
            }
            NodeKind::DepthToSpace { block } => {
                let x = arg(0);
                let s = x.shape;
                let b = *block;
                let mut out = F64Tensor::zeros(Shape::new(s.n, s.c / (b * b), s.h * b, s.w * b));
                for n in 0..s.n {
                    for c in 0..s.c / (b * b) {
                        for i in 0..b {
                            for j in 0..b {
                                for y in 0..s.h {
                                    for xx in 0..s.w {
                                        out.set(
                                            n,
                                            c,
                                            b * y + i,
                                            b * xx + j,
                                            x.at(n, c * b * b + i * b + j, y, xx),
                                        );
                                    }
                                }
                            }
                        }
                    }
                }
                out
            }
            NodeKind::GlobalAvgPool => {
                let x = arg(0);
                let s = x.shape;
                let mut out = F64Tensor::zeros(Shape::new(s.n, s.c, 1, 1));
                for n in 0..s.n {
                    for c in 0..s.c {
                        let mut acc = 0.0;
                        for y in 0..s.h {
                            for xx in 0..s.w {
                                acc += x.at(n, c, y, xx);
                            }
                        }
                        out.set(n, c, 0, 0, acc / (s.h * s.w) as f64);
                    }
                }
                out
            }
            NodeKind::Dense { weight, bias } => {
                let x = arg(0);
                let w = &weights[weight.as_str()];
                let s = x.shape;
                let cout = w.shape.n;
                let mut out = F64Tensor::zeros(Shape::new(s.n, cout, 1, 1));
                for n in 0..s.n {
                    for o in 0..cout {
                        let mut acc = 0.0;
                        for i in 0..s.c {
                            acc += w.at(o, i, 0, 0) * x.at(n, i, 0, 0);
                        }
                        if let Some(b) = bias {
                            acc += weights[b.as_str()].at(0, o, 0, 0);
                        }
                        out.set(n, o, 0, 0, acc);
                    }
                }
                out
            }
            NodeKind::GammaCorrect { gamma } => {
                let e = 1.0 / weights[gamma.as_str()].data[0];
                let mut t = arg(0);
                for v in &mut t.data {
                    *v = v.clamp(0.0, 1.0).powf(e);
                }
                t
            }
            NodeKind::Clamp { lo, hi } => {
                let mut t = arg(0);
                let (lo, hi) = (*lo as f64, *hi as f64);
                for v in &mut t.data {
                    *v = v.clamp(lo, hi);
                }
                t
            }
            other => {
                return Err(TrainError::NonDifferentiableNode {
                    node: node.id.clone(),
                    kind: other.name().to_string(),
                })
            }
        };
        values.insert(EdgeRef::node(node.id.clone()), out);
    }

    let pred = &values[&model.outputs[0].1];
    let target = F64Tensor::from_f32(target);
    shadow_loss_value(pred, &target, spec)
}

fn shadow_conv(
    x: &F64Tensor,
    w: &F64Tensor,
    b: Option<&F64Tensor>,
    stride: usize,
    pad: &ispforge_tensor::Pad,
    groups: usize,
) -> F64Tensor {
    let s = x.shape;
    let (cout, icg, kh, kw) = (w.shape.n, w.shape.c, w.shape.h, w.shape.w);
    let ocg = cout / groups;
    let oh = (s.h + pad.top + pad.bottom - kh) / stride + 1;
    let ow = (s.w + pad.left + pad.right - kw) / stride + 1;
    let mut out = F64Tensor::zeros(Shape::new(s.n, cout, oh, ow));
    for n in 0..s.n {
        for oc in 0..cout {
            let g = oc / ocg;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0f64;
                    for icl in 0..icg {
                        let ic = g * icg + icl;
                        for kr in 0..kh {
                            let iy = (oy * stride + kr) as isize - pad.top as isize;
                            if iy < 0 || iy >= s.h as isize {
                                continue;
                            }
                            for kc in 0..kw {
                                let ix = (ox * stride + kc) as isize - pad.left as isize;
                                if ix < 0 || ix >= s.w as isize {
                                    continue;
                                }
                                acc += x.at(n, ic, iy as usize, ix as usize)
                                    * w.at(oc, icl, kr, kc);
                            }
                        }
                    }
                    if let Some(b) = b {
                        acc += b.at(0, oc, 0, 0);
                    }
                    out.set(n, oc, oy, ox, acc);
                }
            }
        }
    }
    out
}

fn shadow_loss_value(
    pred: &F64Tensor,
    target: &F64Tensor,
    spec: &LossSpec,
) -> Result<f64, TrainError> {
    let n = pred.data.len() as f64;
    let mut total = 0.0;
    for (term, weight) in &spec.terms {
        let v = match term {
            LossTerm::L1 => {
                pred.data
                    .iter()
                    .zip(&target.data)
                    .map(|(p, t)| (p - t).abs())
                    .sum::<f64>()
                    / n
            }
            LossTerm::Mse => {
                pred.data
                    .iter()
                    .zip(&target.data)
                    .map(|(p, t)| (p - t) * (p - t))
                    .sum::<f64>()
                    / n
            }
            LossTerm::Charbonnier { eps } => {
                pred.data
                    .iter()
                    .zip(&target.data)
                    .map(|(p, t)| {
                        let d = p - t;
                        (d * d + eps * eps).sqrt()
                    })
                    .sum::<f64>()
                    / n
            }
            LossTerm::Patch {
                size,
                mode: PatchMode::Rectified,
                ..
            } => shadow_patch_rectified(pred, target, *size),
            other => return Err(TrainError::NonDifferentiableLoss(other.label().to_string())),
        };
        total += weight * v;
    }
    Ok(total)
}

fn shadow_patch_rectified(pred: &F64Tensor, target: &F64Tensor, patch: usize) -> f64 {
    let s = pred.shape;
    let (py, px) = (s.h / patch, s.w / patch);
    let per = (patch * patch) as f64;
    let mut weights = Vec::new();
    let mut weighted = 0.0;
    for n in 0..s.n {
        for c in 0..s.c {
            for ty in 0..py {
                for tx in 0..px {
                    let mut sum = 0.0;
                    let mut sum_sq = 0.0;
                    let mut abs = 0.0;
                    for y in ty * patch..(ty + 1) * patch {
                        for x in tx * patch..(tx + 1) * patch {
                            let d = pred.at(n, c, y, x) - target.at(n, c, y, x);
                            sum += d;
                            sum_sq += d * d;
                            abs += d.abs();
                        }
                    }
                    let mean = sum / per;
                    let var = (sum_sq / per - mean * mean).max(0.0);
                    let w = (mean.abs() + var).exp();
                    weights.push(w);
                    weighted += w * abs;
                }
            }
        }
    }
    let w_bar = weights.iter().sum::<f64>() / weights.len() as f64;
    weighted / (s.count() as f64 * w_bar)
}
