//! Reverse-mode differentiation by static per-node rules. The op set is
//! closed: conv2d (incl. grouped), relu, sigmoid, tanh, add, concat,
//! depth_to_space, global_avg_pool, dense, gamma_correct (w.r.t. input only),
//! clamp, and the l1/mse/charbonnier/patch(rectified) loss terms.
//! Subgradients at kinks (relu, |·|, clamp bounds) are 0.

use std::collections::{BTreeMap, HashMap};

use ispforge_graph::{EdgeRef, GraphModel, Node, NodeKind};
use ispforge_metrics::{LossSpec, LossTerm, PatchMode};
use ispforge_tensor::{conv2d, space_to_depth, ConvSpec, Pad, Shape, Tensor};

use crate::TrainError;

#[derive(Clone, Debug)]
pub struct BackwardResult {
    pub loss: f64,
    /// Gradient per weight tensor, keyed by weight name. Weights that take
    /// no gradient under the supported rules (e.g. gamma scalars) are absent.
    pub grads: BTreeMap<String, Tensor>,
}

/// Loss gradients and value for the whole model w.r.t. every trainable
/// weight. Deterministic: single-threaded with fixed accumulation order.
pub fn backward(
    model: &GraphModel,
    inputs: &BTreeMap<String, Tensor>,
    target: &Tensor,
    spec: &LossSpec,
) -> Result<BackwardResult, TrainError> {
    if model.outputs.len() != 1 {
        return Err(TrainError::BadArgument(format!(
            "backward needs a single-output model, got {}",
            model.outputs.len()
        )));
    }

    // forward, keeping every activation
    let order = model.topo_order()?;
    let mut values: HashMap<EdgeRef, Tensor> = HashMap::new();
    for (name, _) in &model.inputs {
        let t = inputs
            .get(name)
            .ok_or_else(|| TrainError::BadArgument(format!("missing input '{name}'")))?;
        values.insert(EdgeRef::input(name.clone()), t.clone());
    }
    for &idx in &order {
        let node = &model.nodes[idx];
        let outs = forward_node(model, node, &values)?;
        for (slot, t) in outs.into_iter().enumerate() {
            values.insert(EdgeRef::node_slot(node.id.clone(), slot), t);
        }
    }

    let out_edge = model.outputs[0].1.clone();
    let pred = values
        .get(&out_edge)
        .ok_or_else(|| TrainError::BadArgument("output edge unresolved".into()))?;
    let (loss, dpred) = loss_gradient(pred, target, spec)?;

    // reverse pass
    let mut edge_grads: HashMap<EdgeRef, Tensor> = HashMap::new();
    edge_grads.insert(out_edge, dpred);
    let mut weight_grads: BTreeMap<String, Tensor> = BTreeMap::new();

    for &idx in order.iter().rev() {
        let node = &model.nodes[idx];
        let gys: Vec<Option<Tensor>> = (0..node.kind.output_slots())
            .map(|slot| edge_grads.remove(&EdgeRef::node_slot(node.id.clone(), slot)))
            .collect();
        if gys.iter().all(Option::is_none) {
            continue;
        }
        backward_node(model, node, &values, gys, &mut edge_grads, &mut weight_grads)?;
    }

    Ok(BackwardResult {
        loss,
        grads: weight_grads,
    })
}

fn forward_node(
    model: &GraphModel,
    node: &Node,
    values: &HashMap<EdgeRef, Tensor>,
) -> Result<Vec<Tensor>, TrainError> {
    let arg = |i: usize| values[&node.inputs[i]].clone();
    let out = match &node.kind {
        NodeKind::Conv2d { .. } => {
            let spec = conv_spec(model, node)?;
            vec![conv2d(&arg(0), &spec)?]
        }
        NodeKind::Relu => vec![ispforge_tensor::relu(&arg(0))],
        NodeKind::Sigmoid => vec![ispforge_tensor::sigmoid(&arg(0))],
        NodeKind::Tanh => vec![ispforge_tensor::tanh(&arg(0))],
        NodeKind::Add => {
            let args: Vec<Tensor> = node.inputs.iter().map(|e| values[e].clone()).collect();
            let refs: Vec<&Tensor> = args.iter().collect();
            vec![ispforge_tensor::add(&refs)?]
        }
        NodeKind::Concat => {
            let args: Vec<Tensor> = node.inputs.iter().map(|e| values[e].clone()).collect();
            let refs: Vec<&Tensor> = args.iter().collect();
            vec![ispforge_tensor::concat_channels(&refs)?]
        }
        NodeKind::DepthToSpace { block } => vec![ispforge_tensor::depth_to_space(&arg(0), *block)?],
        NodeKind::GlobalAvgPool => vec![ispforge_tensor::global_avg_pool(&arg(0))],
        NodeKind::Dense { weight, bias } => {
            let w = &model.weights[weight];
            let b = bias.as_ref().map(|b| &model.weights[b]);
            vec![ispforge_tensor::dense(&arg(0), w, b)?]
        }
        NodeKind::GammaCorrect { gamma } => {
            let g = model.weights[gamma].data()[0];
            vec![ispforge_tensor::gamma_correct(&arg(0), g)?]
        }
        NodeKind::Clamp { lo, hi } => vec![ispforge_tensor::clamp(&arg(0), *lo, *hi)?],
        other => {
            return Err(TrainError::NonDifferentiableNode {
                node: node.id.clone(),
                kind: other.name().to_string(),
            })
        }
    };
    Ok(out)
}

fn conv_spec(model: &GraphModel, node: &Node) -> Result<ConvSpec, TrainError> {
    let NodeKind::Conv2d {
        stride,
        pad,
        groups,
        weight,
        bias,
    } = &node.kind
    else {
        unreachable!()
    };
    let w = model.weights[weight].clone();
    let ws = w.shape();
    let b = bias.as_ref().map(|b| model.weights[b].data().to_vec());
    Ok(ConvSpec::new(
        ws.c * groups,
        ws.n,
        (ws.h, ws.w),
        *stride,
        *pad,
        *groups,
        w,
        b,
    )?)
}

fn accumulate(map: &mut HashMap<EdgeRef, Tensor>, edge: &EdgeRef, grad: Tensor) {
    match map.get_mut(edge) {
        Some(existing) => {
            for (e, v) in existing.data_mut().iter_mut().zip(grad.data()) {
                *e += v;
            }
        }
        None => {
            map.insert(edge.clone(), grad);
        }
    }
}

fn accumulate_weight(map: &mut BTreeMap<String, Tensor>, name: &str, grad: Tensor) {
    match map.get_mut(name) {
        Some(existing) => {
            for (e, v) in existing.data_mut().iter_mut().zip(grad.data()) {
                *e += v;
            }
        }
        None => {
            map.insert(name.to_string(), grad);
        }
    }
}

fn backward_node(
    model: &GraphModel,
    node: &Node,
    values: &HashMap<EdgeRef, Tensor>,
    gys: Vec<Option<Tensor>>,
    edge_grads: &mut HashMap<EdgeRef, Tensor>,
    weight_grads: &mut BTreeMap<String, Tensor>,
) -> Result<(), TrainError> {
    let gy = gys[0]
        .clone()
        .unwrap_or_else(|| Tensor::zeros(values[&EdgeRef::node(node.id.clone())].shape()));
    let x = || values[&node.inputs[0]].clone();
    let y = || values[&EdgeRef::node(node.id.clone())].clone();

    match &node.kind {
        NodeKind::Conv2d { weight, bias, .. } => {
            let spec = conv_spec(model, node)?;
            let (gx, gw, gb) = conv_backward(&x(), &spec, &gy)?;
            accumulate(edge_grads, &node.inputs[0], gx);
            accumulate_weight(weight_grads, weight, gw);
            if let (Some(bname), Some(gb)) = (bias, gb) {
                let gb = Tensor::new(Shape::new(1, gb.len(), 1, 1), gb)?;
                accumulate_weight(weight_grads, bname, gb);
            }
        }
        NodeKind::Relu => {
            let x = x();
            let gx = Tensor::from_fn(x.shape(), |n, c, yy, xx| {
                if x.at(n, c, yy, xx) > 0.0 {
                    gy.at(n, c, yy, xx)
                } else {
                    0.0
                }
            });
            accumulate(edge_grads, &node.inputs[0], gx);
        }
        NodeKind::Sigmoid => {
            let yv = y();
            let mut gx = gy.clone();
            for (g, &s) in gx.data_mut().iter_mut().zip(yv.data()) {
                *g *= s * (1.0 - s);
            }
            accumulate(edge_grads, &node.inputs[0], gx);
        }
        NodeKind::Tanh => {
            let yv = y();
            let mut gx = gy.clone();
            for (g, &t) in gx.data_mut().iter_mut().zip(yv.data()) {
                *g *= 1.0 - t * t;
            }
            accumulate(edge_grads, &node.inputs[0], gx);
        }
        NodeKind::Add => {
            for edge in &node.inputs {
                accumulate(edge_grads, edge, gy.clone());
            }
        }
        NodeKind::Concat => {
            let mut start = 0;
            for edge in &node.inputs {
                let c = values[edge].shape().c;
                let part = ispforge_tensor::slice_channels(&gy, start, start + c)?;
                accumulate(edge_grads, edge, part);
                start += c;
            }
        }
        NodeKind::DepthToSpace { block } => {
            let gx = space_to_depth(&gy, *block)?;
            accumulate(edge_grads, &node.inputs[0], gx);
        }
        NodeKind::GlobalAvgPool => {
            let x = x();
            let s = x.shape();
            let inv = 1.0 / (s.h * s.w) as f32;
            let gx = Tensor::from_fn(s, |n, c, _, _| gy.at(n, c, 0, 0) * inv);
            accumulate(edge_grads, &node.inputs[0], gx);
        }
        NodeKind::Dense { weight, bias } => {
            let x = x();
            let w = &model.weights[weight];
            let (n_batch, cin, cout) = (x.shape().n, x.shape().c, w.shape().n);
            let mut gw = Tensor::zeros(w.shape());
            let mut gx = Tensor::zeros(x.shape());
            for n in 0..n_batch {
                for o in 0..cout {
                    let g = gy.at(n, o, 0, 0);
                    for i in 0..cin {
                        *gw.at_mut(o, i, 0, 0) += g * x.at(n, i, 0, 0);
                        *gx.at_mut(n, i, 0, 0) += g * w.at(o, i, 0, 0);
                    }
                }
            }
            accumulate(edge_grads, &node.inputs[0], gx);
            accumulate_weight(weight_grads, weight, gw);
            if let Some(bname) = bias {
                let mut gb = Tensor::zeros(Shape::new(1, cout, 1, 1));
                for n in 0..n_batch {
                    for o in 0..cout {
                        *gb.at_mut(0, o, 0, 0) += gy.at(n, o, 0, 0);
                    }
                }
                accumulate_weight(weight_grads, bname, gb);
            }
        }
        NodeKind::GammaCorrect { gamma } => {
            // differentiable w.r.t. the input only; the exponent is frozen
            let g = model.weights[gamma].data()[0];
            let e = 1.0 / g;
            let x = x();
            let gx = Tensor::from_fn(x.shape(), |n, c, yy, xx| {
                let v = x.at(n, c, yy, xx);
                if v > 0.0 && v < 1.0 {
                    gy.at(n, c, yy, xx) * e * v.powf(e - 1.0)
                } else {
                    0.0
                }
            });
            accumulate(edge_grads, &node.inputs[0], gx);
        }
        NodeKind::Clamp { lo, hi } => {
            let x = x();
            let gx = Tensor::from_fn(x.shape(), |n, c, yy, xx| {
                let v = x.at(n, c, yy, xx);
                if v > *lo && v < *hi {
                    gy.at(n, c, yy, xx)
                } else {
                    0.0
                }
            });
            accumulate(edge_grads, &node.inputs[0], gx);
        }
        other => {
            return Err(TrainError::NonDifferentiableNode {
                node: node.id.clone(),
                kind: other.name().to_string(),
            })
        }
    }
    Ok(())
}

/// Input, weight and bias gradients of a convolution.
fn conv_backward(
    input: &Tensor,
    spec: &ConvSpec,
    gy: &Tensor,
) -> Result<(Tensor, Tensor, Option<Vec<f32>>), TrainError> {
    let s = input.shape();
    let gys = gy.shape();
    let (kh, kw) = spec.kernel;
    let icg = spec.in_channels / spec.groups;
    let ocg = spec.out_channels / spec.groups;

    let gb = if spec.bias.is_some() {
        let mut gb = vec![0.0f32; spec.out_channels];
        for n in 0..gys.n {
            for oc in 0..gys.c {
                let mut acc = 0.0f32;
                for &v in gy.plane(n, oc) {
                    acc += v;
                }
                gb[oc] += acc;
            }
        }
        Some(gb)
    } else {
        None
    };

    // weight gradient: correlate input patches with the output gradient
    let mut gw = Tensor::zeros(spec.weight.shape());
    let (pt, pl) = (spec.pad.top as isize, spec.pad.left as isize);
    for n in 0..s.n {
        for oc in 0..spec.out_channels {
            let g = oc / ocg;
            let gy_plane = gy.plane(n, oc);
            for icl in 0..icg {
                let ic = g * icg + icl;
                let in_plane = input.plane(n, ic);
                for kr in 0..kh {
                    for kc in 0..kw {
                        let mut acc = 0.0f32;
                        for oy in 0..gys.h {
                            let iy = (oy * spec.stride + kr) as isize - pt;
                            if iy < 0 || iy >= s.h as isize {
                                continue;
                            }
                            let in_row = &in_plane[iy as usize * s.w..(iy as usize + 1) * s.w];
                            let gy_row = &gy_plane[oy * gys.w..(oy + 1) * gys.w];
                            for (ox, &gv) in gy_row.iter().enumerate() {
                                let ix = (ox * spec.stride + kc) as isize - pl;
                                if ix < 0 || ix >= s.w as isize {
                                    continue;
                                }
                                acc += gv * in_row[ix as usize];
                            }
                        }
                        *gw.at_mut(oc, icl, kr, kc) += acc;
                    }
                }
            }
        }
    }

    // input gradient
    let flip_ok = spec.stride == 1
        && spec.pad.top < kh
        && spec.pad.bottom < kh
        && spec.pad.left < kw
        && spec.pad.right < kw;
    let gx = if flip_ok {
        // full correlation with the spatially flipped, channel-transposed kernel
        let mut wt = Tensor::zeros(Shape::new(spec.in_channels, ocg, kh, kw));
        for g in 0..spec.groups {
            for icl in 0..icg {
                for ocl in 0..ocg {
                    for r in 0..kh {
                        for c in 0..kw {
                            *wt.at_mut(g * icg + icl, ocl, r, c) =
                                spec.weight.at(g * ocg + ocl, icl, kh - 1 - r, kw - 1 - c);
                        }
                    }
                }
            }
        }
        let back = ConvSpec::new(
            spec.out_channels,
            spec.in_channels,
            (kh, kw),
            1,
            Pad {
                top: kh - 1 - spec.pad.top,
                bottom: kh - 1 - spec.pad.bottom,
                left: kw - 1 - spec.pad.left,
                right: kw - 1 - spec.pad.right,
            },
            spec.groups,
            wt,
            None,
        )?;
        conv2d(gy, &back)?
    } else {
        let mut gx = Tensor::zeros(s);
        for n in 0..s.n {
            for oc in 0..spec.out_channels {
                let g = oc / ocg;
                for oy in 0..gys.h {
                    for ox in 0..gys.w {
                        let gv = gy.at(n, oc, oy, ox);
                        for icl in 0..icg {
                            let ic = g * icg + icl;
                            for kr in 0..kh {
                                let iy = (oy * spec.stride + kr) as isize - pt;
                                if iy < 0 || iy >= s.h as isize {
                                    continue;
                                }
                                for kc in 0..kw {
                                    let ix = (ox * spec.stride + kc) as isize - pl;
                                    if ix < 0 || ix >= s.w as isize {
                                        continue;
                                    }
                                    *gx.at_mut(n, ic, iy as usize, ix as usize) +=
                                        gv * spec.weight.at(oc, icl, kr, kc);
                                }
                            }
                        }
                    }
                }
            }
        }
        gx
    };

    Ok((gx, gw, gb))
}

/// Weighted loss value (f64) and its gradient w.r.t. the prediction (f32).
pub(crate) fn loss_gradient(
    pred: &Tensor,
    target: &Tensor,
    spec: &LossSpec,
) -> Result<(f64, Tensor), TrainError> {
    if pred.shape() != target.shape() {
        return Err(TrainError::BadArgument(format!(
            "prediction {} vs target {}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.data().len() as f64;
    let mut total = 0.0f64;
    let mut grad = Tensor::zeros(pred.shape());
    for (term, weight) in &spec.terms {
        let w = *weight as f32;
        match term {
            LossTerm::L1 => {
                total += weight * ispforge_metrics::l1(pred, target)?;
                let inv = w / n as f32;
                for (g, (p, t)) in grad
                    .data_mut()
                    .iter_mut()
                    .zip(pred.data().iter().zip(target.data()))
                {
                    let d = p - t;
                    // subgradient at 0 is 0
                    *g += inv * if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 };
                }
            }
            LossTerm::Mse => {
                total += weight * ispforge_metrics::mse(pred, target)?;
                let inv = 2.0 * w / n as f32;
                for (g, (p, t)) in grad
                    .data_mut()
                    .iter_mut()
                    .zip(pred.data().iter().zip(target.data()))
                {
                    *g += inv * (p - t);
                }
            }
            LossTerm::Charbonnier { eps } => {
                total += weight * ispforge_metrics::charbonnier(pred, target, *eps)?;
                let e2 = (*eps * *eps) as f32;
                let inv = w / n as f32;
                for (g, (p, t)) in grad
                    .data_mut()
                    .iter_mut()
                    .zip(pred.data().iter().zip(target.data()))
                {
                    let d = p - t;
                    *g += inv * d / (d * d + e2).sqrt();
                }
            }
            LossTerm::Patch {
                size,
                eps,
                mode: PatchMode::Rectified,
            } => {
                total +=
                    weight * ispforge_metrics::patch_loss(pred, target, *size, *eps, PatchMode::Rectified)?;
                patch_rectified_grad(pred, target, *size, *weight, &mut grad)?;
            }
            other => return Err(TrainError::NonDifferentiableLoss(other.label().to_string())),
        }
    }
    Ok((total, grad))
}

/// Gradient of the rectified patch loss; weights depend on the per-patch
/// mean/variance of the difference, so the chain rule carries terms through
/// both the pixel difference and the patch statistics.
fn patch_rectified_grad(
    pred: &Tensor,
    target: &Tensor,
    patch: usize,
    weight: f64,
    grad: &mut Tensor,
) -> Result<(), TrainError> {
    let s = pred.shape();
    if patch == 0 || s.h % patch != 0 || s.w % patch != 0 {
        return Err(TrainError::BadArgument(format!(
            "patch loss: dims {}x{} not divisible by {patch}",
            s.h, s.w
        )));
    }
    let (py, px) = (s.h / patch, s.w / patch);
    let n_patches = s.n * s.c * py * px;
    let n_pixels = s.count() as f64;
    let per_patch = (patch * patch) as f64;

    // first pass: stats and weights
    let mut means = vec![0.0f64; n_patches];
    let mut weights = vec![0.0f64; n_patches];
    let mut abs_sums = vec![0.0f64; n_patches];
    let mut t_sum = 0.0f64;
    let mut idx = 0;
    for n in 0..s.n {
        for c in 0..s.c {
            for ty in 0..py {
                for tx in 0..px {
                    let mut sum = 0.0;
                    let mut sum_sq = 0.0;
                    let mut abs = 0.0;
                    for yy in ty * patch..(ty + 1) * patch {
                        for xx in tx * patch..(tx + 1) * patch {
                            let d = pred.at(n, c, yy, xx) as f64 - target.at(n, c, yy, xx) as f64;
                            sum += d;
                            sum_sq += d * d;
                            abs += d.abs();
                        }
                    }
                    let mean = sum / per_patch;
                    let var = (sum_sq / per_patch - mean * mean).max(0.0);
                    let w = (mean.abs() + var).exp();
                    means[idx] = mean;
                    weights[idx] = w;
                    abs_sums[idx] = abs;
                    t_sum += w * abs;
                    idx += 1;
                }
            }
        }
    }
    let w_bar = weights.iter().sum::<f64>() / n_patches as f64;

    // second pass: per-pixel gradient
    let mut idx = 0;
    for n in 0..s.n {
        for c in 0..s.c {
            for ty in 0..py {
                for tx in 0..px {
                    let w = weights[idx];
                    let m = means[idx];
                    let a = abs_sums[idx];
                    let sign_m = if m > 0.0 {
                        1.0
                    } else if m < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    for yy in ty * patch..(ty + 1) * patch {
                        for xx in tx * patch..(tx + 1) * patch {
                            let d = pred.at(n, c, yy, xx) as f64 - target.at(n, c, yy, xx) as f64;
                            let sign_d = if d > 0.0 {
                                1.0
                            } else if d < 0.0 {
                                -1.0
                            } else {
                                0.0
                            };
                            let dw = w * (sign_m / per_patch + 2.0 * (d - m) / per_patch);
                            let dl = (w * sign_d + dw * a) / (n_pixels * w_bar)
                                - t_sum * dw / (n_patches as f64 * n_pixels * w_bar * w_bar);
                            *grad.at_mut(n, c, yy, xx) += (weight * dl) as f32;
                        }
                    }
                    idx += 1;
                }
            }
        }
    }
    Ok(())
}
