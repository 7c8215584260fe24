//! Graph-level fusion pass: pattern-matches parallel conv branches joined by
//! an add (plus optional identity edges) and eligible sequential conv pairs,
//! rewriting until fixpoint. Every rewrite strictly reduces the node count,
//! so the pass terminates and is idempotent.

use std::collections::HashMap;

use ispforge_graph::{EdgeRef, GraphModel, Node, NodeKind};
use ispforge_tensor::{ConvSpec, Pad, Shape, Tensor};

use crate::fuse::{fuse_kxk_then_1x1, fuse_parallel_core, fuse_sequential_1x1_then_kxk};
use crate::FusionReport;

#[derive(Clone, Copy, Debug, Default)]
pub struct PassOptions {
    /// Refuse sequential fusions that are exact on the interior only
    /// (biased 1×1 followed by a padded conv).
    pub strict: bool,
}

/// Apply all fusion rewrites to a copy of `model`. Non-matching graphs come
/// back unchanged with an empty report list. Graph input/output ports and
/// output shapes are preserved.
pub fn reparam_pass(
    model: &GraphModel,
    opts: &PassOptions,
) -> Result<(GraphModel, Vec<FusionReport>), ispforge_graph::GraphError> {
    let mut m = model.clone();
    let mut reports = Vec::new();
    loop {
        if let Some(report) = try_parallel_rewrite(&mut m)? {
            reports.push(report);
            continue;
        }
        if let Some(report) = try_sequential_rewrite(&mut m, opts)? {
            reports.push(report);
            continue;
        }
        break;
    }
    if !reports.is_empty() {
        m.gc_weights();
        m.validate()?;
    }
    Ok((m, reports))
}

/// Consumer count per edge, counting declared outputs as consumers.
fn consumer_counts(model: &GraphModel) -> HashMap<EdgeRef, usize> {
    let mut counts: HashMap<EdgeRef, usize> = HashMap::new();
    for node in &model.nodes {
        for edge in &node.inputs {
            *counts.entry(edge.clone()).or_insert(0) += 1;
        }
    }
    for (_, edge) in &model.outputs {
        *counts.entry(edge.clone()).or_insert(0) += 1;
    }
    counts
}

fn conv_spec_of(model: &GraphModel, node: &Node) -> Option<(ConvSpec, EdgeRef)> {
    if let NodeKind::Conv2d {
        stride,
        pad,
        groups,
        weight,
        bias,
    } = &node.kind
    {
        let w = model.weights.get(weight)?.clone();
        let ws = w.shape();
        let bias_vec = match bias {
            Some(b) => Some(model.weights.get(b)?.data().to_vec()),
            None => None,
        };
        let spec = ConvSpec::new(
            ws.c * groups,
            ws.n,
            (ws.h, ws.w),
            *stride,
            *pad,
            *groups,
            w,
            bias_vec,
        )
        .ok()?;
        return Some((spec, node.inputs[0].clone()));
    }
    None
}

fn oddify(k: usize) -> usize {
    if k % 2 == 0 {
        k + 1
    } else {
        k
    }
}

/// Install a fused conv in place of node `id`, registering its weights.
fn install_fused_conv(model: &mut GraphModel, id: &str, source: EdgeRef, fused: ConvSpec) {
    let wname = model.fresh_weight_name(&format!("{id}.fw"));
    model.weights.insert(wname.clone(), fused.weight.clone());
    let bname = fused.bias.as_ref().map(|b| {
        let name = model.fresh_weight_name(&format!("{id}.fb"));
        let tensor = Tensor::new(Shape::new(1, b.len(), 1, 1), b.clone()).unwrap();
        model.weights.insert(name.clone(), tensor);
        name
    });
    let node = model.nodes.iter_mut().find(|n| n.id == id).unwrap();
    node.kind = NodeKind::Conv2d {
        stride: fused.stride,
        pad: fused.pad,
        groups: 1,
        weight: wname,
        bias: bname,
    };
    node.inputs = vec![source];
}

fn try_parallel_rewrite(
    model: &mut GraphModel,
) -> Result<Option<FusionReport>, ispforge_graph::GraphError> {
    let counts = consumer_counts(model);
    for idx in 0..model.nodes.len() {
        if !matches!(model.nodes[idx].kind, NodeKind::Add) {
            continue;
        }
        let add_id = model.nodes[idx].id.clone();
        let add_inputs = model.nodes[idx].inputs.clone();
        if add_inputs.len() < 2 {
            continue;
        }

        // classify add inputs: convs from a shared source, or that source itself
        let mut branch_nodes: Vec<(String, ConvSpec)> = Vec::new();
        let mut identity_count = 0usize;
        let mut source: Option<EdgeRef> = None;
        let mut eligible = true;
        for edge in &add_inputs {
            let as_conv = match edge {
                EdgeRef::Node { id, slot: 0 } => model
                    .node(id)
                    .filter(|_| counts.get(edge).copied().unwrap_or(0) == 1)
                    .and_then(|n| conv_spec_of(model, n).map(|(s, src)| (id.clone(), s, src))),
                _ => None,
            };
            match as_conv {
                Some((id, spec, src))
                    if spec.stride == 1
                        && spec.groups == 1
                        && spec.pad == Pad::same(spec.kernel.0, spec.kernel.1) =>
                {
                    if let Some(existing) = &source {
                        if *existing != src {
                            eligible = false;
                            break;
                        }
                    } else {
                        source = Some(src.clone());
                    }
                    branch_nodes.push((id, spec));
                }
                _ => {
                    // not a fusible conv: only allowed if it is the shared source
                    if let Some(existing) = &source {
                        if existing == edge {
                            identity_count += 1;
                        } else {
                            eligible = false;
                            break;
                        }
                    } else {
                        source = Some(edge.clone());
                        identity_count += 1;
                    }
                }
            }
        }
        if !eligible || branch_nodes.is_empty() {
            continue;
        }
        let cin = branch_nodes[0].1.in_channels;
        let cout = branch_nodes[0].1.out_channels;
        if branch_nodes
            .iter()
            .any(|(_, s)| s.in_channels != cin || s.out_channels != cout)
        {
            continue;
        }
        if identity_count > 0 && cin != cout {
            continue;
        }

        let target_h = oddify(branch_nodes.iter().map(|(_, s)| s.kernel.0).max().unwrap());
        let target_w = oddify(branch_nodes.iter().map(|(_, s)| s.kernel.1).max().unwrap());
        let specs: Vec<ConvSpec> = branch_nodes.iter().map(|(_, s)| s.clone()).collect();
        let fused = match fuse_parallel_core(cin, cout, (target_h, target_w), &specs, identity_count)
        {
            Ok(f) => f,
            Err(_) => continue,
        };
        let params_before: usize = specs.iter().map(ConvSpec::param_count).sum();
        let params_after = fused.param_count();

        let source = source.unwrap();
        let removed: Vec<String> = branch_nodes.iter().map(|(id, _)| id.clone()).collect();
        model.nodes.retain(|n| !removed.contains(&n.id));
        install_fused_conv(model, &add_id, source, fused);

        return Ok(Some(FusionReport {
            label: format!("parallel@{add_id}[{}]", removed.join("+")),
            params_before,
            params_after,
            max_abs_dev: 0.0,
            trials: 0,
            interior_only: false,
        }));
    }
    Ok(None)
}

fn try_sequential_rewrite(
    model: &mut GraphModel,
    opts: &PassOptions,
) -> Result<Option<FusionReport>, ispforge_graph::GraphError> {
    let counts = consumer_counts(model);
    for idx in 0..model.nodes.len() {
        let second_id = model.nodes[idx].id.clone();
        let Some((second_spec, second_src)) = conv_spec_of(model, &model.nodes[idx]) else {
            continue;
        };
        let EdgeRef::Node { id: first_id, slot: 0 } = &second_src else {
            continue;
        };
        let first_id = first_id.clone();
        let Some(first_node) = model.node(&first_id) else {
            continue;
        };
        if counts.get(&second_src).copied().unwrap_or(0) != 1 {
            continue;
        }
        let Some((first_spec, first_src)) = conv_spec_of(model, first_node) else {
            continue;
        };

        let first_is_pointwise = first_spec.kernel == (1, 1)
            && first_spec.stride == 1
            && first_spec.pad.is_zero()
            && first_spec.groups == 1;
        let second_is_pointwise = second_spec.kernel == (1, 1)
            && second_spec.stride == 1
            && second_spec.pad.is_zero()
            && second_spec.groups == 1;

        let (fused, interior_only, label) = if first_is_pointwise && second_spec.groups == 1 {
            let blocked =
                opts.strict && first_spec.bias.is_some() && !second_spec.pad.is_zero();
            if blocked {
                continue;
            }
            match fuse_sequential_1x1_then_kxk(&first_spec, &second_spec) {
                Ok((f, interior)) => (
                    f,
                    interior,
                    format!("seq-1x1-kxk@{first_id}>{second_id}"),
                ),
                Err(_) => continue,
            }
        } else if second_is_pointwise && first_spec.groups == 1 {
            match fuse_kxk_then_1x1(&first_spec, &second_spec) {
                Ok(f) => (f, false, format!("seq-kxk-1x1@{first_id}>{second_id}")),
                Err(_) => continue,
            }
        } else {
            continue;
        };

        let params_before = first_spec.param_count() + second_spec.param_count();
        let params_after = fused.param_count();
        model.nodes.retain(|n| n.id != first_id);
        install_fused_conv(model, &second_id, first_src, fused);

        return Ok(Some(FusionReport {
            label,
            params_before,
            params_after,
            max_abs_dev: 0.0,
            trials: 0,
            interior_only,
        }));
    }
    Ok(None)
}
