//! Static shape inference. Walks the graph in topological order, checks every
//! weight against the shape its node requires, and fails atomically on the
//! first inconsistency.

use std::collections::BTreeMap;

use ispforge_tensor::Shape;

use crate::error::GraphError;
use crate::model::{EdgeRef, GraphModel, Node, NodeKind};

#[derive(Clone, Debug)]
pub struct ShapeMap {
    pub inputs: BTreeMap<String, Shape>,
    /// Per-node output shapes, one entry per output slot.
    pub nodes: BTreeMap<String, Vec<Shape>>,
}

impl ShapeMap {
    pub fn edge(&self, edge: &EdgeRef) -> Option<Shape> {
        match edge {
            EdgeRef::Input(name) => self.inputs.get(name).copied(),
            EdgeRef::Node { id, slot } => self.nodes.get(id).and_then(|v| v.get(*slot)).copied(),
        }
    }

    /// Shape of a declared model output.
    pub fn output(&self, model: &GraphModel, name: &str) -> Option<Shape> {
        model
            .outputs
            .iter()
            .find(|(n, _)| n == name)
            .and_then(|(_, e)| self.edge(e))
    }
}

pub fn infer_shapes(model: &GraphModel) -> Result<ShapeMap, GraphError> {
    let mut map = ShapeMap {
        inputs: model.inputs.iter().cloned().collect(),
        nodes: BTreeMap::new(),
    };
    for idx in model.topo_order()? {
        let node = &model.nodes[idx];
        let mut in_shapes = Vec::with_capacity(node.inputs.len());
        for edge in &node.inputs {
            let shape = map.edge(edge).ok_or_else(|| GraphError::UnknownRef {
                node: node.id.clone(),
                what: "edge",
                name: edge.to_string(),
            })?;
            in_shapes.push(shape);
        }
        let outs = node_output_shapes(model, node, &in_shapes)?;
        map.nodes.insert(node.id.clone(), outs);
    }
    Ok(map)
}

fn weight_shape(model: &GraphModel, node: &Node, name: &str) -> Result<Shape, GraphError> {
    model
        .weights
        .get(name)
        .map(|t| t.shape())
        .ok_or_else(|| GraphError::UnknownRef {
            node: node.id.clone(),
            what: "weight",
            name: name.to_string(),
        })
}

fn expect_weight(
    model: &GraphModel,
    node: &Node,
    name: &str,
    expected: Shape,
) -> Result<(), GraphError> {
    let got = weight_shape(model, node, name)?;
    if got != expected {
        return Err(GraphError::WeightShape {
            node: node.id.clone(),
            weight: name.to_string(),
            expected: expected.to_string(),
            got: got.to_string(),
        });
    }
    Ok(())
}

fn conflict(node: &Node, expected: impl ToString, got: impl ToString) -> GraphError {
    let producer = node
        .inputs
        .first()
        .map(|e| e.to_string())
        .unwrap_or_default();
    GraphError::ShapeConflict {
        consumer: node.id.clone(),
        producer,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

fn attr_err(node: &Node, msg: impl Into<String>) -> GraphError {
    GraphError::Attr {
        node: node.id.clone(),
        msg: msg.into(),
    }
}

pub(crate) fn node_output_shapes(
    model: &GraphModel,
    node: &Node,
    ins: &[Shape],
) -> Result<Vec<Shape>, GraphError> {
    let s = ins[0];
    let out = match &node.kind {
        NodeKind::Conv2d {
            stride,
            pad,
            groups,
            weight,
            bias,
        } => {
            let ws = weight_shape(model, node, weight)?;
            if *groups == 0 || ws.c * groups != s.c || ws.n % groups != 0 {
                return Err(conflict(
                    node,
                    format!("input channels {} (weight {ws}, groups {groups})", ws.c * groups),
                    s,
                ));
            }
            if let Some(b) = bias {
                expect_weight(model, node, b, Shape::new(1, ws.n, 1, 1))?;
            }
            let oh = conv_dim(node, s.h, pad.top + pad.bottom, ws.h, *stride)?;
            let ow = conv_dim(node, s.w, pad.left + pad.right, ws.w, *stride)?;
            vec![Shape::new(s.n, ws.n, oh, ow)]
        }
        NodeKind::TransposeConv2d { weight, bias } => {
            let ws = weight_shape(model, node, weight)?;
            if ws.c != s.c || ws.h != 2 || ws.w != 2 {
                return Err(conflict(node, format!("weight (out,{},2,2)", s.c), ws));
            }
            if let Some(b) = bias {
                expect_weight(model, node, b, Shape::new(1, ws.n, 1, 1))?;
            }
            vec![Shape::new(s.n, ws.n, s.h * 2, s.w * 2)]
        }
        NodeKind::Relu | NodeKind::Sigmoid | NodeKind::Tanh | NodeKind::FixedFilter { .. } => {
            vec![s]
        }
        NodeKind::Clamp { lo, hi } => {
            if !(lo < hi) {
                return Err(attr_err(node, format!("clamp needs lo < hi, got {lo}..{hi}")));
            }
            vec![s]
        }
        NodeKind::Add | NodeKind::Multiply => {
            for (i, other) in ins.iter().enumerate().skip(1) {
                if *other != s {
                    return Err(GraphError::ShapeConflict {
                        consumer: node.id.clone(),
                        producer: node.inputs[i].to_string(),
                        expected: s.to_string(),
                        got: other.to_string(),
                    });
                }
            }
            vec![s]
        }
        NodeKind::BiasAdd { bias } => {
            expect_weight(model, node, bias, Shape::new(1, s.c, 1, 1))?;
            vec![s]
        }
        NodeKind::Concat => {
            let mut c = 0;
            for (i, other) in ins.iter().enumerate() {
                if (other.n, other.h, other.w) != (s.n, s.h, s.w) {
                    return Err(GraphError::ShapeConflict {
                        consumer: node.id.clone(),
                        producer: node.inputs[i].to_string(),
                        expected: format!("{}x?x{}x{}", s.n, s.h, s.w),
                        got: other.to_string(),
                    });
                }
                c += other.c;
            }
            vec![Shape::new(s.n, c, s.h, s.w)]
        }
        NodeKind::SliceChannels { start, end } => {
            if *start >= *end || *end > s.c {
                return Err(attr_err(
                    node,
                    format!("slice {start}..{end} invalid for {} channels", s.c),
                ));
            }
            vec![Shape::new(s.n, end - start, s.h, s.w)]
        }
        NodeKind::DepthToSpace { block } => {
            if *block == 0 || s.c % (block * block) != 0 {
                return Err(attr_err(
                    node,
                    format!("channels {} not divisible by block² = {}", s.c, block * block),
                ));
            }
            vec![Shape::new(s.n, s.c / (block * block), s.h * block, s.w * block)]
        }
        NodeKind::SpaceToDepth { block } => {
            if *block == 0 || s.h % block != 0 || s.w % block != 0 {
                return Err(attr_err(
                    node,
                    format!("spatial {}x{} not divisible by block {block}", s.h, s.w),
                ));
            }
            vec![Shape::new(s.n, s.c * block * block, s.h / block, s.w / block)]
        }
        NodeKind::GlobalAvgPool => vec![Shape::new(s.n, s.c, 1, 1)],
        NodeKind::AvgPool2d { kernel, stride } => {
            if *kernel == 0 || *stride == 0 {
                return Err(attr_err(node, "kernel and stride must be ≥ 1"));
            }
            let oh = conv_dim(node, s.h, 0, *kernel, *stride)?;
            let ow = conv_dim(node, s.w, 0, *kernel, *stride)?;
            vec![Shape::new(s.n, s.c, oh, ow)]
        }
        NodeKind::NearestUpsample2 => vec![Shape::new(s.n, s.c, s.h * 2, s.w * 2)],
        NodeKind::Dense { weight, bias } => {
            if s.h != 1 || s.w != 1 {
                return Err(conflict(node, "(n,c,1,1)", s));
            }
            let ws = weight_shape(model, node, weight)?;
            if ws.c != s.c || ws.h != 1 || ws.w != 1 {
                return Err(conflict(node, format!("weight (m,{},1,1)", s.c), ws));
            }
            if let Some(b) = bias {
                expect_weight(model, node, b, Shape::new(1, ws.n, 1, 1))?;
            }
            vec![Shape::new(s.n, ws.n, 1, 1)]
        }
        NodeKind::ChannelAttention {
            reduction,
            fc1_w,
            fc1_b,
            fc2_w,
            fc2_b,
        } => {
            if *reduction == 0 || s.c % reduction != 0 {
                return Err(attr_err(
                    node,
                    format!("channels {} not divisible by reduction {reduction}", s.c),
                ));
            }
            let hidden = s.c / reduction;
            expect_weight(model, node, fc1_w, Shape::new(hidden, s.c, 1, 1))?;
            expect_weight(model, node, fc1_b, Shape::new(1, hidden, 1, 1))?;
            expect_weight(model, node, fc2_w, Shape::new(s.c, hidden, 1, 1))?;
            expect_weight(model, node, fc2_b, Shape::new(1, s.c, 1, 1))?;
            vec![s]
        }
        NodeKind::CbamSpatialAttention { weight, bias } => {
            let ws = weight_shape(model, node, weight)?;
            if ws.n != 1 || ws.c != 2 {
                return Err(conflict(node, "weight (1,2,k,k)", ws));
            }
            if let Some(b) = bias {
                expect_weight(model, node, b, Shape::new(1, 1, 1, 1))?;
            }
            vec![s]
        }
        NodeKind::RgbGain {
            g_max,
            fc1_w,
            fc1_b,
            fc2_w,
            fc2_b,
            fc3_w,
            fc3_b,
        } => {
            if s.c < 3 {
                return Err(conflict(node, "≥ 3 channels", s));
            }
            if !(g_max > &0.0) {
                return Err(attr_err(node, format!("g_max must be > 0, got {g_max}")));
            }
            let h1 = weight_shape(model, node, fc1_w)?.n;
            let h2 = weight_shape(model, node, fc2_w)?.n;
            expect_weight(model, node, fc1_w, Shape::new(h1, s.c, 1, 1))?;
            expect_weight(model, node, fc1_b, Shape::new(1, h1, 1, 1))?;
            expect_weight(model, node, fc2_w, Shape::new(h2, h1, 1, 1))?;
            expect_weight(model, node, fc2_b, Shape::new(1, h2, 1, 1))?;
            expect_weight(model, node, fc3_w, Shape::new(s.c, h2, 1, 1))?;
            expect_weight(model, node, fc3_b, Shape::new(1, s.c, 1, 1))?;
            vec![s]
        }
        NodeKind::GammaCorrect { gamma } => {
            expect_weight(model, node, gamma, Shape::new(1, 1, 1, 1))?;
            vec![s]
        }
        NodeKind::ToneMap { white } => {
            expect_weight(model, node, white, Shape::new(1, 1, 1, 1))?;
            vec![s]
        }
        NodeKind::HaarDwt => {
            if s.h % 2 != 0 || s.w % 2 != 0 {
                return Err(conflict(node, "even spatial dims", s));
            }
            vec![Shape::new(s.n, s.c, s.h / 2, s.w / 2); 4]
        }
        NodeKind::HaarIdwt => {
            for (i, other) in ins.iter().enumerate().skip(1) {
                if *other != s {
                    return Err(GraphError::ShapeConflict {
                        consumer: node.id.clone(),
                        producer: node.inputs[i].to_string(),
                        expected: s.to_string(),
                        got: other.to_string(),
                    });
                }
            }
            vec![Shape::new(s.n, s.c, s.h * 2, s.w * 2)]
        }
    };
    Ok(out)
}

fn conv_dim(
    node: &Node,
    size: usize,
    pad: usize,
    kernel: usize,
    stride: usize,
) -> Result<usize, GraphError> {
    if stride == 0 {
        return Err(attr_err(node, "stride must be ≥ 1"));
    }
    if size + pad < kernel {
        return Err(conflict(
            node,
            format!("spatial dim ≥ {}", kernel.saturating_sub(pad)),
            size,
        ));
    }
    Ok((size + pad - kernel) / stride + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ispforge_tensor::{Pad, Tensor};

    #[test]
    fn empty_graph_identity_shape() {
        let mut m = GraphModel::new("t");
        m.inputs.push(("x".into(), Shape::new(1, 3, 4, 4)));
        m.outputs.push(("y".into(), EdgeRef::input("x")));
        let shapes = infer_shapes(&m).unwrap();
        assert_eq!(shapes.output(&m, "y"), Some(Shape::new(1, 3, 4, 4)));
    }

    #[test]
    fn stride_two_conv_shape() {
        let mut m = GraphModel::new("t");
        m.inputs.push(("x".into(), Shape::new(1, 4, 256, 256)));
        m.weights
            .insert("c.w".into(), Tensor::zeros(Shape::new(8, 4, 3, 3)));
        m.nodes.push(Node {
            id: "c".into(),
            kind: NodeKind::Conv2d {
                stride: 2,
                pad: Pad::uniform(1),
                groups: 1,
                weight: "c.w".into(),
                bias: None,
            },
            inputs: vec![EdgeRef::input("x")],
        });
        m.outputs.push(("y".into(), EdgeRef::node("c")));
        let shapes = infer_shapes(&m).unwrap();
        assert_eq!(shapes.output(&m, "y"), Some(Shape::new(1, 8, 128, 128)));
    }

    #[test]
    fn conflict_names_both_nodes_and_shapes() {
        let mut m = GraphModel::new("t");
        m.inputs.push(("x".into(), Shape::new(1, 3, 4, 4)));
        m.inputs.push(("z".into(), Shape::new(1, 3, 8, 8)));
        m.nodes.push(Node {
            id: "sum".into(),
            kind: NodeKind::Add,
            inputs: vec![EdgeRef::input("x"), EdgeRef::input("z")],
        });
        m.outputs.push(("y".into(), EdgeRef::node("sum")));
        let err = infer_shapes(&m).unwrap_err().to_string();
        assert!(err.contains("sum") && err.contains("@z"), "{err}");
        assert!(err.contains("1x3x4x4") && err.contains("1x3x8x8"), "{err}");
    }

    #[test]
    fn haar_slots_have_half_resolution() {
        let mut m = GraphModel::new("t");
        m.inputs.push(("x".into(), Shape::new(1, 3, 8, 8)));
        m.nodes.push(Node {
            id: "dwt".into(),
            kind: NodeKind::HaarDwt,
            inputs: vec![EdgeRef::input("x")],
        });
        m.outputs.push(("hh".into(), EdgeRef::node_slot("dwt", 3)));
        let shapes = infer_shapes(&m).unwrap();
        assert_eq!(shapes.output(&m, "hh"), Some(Shape::new(1, 3, 4, 4)));
    }
}
