//! Topological graph execution. Inputs are validated against the declared
//! port shapes; intermediate buffers are dropped as soon as their last
//! consumer has run.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use ispforge_tensor as ops;
use ispforge_tensor::{ConvSpec, Pad, RgbGainWeights, Shape, Tensor};

use crate::error::GraphError;
use crate::model::{EdgeRef, GraphModel, Node, NodeKind};

impl GraphModel {
    /// Run the model on named input tensors, returning the declared outputs
    /// in order. Purely functional: safe to call concurrently on a shared
    /// model.
    pub fn execute(
        &self,
        inputs: &BTreeMap<String, Tensor>,
    ) -> Result<Vec<(String, Tensor)>, GraphError> {
        for (name, shape) in &self.inputs {
            let t = inputs
                .get(name)
                .ok_or_else(|| GraphError::MissingInput(name.clone()))?;
            if t.shape() != *shape {
                return Err(GraphError::ShapeConflict {
                    consumer: format!("input port '{name}'"),
                    producer: "caller".into(),
                    expected: shape.to_string(),
                    got: t.shape().to_string(),
                });
            }
        }

        // reference counts per produced value, so buffers free eagerly
        let mut refcount: HashMap<EdgeRef, usize> = HashMap::new();
        for node in &self.nodes {
            for edge in &node.inputs {
                *refcount.entry(edge.clone()).or_insert(0) += 1;
            }
        }
        for (_, edge) in &self.outputs {
            *refcount.entry(edge.clone()).or_insert(0) += 1;
        }

        let mut values: HashMap<EdgeRef, Rc<Tensor>> = HashMap::new();
        for (name, _) in &self.inputs {
            values.insert(
                EdgeRef::Input(name.clone()),
                Rc::new(inputs[name].clone()),
            );
        }

        let order = self.topo_order()?;
        for idx in order {
            let node = &self.nodes[idx];
            let mut args: Vec<Rc<Tensor>> = Vec::with_capacity(node.inputs.len());
            for edge in &node.inputs {
                let v = values.get(edge).ok_or_else(|| GraphError::UnknownRef {
                    node: node.id.clone(),
                    what: "edge",
                    name: edge.to_string(),
                })?;
                args.push(Rc::clone(v));
            }
            let outs = self.run_node(node, &args)?;
            drop(args);
            for edge in &node.inputs {
                release(&mut values, &mut refcount, edge);
            }
            for (slot, tensor) in outs.into_iter().enumerate() {
                let edge = EdgeRef::node_slot(node.id.clone(), slot);
                if refcount.get(&edge).copied().unwrap_or(0) > 0 {
                    values.insert(edge, Rc::new(tensor));
                }
            }
        }

        let mut results = Vec::with_capacity(self.outputs.len());
        for (name, edge) in &self.outputs {
            let v = values.get(edge).ok_or_else(|| GraphError::UnknownRef {
                node: format!("output '{name}'"),
                what: "edge",
                name: edge.to_string(),
            })?;
            results.push((name.clone(), (**v).clone()));
        }
        Ok(results)
    }

    /// Single-output convenience wrapper.
    pub fn execute_single(&self, input: &Tensor) -> Result<Tensor, GraphError> {
        if self.inputs.len() != 1 || self.outputs.len() != 1 {
            return Err(GraphError::Attr {
                node: self.name.clone(),
                msg: format!(
                    "execute_single needs exactly one input and output port, model has {}/{}",
                    self.inputs.len(),
                    self.outputs.len()
                ),
            });
        }
        let mut map = BTreeMap::new();
        map.insert(self.inputs[0].0.clone(), input.clone());
        Ok(self.execute(&map)?.remove(0).1)
    }

    fn weight(&self, node: &Node, name: &str) -> Result<&Tensor, GraphError> {
        self.weights.get(name).ok_or_else(|| GraphError::UnknownRef {
            node: node.id.clone(),
            what: "weight",
            name: name.to_string(),
        })
    }

    fn scalar_weight(&self, node: &Node, name: &str) -> Result<f32, GraphError> {
        let t = self.weight(node, name)?;
        if t.shape() != Shape::new(1, 1, 1, 1) {
            return Err(GraphError::WeightShape {
                node: node.id.clone(),
                weight: name.to_string(),
                expected: "1x1x1x1".into(),
                got: t.shape().to_string(),
            });
        }
        Ok(t.data()[0])
    }

    fn conv_spec(
        &self,
        node: &Node,
        weight: &str,
        bias: &Option<String>,
        stride: usize,
        pad: Pad,
        groups: usize,
    ) -> Result<ConvSpec, GraphError> {
        let w = self.weight(node, weight)?.clone();
        let ws = w.shape();
        let bias_vec = match bias {
            Some(b) => Some(self.weight(node, b)?.data().to_vec()),
            None => None,
        };
        ConvSpec::new(
            ws.c * groups,
            ws.n,
            (ws.h, ws.w),
            stride,
            pad,
            groups,
            w,
            bias_vec,
        )
        .map_err(|source| GraphError::Op {
            node: node.id.clone(),
            source,
        })
    }

    fn run_node(&self, node: &Node, args: &[Rc<Tensor>]) -> Result<Vec<Tensor>, GraphError> {
        let wrap = |source| GraphError::Op {
            node: node.id.clone(),
            source,
        };
        let x = &*args[0];
        let out = match &node.kind {
            NodeKind::Conv2d {
                stride,
                pad,
                groups,
                weight,
                bias,
            } => {
                let spec = self.conv_spec(node, weight, bias, *stride, *pad, *groups)?;
                vec![ops::conv2d(x, &spec).map_err(wrap)?]
            }
            NodeKind::TransposeConv2d { weight, bias } => {
                let w = self.weight(node, weight)?;
                let b = match bias {
                    Some(name) => Some(self.weight(node, name)?.data().to_vec()),
                    None => None,
                };
                vec![ops::transpose_conv2d(x, w, b.as_deref()).map_err(wrap)?]
            }
            NodeKind::Relu => vec![ops::relu(x)],
            NodeKind::Sigmoid => vec![ops::sigmoid(x)],
            NodeKind::Tanh => vec![ops::tanh(x)],
            NodeKind::Clamp { lo, hi } => vec![ops::clamp(x, *lo, *hi).map_err(wrap)?],
            NodeKind::Add => {
                let refs: Vec<&Tensor> = args.iter().map(|a| &**a).collect();
                vec![ops::add(&refs).map_err(wrap)?]
            }
            NodeKind::Multiply => vec![ops::multiply(x, &args[1]).map_err(wrap)?],
            NodeKind::BiasAdd { bias } => {
                let b = self.weight(node, bias)?;
                vec![ops::bias_add(x, b).map_err(wrap)?]
            }
            NodeKind::Concat => {
                let refs: Vec<&Tensor> = args.iter().map(|a| &**a).collect();
                vec![ops::concat_channels(&refs).map_err(wrap)?]
            }
            NodeKind::SliceChannels { start, end } => {
                vec![ops::slice_channels(x, *start, *end).map_err(wrap)?]
            }
            NodeKind::DepthToSpace { block } => vec![ops::depth_to_space(x, *block).map_err(wrap)?],
            NodeKind::SpaceToDepth { block } => vec![ops::space_to_depth(x, *block).map_err(wrap)?],
            NodeKind::GlobalAvgPool => vec![ops::global_avg_pool(x)],
            NodeKind::AvgPool2d { kernel, stride } => {
                vec![ops::avg_pool2d(x, *kernel, *stride).map_err(wrap)?]
            }
            NodeKind::NearestUpsample2 => vec![ops::nearest_upsample2(x)],
            NodeKind::Dense { weight, bias } => {
                let w = self.weight(node, weight)?;
                let b = match bias {
                    Some(name) => Some(self.weight(node, name)?),
                    None => None,
                };
                vec![ops::dense(x, w, b).map_err(wrap)?]
            }
            NodeKind::ChannelAttention {
                reduction,
                fc1_w,
                fc1_b,
                fc2_w,
                fc2_b,
            } => vec![ops::channel_attention(
                x,
                *reduction,
                self.weight(node, fc1_w)?,
                self.weight(node, fc1_b)?,
                self.weight(node, fc2_w)?,
                self.weight(node, fc2_b)?,
            )
            .map_err(wrap)?],
            NodeKind::CbamSpatialAttention { weight, bias } => {
                let w = self.weight(node, weight)?;
                let ws = w.shape();
                let spec = self.conv_spec(
                    node,
                    weight,
                    bias,
                    1,
                    Pad::same(ws.h, ws.w),
                    1,
                )?;
                vec![ops::cbam_spatial_attention(x, &spec).map_err(wrap)?]
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
                let weights = RgbGainWeights {
                    fc1_w: self.weight(node, fc1_w)?.clone(),
                    fc1_b: self.weight(node, fc1_b)?.clone(),
                    fc2_w: self.weight(node, fc2_w)?.clone(),
                    fc2_b: self.weight(node, fc2_b)?.clone(),
                    fc3_w: self.weight(node, fc3_w)?.clone(),
                    fc3_b: self.weight(node, fc3_b)?.clone(),
                    g_max: *g_max,
                };
                vec![ops::rgb_gain_module(x, &weights).map_err(wrap)?]
            }
            NodeKind::GammaCorrect { gamma } => {
                let g = self.scalar_weight(node, gamma)?;
                vec![ops::gamma_correct(x, g).map_err(wrap)?]
            }
            NodeKind::ToneMap { white } => {
                let w = self.scalar_weight(node, white)?;
                vec![ops::tone_map(x, w).map_err(wrap)?]
            }
            NodeKind::HaarDwt => {
                let (ll, lh, hl, hh) = ops::haar_dwt(x).map_err(wrap)?;
                vec![ll, lh, hl, hh]
            }
            NodeKind::HaarIdwt => {
                vec![ops::haar_idwt(&args[0], &args[1], &args[2], &args[3]).map_err(wrap)?]
            }
            NodeKind::FixedFilter { filter } => vec![ops::fixed_filter(x, *filter).map_err(wrap)?],
        };
        Ok(out)
    }
}

fn release(
    values: &mut HashMap<EdgeRef, Rc<Tensor>>,
    refcount: &mut HashMap<EdgeRef, usize>,
    edge: &EdgeRef,
) {
    if let Some(count) = refcount.get_mut(edge) {
        *count -= 1;
        if *count == 0 {
            values.remove(edge);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_relu_model() -> GraphModel {
        let mut m = GraphModel::new("t");
        m.inputs.push(("x".into(), Shape::new(1, 2, 3, 3)));
        m.nodes.push(Node {
            id: "r".into(),
            kind: NodeKind::Relu,
            inputs: vec![EdgeRef::input("x")],
        });
        m.outputs.push(("y".into(), EdgeRef::node("r")));
        m
    }

    #[test]
    fn single_relu_executes() {
        let m = single_relu_model();
        m.validate().unwrap();
        let x = Tensor::from_fn(Shape::new(1, 2, 3, 3), |_, c, y, _| {
            if (c + y) % 2 == 0 {
                -1.0
            } else {
                2.0
            }
        });
        let out = m.execute_single(&x).unwrap();
        assert!(out.bits_eq(&ops::relu(&x)));
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let m = single_relu_model();
        let x = Tensor::zeros(Shape::new(1, 2, 4, 4));
        assert!(matches!(
            m.execute_single(&x),
            Err(GraphError::ShapeConflict { .. })
        ));
    }

    #[test]
    fn missing_input_is_rejected() {
        let m = single_relu_model();
        let err = m.execute(&BTreeMap::new()).unwrap_err();
        assert!(matches!(err, GraphError::MissingInput(_)));
    }

    #[test]
    fn parallel_branches_match_manual_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut m = GraphModel::new("t");
        m.inputs.push(("x".into(), Shape::new(1, 3, 6, 6)));
        let w1 = Tensor::random_uniform(Shape::new(4, 3, 3, 3), &mut rng).map(|v| v - 0.5);
        let w2 = Tensor::random_uniform(Shape::new(4, 3, 1, 1), &mut rng).map(|v| v - 0.5);
        m.weights.insert("a.w".into(), w1.clone());
        m.weights.insert("b.w".into(), w2.clone());
        for (id, pad) in [("a", Pad::uniform(1)), ("b", Pad::ZERO)] {
            m.nodes.push(Node {
                id: id.into(),
                kind: NodeKind::Conv2d {
                    stride: 1,
                    pad,
                    groups: 1,
                    weight: format!("{id}.w"),
                    bias: None,
                },
                inputs: vec![EdgeRef::input("x")],
            });
        }
        m.nodes.push(Node {
            id: "sum".into(),
            kind: NodeKind::Add,
            inputs: vec![EdgeRef::node("a"), EdgeRef::node("b")],
        });
        m.outputs.push(("y".into(), EdgeRef::node("sum")));
        m.validate().unwrap();

        let x = Tensor::random_uniform(Shape::new(1, 3, 6, 6), &mut rng);
        let got = m.execute_single(&x).unwrap();

        let sa = ConvSpec::new(3, 4, (3, 3), 1, Pad::uniform(1), 1, w1, None).unwrap();
        let sb = ConvSpec::new(3, 4, (1, 1), 1, Pad::ZERO, 1, w2, None).unwrap();
        let manual = ops::add(&[
            &ops::conv2d(&x, &sa).unwrap(),
            &ops::conv2d(&x, &sb).unwrap(),
        ])
        .unwrap();
        assert!(got.bits_eq(&manual));
    }

    #[test]
    fn execution_is_deterministic() {
        let m = single_relu_model();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::random_uniform(Shape::new(1, 2, 3, 3), &mut rng);
        let a = m.execute_single(&x).unwrap();
        let b = m.execute_single(&x).unwrap();
        assert!(a.bits_eq(&b));
    }
}
