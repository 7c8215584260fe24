//! Small fluent helper for assembling zoo graphs. Every method appends nodes
//! and seeded weights and hands back the edge to wire next.

use ispforge_graph::{EdgeRef, GraphModel, Node, NodeKind};
use ispforge_tensor::{Pad, Shape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub(crate) struct Builder {
    model: GraphModel,
    rng: ChaCha8Rng,
    seed: u64,
}

impl Builder {
    pub fn new(name: &str, seed: u64) -> Self {
        Builder {
            model: GraphModel::new(name),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn input(&mut self, raw_side: usize) -> EdgeRef {
        self.model
            .inputs
            .push(("raw".into(), Shape::new(1, 4, raw_side, raw_side)));
        EdgeRef::input("raw")
    }

    pub fn finish(mut self, out: EdgeRef, metadata: &[(&str, &str)]) -> GraphModel {
        self.model.outputs.push(("rgb".into(), out));
        self.model.metadata.insert("seed".into(), self.seed.to_string());
        for (k, v) in metadata {
            self.model.metadata.insert((*k).into(), (*v).into());
        }
        self.model
            .validate()
            .unwrap_or_else(|e| panic!("builder produced an invalid '{}': {e}", self.model.name));
        self.model
    }

    fn normal(&mut self, shape: Shape, std: f32) -> Tensor {
        let dist = Normal::new(0.0f32, std).unwrap();
        let data = (0..shape.count()).map(|_| dist.sample(&mut self.rng)).collect();
        Tensor::new(shape, data).unwrap()
    }

    fn weight(&mut self, name: String, t: Tensor) -> String {
        debug_assert!(!self.model.weights.contains_key(&name), "weight clash {name}");
        self.model.weights.insert(name.clone(), t);
        name
    }

    fn push(&mut self, id: &str, kind: NodeKind, inputs: Vec<EdgeRef>) -> EdgeRef {
        self.model.nodes.push(Node {
            id: id.into(),
            kind,
            inputs,
        });
        EdgeRef::node(id)
    }

    fn conv_inner(
        &mut self,
        id: &str,
        from: EdgeRef,
        cin: usize,
        cout: usize,
        k: usize,
        groups: usize,
        std: f32,
        bias_value: f32,
    ) -> EdgeRef {
        let w = self.normal(Shape::new(cout, cin / groups, k, k), std);
        let wname = self.weight(format!("{id}.w"), w);
        let bname = self.weight(
            format!("{id}.b"),
            Tensor::filled(Shape::new(1, cout, 1, 1), bias_value),
        );
        self.push(
            id,
            NodeKind::Conv2d {
                stride: 1,
                pad: Pad::same(k, k),
                groups,
                weight: wname,
                bias: Some(bname),
            },
            vec![from],
        )
    }

    /// Same-padded conv with He init followed by a ReLU.
    pub fn conv_relu(&mut self, id: &str, from: EdgeRef, cin: usize, cout: usize, k: usize) -> EdgeRef {
        let fan_in = (cin * k * k) as f32;
        let conv = self.conv_inner(id, from, cin, cout, k, 1, (2.0 / fan_in).sqrt(), 0.0);
        self.push(&format!("{id}_act"), NodeKind::Relu, vec![conv])
    }

    /// Linear same-padded conv, zero bias.
    pub fn conv(&mut self, id: &str, from: EdgeRef, cin: usize, cout: usize, k: usize) -> EdgeRef {
        let fan_in = (cin * k * k) as f32;
        self.conv_inner(id, from, cin, cout, k, 1, (1.0 / fan_in).sqrt(), 0.0)
    }

    /// Output conv: bias 0.5 so predictions start mid-range instead of dead
    /// against the clamp.
    pub fn final_conv(&mut self, id: &str, from: EdgeRef, cin: usize, cout: usize, k: usize) -> EdgeRef {
        let fan_in = (cin * k * k) as f32;
        self.conv_inner(id, from, cin, cout, k, 1, (1.0 / fan_in).sqrt(), 0.5)
    }

    pub fn depthwise(&mut self, id: &str, from: EdgeRef, c: usize, k: usize) -> EdgeRef {
        let fan_in = (k * k) as f32;
        self.conv_inner(id, from, c, c, k, c, (2.0 / fan_in).sqrt(), 0.0)
    }

    /// conv+relu ×2 and a linear output conv into a ×2 depth-to-space.
    pub fn smallnet_head(&mut self, prefix: &str, from: EdgeRef, cin: usize, mid: usize) -> EdgeRef {
        let c1 = self.conv_relu(&format!("{prefix}1"), from, cin, mid, 3);
        let c2 = self.conv_relu(&format!("{prefix}2"), c1, mid, mid, 3);
        let c3 = self.final_conv(&format!("{prefix}3"), c2, mid, mid, 3);
        self.depth_to_space(&format!("{prefix}_up"), c3, 2)
    }

    pub fn relu(&mut self, id: &str, from: EdgeRef) -> EdgeRef {
        self.push(id, NodeKind::Relu, vec![from])
    }

    pub fn sigmoid(&mut self, id: &str, from: EdgeRef) -> EdgeRef {
        self.push(id, NodeKind::Sigmoid, vec![from])
    }

    pub fn add(&mut self, id: &str, terms: &[EdgeRef]) -> EdgeRef {
        self.push(id, NodeKind::Add, terms.to_vec())
    }

    pub fn multiply(&mut self, id: &str, a: EdgeRef, b: EdgeRef) -> EdgeRef {
        self.push(id, NodeKind::Multiply, vec![a, b])
    }

    pub fn bias_add(&mut self, id: &str, from: EdgeRef, c: usize) -> EdgeRef {
        let b = self.weight(format!("{id}.b"), Tensor::zeros(Shape::new(1, c, 1, 1)));
        self.push(id, NodeKind::BiasAdd { bias: b }, vec![from])
    }

    pub fn concat(&mut self, id: &str, parts: &[EdgeRef]) -> EdgeRef {
        self.push(id, NodeKind::Concat, parts.to_vec())
    }

    pub fn slice(&mut self, id: &str, from: EdgeRef, start: usize, end: usize) -> EdgeRef {
        self.push(id, NodeKind::SliceChannels { start, end }, vec![from])
    }

    pub fn depth_to_space(&mut self, id: &str, from: EdgeRef, block: usize) -> EdgeRef {
        self.push(id, NodeKind::DepthToSpace { block }, vec![from])
    }

    pub fn avg_pool(&mut self, id: &str, from: EdgeRef, k: usize, stride: usize) -> EdgeRef {
        self.push(id, NodeKind::AvgPool2d { kernel: k, stride }, vec![from])
    }

    /// 2× transposed-conv upsampling.
    pub fn upconv(&mut self, id: &str, from: EdgeRef, cin: usize, cout: usize) -> EdgeRef {
        let w = self.normal(Shape::new(cout, cin, 2, 2), (1.0 / cin as f32).sqrt());
        let wname = self.weight(format!("{id}.w"), w);
        let bname = self.weight(format!("{id}.b"), Tensor::zeros(Shape::new(1, cout, 1, 1)));
        self.push(
            id,
            NodeKind::TransposeConv2d {
                weight: wname,
                bias: Some(bname),
            },
            vec![from],
        )
    }

    pub fn clamp01(&mut self, id: &str, from: EdgeRef) -> EdgeRef {
        self.push(id, NodeKind::Clamp { lo: 0.0, hi: 1.0 }, vec![from])
    }

    pub fn tone_map(&mut self, id: &str, from: EdgeRef, white_init: f32) -> EdgeRef {
        let w = self.weight(
            format!("{id}.white"),
            Tensor::filled(Shape::new(1, 1, 1, 1), white_init),
        );
        self.push(id, NodeKind::ToneMap { white: w }, vec![from])
    }

    pub fn gamma(&mut self, id: &str, from: EdgeRef, gamma_init: f32) -> EdgeRef {
        let w = self.weight(
            format!("{id}.gamma"),
            Tensor::filled(Shape::new(1, 1, 1, 1), gamma_init),
        );
        self.push(id, NodeKind::GammaCorrect { gamma: w }, vec![from])
    }

    pub fn cbam(&mut self, id: &str, from: EdgeRef, k: usize) -> EdgeRef {
        let std = (1.0 / (2 * k * k) as f32).sqrt();
        let w = self.normal(Shape::new(1, 2, k, k), std);
        let wname = self.weight(format!("{id}.w"), w);
        let bname = self.weight(format!("{id}.b"), Tensor::zeros(Shape::new(1, 1, 1, 1)));
        self.push(
            id,
            NodeKind::CbamSpatialAttention {
                weight: wname,
                bias: Some(bname),
            },
            vec![from],
        )
    }

    pub fn channel_attention(&mut self, id: &str, from: EdgeRef, c: usize, reduction: usize) -> EdgeRef {
        let hidden = c / reduction;
        let fc1_w = self.normal(Shape::new(hidden, c, 1, 1), (1.0 / c as f32).sqrt());
        let fc2_w = self.normal(Shape::new(c, hidden, 1, 1), (1.0 / hidden as f32).sqrt());
        let fc1_w = self.weight(format!("{id}.w1"), fc1_w);
        let fc1_b = self.weight(format!("{id}.b1"), Tensor::zeros(Shape::new(1, hidden, 1, 1)));
        let fc2_w = self.weight(format!("{id}.w2"), fc2_w);
        let fc2_b = self.weight(format!("{id}.b2"), Tensor::zeros(Shape::new(1, c, 1, 1)));
        self.push(
            id,
            NodeKind::ChannelAttention {
                reduction,
                fc1_w,
                fc1_b,
                fc2_w,
                fc2_b,
            },
            vec![from],
        )
    }

    /// Gain predictor initialized so gains start near 1 (fc3 bias −ln 3 with
    /// g_max 4).
    pub fn rgb_gain(&mut self, id: &str, from: EdgeRef, c: usize, hidden: usize, g_max: f32) -> EdgeRef {
        let w1 = self.normal(Shape::new(hidden, c, 1, 1), (1.0 / c as f32).sqrt());
        let w2 = self.normal(Shape::new(hidden, hidden, 1, 1), (1.0 / hidden as f32).sqrt());
        let w3 = self.normal(Shape::new(c, hidden, 1, 1), 0.01);
        let fc1_w = self.weight(format!("{id}.w1"), w1);
        let fc1_b = self.weight(format!("{id}.b1"), Tensor::zeros(Shape::new(1, hidden, 1, 1)));
        let fc2_w = self.weight(format!("{id}.w2"), w2);
        let fc2_b = self.weight(format!("{id}.b2"), Tensor::zeros(Shape::new(1, hidden, 1, 1)));
        let fc3_w = self.weight(format!("{id}.w3"), w3);
        let fc3_b = self.weight(
            format!("{id}.b3"),
            Tensor::filled(Shape::new(1, c, 1, 1), -(3.0f32.ln())),
        );
        self.push(
            id,
            NodeKind::RgbGain {
                g_max,
                fc1_w,
                fc1_b,
                fc2_w,
                fc2_b,
                fc3_w,
                fc3_b,
            },
            vec![from],
        )
    }

    pub fn haar_dwt(&mut self, id: &str, from: EdgeRef) -> (EdgeRef, EdgeRef, EdgeRef, EdgeRef) {
        self.push(id, NodeKind::HaarDwt, vec![from]);
        (
            EdgeRef::node_slot(id, 0),
            EdgeRef::node_slot(id, 1),
            EdgeRef::node_slot(id, 2),
            EdgeRef::node_slot(id, 3),
        )
    }

    pub fn haar_idwt(
        &mut self,
        id: &str,
        ll: EdgeRef,
        lh: EdgeRef,
        hl: EdgeRef,
        hh: EdgeRef,
    ) -> EdgeRef {
        self.push(id, NodeKind::HaarIdwt, vec![ll, lh, hl, hh])
    }

    /// Training-form multi-branch block: one same-padded conv per kernel size
    /// plus an optional identity edge, all joined by an add. Branch init is
    /// scaled down by √(#branches) so the summed activations keep a sane
    /// variance.
    pub fn erep_block(
        &mut self,
        id: &str,
        from: EdgeRef,
        cin: usize,
        cout: usize,
        sizes: &[usize],
        identity: bool,
    ) -> EdgeRef {
        let scale = 1.0 / (sizes.len() as f32).sqrt();
        let mut terms = Vec::with_capacity(sizes.len() + 1);
        for (i, &k) in sizes.iter().enumerate() {
            let fan_in = (cin * k * k) as f32;
            let std = (2.0 / fan_in).sqrt() * scale;
            terms.push(self.conv_inner(
                &format!("{id}.b{i}"),
                from.clone(),
                cin,
                cout,
                k,
                1,
                std,
                0.0,
            ));
        }
        if identity {
            debug_assert_eq!(cin, cout, "identity branch needs in == out");
            terms.push(from);
        }
        self.push(id, NodeKind::Add, terms)
    }

    /// conv+relu then a linear conv, added back onto the block input.
    pub fn res_block(&mut self, id: &str, from: EdgeRef, c: usize) -> EdgeRef {
        let a = self.conv_relu(&format!("{id}.a"), from.clone(), c, c, 3);
        let b = self.conv(&format!("{id}.c"), a, c, c, 3);
        self.add(id, &[b, from])
    }
}
