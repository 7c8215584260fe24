use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use ispforge_tensor::{FilterKind, Pad, Shape, Tensor};

use crate::error::GraphError;

/// Reference to a value: either a declared graph input or an output slot of
/// another node. Rendered as `@name`, `id`, or `id:slot` in manifests.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub enum EdgeRef {
    Input(String),
    Node { id: String, slot: usize },
}

impl EdgeRef {
    pub fn node(id: impl Into<String>) -> Self {
        EdgeRef::Node {
            id: id.into(),
            slot: 0,
        }
    }

    pub fn node_slot(id: impl Into<String>, slot: usize) -> Self {
        EdgeRef::Node {
            id: id.into(),
            slot,
        }
    }

    pub fn input(name: impl Into<String>) -> Self {
        EdgeRef::Input(name.into())
    }
}

impl fmt::Display for EdgeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeRef::Input(name) => write!(f, "@{name}"),
            EdgeRef::Node { id, slot: 0 } => write!(f, "{id}"),
            EdgeRef::Node { id, slot } => write!(f, "{id}:{slot}"),
        }
    }
}

/// Operation performed by a node. Weight fields hold names into the model's
/// weight table; expected weight shapes are documented per kind in
/// [`crate::shape`].
#[derive(Clone, PartialEq, Debug)]
pub enum NodeKind {
    Conv2d {
        stride: usize,
        pad: Pad,
        groups: usize,
        weight: String,
        bias: Option<String>,
    },
    /// 2× deconvolution, kernel 2×2 stride 2, weight (out, in, 2, 2).
    TransposeConv2d {
        weight: String,
        bias: Option<String>,
    },
    Relu,
    Sigmoid,
    Tanh,
    Clamp {
        lo: f32,
        hi: f32,
    },
    /// N-ary elementwise sum; also the join point of re-parameterizable
    /// branches.
    Add,
    Multiply,
    BiasAdd {
        bias: String,
    },
    Concat,
    SliceChannels {
        start: usize,
        end: usize,
    },
    DepthToSpace {
        block: usize,
    },
    SpaceToDepth {
        block: usize,
    },
    GlobalAvgPool,
    AvgPool2d {
        kernel: usize,
        stride: usize,
    },
    NearestUpsample2,
    Dense {
        weight: String,
        bias: Option<String>,
    },
    ChannelAttention {
        reduction: usize,
        fc1_w: String,
        fc1_b: String,
        fc2_w: String,
        fc2_b: String,
    },
    /// Spatial gate from channelwise max/mean maps through a 2→1 conv
    /// (weight (1, 2, k, k), same padding).
    CbamSpatialAttention {
        weight: String,
        bias: Option<String>,
    },
    RgbGain {
        g_max: f32,
        fc1_w: String,
        fc1_b: String,
        fc2_w: String,
        fc2_b: String,
        fc3_w: String,
        fc3_b: String,
    },
    /// Learnable-scalar gamma, stored as a (1,1,1,1) weight.
    GammaCorrect {
        gamma: String,
    },
    /// Learnable-scalar white point, stored as a (1,1,1,1) weight.
    ToneMap {
        white: String,
    },
    /// Four output slots: LL, LH, HL, HH.
    HaarDwt,
    /// Four inputs: LL, LH, HL, HH.
    HaarIdwt,
    FixedFilter {
        filter: FilterKind,
    },
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Conv2d { .. } => "conv2d",
            NodeKind::TransposeConv2d { .. } => "transpose_conv2d",
            NodeKind::Relu => "relu",
            NodeKind::Sigmoid => "sigmoid",
            NodeKind::Tanh => "tanh",
            NodeKind::Clamp { .. } => "clamp",
            NodeKind::Add => "add",
            NodeKind::Multiply => "multiply",
            NodeKind::BiasAdd { .. } => "bias_add",
            NodeKind::Concat => "concat",
            NodeKind::SliceChannels { .. } => "slice_channels",
            NodeKind::DepthToSpace { .. } => "depth_to_space",
            NodeKind::SpaceToDepth { .. } => "space_to_depth",
            NodeKind::GlobalAvgPool => "global_avg_pool",
            NodeKind::AvgPool2d { .. } => "avg_pool2d",
            NodeKind::NearestUpsample2 => "nearest_upsample2",
            NodeKind::Dense { .. } => "dense",
            NodeKind::ChannelAttention { .. } => "channel_attention",
            NodeKind::CbamSpatialAttention { .. } => "cbam_spatial_attention",
            NodeKind::RgbGain { .. } => "rgb_gain",
            NodeKind::GammaCorrect { .. } => "gamma_correct",
            NodeKind::ToneMap { .. } => "tone_map",
            NodeKind::HaarDwt => "haar_dwt",
            NodeKind::HaarIdwt => "haar_idwt",
            NodeKind::FixedFilter { .. } => "fixed_filter",
        }
    }

    /// (slot label, weight name) pairs in canonical order.
    pub fn weight_refs(&self) -> Vec<(&'static str, &str)> {
        let mut refs: Vec<(&'static str, &str)> = Vec::new();
        match self {
            NodeKind::Conv2d { weight, bias, .. }
            | NodeKind::TransposeConv2d { weight, bias }
            | NodeKind::Dense { weight, bias }
            | NodeKind::CbamSpatialAttention { weight, bias } => {
                refs.push(("w", weight));
                if let Some(b) = bias {
                    refs.push(("b", b));
                }
            }
            NodeKind::BiasAdd { bias } => refs.push(("b", bias)),
            NodeKind::ChannelAttention {
                fc1_w,
                fc1_b,
                fc2_w,
                fc2_b,
                ..
            } => {
                refs.push(("w1", fc1_w));
                refs.push(("b1", fc1_b));
                refs.push(("w2", fc2_w));
                refs.push(("b2", fc2_b));
            }
            NodeKind::RgbGain {
                fc1_w,
                fc1_b,
                fc2_w,
                fc2_b,
                fc3_w,
                fc3_b,
                ..
            } => {
                refs.push(("w1", fc1_w));
                refs.push(("b1", fc1_b));
                refs.push(("w2", fc2_w));
                refs.push(("b2", fc2_b));
                refs.push(("w3", fc3_w));
                refs.push(("b3", fc3_b));
            }
            NodeKind::GammaCorrect { gamma } => refs.push(("gamma", gamma)),
            NodeKind::ToneMap { white } => refs.push(("white", white)),
            _ => {}
        }
        refs
    }

    pub fn output_slots(&self) -> usize {
        match self {
            NodeKind::HaarDwt => 4,
            _ => 1,
        }
    }

    /// Permitted input count: (min, max).
    pub fn input_arity(&self) -> (usize, usize) {
        match self {
            NodeKind::Add => (1, usize::MAX),
            NodeKind::Concat => (1, usize::MAX),
            NodeKind::Multiply => (2, 2),
            NodeKind::HaarIdwt => (4, 4),
            _ => (1, 1),
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub inputs: Vec<EdgeRef>,
}

/// A model: named input/output ports, nodes, and the weight table.
///
/// A validated model is immutable in practice — execution never mutates it,
/// and rewrites clone into a new model.
#[derive(Clone, PartialEq, Debug)]
pub struct GraphModel {
    pub name: String,
    pub metadata: BTreeMap<String, String>,
    pub inputs: Vec<(String, Shape)>,
    pub outputs: Vec<(String, EdgeRef)>,
    pub nodes: Vec<Node>,
    pub weights: BTreeMap<String, Tensor>,
}

impl GraphModel {
    pub fn new(name: impl Into<String>) -> Self {
        GraphModel {
            name: name.into(),
            metadata: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            nodes: Vec::new(),
            weights: BTreeMap::new(),
        }
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Total weight element count.
    pub fn param_count(&self) -> usize {
        self.weights.values().map(|t| t.shape().count()).sum()
    }

    /// Rebind one input port to a new shape (e.g. another resolution or batch
    /// size) and re-validate. Returns a new model.
    pub fn with_input_shape(&self, port: &str, shape: Shape) -> Result<GraphModel, GraphError> {
        let mut m = self.clone();
        let slot = m
            .inputs
            .iter_mut()
            .find(|(name, _)| name == port)
            .ok_or_else(|| GraphError::UnknownInput(port.to_string()))?;
        slot.1 = shape;
        m.validate()?;
        Ok(m)
    }

    /// Structural validation plus full shape inference.
    pub fn validate(&self) -> Result<(), GraphError> {
        self.validate_structure()?;
        crate::shape::infer_shapes(self)?;
        Ok(())
    }

    pub(crate) fn validate_structure(&self) -> Result<(), GraphError> {
        let mut ids = HashSet::new();
        for (name, _) in &self.inputs {
            if !ids.insert(name.clone()) {
                return Err(GraphError::DuplicateNodeId(name.clone()));
            }
        }
        let input_names: HashSet<&str> = self.inputs.iter().map(|(n, _)| n.as_str()).collect();
        let mut node_slots: HashMap<&str, usize> = HashMap::new();
        for node in &self.nodes {
            if !ids.insert(node.id.clone()) {
                return Err(GraphError::DuplicateNodeId(node.id.clone()));
            }
            node_slots.insert(&node.id, node.kind.output_slots());
        }
        let check_edge = |who: &str, edge: &EdgeRef| -> Result<(), GraphError> {
            match edge {
                EdgeRef::Input(name) => {
                    if !input_names.contains(name.as_str()) {
                        return Err(GraphError::UnknownRef {
                            node: who.to_string(),
                            what: "input",
                            name: name.clone(),
                        });
                    }
                }
                EdgeRef::Node { id, slot } => match node_slots.get(id.as_str()) {
                    None => {
                        return Err(GraphError::UnknownRef {
                            node: who.to_string(),
                            what: "node",
                            name: id.clone(),
                        })
                    }
                    Some(&slots) if *slot >= slots => {
                        return Err(GraphError::UnknownRef {
                            node: who.to_string(),
                            what: "output slot",
                            name: format!("{id}:{slot}"),
                        })
                    }
                    _ => {}
                },
            }
            Ok(())
        };
        for node in &self.nodes {
            let (min, max) = node.kind.input_arity();
            if node.inputs.len() < min || node.inputs.len() > max {
                return Err(GraphError::Attr {
                    node: node.id.clone(),
                    msg: format!(
                        "{} takes {} inputs, got {}",
                        node.kind.name(),
                        if min == max {
                            min.to_string()
                        } else {
                            format!("{min}..")
                        },
                        node.inputs.len()
                    ),
                });
            }
            for edge in &node.inputs {
                check_edge(&node.id, edge)?;
            }
            for (_, wname) in node.kind.weight_refs() {
                if !self.weights.contains_key(wname) {
                    return Err(GraphError::UnknownRef {
                        node: node.id.clone(),
                        what: "weight",
                        name: wname.to_string(),
                    });
                }
            }
        }
        for (name, edge) in &self.outputs {
            check_edge(name, edge)?;
        }
        self.topo_order()?;
        Ok(())
    }

    /// Kahn topological order over node indices, stable with respect to the
    /// stored node order.
    pub fn topo_order(&self) -> Result<Vec<usize>, GraphError> {
        let index: HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let mut indegree = vec![0usize; self.nodes.len()];
        let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            for edge in &node.inputs {
                if let EdgeRef::Node { id, .. } = edge {
                    let p = *index.get(id.as_str()).ok_or_else(|| GraphError::UnknownRef {
                        node: node.id.clone(),
                        what: "node",
                        name: id.clone(),
                    })?;
                    indegree[i] += 1;
                    consumers[p].push(i);
                }
            }
        }
        let mut ready: Vec<usize> = (0..self.nodes.len()).filter(|&i| indegree[i] == 0).collect();
        ready.reverse(); // pop from the back keeps ascending stored order
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(i) = ready.pop() {
            order.push(i);
            for &c in &consumers[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    // insert keeping ready sorted descending so pop() yields ascending
                    let pos = ready.partition_point(|&r| r > c);
                    ready.insert(pos, c);
                }
            }
        }
        if order.len() != self.nodes.len() {
            let stuck = (0..self.nodes.len())
                .find(|&i| indegree[i] > 0)
                .map(|i| self.nodes[i].id.clone())
                .unwrap_or_default();
            return Err(GraphError::Cycle(stuck));
        }
        Ok(order)
    }

    /// Remove weight-table entries no longer referenced by any node.
    pub fn gc_weights(&mut self) {
        let referenced: HashSet<String> = self
            .nodes
            .iter()
            .flat_map(|n| n.kind.weight_refs())
            .map(|(_, w)| w.to_string())
            .collect();
        self.weights.retain(|name, _| referenced.contains(name));
    }

    /// Pick a weight name not yet present, based on `base`.
    pub fn fresh_weight_name(&self, base: &str) -> String {
        if !self.weights.contains_key(base) {
            return base.to_string();
        }
        let mut i = 1;
        loop {
            let candidate = format!("{base}.{i}");
            if !self.weights.contains_key(&candidate) {
                return candidate;
            }
            i += 1;
        }
    }
}

/// Names used for ids, ports and weights: [A-Za-z0-9_.-]+
pub(crate) fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}
