//! The on-disk model format: a UTF-8 manifest (`.ispm`) plus a raw weight
//! blob (`.ispw`).
//!
//! Manifest grammar (one record per line, fields space-separated, canonical
//! field order so files are diffable):
//!
//! ```text
//! ispforge-model/1
//! name <model-name>
//! meta <key>\t<escaped value>            # sorted by key
//! input <port> <NxCxHxW>                 # declared order
//! node <id> <kind> in=<ref>[,<ref>…] <attr>=<val>… <slot>=<weight>…
//! output <port> <ref>                    # declared order
//! weight <name> <NxCxHxW> off=<bytes> crc64=<16 hex>   # sorted by name
//! end
//! ```
//!
//! A `<ref>` is `@port` for a graph input, `id` for a node's slot 0, or
//! `id:slot`. The blob holds each weight's f32 data little-endian,
//! concatenated in manifest order; every tensor carries a CRC-64/XZ checksum.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ispforge_tensor::io::atomic_write;
use ispforge_tensor::{FilterKind, Pad, Shape, Tensor};

use crate::crc64::crc64_xz;
use crate::error::FormatError;
use crate::model::{valid_name, EdgeRef, GraphModel, Node, NodeKind};

pub const FORMAT_VERSION: &str = "ispforge-model/1";

fn weights_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("ispw")
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> FormatError + '_ {
    move |e| FormatError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Write `model` to `<path>` and its weights to the sibling `.ispw` file.
pub fn save(model: &GraphModel, manifest_path: &Path) -> Result<(), FormatError> {
    model.validate()?;

    let mut blob: Vec<u8> = Vec::new();
    let mut weight_lines = String::new();
    for (name, tensor) in &model.weights {
        let off = blob.len();
        let start = blob.len();
        for v in tensor.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc64_xz(&blob[start..]);
        writeln!(
            weight_lines,
            "weight {name} {} off={off} crc64={crc:016x}",
            tensor.shape()
        )
        .unwrap();
    }

    let mut manifest = String::new();
    writeln!(manifest, "{FORMAT_VERSION}").unwrap();
    writeln!(manifest, "name {}", model.name).unwrap();
    for (k, v) in &model.metadata {
        writeln!(manifest, "meta {k}\t{}", escape(v)).unwrap();
    }
    for (port, shape) in &model.inputs {
        writeln!(manifest, "input {port} {shape}").unwrap();
    }
    let order = model.topo_order()?;
    for idx in order {
        writeln!(manifest, "{}", node_line(&model.nodes[idx])).unwrap();
    }
    for (port, edge) in &model.outputs {
        writeln!(manifest, "output {port} {edge}").unwrap();
    }
    manifest.push_str(&weight_lines);
    writeln!(manifest, "end").unwrap();

    atomic_write(manifest_path, manifest.as_bytes()).map_err(|e| FormatError::Io {
        path: manifest_path.display().to_string(),
        msg: e.to_string(),
    })?;
    let wpath = weights_path(manifest_path);
    atomic_write(&wpath, &blob).map_err(|e| FormatError::Io {
        path: wpath.display().to_string(),
        msg: e.to_string(),
    })?;
    Ok(())
}

/// Load a model saved by [`save`]; structurally equal and weight-bit-identical
/// to the original.
pub fn load(manifest_path: &Path) -> Result<GraphModel, FormatError> {
    let text = fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let path_str = manifest_path.display().to_string();
    let parse_err = |line: usize, msg: String| FormatError::Parse {
        path: path_str.clone(),
        line,
        msg,
    };

    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty manifest".into()))?;
    if first.trim() != FORMAT_VERSION {
        return Err(FormatError::Version {
            path: path_str,
            found: first.trim().to_string(),
            expected: FORMAT_VERSION.into(),
        });
    }

    let mut model = GraphModel::new("");
    struct WeightEntry {
        name: String,
        shape: Shape,
        off: usize,
        crc: u64,
    }
    let mut weight_entries: Vec<WeightEntry> = Vec::new();
    let mut saw_end = false;

    for (i, raw_line) in lines {
        let lineno = i + 1;
        let line = raw_line.trim_end();
        if line.is_empty() {
            continue;
        }
        if saw_end {
            return Err(parse_err(lineno, "content after 'end'".into()));
        }
        let (tag, rest) = match line.split_once(' ') {
            Some((t, r)) => (t, r),
            None => (line, ""),
        };
        match tag {
            "name" => model.name = rest.to_string(),
            "meta" => {
                let (k, v) = rest
                    .split_once('\t')
                    .ok_or_else(|| parse_err(lineno, "meta needs 'key<TAB>value'".into()))?;
                model.metadata.insert(k.to_string(), unescape(v));
            }
            "input" => {
                let (port, shape) = rest
                    .split_once(' ')
                    .ok_or_else(|| parse_err(lineno, "input needs 'port shape'".into()))?;
                if !valid_name(port) {
                    return Err(parse_err(lineno, format!("bad port name '{port}'")));
                }
                let shape = Shape::parse(shape).map_err(|e| parse_err(lineno, e.to_string()))?;
                model.inputs.push((port.to_string(), shape));
            }
            "node" => {
                let node = parse_node_line(rest)
                    .map_err(|msg| match msg {
                        NodeLineError::UnknownKind(kind) => FormatError::UnknownKind {
                            path: manifest_path.display().to_string(),
                            line: lineno,
                            kind,
                        },
                        NodeLineError::Other(m) => parse_err(lineno, m),
                    })?;
                model.nodes.push(node);
            }
            "output" => {
                let (port, edge) = rest
                    .split_once(' ')
                    .ok_or_else(|| parse_err(lineno, "output needs 'port ref'".into()))?;
                let edge = parse_edge(edge).map_err(|m| parse_err(lineno, m))?;
                model.outputs.push((port.to_string(), edge));
            }
            "weight" => {
                let fields: Vec<&str> = rest.split(' ').collect();
                if fields.len() != 4 {
                    return Err(parse_err(lineno, "weight needs 'name shape off= crc64='".into()));
                }
                let name = fields[0].to_string();
                if !valid_name(&name) {
                    return Err(parse_err(lineno, format!("bad weight name '{name}'")));
                }
                let shape =
                    Shape::parse(fields[1]).map_err(|e| parse_err(lineno, e.to_string()))?;
                let off = fields[2]
                    .strip_prefix("off=")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err(lineno, "bad off= field".into()))?;
                let crc = fields[3]
                    .strip_prefix("crc64=")
                    .and_then(|v| u64::from_str_radix(v, 16).ok())
                    .ok_or_else(|| parse_err(lineno, "bad crc64= field".into()))?;
                weight_entries.push(WeightEntry {
                    name,
                    shape,
                    off,
                    crc,
                });
            }
            "end" => saw_end = true,
            other => return Err(parse_err(lineno, format!("unknown record '{other}'"))),
        }
    }
    if !saw_end {
        return Err(parse_err(0, "manifest missing 'end' terminator".into()));
    }

    let wpath = weights_path(manifest_path);
    let blob = fs::read(&wpath).map_err(io_err(&wpath))?;
    let expected_len: usize = weight_entries.iter().map(|e| e.shape.count() * 4).sum();
    if blob.len() != expected_len {
        return Err(FormatError::BlobSize {
            expected: expected_len,
            got: blob.len(),
        });
    }
    for entry in weight_entries {
        let len = entry.shape.count() * 4;
        let end = entry.off.checked_add(len).filter(|&e| e <= blob.len());
        let end = end.ok_or(FormatError::BlobSize {
            expected: entry.off + len,
            got: blob.len(),
        })?;
        let bytes = &blob[entry.off..end];
        let computed = crc64_xz(bytes);
        if computed != entry.crc {
            return Err(FormatError::Checksum {
                name: entry.name,
                stored: entry.crc,
                computed,
            });
        }
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let tensor = Tensor::new(entry.shape, data).map_err(|e| FormatError::Io {
            path: wpath.display().to_string(),
            msg: e.to_string(),
        })?;
        model.weights.insert(entry.name, tensor);
    }

    // every node weight ref must have landed in the table
    for node in &model.nodes {
        for (_, w) in node.kind.weight_refs() {
            if !model.weights.contains_key(w) {
                return Err(FormatError::DanglingWeight(w.to_string()));
            }
        }
    }

    model.validate()?;
    Ok(model)
}

fn escape(v: &str) -> String {
    v.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

fn unescape(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn node_line(node: &Node) -> String {
    let refs: Vec<String> = node.inputs.iter().map(|e| e.to_string()).collect();
    let mut line = format!("node {} {} in={}", node.id, node.kind.name(), refs.join(","));
    for (key, val) in kind_fields(&node.kind) {
        write!(line, " {key}={val}").unwrap();
    }
    line
}

/// Attribute and weight-slot fields in canonical order.
fn kind_fields(kind: &NodeKind) -> Vec<(&'static str, String)> {
    let mut fields: Vec<(&'static str, String)> = Vec::new();
    match kind {
        NodeKind::Conv2d {
            stride,
            pad,
            groups,
            ..
        } => {
            fields.push(("stride", stride.to_string()));
            fields.push(("pad", pad.to_string()));
            fields.push(("groups", groups.to_string()));
        }
        NodeKind::Clamp { lo, hi } => {
            fields.push(("lo", lo.to_string()));
            fields.push(("hi", hi.to_string()));
        }
        NodeKind::SliceChannels { start, end } => {
            fields.push(("start", start.to_string()));
            fields.push(("end", end.to_string()));
        }
        NodeKind::DepthToSpace { block } | NodeKind::SpaceToDepth { block } => {
            fields.push(("block", block.to_string()));
        }
        NodeKind::AvgPool2d { kernel, stride } => {
            fields.push(("k", kernel.to_string()));
            fields.push(("stride", stride.to_string()));
        }
        NodeKind::ChannelAttention { reduction, .. } => {
            fields.push(("r", reduction.to_string()));
        }
        NodeKind::RgbGain { g_max, .. } => {
            fields.push(("g_max", g_max.to_string()));
        }
        NodeKind::FixedFilter { filter } => {
            fields.push(("filter", filter.to_string()));
        }
        _ => {}
    }
    for (slot, name) in kind.weight_refs() {
        fields.push((slot, name.to_string()));
    }
    fields
}

enum NodeLineError {
    UnknownKind(String),
    Other(String),
}

fn parse_edge(s: &str) -> Result<EdgeRef, String> {
    if let Some(name) = s.strip_prefix('@') {
        if !valid_name(name) {
            return Err(format!("bad input ref '{s}'"));
        }
        return Ok(EdgeRef::input(name));
    }
    if let Some((id, slot)) = s.split_once(':') {
        let slot: usize = slot.parse().map_err(|_| format!("bad slot in '{s}'"))?;
        if !valid_name(id) {
            return Err(format!("bad node ref '{s}'"));
        }
        return Ok(EdgeRef::node_slot(id, slot));
    }
    if !valid_name(s) {
        return Err(format!("bad node ref '{s}'"));
    }
    Ok(EdgeRef::node(s))
}

fn parse_node_line(rest: &str) -> Result<Node, NodeLineError> {
    let other = |m: String| NodeLineError::Other(m);
    let mut parts = rest.split(' ');
    let id = parts
        .next()
        .ok_or_else(|| other("node needs an id".into()))?
        .to_string();
    if !valid_name(&id) {
        return Err(other(format!("bad node id '{id}'")));
    }
    let kind_name = parts
        .next()
        .ok_or_else(|| other("node needs a kind".into()))?;
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for field in parts {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| other(format!("bad field '{field}'")))?;
        if fields.insert(k, v).is_some() {
            return Err(other(format!("duplicate field '{k}'")));
        }
    }

    let inputs: Vec<EdgeRef> = match fields.remove("in") {
        Some(refs) => refs
            .split(',')
            .map(parse_edge)
            .collect::<Result<_, _>>()
            .map_err(other)?,
        None => Vec::new(),
    };

    fn take(
        fields: &mut BTreeMap<&str, &str>,
        kind: &str,
        key: &str,
    ) -> Result<String, NodeLineError> {
        fields
            .remove(key)
            .map(str::to_string)
            .ok_or_else(|| NodeLineError::Other(format!("{kind} needs field '{key}'")))
    }
    fn take_opt(fields: &mut BTreeMap<&str, &str>, key: &str) -> Option<String> {
        fields.remove(key).map(str::to_string)
    }
    macro_rules! take {
        ($key:literal) => {
            take(&mut fields, kind_name, $key)?
        };
    }
    macro_rules! parse_num {
        ($key:literal) => {
            take(&mut fields, kind_name, $key)?
                .parse()
                .map_err(|_| NodeLineError::Other(format!("bad {} value", $key)))?
        };
    }

    let kind = match kind_name {
        "conv2d" => {
            let stride: usize = parse_num!("stride");
            let pad = parse_pad(&take!("pad")).map_err(other)?;
            let groups: usize = parse_num!("groups");
            NodeKind::Conv2d {
                stride,
                pad,
                groups,
                weight: take!("w"),
                bias: take_opt(&mut fields, "b"),
            }
        }
        "transpose_conv2d" => NodeKind::TransposeConv2d {
            weight: take!("w"),
            bias: take_opt(&mut fields, "b"),
        },
        "relu" => NodeKind::Relu,
        "sigmoid" => NodeKind::Sigmoid,
        "tanh" => NodeKind::Tanh,
        "clamp" => NodeKind::Clamp {
            lo: parse_num!("lo"),
            hi: parse_num!("hi"),
        },
        "add" => NodeKind::Add,
        "multiply" => NodeKind::Multiply,
        "bias_add" => NodeKind::BiasAdd { bias: take!("b") },
        "concat" => NodeKind::Concat,
        "slice_channels" => NodeKind::SliceChannels {
            start: parse_num!("start"),
            end: parse_num!("end"),
        },
        "depth_to_space" => NodeKind::DepthToSpace {
            block: parse_num!("block"),
        },
        "space_to_depth" => NodeKind::SpaceToDepth {
            block: parse_num!("block"),
        },
        "global_avg_pool" => NodeKind::GlobalAvgPool,
        "avg_pool2d" => NodeKind::AvgPool2d {
            kernel: parse_num!("k"),
            stride: parse_num!("stride"),
        },
        "nearest_upsample2" => NodeKind::NearestUpsample2,
        "dense" => NodeKind::Dense {
            weight: take!("w"),
            bias: take_opt(&mut fields, "b"),
        },
        "channel_attention" => NodeKind::ChannelAttention {
            reduction: parse_num!("r"),
            fc1_w: take!("w1"),
            fc1_b: take!("b1"),
            fc2_w: take!("w2"),
            fc2_b: take!("b2"),
        },
        "cbam_spatial_attention" => NodeKind::CbamSpatialAttention {
            weight: take!("w"),
            bias: take_opt(&mut fields, "b"),
        },
        "rgb_gain" => NodeKind::RgbGain {
            g_max: parse_num!("g_max"),
            fc1_w: take!("w1"),
            fc1_b: take!("b1"),
            fc2_w: take!("w2"),
            fc2_b: take!("b2"),
            fc3_w: take!("w3"),
            fc3_b: take!("b3"),
        },
        "gamma_correct" => NodeKind::GammaCorrect {
            gamma: take!("gamma"),
        },
        "tone_map" => NodeKind::ToneMap {
            white: take!("white"),
        },
        "haar_dwt" => NodeKind::HaarDwt,
        "haar_idwt" => NodeKind::HaarIdwt,
        "fixed_filter" => NodeKind::FixedFilter {
            filter: FilterKind::parse(&take!("filter"))
                .map_err(|e| NodeLineError::Other(e.to_string()))?,
        },
        unknown => return Err(NodeLineError::UnknownKind(unknown.to_string())),
    };
    if !fields.is_empty() {
        let extra: Vec<&str> = fields.keys().copied().collect();
        return Err(other(format!("unexpected fields {extra:?} for {kind_name}")));
    }
    Ok(Node { id, kind, inputs })
}

fn parse_pad(s: &str) -> Result<Pad, String> {
    let vals: Vec<usize> = s
        .split(',')
        .map(|v| v.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("bad pad '{s}'"))?;
    if vals.len() != 4 {
        return Err(format!("pad needs 4 values, got '{s}'"));
    }
    Ok(Pad {
        top: vals[0],
        bottom: vals[1],
        left: vals[2],
        right: vals[3],
    })
}
