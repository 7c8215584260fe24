//! Builders for desk-scale renditions of the reference RAW→RGB
//! architectures. Every model maps a packed Bayer tensor
//! (1, 4, s/2, s/2) to an RGB image (1, 3, s, s); weights are seeded and
//! bit-reproducible.

mod builder;

use ispforge_graph::GraphModel;
use thiserror::Error;

use builder::Builder;

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("unknown zoo model '{0}'")]
    UnknownModel(String),

    #[error("{0}")]
    Graph(#[from] ispforge_graph::GraphError),
}

#[derive(Clone, Copy, Debug)]
pub struct ZooEntry {
    pub name: &'static str,
    pub summary: &'static str,
    /// Whether the model uses only kinds the trainer can differentiate.
    pub trainable: bool,
}

pub const ENTRIES: &[ZooEntry] = &[
    ZooEntry {
        name: "smallnet12",
        summary: "three 3x3 convs (12 channels) + depth-to-space head",
        trainable: true,
    },
    ZooEntry {
        name: "mincho",
        summary: "mobile conv/depthwise/pointwise feature block with skip, smallnet head",
        trainable: true,
    },
    ZooEntry {
        name: "jmu",
        summary: "smallnet core + tone mapping, gamma and CBAM spatial attention",
        trainable: false,
    },
    ZooEntry {
        name: "ereopnet",
        summary: "re-parameterizable multi-branch conv stack with fine-granularity spatial and channel attention",
        trainable: false,
    },
    ZooEntry {
        name: "awb_unet_lite",
        summary: "pooled-gain white balance module + 2-level encoder/decoder",
        trainable: false,
    },
    ZooEntry {
        name: "dwt_split_net",
        summary: "demosaic head + separate low/high frequency paths over a Haar split",
        trainable: false,
    },
];

pub fn entries() -> &'static [ZooEntry] {
    ENTRIES
}

pub fn entry(name: &str) -> Option<&'static ZooEntry> {
    ENTRIES.iter().find(|e| e.name == name)
}

/// Default branch multiset of the re-parameterizable blocks: ten layers over
/// the odd sizes 1/3/5.
pub const DEFAULT_EREP_BRANCHES: &[usize] = &[1, 1, 3, 3, 3, 3, 5, 5, 5, 5];

/// Default declared input: a 256×256 target patch, i.e. packed raw
/// (1, 4, 128, 128). Rebind via `GraphModel::with_input_shape` for other
/// sizes.
pub const DEFAULT_RAW_SIDE: usize = 128;

pub fn build(name: &str, seed: u64) -> Result<GraphModel, ZooError> {
    match name {
        "smallnet12" => Ok(build_smallnet12(seed)),
        "mincho" => Ok(build_mincho(seed)),
        "jmu" => Ok(build_jmu(seed)),
        "ereopnet" => Ok(build_ereopnet(seed, DEFAULT_EREP_BRANCHES)),
        "awb_unet_lite" => Ok(build_awb_unet_lite(seed)),
        "dwt_split_net" => Ok(build_dwt_split_net(seed)),
        other => Err(ZooError::UnknownModel(other.to_string())),
    }
}

/// Three 3×3 convolutions (4→12→12→12) with ReLUs, a ×2 depth-to-space head
/// and a final clamp.
pub fn build_smallnet12(seed: u64) -> GraphModel {
    let mut b = Builder::new("smallnet12", seed);
    let x = b.input(DEFAULT_RAW_SIDE);
    let head = b.smallnet_head("c", x, 4, 12);
    let out = b.clamp01("out", head);
    b.finish(out, &[("head_channels", "12")])
}

/// Feature part (conv + depthwise + pointwise with a residual skip) feeding
/// the smallnet head.
pub fn build_mincho(seed: u64) -> GraphModel {
    let mut b = Builder::new("mincho", seed);
    let x = b.input(DEFAULT_RAW_SIDE);
    let f1 = b.conv_relu("f1", x.clone(), 4, 8, 3);
    let f2 = b.depthwise("f2", f1, 8, 3);
    let f3 = b.conv_relu("f3", f2, 8, 4, 1);
    let skip = b.add("skip", &[f3, x]);
    let head = b.smallnet_head("c", skip, 4, 12);
    let out = b.clamp01("out", head);
    b.finish(out, &[("feature_channels", "8")])
}

/// Smallnet core followed by learnable tone mapping, gamma correction and a
/// CBAM spatial attention block.
pub fn build_jmu(seed: u64) -> GraphModel {
    let mut b = Builder::new("jmu", seed);
    let x = b.input(DEFAULT_RAW_SIDE);
    let head = b.smallnet_head("c", x, 4, 12);
    let toned = b.tone_map("tone", head, 1.0);
    let gammaed = b.gamma("gamma", toned, 2.2);
    let attended = b.cbam("att", gammaed, 7);
    let out = b.clamp01("out", attended);
    b.finish(out, &[("tone_white_init", "1"), ("gamma_init", "2.2")])
}

/// Training-form multi-branch stack: three eRepConv blocks, fine-granularity
/// spatial attention (sigmoid(eRepConv(x) + bias) ⊙ x), a channel-attention
/// tail, and the depth-to-space head. `reparam_pass` produces the inference
/// form.
pub fn build_ereopnet(seed: u64, branches: &[usize]) -> GraphModel {
    let mut b = Builder::new("ereopnet", seed);
    let x = b.input(DEFAULT_RAW_SIDE);
    let e1 = b.erep_block("e1", x, 4, 16, branches, false);
    let r1 = b.relu("r1", e1);
    let e2 = b.erep_block("e2", r1, 16, 16, branches, true);
    let r2 = b.relu("r2", e2);
    let e3 = b.erep_block("e3", r2, 16, 12, branches, false);
    // fine-granularity spatial attention on the 12-channel features
    let att_conv = b.erep_block("fga", e3.clone(), 12, 12, branches, true);
    let att_biased = b.bias_add("fga_bias", att_conv, 12);
    let att = b.sigmoid("fga_gate", att_biased);
    let gated = b.multiply("fga_apply", e3, att);
    let ca = b.channel_attention("ca", gated, 12, 4);
    let up = b.depth_to_space("up", ca, 2);
    let out = b.clamp01("out", up);
    let branches_meta = branches
        .iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(",");
    b.finish(
        out,
        &[
            ("erep_branches", branches_meta.as_str()),
            ("erep_identity", "blocks with in==out"),
            ("blocks", "3"),
        ],
    )
}

/// Pooled-gain white balance module in front of a small 2-level
/// encoder/decoder with skip concats and a depth-to-space head.
pub fn build_awb_unet_lite(seed: u64) -> GraphModel {
    let mut b = Builder::new("awb_unet_lite", seed);
    let x = b.input(DEFAULT_RAW_SIDE);
    let balanced = b.rgb_gain("awb", x, 4, 8, 4.0);
    let e0 = b.conv_relu("e0", balanced, 4, 16, 3);
    let p1 = b.avg_pool("p1", e0.clone(), 2, 2);
    let e1 = b.conv_relu("e1", p1, 16, 32, 3);
    let p2 = b.avg_pool("p2", e1.clone(), 2, 2);
    let mid = b.conv_relu("mid", p2, 32, 32, 3);
    let u1 = b.upconv("u1", mid, 32, 16);
    let cat1 = b.concat("cat1", &[u1, e1]);
    let d1 = b.conv_relu("d1", cat1, 48, 16, 3);
    let u2 = b.upconv("u2", d1, 16, 8);
    let cat2 = b.concat("cat2", &[u2, e0]);
    let d2 = b.final_conv("d2", cat2, 24, 12, 3);
    let up = b.depth_to_space("up", d2, 2);
    let out = b.clamp01("out", up);
    b.finish(out, &[("g_max", "4"), ("levels", "2")])
}

/// Demosaic head, then separate residual paths for the Haar low band and the
/// stacked high bands, recombined with the inverse transform. Path widths
/// are scaled to desk size (16/8 channels, 2/1 residual blocks).
pub fn build_dwt_split_net(seed: u64) -> GraphModel {
    let mut b = Builder::new("dwt_split_net", seed);
    let x = b.input(DEFAULT_RAW_SIDE);
    let h1 = b.conv_relu("h1", x, 4, 12, 3);
    let h2 = b.final_conv("h2", h1, 12, 12, 3);
    let head = b.depth_to_space("up", h2, 2);
    let (ll, lh, hl, hh) = b.haar_dwt("dwt", head);

    // low band: 2 residual blocks, 16 channels, residual to LL
    let l_in = b.conv_relu("low_in", ll.clone(), 3, 16, 3);
    let l_rb1 = b.res_block("low_rb1", l_in, 16);
    let l_rb2 = b.res_block("low_rb2", l_rb1, 16);
    let l_out = b.conv("low_out", l_rb2, 16, 3, 3);
    let ll_fixed = b.add("low_res", &[l_out, ll]);

    // high bands stacked channelwise: 1 residual block, 8 channels
    let high = b.concat("high_cat", &[lh, hl, hh]);
    let h_in = b.conv_relu("high_in", high.clone(), 9, 8, 3);
    let h_rb = b.res_block("high_rb", h_in, 8);
    let h_out = b.conv("high_out", h_rb, 8, 9, 3);
    let high_fixed = b.add("high_res", &[h_out, high]);

    let s0 = b.slice("split_lh", high_fixed.clone(), 0, 3);
    let s1 = b.slice("split_hl", high_fixed.clone(), 3, 6);
    let s2 = b.slice("split_hh", high_fixed, 6, 9);
    let rec = b.haar_idwt("idwt", ll_fixed, s0, s1, s2);
    let out = b.clamp01("out", rec);
    b.finish(
        out,
        &[
            ("low_path", "2 blocks / 16 channels"),
            ("high_path", "1 block / 8 channels"),
            ("scale_note", "desk-scale widths"),
        ],
    )
}
