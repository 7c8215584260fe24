//! Declarative loss combinations and the evaluated metric bundle.

use std::fmt;

use ispforge_tensor::Tensor;

use crate::losses::{
    charbonnier, cosine_loss, edge_loss, histogram_loss, l1, mse, patch_loss, PatchMode,
};
use crate::psnr::psnr;
use crate::ssim::ssim;
use crate::MetricError;

pub const DEFAULT_CHARBONNIER_EPS: f64 = 1e-3;
pub const DEFAULT_PATCH_SIZE: usize = 8;
pub const DEFAULT_PATCH_EPS: f64 = 1e-2;
pub const DEFAULT_HISTOGRAM_BINS: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub enum LossTerm {
    L1,
    Mse,
    Charbonnier { eps: f64 },
    Ssim,
    Cosine,
    Patch { size: usize, eps: f64, mode: PatchMode },
    Histogram { bins: usize, sigma: Option<f64> },
    Edge,
}

impl LossTerm {
    pub fn label(&self) -> &'static str {
        match self {
            LossTerm::L1 => "l1",
            LossTerm::Mse => "mse",
            LossTerm::Charbonnier { .. } => "charbonnier",
            LossTerm::Ssim => "ssim",
            LossTerm::Cosine => "cosine",
            LossTerm::Patch { .. } => "patch",
            LossTerm::Histogram { .. } => "histogram",
            LossTerm::Edge => "edge",
        }
    }

    pub fn value(&self, pred: &Tensor, target: &Tensor) -> Result<f64, MetricError> {
        match self {
            LossTerm::L1 => l1(pred, target),
            LossTerm::Mse => mse(pred, target),
            LossTerm::Charbonnier { eps } => charbonnier(pred, target, *eps),
            LossTerm::Ssim => Ok(1.0 - ssim(pred, target)?),
            LossTerm::Cosine => cosine_loss(pred, target),
            LossTerm::Patch { size, eps, mode } => patch_loss(pred, target, *size, *eps, *mode),
            LossTerm::Histogram { bins, sigma } => histogram_loss(pred, target, *bins, *sigma),
            LossTerm::Edge => edge_loss(pred, target),
        }
    }
}

/// A weighted list of loss terms, parsed from strings like
/// `"l1:1,ssim:0.2"` or `"charbonnier(0.001):1,patch(8,0.01,rectified):0.5"`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSpec {
    pub terms: Vec<(LossTerm, f64)>,
}

impl LossSpec {
    pub fn new(terms: Vec<(LossTerm, f64)>) -> Result<Self, MetricError> {
        if terms.is_empty() {
            return Err(MetricError::arg("loss_spec", "at least one term required"));
        }
        if terms.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(MetricError::arg("loss_spec", "weights must be ≥ 0"));
        }
        Ok(LossSpec { terms })
    }

    pub fn l1_only() -> Self {
        LossSpec {
            terms: vec![(LossTerm::L1, 1.0)],
        }
    }

    pub fn parse(s: &str) -> Result<Self, MetricError> {
        let bad = |msg: String| MetricError::arg("loss_spec", msg);
        let mut terms = Vec::new();
        for part in split_top_level(s) {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (name, weight) = part
                .rsplit_once(':')
                .ok_or_else(|| bad(format!("term '{part}' needs a ':weight' suffix")))?;
            let weight: f64 = weight
                .parse()
                .map_err(|_| bad(format!("bad weight in '{part}'")))?;
            let (base, args) = match name.split_once('(') {
                Some((base, rest)) => {
                    let inner = rest
                        .strip_suffix(')')
                        .ok_or_else(|| bad(format!("unbalanced parens in '{name}'")))?;
                    let args: Vec<&str> =
                        inner.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
                    (base.trim(), args)
                }
                None => (name.trim(), Vec::new()),
            };
            let parse_f = |v: &str| -> Result<f64, MetricError> {
                v.parse().map_err(|_| bad(format!("bad number '{v}'")))
            };
            let term = match (base, args.as_slice()) {
                ("l1", []) => LossTerm::L1,
                ("mse" | "l2", []) => LossTerm::Mse,
                ("charbonnier", []) => LossTerm::Charbonnier {
                    eps: DEFAULT_CHARBONNIER_EPS,
                },
                ("charbonnier", [eps]) => LossTerm::Charbonnier { eps: parse_f(eps)? },
                ("ssim", []) => LossTerm::Ssim,
                ("cosine", []) => LossTerm::Cosine,
                ("patch", rest) => {
                    let size = match rest.first() {
                        Some(v) => v
                            .parse()
                            .map_err(|_| bad(format!("bad patch size '{v}'")))?,
                        None => DEFAULT_PATCH_SIZE,
                    };
                    let eps = match rest.get(1) {
                        Some(v) => parse_f(v)?,
                        None => DEFAULT_PATCH_EPS,
                    };
                    let mode = match rest.get(2) {
                        Some(&"literal") => PatchMode::Literal,
                        Some(&"rectified") | None => PatchMode::Rectified,
                        Some(other) => return Err(bad(format!("bad patch mode '{other}'"))),
                    };
                    LossTerm::Patch { size, eps, mode }
                }
                ("histogram", rest) => {
                    let bins = match rest.first() {
                        Some(v) => v.parse().map_err(|_| bad(format!("bad bins '{v}'")))?,
                        None => DEFAULT_HISTOGRAM_BINS,
                    };
                    let sigma = match rest.get(1) {
                        Some(v) => Some(parse_f(v)?),
                        None => None,
                    };
                    LossTerm::Histogram { bins, sigma }
                }
                ("edge", []) => LossTerm::Edge,
                (other, _) => return Err(bad(format!("unknown loss term '{other}'"))),
            };
            terms.push((term, weight));
        }
        LossSpec::new(terms)
    }
}

/// Split on commas that sit outside parentheses, so parameterized terms like
/// `patch(8,0.01,literal):1` survive.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(t, w)| format!("{}:{w}", t.label()))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Evaluated metric bundle for one prediction/target pair: always-on
/// PSNR/SSIM plus every spec term and the weighted total.
#[derive(Clone, Debug)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub terms: Vec<(String, f64)>,
    pub total: f64,
}

pub fn evaluate(
    pred: &Tensor,
    target: &Tensor,
    spec: &LossSpec,
) -> Result<MetricReport, MetricError> {
    let mut terms = Vec::with_capacity(spec.terms.len());
    let mut total = 0.0f64;
    for (term, weight) in &spec.terms {
        let v = term.value(pred, target)?;
        total += weight * v;
        terms.push((term.label().to_string(), v));
    }
    Ok(MetricReport {
        psnr: psnr(pred, target)?,
        ssim: ssim(pred, target)?,
        terms,
        total,
    })
}
