//! Loads the file formats the binary accepts: JSON models, vectors,
//! weighted chains, and pair lists. Model arguments may also name a
//! built-in fixture instead of a file.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use approxline::domain::Chain;
use approxline::golden;
use approxline::network::{load_model, Network};
use approxline::tensor::Tensor;
use serde::Deserialize;

/// The two-layer worked example with its four-segment input chain.
pub const BUILTIN_FIG2: &str = "builtin:fig2";

/// Loads a model file, or a built-in fixture when the argument starts
/// with `builtin:`.
pub fn network(spec: &str) -> Result<Network> {
    if spec == BUILTIN_FIG2 {
        return Ok(golden::network());
    }
    if let Some(name) = spec.strip_prefix("builtin:") {
        bail!("unknown builtin model {name:?} (try {BUILTIN_FIG2})");
    }
    load_model(spec).with_context(|| format!("loading model {spec:?}"))
}

/// Reads a vector file: `{"shape": [...], "data": [...]}`.
pub fn vector(path: &Path) -> Result<Tensor> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing vector {}", path.display()))
}

#[derive(Deserialize)]
struct ChainFile {
    nodes: Vec<Tensor>,
    weights: Vec<f64>,
}

/// Reads a weighted chain file: `{"nodes": [vector, ...], "weights": [...]}`
/// with one weight per consecutive node pair.
pub fn chain(path: &Path) -> Result<Chain> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ChainFile =
        serde_json::from_str(&text).with_context(|| format!("parsing chain {}", path.display()))?;
    Chain::new(file.nodes, file.weights)
        .with_context(|| format!("validating chain {}", path.display()))
}

#[derive(Deserialize)]
struct PairFile {
    a: Tensor,
    b: Tensor,
}

/// Reads a pair list: `[{"a": vector, "b": vector}, ...]`.
pub fn pairs(path: &Path) -> Result<Vec<(Tensor, Tensor)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: Vec<PairFile> = serde_json::from_str(&text)
        .with_context(|| format!("parsing pair list {}", path.display()))?;
    if file.is_empty() {
        bail!("pair list {} is empty", path.display());
    }
    Ok(file.into_iter().map(|p| (p.a, p.b)).collect())
}
