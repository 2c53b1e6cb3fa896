//! JSON model format.
//!
//! ```json
//! {
//!   "input_shape": [2],
//!   "layers": [
//!     {"kind": "relu"},
//!     {"kind": "dense", "weight": [[0.5, 0.5], [1.0, -0.25]], "bias": [0.0, 0.0]}
//!   ]
//! }
//! ```
//!
//! Convolutions carry a 4-D `kernel` (out, in, h, w) plus `stride` and
//! `padding`; transposed convolutions add `out_padding`. Numbers round-trip
//! at full double precision.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::Layer;
use super::Network;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerSpec {
    Dense {
        weight: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    Conv2d {
        kernel: Vec<Vec<Vec<Vec<f64>>>>,
        bias: Vec<f64>,
        stride: usize,
        padding: usize,
    },
    ConvTranspose2d {
        kernel: Vec<Vec<Vec<Vec<f64>>>>,
        bias: Vec<f64>,
        stride: usize,
        padding: usize,
        out_padding: usize,
    },
    Relu,
    Flatten,
    Reshape {
        shape: Vec<usize>,
    },
}

fn matrix_tensor(rows: &[Vec<f64>], what: &str, layer: usize) -> Result<Tensor> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Layer {
            layer,
            message: format!("{what} rows have unequal lengths"),
        });
    }
    Tensor::new(vec![r, c], rows.iter().flatten().copied().collect()).map_err(|e| Error::Layer {
        layer,
        message: format!("{what}: {e}"),
    })
}

fn kernel_tensor(k: &[Vec<Vec<Vec<f64>>>], layer: usize) -> Result<Tensor> {
    let ragged = || Error::Layer {
        layer,
        message: "kernel is ragged; all nested lists must have equal lengths".into(),
    };
    let co = k.len();
    let ci = k.first().map_or(0, Vec::len);
    let kh = k.first().and_then(|a| a.first()).map_or(0, Vec::len);
    let kw = k
        .first()
        .and_then(|a| a.first())
        .and_then(|b| b.first())
        .map_or(0, Vec::len);
    let mut data = Vec::with_capacity(co * ci * kh * kw);
    for a in k {
        if a.len() != ci {
            return Err(ragged());
        }
        for b in a {
            if b.len() != kh {
                return Err(ragged());
            }
            for c in b {
                if c.len() != kw {
                    return Err(ragged());
                }
                data.extend_from_slice(c);
            }
        }
    }
    Tensor::new(vec![co, ci, kh, kw], data).map_err(|e| Error::Layer {
        layer,
        message: format!("kernel: {e}"),
    })
}

fn vector_tensor(v: &[f64], what: &str, layer: usize) -> Result<Tensor> {
    Tensor::vector(v).map_err(|e| Error::Layer {
        layer,
        message: format!("{what}: {e}"),
    })
}

fn build_layer(spec: &LayerSpec, index: usize) -> Result<Layer> {
    Ok(match spec {
        LayerSpec::Dense { weight, bias } => Layer::Dense {
            weight: matrix_tensor(weight, "weight", index)?,
            bias: vector_tensor(bias, "bias", index)?,
        },
        LayerSpec::Conv2d {
            kernel,
            bias,
            stride,
            padding,
        } => Layer::Conv2d {
            kernel: kernel_tensor(kernel, index)?,
            bias: vector_tensor(bias, "bias", index)?,
            stride: *stride,
            padding: *padding,
        },
        LayerSpec::ConvTranspose2d {
            kernel,
            bias,
            stride,
            padding,
            out_padding,
        } => Layer::ConvTranspose2d {
            kernel: kernel_tensor(kernel, index)?,
            bias: vector_tensor(bias, "bias", index)?,
            stride: *stride,
            padding: *padding,
            out_padding: *out_padding,
        },
        LayerSpec::Relu => Layer::Relu,
        LayerSpec::Flatten => Layer::Flatten,
        LayerSpec::Reshape { shape } => Layer::Reshape {
            shape: shape.clone(),
        },
    })
}

fn spec_of(layer: &Layer) -> LayerSpec {
    let matrix = |t: &Tensor| -> Vec<Vec<f64>> {
        let c = t.shape()[1];
        t.data().chunks(c).map(<[f64]>::to_vec).collect()
    };
    let nest4 = |t: &Tensor| -> Vec<Vec<Vec<Vec<f64>>>> {
        let (ci, kh, kw) = (t.shape()[1], t.shape()[2], t.shape()[3]);
        t.data()
            .chunks(ci * kh * kw)
            .map(|per_out| {
                per_out
                    .chunks(kh * kw)
                    .map(|per_in| per_in.chunks(kw).map(<[f64]>::to_vec).collect())
                    .collect()
            })
            .collect()
    };
    match layer {
        Layer::Dense { weight, bias } => LayerSpec::Dense {
            weight: matrix(weight),
            bias: bias.data().to_vec(),
        },
        Layer::Conv2d {
            kernel,
            bias,
            stride,
            padding,
        } => LayerSpec::Conv2d {
            kernel: nest4(kernel),
            bias: bias.data().to_vec(),
            stride: *stride,
            padding: *padding,
        },
        Layer::ConvTranspose2d {
            kernel,
            bias,
            stride,
            padding,
            out_padding,
        } => LayerSpec::ConvTranspose2d {
            kernel: nest4(kernel),
            bias: bias.data().to_vec(),
            stride: *stride,
            padding: *padding,
            out_padding: *out_padding,
        },
        Layer::Relu => LayerSpec::Relu,
        Layer::Flatten => LayerSpec::Flatten,
        Layer::Reshape { shape } => LayerSpec::Reshape {
            shape: shape.clone(),
        },
    }
}

/// Parses a network from its JSON text.
pub fn model_from_json(text: &str) -> Result<Network> {
    let file: ModelFile = serde_json::from_str(text)?;
    let layers = file
        .layers
        .iter()
        .enumerate()
        .map(|(i, spec)| build_layer(spec, i))
        .collect::<Result<Vec<_>>>()?;
    Network::new(file.input_shape, layers)
}

/// Serializes a network to JSON text.
pub fn model_to_json(net: &Network) -> Result<String> {
    let file = ModelFile {
        input_shape: net.input_shape().to_vec(),
        layers: net.layers().iter().map(spec_of).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    model_from_json(&fs::read_to_string(path)?)
}

pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, model_to_json(net)?)?)
}
