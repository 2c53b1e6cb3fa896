//! Layer kinds and their concrete / interval semantics.
//!
//! Weighted layers (dense, conv2d, conv_transpose2d) are affine maps. Their
//! interval image is computed in center/radius form: the center goes through
//! the layer itself, the radius through the same layer with absolute weights
//! and zero bias. Convolutions are evaluated directly from the kernel; no
//! dense matrix is materialized.

use crate::error::{Error, Result};
use crate::tensor::{IntervalTensor, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `weight` has shape `[out, in]` (one row per output), `bias` shape `[out]`.
    Dense { weight: Tensor, bias: Tensor },
    /// `kernel` has shape `[out_ch, in_ch, kh, kw]`; zero padding.
    Conv2d {
        kernel: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
    },
    /// Transposed convolution; same kernel layout as `Conv2d`.
    ConvTranspose2d {
        kernel: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
        out_padding: usize,
    },
    Relu,
    Flatten,
    Reshape { shape: Vec<usize> },
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv2d { .. } => "conv2d",
            Layer::ConvTranspose2d { .. } => "conv_transpose2d",
            Layer::Relu => "relu",
            Layer::Flatten => "flatten",
            Layer::Reshape { .. } => "reshape",
        }
    }

    /// Dense and convolution layers carry weights; these are the layers the
    /// relaxation heuristic may run in front of.
    pub fn is_weighted(&self) -> bool {
        matches!(
            self,
            Layer::Dense { .. } | Layer::Conv2d { .. } | Layer::ConvTranspose2d { .. }
        )
    }

    pub fn is_convolution(&self) -> bool {
        matches!(self, Layer::Conv2d { .. } | Layer::ConvTranspose2d { .. })
    }

    /// Output shape for the given input shape, validating all structural
    /// constraints of the layer.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Dense { weight, bias } => {
                if weight.shape().len() != 2 {
                    return Err(Error::Model(format!(
                        "dense weight must be 2-D, got shape {:?}",
                        weight.shape()
                    )));
                }
                let (out, inp) = (weight.shape()[0], weight.shape()[1]);
                if bias.shape() != [out] {
                    return Err(Error::shape("dense bias", &[out], bias.shape()));
                }
                if input != [inp] {
                    return Err(Error::shape("dense input", &[inp], input));
                }
                Ok(vec![out])
            }
            Layer::Conv2d {
                kernel,
                bias,
                stride,
                padding,
            } => {
                let (co, ci, kh, kw) = conv_kernel_dims(kernel, bias, *stride)?;
                let (h, w) = conv_input_dims(input, ci)?;
                let eh = h + 2 * padding;
                let ew = w + 2 * padding;
                if eh < kh || ew < kw {
                    return Err(Error::Model(format!(
                        "conv2d kernel {kh}x{kw} larger than padded input {eh}x{ew}"
                    )));
                }
                Ok(vec![co, (eh - kh) / stride + 1, (ew - kw) / stride + 1])
            }
            Layer::ConvTranspose2d {
                kernel,
                bias,
                stride,
                padding,
                out_padding,
            } => {
                let (co, ci, kh, kw) = conv_kernel_dims(kernel, bias, *stride)?;
                let (h, w) = conv_input_dims(input, ci)?;
                if out_padding >= stride {
                    return Err(Error::Model(format!(
                        "conv_transpose2d out_padding {out_padding} must be below stride {stride}"
                    )));
                }
                let oh = ((h - 1) * stride + kh + out_padding) as isize - 2 * *padding as isize;
                let ow = ((w - 1) * stride + kw + out_padding) as isize - 2 * *padding as isize;
                if oh <= 0 || ow <= 0 {
                    return Err(Error::Model(format!(
                        "conv_transpose2d output collapses to {oh}x{ow}"
                    )));
                }
                Ok(vec![co, oh as usize, ow as usize])
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Reshape { shape } => {
                let have: usize = input.iter().product();
                let want: usize = shape.iter().product();
                if have != want {
                    return Err(Error::shape("reshape", shape, input));
                }
                Ok(shape.clone())
            }
        }
    }

    /// Concrete forward application.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Relu => {
                self.output_shape(x.shape())?;
                Ok(x.relu())
            }
            Layer::Flatten => {
                let out = self.output_shape(x.shape())?;
                x.reshape(out)
            }
            Layer::Reshape { .. } => {
                let out = self.output_shape(x.shape())?;
                x.reshape(out)
            }
            _ => self.linear_apply(x, false, true),
        }
    }

    /// Interval image of a box. Exact for relu and re-indexing layers; for
    /// weighted layers, exact per coordinate (no cross-coordinate tracking).
    pub fn apply_interval(&self, b: &IntervalTensor) -> Result<IntervalTensor> {
        match self {
            Layer::Relu => {
                self.output_shape(b.shape())?;
                Ok(b.relu())
            }
            Layer::Flatten | Layer::Reshape { .. } => {
                let out = self.output_shape(b.shape())?;
                b.reshape(out)
            }
            _ => {
                let center = self.linear_apply(b.center(), false, true)?;
                let radius = self.linear_apply(b.radius(), true, false)?;
                IntervalTensor::new(center, radius)
            }
        }
    }

    /// Shared path for the weighted kinds: plain weights with bias for the
    /// concrete/center image, absolute weights without bias for the radius.
    fn linear_apply(&self, x: &Tensor, absolute: bool, with_bias: bool) -> Result<Tensor> {
        let out_shape = self.output_shape(x.shape())?;
        let w = |v: f64| if absolute { v.abs() } else { v };
        match self {
            Layer::Dense { weight, bias } => {
                let (out, inp) = (weight.shape()[0], weight.shape()[1]);
                let wd = weight.data();
                let xd = x.data();
                let mut y = vec![0.0; out];
                for o in 0..out {
                    let row = &wd[o * inp..(o + 1) * inp];
                    let mut acc = if with_bias { bias.data()[o] } else { 0.0 };
                    for (wv, xv) in row.iter().zip(xd) {
                        acc += w(*wv) * xv;
                    }
                    y[o] = acc;
                }
                Tensor::new(out_shape, y)
            }
            Layer::Conv2d {
                kernel,
                bias,
                stride,
                padding,
            } => {
                let (co, ci, kh, kw) = conv_kernel_dims(kernel, bias, *stride)?;
                let (h, wd) = conv_input_dims(x.shape(), ci)?;
                let (oh, ow) = (out_shape[1], out_shape[2]);
                let k = kernel.data();
                let xd = x.data();
                let mut y = vec![0.0; co * oh * ow];
                for c in 0..co {
                    let base_b = if with_bias { bias.data()[c] } else { 0.0 };
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut acc = base_b;
                            for ic in 0..ci {
                                for a in 0..kh {
                                    let ih = (i * stride + a) as isize - *padding as isize;
                                    if ih < 0 || ih >= h as isize {
                                        continue;
                                    }
                                    for b in 0..kw {
                                        let iw = (j * stride + b) as isize - *padding as isize;
                                        if iw < 0 || iw >= wd as isize {
                                            continue;
                                        }
                                        let kv = k[((c * ci + ic) * kh + a) * kw + b];
                                        acc += w(kv)
                                            * xd[(ic * h + ih as usize) * wd + iw as usize];
                                    }
                                }
                            }
                            y[(c * oh + i) * ow + j] = acc;
                        }
                    }
                }
                Tensor::new(out_shape, y)
            }
            Layer::ConvTranspose2d {
                kernel,
                bias,
                stride,
                padding,
                ..
            } => {
                let (co, ci, kh, kw) = conv_kernel_dims(kernel, bias, *stride)?;
                let (h, wd) = conv_input_dims(x.shape(), ci)?;
                let (oh, ow) = (out_shape[1], out_shape[2]);
                let k = kernel.data();
                let xd = x.data();
                let mut y = vec![0.0; co * oh * ow];
                if with_bias {
                    for c in 0..co {
                        let bv = bias.data()[c];
                        for v in &mut y[c * oh * ow..(c + 1) * oh * ow] {
                            *v = bv;
                        }
                    }
                }
                // Each input pixel stamps a stride-spaced copy of the kernel.
                for ic in 0..ci {
                    for i in 0..h {
                        for j in 0..wd {
                            let xv = xd[(ic * h + i) * wd + j];
                            for c in 0..co {
                                for a in 0..kh {
                                    let out_i = (i * stride + a) as isize - *padding as isize;
                                    if out_i < 0 || out_i >= oh as isize {
                                        continue;
                                    }
                                    for b in 0..kw {
                                        let out_j =
                                            (j * stride + b) as isize - *padding as isize;
                                        if out_j < 0 || out_j >= ow as isize {
                                            continue;
                                        }
                                        let kv = k[((c * ci + ic) * kh + a) * kw + b];
                                        y[(c * oh + out_i as usize) * ow + out_j as usize] +=
                                            w(kv) * xv;
                                    }
                                }
                            }
                        }
                    }
                }
                Tensor::new(out_shape, y)
            }
            _ => unreachable!("linear_apply is only called for weighted layers"),
        }
    }
}

fn conv_kernel_dims(kernel: &Tensor, bias: &Tensor, stride: usize) -> Result<(usize, usize, usize, usize)> {
    if stride == 0 {
        return Err(Error::Model("convolution stride must be at least 1".into()));
    }
    let s = kernel.shape();
    if s.len() != 4 {
        return Err(Error::Model(format!(
            "convolution kernel must be 4-D (out, in, h, w), got {s:?}"
        )));
    }
    if bias.shape() != [s[0]] {
        return Err(Error::shape("convolution bias", &[s[0]], bias.shape()));
    }
    Ok((s[0], s[1], s[2], s[3]))
}

fn conv_input_dims(input: &[usize], ci: usize) -> Result<(usize, usize)> {
    if input.len() != 3 || input[0] != ci {
        return Err(Error::shape("convolution input (ch, h, w)", &[ci], input));
    }
    Ok((input[1], input[2]))
}
