//! Network representation: an input shape plus an ordered list of layers.
//!
//! Shape compatibility across the whole stack is checked once at
//! construction; errors name the offending layer index.

mod format;
mod layer;

pub use format::{load_model, model_from_json, model_to_json, save_model};
pub use layer::Layer;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    /// Activation shapes, one entry per layer boundary (`layers.len() + 1`).
    shapes: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Network> {
        if input_shape.is_empty() || input_shape.iter().product::<usize>() == 0 {
            return Err(Error::Model(format!(
                "input shape {input_shape:?} has no elements"
            )));
        }
        let mut shapes = vec![input_shape.clone()];
        for (i, layer) in layers.iter().enumerate() {
            let next = layer
                .output_shape(shapes.last().expect("shapes is never empty"))
                .map_err(|e| Error::Layer {
                    layer: i,
                    message: e.to_string(),
                })?;
            shapes.push(next);
        }
        Ok(Network {
            input_shape,
            layers,
            shapes,
        })
    }

    /// Network with no layers; forward is the identity on `input_shape`.
    pub fn identity(input_shape: Vec<usize>) -> Result<Network> {
        Network::new(input_shape, Vec::new())
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("shapes is never empty")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Activation shape after `n` layers (`n = 0` is the input shape).
    pub fn shape_after(&self, n: usize) -> &[usize] {
        &self.shapes[n]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape() != self.input_shape {
            return Err(Error::shape("network input", &self.input_shape, x.shape()));
        }
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.apply(&cur).map_err(|e| Error::Layer {
                layer: i,
                message: e.to_string(),
            })?;
        }
        Ok(cur)
    }

    /// Concatenation: `self` runs first, `then` consumes its output.
    pub fn compose(&self, then: &Network) -> Result<Network> {
        if self.output_shape() != then.input_shape() {
            return Err(Error::shape(
                "network composition",
                then.input_shape(),
                self.output_shape(),
            ));
        }
        let mut layers = self.layers.clone();
        layers.extend(then.layers.iter().cloned());
        Network::new(self.input_shape.clone(), layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_chacha::ChaCha12Rng;
    use rand::{Rng, SeedableRng};

    fn toy_classifier() -> Network {
        Network::new(
            vec![2],
            vec![
                Layer::Relu,
                Layer::Dense {
                    weight: Tensor::new(vec![2, 2], vec![0.5, 0.5, 1.0, -0.25]).unwrap(),
                    bias: Tensor::zeros(vec![2]),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn forward_matches_hand_computation() {
        let net = toy_classifier();
        let y = net.forward(&Tensor::vector(&[-1.0, 3.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[1.5, -0.75]);
    }

    #[test]
    fn shape_mismatch_names_the_layer() {
        let err = Network::new(
            vec![3],
            vec![
                Layer::Relu,
                Layer::Dense {
                    weight: Tensor::new(vec![2, 2], vec![1.0; 4]).unwrap(),
                    bias: Tensor::zeros(vec![2]),
                },
            ],
        )
        .unwrap_err();
        assert!(err.to_string().contains("layer 1"), "got: {err}");
    }

    #[test]
    fn identity_network_is_valid_and_trivial() {
        let net = Network::identity(vec![4]).unwrap();
        let x = Tensor::vector(&[1.0, -2.0, 0.0, 3.5]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), x);
        assert_eq!(net.output_shape(), &[4]);
    }

    #[test]
    fn forward_composes_over_prefix_and_suffix() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let dims = [4usize, 6, 3, 2];
        let mut layers = Vec::new();
        for win in dims.windows(2) {
            let (i, o) = (win[0], win[1]);
            layers.push(Layer::Dense {
                weight: Tensor::new(vec![o, i], (0..o * i).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .unwrap(),
                bias: Tensor::new(vec![o], (0..o).map(|_| rng.gen_range(-0.5..0.5)).collect())
                    .unwrap(),
            });
            layers.push(Layer::Relu);
        }
        let net = Network::new(vec![dims[0]], layers.clone()).unwrap();
        for split in 0..=layers.len() {
            let front = Network::new(vec![dims[0]], layers[..split].to_vec()).unwrap();
            let back = Network::new(front.output_shape().to_vec(), layers[split..].to_vec())
                .unwrap();
            let composed = front.compose(&back).unwrap();
            for _ in 0..5 {
                let x: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let x = Tensor::vector(&x).unwrap();
                let whole = net.forward(&x).unwrap();
                let pieced = back.forward(&front.forward(&x).unwrap()).unwrap();
                let comp = composed.forward(&x).unwrap();
                for ((a, b), c) in whole.data().iter().zip(pieced.data()).zip(comp.data()) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                    assert_abs_diff_eq!(a, c, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn flatten_then_dense_pipeline() {
        let net = Network::new(
            vec![1, 2, 2],
            vec![
                Layer::Flatten,
                Layer::Dense {
                    weight: Tensor::new(vec![1, 4], vec![1.0, 1.0, 1.0, 1.0]).unwrap(),
                    bias: Tensor::vector(&[0.5]).unwrap(),
                },
            ],
        )
        .unwrap();
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(net.forward(&x).unwrap().data(), &[10.5]);
    }
}
