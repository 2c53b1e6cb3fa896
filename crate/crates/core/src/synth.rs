//! Random fixtures for test sweeps: relu networks with plenty of
//! crossings, segments to feed them, and one deep configuration whose
//! chains grow into the thousands of nodes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::network::{Layer, Network};
use crate::tensor::Tensor;

/// Dense layer with uniform weights scaled so relu units stay active about
/// half the time, which keeps crossings frequent.
fn random_dense(rng: &mut impl Rng, inputs: usize, outputs: usize, gain: f64) -> Layer {
    let scale = gain * (3.0 / inputs as f64).sqrt();
    let weight = Tensor::new(
        vec![outputs, inputs],
        (0..outputs * inputs)
            .map(|_| rng.gen_range(-scale..scale))
            .collect(),
    )
    .expect("finite weights");
    let bias = Tensor::new(
        vec![outputs],
        (0..outputs).map(|_| rng.gen_range(-0.2..0.2)).collect(),
    )
    .expect("finite bias");
    Layer::Dense { weight, bias }
}

/// Fully-connected relu network with `hidden` layers of width drawn from
/// `dims`, relu after every layer but the last.
pub fn random_relu_mlp(
    rng: &mut impl Rng,
    input_dim: usize,
    output_dim: usize,
    hidden: usize,
    dims: std::ops::RangeInclusive<usize>,
) -> Network {
    let mut layers = Vec::new();
    let mut prev = input_dim;
    for _ in 0..hidden {
        let width = rng.gen_range(dims.clone());
        layers.push(random_dense(rng, prev, width, 1.4));
        layers.push(Layer::Relu);
        prev = width;
    }
    layers.push(random_dense(rng, prev, output_dim, 1.4));
    Network::new(vec![input_dim], layers).expect("generated layers are consistent")
}

/// Segment with endpoints drawn uniformly from `[-scale, scale]`.
pub fn random_segment(rng: &mut impl Rng, dim: usize, scale: f64) -> (Tensor, Tensor) {
    let mut point = || {
        Tensor::new(
            vec![dim],
            (0..dim).map(|_| rng.gen_range(-scale..scale)).collect(),
        )
        .expect("finite point")
    };
    (point(), point())
}

/// Seeded generator for reproducible sweeps.
pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Deep fixture: a relu network whose chains grow into the thousands of
/// nodes, the regime where relaxation pays off.
///
/// Purely random mixing compounds crossings too slowly for that, so the
/// first two units of every hidden layer fold one coordinate with a tent
/// map (`u <- 2 relu(u) - 4 relu(u - 0.5)` keeps `u` in `[0, 1]` and
/// doubles its linear pieces per layer) while the remaining units mix all
/// inputs randomly. The first layer aligns `u` with the returned segment
/// so the folding spans exactly its parameter range.
pub fn deep_split_fixture(seed: u64) -> (Network, Tensor, Tensor) {
    let mut rng = rng(seed);
    let dim = 8;
    let width = 16;
    let depth = 12;
    let scale = 4.0;
    let mut point = || {
        Tensor::new(
            vec![dim],
            (0..dim).map(|_| rng.gen_range(-scale..scale)).collect(),
        )
        .expect("finite endpoint")
    };
    let a = point();
    let b = point();

    // First layer: unit 0 reads the segment parameter (0 at `a`, 1 at `b`),
    // unit 1 reads it shifted by -0.5, the rest are random.
    let d = Tensor::sub(&b, &a).expect("same shape");
    let dd = Tensor::dot(&d, &d).expect("same shape");
    let random_layer = |rng: &mut ChaCha12Rng, inputs: usize| random_dense(rng, inputs, width, 1.4);
    let mut first = match random_layer(&mut rng, dim) {
        Layer::Dense { weight, bias } => (weight.data().to_vec(), bias.data().to_vec()),
        _ => unreachable!(),
    };
    for j in 0..dim {
        first.0[j] = d.data()[j] / dd;
        first.0[dim + j] = d.data()[j] / dd;
    }
    let da = Tensor::dot(&d, &a).expect("same shape");
    first.1[0] = -da / dd;
    first.1[1] = -da / dd - 0.5;
    let mut layers = vec![
        Layer::Dense {
            weight: Tensor::new(vec![width, dim], first.0).expect("finite weights"),
            bias: Tensor::new(vec![width], first.1).expect("finite bias"),
        },
        Layer::Relu,
    ];

    // Hidden layers: rows 0 and 1 apply the fold, untouched by the mixing.
    for _ in 1..depth {
        let (mut weight, mut bias) = match random_layer(&mut rng, width) {
            Layer::Dense { weight, bias } => (weight.data().to_vec(), bias.data().to_vec()),
            _ => unreachable!(),
        };
        for row in 0..2 {
            for col in 0..width {
                weight[row * width + col] = 0.0;
            }
            weight[row * width] = 2.0;
            weight[row * width + 1] = -4.0;
        }
        bias[0] = 0.0;
        bias[1] = -0.5;
        layers.push(Layer::Dense {
            weight: Tensor::new(vec![width, width], weight).expect("finite weights"),
            bias: Tensor::new(vec![width], bias).expect("finite bias"),
        });
        layers.push(Layer::Relu);
    }
    layers.push(random_dense(&mut rng, width, 3, 1.4));
    let net = Network::new(vec![dim], layers).expect("fixture layers are consistent");
    (net, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{propagate_network, AbstractState, Mode, RelaxConfig};

    #[test]
    fn generated_networks_run() {
        let mut r = rng(1);
        for _ in 0..10 {
            let net = random_relu_mlp(&mut r, 3, 2, 2, 2..=6);
            let (a, _) = random_segment(&mut r, 3, 2.0);
            let out = net.forward(&a).unwrap();
            assert_eq!(out.shape(), &[2]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let build = || {
            let mut r = rng(9);
            let net = random_relu_mlp(&mut r, 3, 2, 2, 2..=6);
            let (a, b) = random_segment(&mut r, 3, 2.0);
            (net.forward(&a).unwrap(), net.forward(&b).unwrap())
        };
        let (x1, y1) = build();
        let (x2, y2) = build();
        assert_eq!(x1.data(), x2.data());
        assert_eq!(y1.data(), y2.data());
    }

    #[test]
    fn deep_fixture_splits_into_thousands_of_nodes() {
        let (net, a, b) = deep_split_fixture(0);
        let state = AbstractState::segment(a, b, Mode::Probabilistic).unwrap();
        let out = propagate_network(&state, &net, &RelaxConfig::default()).unwrap();
        let nodes: usize = out.chains().iter().map(|c| c.node_count()).sum();
        assert!(nodes >= 2000, "only {nodes} nodes");
        assert!(out.boxes().is_empty());
    }
}
