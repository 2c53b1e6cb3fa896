//! Built-in worked example with every intermediate value pinned.
//!
//! A five-node weighted chain in the plane runs through a relu layer and a
//! 2x2 dense layer. With relaxation enabled, the cheap 80% of the post-relu
//! segments collapse into one box; the expensive crossing segment survives
//! exactly. All constants below were computed by hand and the checks here
//! compare the library against them to 1e-9.

use std::time::{Duration, Instant};

use crate::certify::{
    certify_deterministic, interval_baseline_from_box, prob_bounds, BoundMethod, OutputProperty,
    ProbBound, Verdict,
};
use crate::domain::{
    propagate_network_observed, AbstractState, BoxRegion, Chain, Mode, RelaxConfig, Segment, Step,
};
use crate::error::{Error, Result};
use crate::network::{Layer, Network};
use crate::tensor::{IntervalTensor, Tensor};

pub const INPUT_NODES: [[f64; 2]; 5] = [
    [1.0, 2.0],
    [-1.0, 3.0],
    [-1.0, 3.5],
    [1.0, 4.5],
    [3.5, 2.0],
];
pub const INPUT_WEIGHTS: [f64; 4] = [0.2, 0.2, 0.2, 0.4];

pub const POST_RELU_NODES: [[f64; 2]; 7] = [
    [1.0, 2.0],
    [0.0, 2.5],
    [0.0, 3.0],
    [0.0, 3.5],
    [0.0, 4.0],
    [1.0, 4.5],
    [3.5, 2.0],
];
pub const POST_RELU_WEIGHTS: [f64; 6] = [0.1, 0.1, 0.2, 0.1, 0.1, 0.4];

/// Box absorbing the first five post-relu segments.
pub const RELAXED_BOX_LOWER: [f64; 2] = [0.0, 2.0];
pub const RELAXED_BOX_UPPER: [f64; 2] = [1.0, 4.5];
pub const RELAXED_BOX_WEIGHT: f64 = 0.6;

pub const OUTPUT_BOX_LOWER: [f64; 2] = [1.0, -1.125];
pub const OUTPUT_BOX_UPPER: [f64; 2] = [2.75, 0.5];
pub const OUTPUT_SEGMENT: [[f64; 2]; 2] = [[2.75, -0.125], [2.75, 3.0]];
pub const OUTPUT_SEGMENT_WEIGHT: f64 = 0.4;

/// Output chain when nothing is relaxed.
pub const EXACT_OUTPUT_NODES: [[f64; 2]; 7] = [
    [1.5, 0.5],
    [1.25, -0.625],
    [1.5, -0.75],
    [1.75, -0.875],
    [2.0, -1.0],
    [2.75, -0.125],
    [2.75, 3.0],
];

pub const COARSE_BOUNDS: (f64, f64) = (0.6, 1.0);
pub const EXACT_PROBABILITY: f64 = 0.968;
pub const WITNESS_POINT: [f64; 2] = [2.75, 3.0];
pub const BASELINE_OUTPUT_LOWER: [f64; 2] = [1.0, -1.125];
pub const BASELINE_OUTPUT_UPPER: [f64; 2] = [4.0, 3.0];

pub const TOLERANCE: f64 = 1e-9;

pub fn network() -> Network {
    Network::new(
        vec![2],
        vec![
            Layer::Relu,
            Layer::Dense {
                weight: Tensor::new(vec![2, 2], vec![0.5, 0.5, 1.0, -0.25])
                    .expect("constant weight"),
                bias: Tensor::zeros(vec![2]),
            },
        ],
    )
    .expect("constant network")
}

pub fn input_chain() -> Chain {
    Chain::new(
        INPUT_NODES
            .iter()
            .map(|n| Tensor::vector(n).expect("constant node"))
            .collect(),
        INPUT_WEIGHTS.to_vec(),
    )
    .expect("constant chain")
}

pub fn input_state() -> AbstractState {
    AbstractState::from_chain(input_chain(), Mode::Probabilistic).expect("weights sum to one")
}

/// Relaxation that boxes exactly the first five post-relu segments.
pub fn relax_config() -> RelaxConfig {
    RelaxConfig {
        p: 0.8,
        k: 1,
        chain_threshold: 4,
        relax_before_dense: true,
        ..RelaxConfig::default()
    }
}

pub fn property() -> OutputProperty {
    OutputProperty::ArgmaxIs(0)
}

/// One named comparison against a pinned constant.
#[derive(Debug, Clone)]
pub struct GoldenCheck {
    pub name: &'static str,
    pub expected: String,
    pub actual: String,
    pub ok: bool,
}

#[derive(Debug)]
pub struct GoldenReport {
    pub checks: Vec<GoldenCheck>,
    pub coarse: ProbBound,
    pub exact_relaxed: ProbBound,
    pub exact_unrelaxed: ProbBound,
    pub verdict: Verdict,
    pub baseline: ProbBound,
    pub elapsed: Duration,
}

impl GoldenReport {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

fn fmt_values(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
    format!("[{}]", parts.join(", "))
}

fn push_values(checks: &mut Vec<GoldenCheck>, name: &'static str, expected: &[f64], actual: &[f64]) {
    let ok = expected.len() == actual.len()
        && expected
            .iter()
            .zip(actual)
            .all(|(e, a)| (e - a).abs() <= TOLERANCE);
    checks.push(GoldenCheck {
        name,
        expected: fmt_values(expected),
        actual: fmt_values(actual),
        ok,
    });
}

fn flat(nodes: &[[f64; 2]]) -> Vec<f64> {
    nodes.iter().flatten().copied().collect()
}

fn chain_nodes(chain: &Chain) -> Vec<f64> {
    chain.nodes().iter().flat_map(|n| n.data().to_vec()).collect()
}

/// Runs the whole example and compares every stage against the constants.
pub fn run() -> Result<GoldenReport> {
    let start = Instant::now();
    let net = network();
    let cfg = relax_config();
    let mut checks = Vec::new();

    // Relaxed propagation, observing the state after the relu layer and
    // again after the relaxation step that precedes the dense layer.
    let mut post_relu: Option<AbstractState> = None;
    let mut post_relax: Option<AbstractState> = None;
    let output = propagate_network_observed(&input_state(), &net, &cfg, |step, state| {
        match step {
            Step::Applied { layer: 0 } => post_relu = Some(state.clone()),
            Step::Relaxed { layer: 1 } => post_relax = Some(state.clone()),
            _ => {}
        }
    })?;

    let post_relu = post_relu.ok_or_else(|| Error::Model("relu step never ran".into()))?;
    if post_relu.chains().len() == 1 && post_relu.boxes().is_empty() {
        let chain = &post_relu.chains()[0];
        push_values(
            &mut checks,
            "chain after relu",
            &flat(&POST_RELU_NODES),
            &chain_nodes(chain),
        );
        push_values(
            &mut checks,
            "weights after relu",
            &POST_RELU_WEIGHTS,
            chain.weights(),
        );
    } else {
        checks.push(GoldenCheck {
            name: "state after relu",
            expected: "1 chain".into(),
            actual: format!(
                "{} chains + {} boxes",
                post_relu.chains().len(),
                post_relu.boxes().len()
            ),
            ok: false,
        });
    }

    let post_relax = post_relax.ok_or_else(|| Error::Model("relaxation step never ran".into()))?;
    if post_relax.chains().len() == 1 && post_relax.boxes().len() == 1 {
        let chain = &post_relax.chains()[0];
        push_values(
            &mut checks,
            "kept segment before the dense layer",
            &flat(&POST_RELU_NODES[5..]),
            &chain_nodes(chain),
        );
        push_values(
            &mut checks,
            "kept segment weight",
            &[POST_RELU_WEIGHTS[5]],
            chain.weights(),
        );
        let b = &post_relax.boxes()[0];
        push_values(
            &mut checks,
            "relaxed box lower corner",
            &RELAXED_BOX_LOWER,
            b.bounds().lower().data(),
        );
        push_values(
            &mut checks,
            "relaxed box upper corner",
            &RELAXED_BOX_UPPER,
            b.bounds().upper().data(),
        );
        push_values(
            &mut checks,
            "relaxed box weight",
            &[RELAXED_BOX_WEIGHT],
            &[b.weight()],
        );
    } else {
        checks.push(GoldenCheck {
            name: "state after relaxation",
            expected: "1 chain + 1 box".into(),
            actual: format!(
                "{} chains + {} boxes",
                post_relax.chains().len(),
                post_relax.boxes().len()
            ),
            ok: false,
        });
    }

    if output.chains().len() == 1 && output.boxes().len() == 1 {
        let seg = &output.chains()[0];
        push_values(
            &mut checks,
            "output segment",
            &flat(&OUTPUT_SEGMENT),
            &chain_nodes(seg),
        );
        push_values(
            &mut checks,
            "output segment weight",
            &[OUTPUT_SEGMENT_WEIGHT],
            seg.weights(),
        );
        let b = &output.boxes()[0];
        push_values(
            &mut checks,
            "output box lower corner",
            &OUTPUT_BOX_LOWER,
            b.bounds().lower().data(),
        );
        push_values(
            &mut checks,
            "output box upper corner",
            &OUTPUT_BOX_UPPER,
            b.bounds().upper().data(),
        );
    } else {
        checks.push(GoldenCheck {
            name: "output state",
            expected: "1 chain + 1 box".into(),
            actual: format!(
                "{} chains + {} boxes",
                output.chains().len(),
                output.boxes().len()
            ),
            ok: false,
        });
    }

    // Exact propagation (no relaxation).
    let exact_out = propagate_network_observed(
        &input_state(),
        &net,
        &RelaxConfig::default(),
        |_, _| {},
    )?;
    if exact_out.chains().len() == 1 && exact_out.boxes().is_empty() {
        let chain = &exact_out.chains()[0];
        push_values(
            &mut checks,
            "unrelaxed output chain",
            &flat(&EXACT_OUTPUT_NODES),
            &chain_nodes(chain),
        );
        push_values(
            &mut checks,
            "unrelaxed output weights",
            &POST_RELU_WEIGHTS,
            chain.weights(),
        );
    } else {
        checks.push(GoldenCheck {
            name: "unrelaxed output state",
            expected: "1 chain".into(),
            actual: format!(
                "{} chains + {} boxes",
                exact_out.chains().len(),
                exact_out.boxes().len()
            ),
            ok: false,
        });
    }

    let prop = property();
    let coarse = prob_bounds(&output, &prop, BoundMethod::CoarseIndicator)?;
    push_values(
        &mut checks,
        "coarse bounds on the relaxed state",
        &[COARSE_BOUNDS.0, COARSE_BOUNDS.1],
        &[coarse.lower, coarse.upper],
    );
    let exact_relaxed = prob_bounds(&output, &prop, BoundMethod::ExactMass)?;
    push_values(
        &mut checks,
        "exact-mass bounds on the relaxed state",
        &[EXACT_PROBABILITY, EXACT_PROBABILITY],
        &[exact_relaxed.lower, exact_relaxed.upper],
    );
    let exact_unrelaxed = prob_bounds(&exact_out, &prop, BoundMethod::ExactMass)?;
    push_values(
        &mut checks,
        "exact-mass bounds without relaxation",
        &[EXACT_PROBABILITY, EXACT_PROBABILITY],
        &[exact_unrelaxed.lower, exact_unrelaxed.upper],
    );

    let verdict = certify_deterministic(&exact_out, &prop)?;
    match &verdict {
        Verdict::Unknown(w) => {
            push_values(
                &mut checks,
                "deterministic witness point",
                &WITNESS_POINT,
                w.point.data(),
            );
        }
        Verdict::Verified => checks.push(GoldenCheck {
            name: "deterministic verdict",
            expected: "unknown, with witness".into(),
            actual: "verified".into(),
            ok: false,
        }),
    }

    let input_box = input_state().bounding_box();
    let baseline = interval_baseline_from_box(&input_box, &net, &prop)?;
    push_values(
        &mut checks,
        "interval baseline bounds",
        &[0.0, 1.0],
        &[baseline.lower, baseline.upper],
    );
    let mut cur = input_box;
    for layer in net.layers() {
        cur = layer.apply_interval(&cur)?;
    }
    push_values(
        &mut checks,
        "interval baseline output box",
        &[
            BASELINE_OUTPUT_LOWER[0],
            BASELINE_OUTPUT_LOWER[1],
            BASELINE_OUTPUT_UPPER[0],
            BASELINE_OUTPUT_UPPER[1],
        ],
        &[
            cur.lower().data()[0],
            cur.lower().data()[1],
            cur.upper().data()[0],
            cur.upper().data()[1],
        ],
    );

    Ok(GoldenReport {
        checks,
        coarse,
        exact_relaxed,
        exact_unrelaxed,
        verdict,
        baseline,
        elapsed: start.elapsed(),
    })
}

/// The relaxed output state, for callers that want to inspect it directly.
pub fn relaxed_output_state() -> Result<AbstractState> {
    propagate_network_observed(&input_state(), &network(), &relax_config(), |_, _| {})
}

/// Reference regions for the relaxed output, built straight from the
/// constants.
pub fn expected_output_regions() -> (Segment, BoxRegion) {
    let seg = Segment::new(
        Tensor::vector(&OUTPUT_SEGMENT[0]).expect("constant"),
        Tensor::vector(&OUTPUT_SEGMENT[1]).expect("constant"),
        OUTPUT_SEGMENT_WEIGHT,
    )
    .expect("constant segment");
    let b = BoxRegion::new(
        IntervalTensor::from_bounds(
            &Tensor::vector(&OUTPUT_BOX_LOWER).expect("constant"),
            &Tensor::vector(&OUTPUT_BOX_UPPER).expect("constant"),
        )
        .expect("constant box"),
        RELAXED_BOX_WEIGHT,
    )
    .expect("constant region");
    (seg, b)
}
