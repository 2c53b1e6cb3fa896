//! Abstract domain: weighted unions of segment chains and interval boxes.
//!
//! Chains move through affine layers node by node and split exactly at ReLU
//! sign crossings, so their part of the state is the true image of the input
//! segment. Boxes move with interval arithmetic. Weights are never created or
//! destroyed, only split and merged; in probabilistic mode they always sum
//! to 1 (up to float drift).

mod region;
mod relax;

pub use region::{BoxRegion, Chain, Mode, Region, Segment};
pub use relax::RelaxConfig;

use crate::error::{Error, Result};
use crate::network::{Layer, Network};
use crate::tensor::{IntervalTensor, Tensor};

/// Tolerance on the probabilistic weight-sum invariant.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Crossing parameters closer than this to each other or to an endpoint are
/// merged or dropped, so splits never produce zero-length segments.
pub const ALPHA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractState {
    mode: Mode,
    chains: Vec<Chain>,
    boxes: Vec<BoxRegion>,
}

impl AbstractState {
    /// State covering the segment from `a` to `b` with weight 1.
    pub fn segment(a: Tensor, b: Tensor, mode: Mode) -> Result<AbstractState> {
        let seg = Segment::new(a, b, 1.0)?;
        AbstractState::from_parts(mode, vec![Chain::from_segment(&seg)], Vec::new())
    }

    /// State covering a weighted polygonal chain.
    pub fn chain(nodes: Vec<Tensor>, weights: Vec<f64>, mode: Mode) -> Result<AbstractState> {
        AbstractState::from_parts(mode, vec![Chain::new(nodes, weights)?], Vec::new())
    }

    pub fn from_chain(chain: Chain, mode: Mode) -> Result<AbstractState> {
        AbstractState::from_parts(mode, vec![chain], Vec::new())
    }

    pub fn from_parts(
        mode: Mode,
        chains: Vec<Chain>,
        boxes: Vec<BoxRegion>,
    ) -> Result<AbstractState> {
        let state = AbstractState {
            mode,
            chains,
            boxes,
        };
        if state.region_count() == 0 {
            return Err(Error::InvalidArgument(
                "a state needs at least one region".into(),
            ));
        }
        let shape = state.shape().to_vec();
        for c in &state.chains {
            if c.nodes()[0].shape() != shape {
                return Err(Error::shape("state regions", &shape, c.nodes()[0].shape()));
            }
        }
        for b in &state.boxes {
            if b.bounds().shape() != shape {
                return Err(Error::shape("state regions", &shape, b.bounds().shape()));
            }
        }
        if mode == Mode::Probabilistic {
            let sum = state.weight_sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::WeightSum(sum));
            }
        }
        Ok(state)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn boxes(&self) -> &[BoxRegion] {
        &self.boxes
    }

    /// Shape of every region in the state.
    pub fn shape(&self) -> &[usize] {
        self.chains
            .first()
            .map(|c| c.nodes()[0].shape())
            .or_else(|| self.boxes.first().map(|b| b.bounds().shape()))
            .expect("states hold at least one region")
    }

    /// Segments across all chains, plus boxes.
    pub fn region_count(&self) -> usize {
        self.segment_count() + self.boxes.len()
    }

    pub fn segment_count(&self) -> usize {
        self.chains.iter().map(Chain::segment_count).sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.chains.iter().map(Chain::weight_sum).sum::<f64>()
            + self.boxes.iter().map(BoxRegion::weight).sum::<f64>()
    }

    /// Regions in canonical order: chain segments first, then boxes.
    pub fn regions(&self) -> impl Iterator<Item = Region> + '_ {
        self.chains
            .iter()
            .flat_map(|c| c.segments().map(Region::Segment))
            .chain(self.boxes.iter().cloned().map(Region::Box))
    }

    /// Smallest box covering every region.
    pub fn bounding_box(&self) -> IntervalTensor {
        let mut acc: Option<IntervalTensor> = None;
        let mut add = |b: IntervalTensor| {
            acc = Some(match acc.take() {
                None => b,
                Some(a) => a.hull(&b).expect("state regions share a shape"),
            });
        };
        for c in &self.chains {
            for n in c.nodes() {
                add(IntervalTensor::enclosing_points(n, n).expect("node is its own box"));
            }
        }
        for b in &self.boxes {
            add(b.bounds().clone());
        }
        acc.expect("states hold at least one region")
    }

    /// Image under an affine or re-indexing layer. ReLU layers must go
    /// through [`AbstractState::propagate_relu`] instead.
    pub fn propagate_affine(&self, layer: &Layer) -> Result<AbstractState> {
        if matches!(layer, Layer::Relu) {
            return Err(Error::InvalidArgument(
                "propagate_affine cannot apply a relu layer".into(),
            ));
        }
        let chains = self
            .chains
            .iter()
            .map(|c| {
                let nodes = c
                    .nodes()
                    .iter()
                    .map(|n| layer.apply(n))
                    .collect::<Result<Vec<_>>>()?;
                Chain::new(nodes, c.weights().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        let boxes = self
            .boxes
            .iter()
            .map(|b| BoxRegion::new(layer.apply_interval(b.bounds())?, b.weight()))
            .collect::<Result<Vec<_>>>()?;
        AbstractState::from_parts(self.mode, chains, boxes)
    }

    /// Exact image under entrywise max(0, x): each segment splits at its
    /// sign crossings, then all nodes map pointwise.
    pub fn propagate_relu(&self) -> Result<AbstractState> {
        let chains = self
            .chains
            .iter()
            .map(|c| {
                let mut nodes: Vec<Tensor> = vec![c.nodes()[0].clone()];
                let mut weights: Vec<f64> = Vec::with_capacity(c.segment_count());
                for i in 0..c.segment_count() {
                    let (a, b) = (&c.nodes()[i], &c.nodes()[i + 1]);
                    let w = c.weights()[i];
                    let mut prev = 0.0;
                    for alpha in crossing_alphas(a, b) {
                        nodes.push(Tensor::lerp(a, b, alpha)?);
                        weights.push(w * (alpha - prev));
                        prev = alpha;
                    }
                    nodes.push(b.clone());
                    weights.push(w * (1.0 - prev));
                }
                for n in &mut nodes {
                    *n = n.relu();
                }
                Chain::new(nodes, weights)
            })
            .collect::<Result<Vec<_>>>()?;
        let boxes = self
            .boxes
            .iter()
            .map(|b| BoxRegion::new(b.bounds().relu(), b.weight()))
            .collect::<Result<Vec<_>>>()?;
        AbstractState::from_parts(self.mode, chains, boxes)
    }

    /// Applies the relaxation heuristic. With `cfg.p == 0` or no chain above
    /// the threshold the state is returned unchanged.
    #[must_use]
    pub fn relax(&self, cfg: &RelaxConfig) -> AbstractState {
        if cfg.p <= 0.0 {
            return self.clone();
        }
        let mut chains = Vec::new();
        let mut boxes = self.boxes.clone();
        for chain in &self.chains {
            if chain.node_count() <= cfg.chain_threshold {
                chains.push(chain.clone());
                continue;
            }
            let plan = relax::plan_chain(chain, cfg);
            let (mut sub, mut merged) = relax::apply_plan(chain, &plan);
            chains.append(&mut sub);
            boxes.append(&mut merged);
        }
        AbstractState {
            mode: self.mode,
            chains,
            boxes,
        }
    }
}

/// Sorted split parameters where a coordinate of the segment crosses zero
/// strictly between the endpoints. An endpoint sitting exactly at zero
/// counts as nonnegative and produces no crossing.
pub fn relu_crossings(seg: &Segment) -> Vec<f64> {
    crossing_alphas(seg.a(), seg.b())
}

fn crossing_alphas(a: &Tensor, b: &Tensor) -> Vec<f64> {
    let mut alphas: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .filter(|&(&x, &y)| (x < 0.0 && y > 0.0) || (x > 0.0 && y < 0.0))
        .map(|(&x, &y)| x / (x - y))
        .collect();
    alphas.sort_unstable_by(f64::total_cmp);
    let mut kept: Vec<f64> = Vec::with_capacity(alphas.len());
    for alpha in alphas {
        if alpha <= ALPHA_TOL || alpha >= 1.0 - ALPHA_TOL {
            continue;
        }
        if let Some(&last) = kept.last() {
            if alpha - last <= ALPHA_TOL {
                continue;
            }
        }
        kept.push(alpha);
    }
    kept
}

/// Splits a segment at the given parameters, dividing its weight by the
/// relative sub-lengths. `alphas` must be strictly increasing inside (0, 1).
pub fn split_segment(seg: &Segment, alphas: &[f64]) -> Result<Vec<Segment>> {
    let ok = alphas.windows(2).all(|w| w[0] < w[1])
        && alphas.iter().all(|&a| a > 0.0 && a < 1.0);
    if !ok {
        return Err(Error::InvalidArgument(
            "split parameters must be strictly increasing inside (0, 1)".into(),
        ));
    }
    let mut cuts = Vec::with_capacity(alphas.len() + 2);
    cuts.push(0.0);
    cuts.extend_from_slice(alphas);
    cuts.push(1.0);
    cuts.windows(2)
        .map(|w| {
            Segment::new(
                seg.point_at(w[0]),
                seg.point_at(w[1]),
                seg.weight() * (w[1] - w[0]),
            )
        })
        .collect()
}

/// Bounding box of a segment; the weight carries over.
#[must_use]
pub fn relax_segment_to_box(seg: &Segment) -> BoxRegion {
    let bounds =
        IntervalTensor::enclosing_points(seg.a(), seg.b()).expect("endpoints share a shape");
    BoxRegion::new(bounds, seg.weight()).expect("segment weights are valid box weights")
}

/// Common bounding box of several boxes; weights add up.
pub fn merge_boxes(boxes: &[BoxRegion]) -> Result<BoxRegion> {
    let first = boxes
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot merge zero boxes".into()))?;
    let mut bounds = first.bounds().clone();
    for b in &boxes[1..] {
        bounds = bounds.hull(b.bounds())?;
    }
    BoxRegion::new(bounds, boxes.iter().map(BoxRegion::weight).sum())
}

/// One event during network propagation, reported to observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// The relaxation heuristic ran in front of layer `layer`.
    Relaxed { layer: usize },
    /// Layer `layer` was applied.
    Applied { layer: usize },
}

/// Propagates a state through a whole network, relaxing in front of
/// convolution layers (or in front of every weighted layer when
/// `cfg.relax_before_dense` is set) and enforcing the region budget.
pub fn propagate_network(
    state: &AbstractState,
    net: &Network,
    cfg: &RelaxConfig,
) -> Result<AbstractState> {
    propagate_network_observed(state, net, cfg, |_, _| {})
}

/// Like [`propagate_network`], reporting every intermediate state.
pub fn propagate_network_observed(
    state: &AbstractState,
    net: &Network,
    cfg: &RelaxConfig,
    mut observe: impl FnMut(Step, &AbstractState),
) -> Result<AbstractState> {
    cfg.validate()?;
    if state.shape() != net.input_shape() {
        return Err(Error::shape(
            "propagation input",
            net.input_shape(),
            state.shape(),
        ));
    }
    let budget = |s: &AbstractState, layer: usize| {
        if s.region_count() > cfg.region_budget {
            Err(Error::BudgetExceeded {
                layer,
                regions: s.region_count(),
                budget: cfg.region_budget,
            })
        } else {
            Ok(())
        }
    };
    let mut cur = state.clone();
    budget(&cur, 0)?;
    for (i, layer) in net.layers().iter().enumerate() {
        let relax_here = layer.is_convolution() || (cfg.relax_before_dense && layer.is_weighted());
        if cfg.p > 0.0 && relax_here {
            cur = cur.relax(cfg);
            observe(Step::Relaxed { layer: i }, &cur);
            budget(&cur, i)?;
        }
        cur = match layer {
            Layer::Relu => cur.propagate_relu()?,
            _ => cur.propagate_affine(layer)?,
        };
        observe(Step::Applied { layer: i }, &cur);
        budget(&cur, i)?;
    }
    Ok(cur)
}
