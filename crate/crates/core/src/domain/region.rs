//! Region kinds of the abstract state.
//!
//! Segments are grouped into polygonal chains: shared endpoints are stored
//! once and transformed once, so adjacency stays exact under float
//! arithmetic. Boxes carry the weight of the segments they replaced.

use crate::error::{Error, Result};
use crate::tensor::{IntervalTensor, Tensor};

/// How region weights are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Weights are carried but certification ignores them.
    Deterministic,
    /// Weights form a distribution over the input; they must sum to 1.
    Probabilistic,
}

/// Weighted line segment from `a` to `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    a: Tensor,
    b: Tensor,
    weight: f64,
}

impl Segment {
    pub fn new(a: Tensor, b: Tensor, weight: f64) -> Result<Segment> {
        if a.shape() != b.shape() {
            return Err(Error::shape("segment endpoints", a.shape(), b.shape()));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "segment weight must be finite and nonnegative, got {weight}"
            )));
        }
        Ok(Segment { a, b, weight })
    }

    pub fn a(&self) -> &Tensor {
        &self.a
    }

    pub fn b(&self) -> &Tensor {
        &self.b
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Euclidean length of the segment.
    pub fn length(&self) -> f64 {
        Tensor::distance(&self.a, &self.b).expect("endpoints share a shape")
    }

    pub fn point_at(&self, t: f64) -> Tensor {
        Tensor::lerp(&self.a, &self.b, t).expect("endpoints share a shape")
    }
}

/// Weighted interval box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    bounds: IntervalTensor,
    weight: f64,
}

impl BoxRegion {
    pub fn new(bounds: IntervalTensor, weight: f64) -> Result<BoxRegion> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "box weight must be finite and nonnegative, got {weight}"
            )));
        }
        Ok(BoxRegion { bounds, weight })
    }

    pub fn bounds(&self) -> &IntervalTensor {
        &self.bounds
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// Polygonal chain: `nodes.len() == weights.len() + 1`, one weight per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    nodes: Vec<Tensor>,
    weights: Vec<f64>,
}

impl Chain {
    pub fn new(nodes: Vec<Tensor>, weights: Vec<f64>) -> Result<Chain> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument(
                "a chain needs at least two nodes".into(),
            ));
        }
        if weights.len() + 1 != nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "chain with {} nodes needs {} weights, got {}",
                nodes.len(),
                nodes.len() - 1,
                weights.len()
            )));
        }
        let shape = nodes[0].shape();
        for n in &nodes[1..] {
            if n.shape() != shape {
                return Err(Error::shape("chain nodes", shape, n.shape()));
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "chain weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Chain { nodes, weights })
    }

    pub fn from_segment(seg: &Segment) -> Chain {
        Chain {
            nodes: vec![seg.a().clone(), seg.b().clone()],
            weights: vec![seg.weight()],
        }
    }

    pub fn nodes(&self) -> &[Tensor] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn segment_count(&self) -> usize {
        self.weights.len()
    }

    pub fn segment(&self, i: usize) -> Segment {
        Segment {
            a: self.nodes[i].clone(),
            b: self.nodes[i + 1].clone(),
            weight: self.weights[i],
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        (0..self.segment_count()).map(|i| self.segment(i))
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Point reached after sweeping a `alpha` fraction of the chain's total
    /// weight, i.e. the quantile map of the distribution the weights encode.
    pub fn point_at_mass(&self, alpha: f64) -> Tensor {
        let total = self.weight_sum();
        if total <= 0.0 || alpha <= 0.0 {
            return self.nodes[0].clone();
        }
        if alpha >= 1.0 {
            return self.nodes[self.nodes.len() - 1].clone();
        }
        let target = alpha * total;
        let mut cum = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            if target <= cum + w || i == self.weights.len() - 1 {
                let t = ((target - cum) / w).clamp(0.0, 1.0);
                return Tensor::lerp(&self.nodes[i], &self.nodes[i + 1], t)
                    .expect("chain nodes share a shape");
            }
            cum += w;
        }
        self.nodes[self.nodes.len() - 1].clone()
    }
}

/// One region of the abstract state, by value.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Segment(Segment),
    Box(BoxRegion),
}

impl Region {
    pub fn weight(&self) -> f64 {
        match self {
            Region::Segment(s) => s.weight(),
            Region::Box(b) => b.weight(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Region::Segment(s) => s.a().shape(),
            Region::Box(b) => b.bounds().shape(),
        }
    }
}
