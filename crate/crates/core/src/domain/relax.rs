//! Relaxation heuristic: trades exact segments for merged boxes on long
//! chains, cutting the region count while keeping every traded point covered.
//!
//! For each chain with more nodes than `chain_threshold`, segments are walked
//! in order and boxed while their length stays at or below the `p`-th
//! percentile of the chain's segment lengths (computed once, up front) and
//! while the run has visited at most `node_count / k` distinct endpoints.
//! Each finished run merges into a single box, the following segment (if any)
//! is kept exact, and the walk restarts after it.

use crate::error::{Error, Result};

use super::region::{BoxRegion, Chain};
use super::{merge_boxes, relax_segment_to_box};

/// Settings for the relaxation heuristic and for network propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxConfig {
    /// Length percentile in `[0, 1]`; `0` disables relaxation entirely.
    pub p: f64,
    /// Endpoint-budget divisor: one run may visit at most `nodes / k`
    /// distinct endpoints.
    pub k: usize,
    /// Only chains with strictly more nodes than this are relaxed.
    pub chain_threshold: usize,
    /// Propagation aborts once a state holds more regions than this.
    pub region_budget: usize,
    /// Relax before every weighted layer instead of convolutions only.
    pub relax_before_dense: bool,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig {
            p: 0.0,
            k: 25,
            chain_threshold: 1000,
            region_budget: 1_000_000,
            relax_before_dense: false,
        }
    }
}

impl RelaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!(
                "percentile p must lie in [0, 1], got {}",
                self.p
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.chain_threshold < 2 {
            return Err(Error::InvalidArgument(
                "chain threshold must be at least 2".into(),
            ));
        }
        if self.region_budget == 0 {
            return Err(Error::InvalidArgument(
                "region budget must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `p`-th percentile of pre-sorted values, linearly interpolated between
/// order statistics.
pub(crate) fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + (pos - i as f64) * (sorted[i + 1] - sorted[i])
}

/// Contiguous span of segment indices `[first, first + count)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Piece {
    Boxed { first: usize, count: usize },
    Kept { first: usize, count: usize },
}

/// Splits a chain into boxed runs and kept spans. Assumes the chain is
/// eligible (node count above the threshold) and `cfg.p > 0`.
pub(crate) fn plan_chain(chain: &Chain, cfg: &RelaxConfig) -> Vec<Piece> {
    let lengths: Vec<f64> = chain.segments().map(|s| s.length()).collect();
    let mut sorted = lengths.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let cutoff = percentile(&sorted, cfg.p);

    let t = chain.node_count();
    let n = lengths.len();
    let mut pieces: Vec<Piece> = Vec::new();
    let keep = |pieces: &mut Vec<Piece>, at: usize| match pieces.last_mut() {
        // Adjacent kept segments still share endpoints; hold them as one span.
        Some(Piece::Kept { first, count }) if *first + *count == at => *count += 1,
        _ => pieces.push(Piece::Kept { first: at, count: 1 }),
    };

    let mut i = 0;
    while i < n {
        let mut m = 0;
        // Boxing segment m of the run makes m + 2 endpoints visited; stop
        // before the count would exceed t / k, or at a long segment.
        while i + m < n && lengths[i + m] <= cutoff && (m + 2) * cfg.k <= t {
            m += 1;
        }
        if m > 0 {
            pieces.push(Piece::Boxed { first: i, count: m });
            i += m;
        }
        if i < n {
            keep(&mut pieces, i);
            i += 1;
        }
    }
    pieces
}

/// Materializes a plan into sub-chains and merged boxes, in traversal order.
pub(crate) fn apply_plan(chain: &Chain, pieces: &[Piece]) -> (Vec<Chain>, Vec<BoxRegion>) {
    let mut chains = Vec::new();
    let mut boxes = Vec::new();
    for piece in pieces {
        match *piece {
            Piece::Boxed { first, count } => {
                let run: Vec<BoxRegion> = (first..first + count)
                    .map(|i| relax_segment_to_box(&chain.segment(i)))
                    .collect();
                boxes.push(merge_boxes(&run).expect("runs are never empty"));
            }
            Piece::Kept { first, count } => {
                let nodes = chain.nodes()[first..=first + count].to_vec();
                let weights = chain.weights()[first..first + count].to_vec();
                chains.push(Chain::new(nodes, weights).expect("kept spans are valid chains"));
            }
        }
    }
    (chains, boxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use approx::assert_abs_diff_eq;

    fn v(d: &[f64]) -> Tensor {
        Tensor::vector(d).unwrap()
    }

    fn post_relu_chain() -> Chain {
        Chain::new(
            vec![
                v(&[1.0, 2.0]),
                v(&[0.0, 2.5]),
                v(&[0.0, 3.0]),
                v(&[0.0, 3.5]),
                v(&[0.0, 4.0]),
                v(&[1.0, 4.5]),
                v(&[3.5, 2.0]),
            ],
            vec![0.1, 0.1, 0.2, 0.1, 0.1, 0.4],
        )
        .unwrap()
    }

    #[test]
    fn percentile_interpolates_linearly() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(percentile(&s, 0.0), 1.0);
        assert_abs_diff_eq!(percentile(&s, 1.0), 4.0);
        assert_abs_diff_eq!(percentile(&s, 0.5), 2.5);
        assert_abs_diff_eq!(percentile(&s, 1.0 / 3.0), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(percentile(&[5.0], 0.7), 5.0);
    }

    #[test]
    fn plan_boxes_first_five_segments_of_the_worked_chain() {
        // Lengths are [1.118, .5, .5, .5, 1.118, 3.536]; the 0.8 percentile
        // sits at 1.118, so only the long closing segment stays exact.
        let cfg = RelaxConfig {
            p: 0.8,
            k: 1,
            chain_threshold: 4,
            ..RelaxConfig::default()
        };
        let plan = plan_chain(&post_relu_chain(), &cfg);
        assert_eq!(
            plan,
            vec![
                Piece::Boxed { first: 0, count: 5 },
                Piece::Kept { first: 5, count: 1 },
            ]
        );
        let (chains, boxes) = apply_plan(&post_relu_chain(), &plan);
        assert_eq!(chains.len(), 1);
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0].bounds().lower().data(), &[0.0, 2.0]);
        assert_eq!(boxes[0].bounds().upper().data(), &[1.0, 4.5]);
        assert_abs_diff_eq!(boxes[0].weight(), 0.6, epsilon = 1e-12);
        assert_eq!(chains[0].nodes()[0].data(), &[1.0, 4.5]);
        assert_eq!(chains[0].nodes()[1].data(), &[3.5, 2.0]);
        assert_abs_diff_eq!(chains[0].weight_sum(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn plan_with_max_percentile_boxes_everything() {
        // p = 1 disables the length stop; seven endpoints at k = 1 fit the
        // budget exactly, so the whole chain collapses into one box.
        let cfg = RelaxConfig {
            p: 1.0,
            k: 1,
            chain_threshold: 4,
            ..RelaxConfig::default()
        };
        let plan = plan_chain(&post_relu_chain(), &cfg);
        assert_eq!(plan, vec![Piece::Boxed { first: 0, count: 6 }]);
        let (chains, boxes) = apply_plan(&post_relu_chain(), &plan);
        assert!(chains.is_empty());
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0].bounds().lower().data(), &[0.0, 2.0]);
        assert_eq!(boxes[0].bounds().upper().data(), &[3.5, 4.5]);
        assert_abs_diff_eq!(boxes[0].weight(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn endpoint_budget_caps_each_run() {
        // 2000 equal-length segments, all at the percentile: runs of 19
        // segments (20 endpoints at k = 100), one kept in between.
        let n = 1999;
        let nodes: Vec<Tensor> = (0..=n).map(|i| v(&[i as f64])).collect();
        let weights = vec![1.0 / n as f64; n];
        let chain = Chain::new(nodes, weights).unwrap();
        let cfg = RelaxConfig {
            p: 0.5,
            k: 100,
            chain_threshold: 1000,
            ..RelaxConfig::default()
        };
        let plan = plan_chain(&chain, &cfg);
        assert_eq!(
            plan[0],
            Piece::Boxed {
                first: 0,
                count: 19
            }
        );
        assert_eq!(plan[1], Piece::Kept { first: 19, count: 1 });
        let (chains, boxes) = apply_plan(&chain, &plan);
        assert_eq!(boxes.len(), 100);
        assert_eq!(chains.len(), 99);
        let total: f64 = chains.iter().map(Chain::weight_sum).sum::<f64>()
            + boxes.iter().map(BoxRegion::weight).sum::<f64>();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn long_leading_segment_is_kept_without_an_empty_box() {
        // First segment is the single one above the percentile.
        let chain = Chain::new(
            vec![v(&[0.0]), v(&[10.0]), v(&[10.5]), v(&[11.0]), v(&[11.5])],
            vec![0.25; 4],
        )
        .unwrap();
        let cfg = RelaxConfig {
            p: 0.5,
            k: 1,
            chain_threshold: 4,
            ..RelaxConfig::default()
        };
        let plan = plan_chain(&chain, &cfg);
        assert_eq!(
            plan,
            vec![
                Piece::Kept { first: 0, count: 1 },
                Piece::Boxed { first: 1, count: 3 },
            ]
        );
    }

    #[test]
    fn adjacent_kept_segments_stay_one_chain() {
        // Two long segments in a row both get skipped; they must come back
        // as a single two-segment chain, not two chains.
        let chain = Chain::new(
            vec![v(&[0.0]), v(&[1.0]), v(&[6.0]), v(&[11.0]), v(&[12.0])],
            vec![0.25; 4],
        )
        .unwrap();
        let cfg = RelaxConfig {
            p: 0.25,
            k: 1,
            chain_threshold: 4,
            ..RelaxConfig::default()
        };
        let plan = plan_chain(&chain, &cfg);
        assert_eq!(
            plan,
            vec![
                Piece::Boxed { first: 0, count: 1 },
                Piece::Kept { first: 1, count: 2 },
                Piece::Boxed { first: 3, count: 1 },
            ]
        );
        let (chains, _) = apply_plan(&chain, &plan);
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].segment_count(), 2);
    }
}
