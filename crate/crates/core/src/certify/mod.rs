//! Properties over network outputs and sound certification of abstract
//! states against them.
//!
//! Every property is a conjunction of strict linear inequalities
//! `c . y + d > 0`. A point on the boundary does not satisfy the property.
//! On segments the inequalities are affine in the line parameter, so
//! endpoint tests are exact for "all points" questions and crossing splits
//! locate the satisfying mass exactly. On boxes the extreme corners of each
//! inequality give sound worst/best cases.

mod consistency;
mod schedule;

pub use consistency::{attribute_consistency, average_consistency, CertifyConfig};
pub use schedule::{refine_with_schedule, Schedule, ScheduleRun};

use std::fmt;
use std::time::{Duration, Instant};

use serde::Deserialize;

use crate::domain::{AbstractState, BoxRegion, Mode, Region, Segment, ALPHA_TOL};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::tensor::{IntervalTensor, Tensor};

/// Strict linear inequality `c . y + d > 0`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Conjunct {
    pub c: Tensor,
    pub d: f64,
}

/// Property of the network output.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputProperty {
    /// Output `t` is strictly larger than every other output.
    ArgmaxIs(usize),
    /// Output `index` has the given strict sign (`+1`: > 0, `-1`: < 0).
    SignIs { index: usize, sign: i8 },
    /// Explicit conjunction of inequalities.
    LinearAnd(Vec<Conjunct>),
}

impl OutputProperty {
    /// Parses the command-line syntax: `argmax:<t>`, `sign:<i>:<+|->`, or
    /// `linear:<file>` where the file holds a JSON list of `{c, d}`.
    pub fn parse_spec(spec: &str) -> Result<OutputProperty> {
        let bad = |msg: String| Error::Property(msg);
        let mut parts = spec.splitn(2, ':');
        let head = parts.next().unwrap_or_default();
        let rest = parts.next().ok_or_else(|| {
            bad(format!("'{spec}' has no argument; expected argmax:<t>, sign:<i>:<+|->, or linear:<file>"))
        })?;
        match head {
            "argmax" => {
                let t = rest
                    .parse::<usize>()
                    .map_err(|_| bad(format!("argmax index '{rest}' is not a number")))?;
                Ok(OutputProperty::ArgmaxIs(t))
            }
            "sign" => {
                let (idx, sgn) = rest
                    .split_once(':')
                    .ok_or_else(|| bad(format!("sign property '{spec}' needs sign:<i>:<+|->")))?;
                let index = idx
                    .parse::<usize>()
                    .map_err(|_| bad(format!("sign index '{idx}' is not a number")))?;
                let sign = match sgn {
                    "+" => 1,
                    "-" => -1,
                    other => return Err(bad(format!("sign must be + or -, got '{other}'"))),
                };
                Ok(OutputProperty::SignIs { index, sign })
            }
            "linear" => {
                let text = std::fs::read_to_string(rest)?;
                let conjuncts: Vec<Conjunct> = serde_json::from_str(&text)?;
                if conjuncts.is_empty() {
                    return Err(bad(format!("'{rest}' holds no conjuncts")));
                }
                Ok(OutputProperty::LinearAnd(conjuncts))
            }
            other => Err(bad(format!(
                "unknown property kind '{other}'; expected argmax, sign, or linear"
            ))),
        }
    }

    /// Lowers the property to explicit conjuncts over outputs of `shape`.
    pub fn conjuncts(&self, shape: &[usize]) -> Result<Vec<Conjunct>> {
        let n: usize = shape.iter().product();
        let unit = |i: usize, v: f64| -> Tensor {
            let mut d = vec![0.0; n];
            d[i] = v;
            Tensor::new(shape.to_vec(), d).expect("unit vector is finite")
        };
        match self {
            OutputProperty::ArgmaxIs(t) => {
                if *t >= n {
                    return Err(Error::Property(format!(
                        "argmax index {t} out of range for {n} outputs"
                    )));
                }
                Ok((0..n)
                    .filter(|j| j != t)
                    .map(|j| {
                        let mut c = unit(*t, 1.0);
                        c = Tensor::sub(&c, &unit(j, 1.0)).expect("same shape");
                        Conjunct { c, d: 0.0 }
                    })
                    .collect())
            }
            OutputProperty::SignIs { index, sign } => {
                if *index >= n {
                    return Err(Error::Property(format!(
                        "sign index {index} out of range for {n} outputs"
                    )));
                }
                Ok(vec![Conjunct {
                    c: unit(*index, f64::from(*sign)),
                    d: 0.0,
                }])
            }
            OutputProperty::LinearAnd(cs) => {
                for (i, conj) in cs.iter().enumerate() {
                    if conj.c.shape() != shape {
                        return Err(Error::shape(
                            format!("conjunct {i}"),
                            shape,
                            conj.c.shape(),
                        ));
                    }
                }
                Ok(cs.clone())
            }
        }
    }

    /// Strict satisfaction at a concrete output point.
    pub fn satisfied_at(&self, y: &Tensor) -> Result<bool> {
        let conjuncts = self.conjuncts(y.shape())?;
        Ok(conjuncts
            .iter()
            .all(|conj| Tensor::dot(&conj.c, y).expect("shape checked") + conj.d > 0.0))
    }
}

impl fmt::Display for OutputProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputProperty::ArgmaxIs(t) => write!(f, "argmax:{t}"),
            OutputProperty::SignIs { index, sign } => {
                write!(f, "sign:{index}:{}", if *sign >= 0 { "+" } else { "-" })
            }
            OutputProperty::LinearAnd(cs) => write!(f, "linear({} conjuncts)", cs.len()),
        }
    }
}

/// How probability bounds are computed from a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    /// Segments contribute their exactly located satisfying mass.
    ExactMass,
    /// Segments count all-or-nothing, like boxes.
    CoarseIndicator,
    /// Single interval box through the network.
    Interval,
}

impl fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundMethod::ExactMass => "exact-mass",
            BoundMethod::CoarseIndicator => "coarse-indicator",
            BoundMethod::Interval => "interval",
        })
    }
}

/// Outcome marker for a bound computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Timeout,
    BudgetExceeded,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Ok => "ok",
            RunStatus::Timeout => "timeout",
            RunStatus::BudgetExceeded => "budget",
        })
    }
}

/// Sound bounds on the probability that the output satisfies a property.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbBound {
    pub lower: f64,
    pub upper: f64,
    pub method: BoundMethod,
    pub region_count: usize,
    pub runtime: Duration,
    pub status: RunStatus,
}

impl ProbBound {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Vacuous `[0, 1]` bound used for budget and timeout failures.
    pub(crate) fn vacuous(method: BoundMethod, status: RunStatus, runtime: Duration) -> ProbBound {
        ProbBound {
            lower: 0.0,
            upper: 1.0,
            method,
            region_count: 0,
            runtime,
            status,
        }
    }
}

/// Result of a deterministic certification query.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Verified,
    Unknown(Witness),
}

/// Region that blocked verification, with a concrete offending point.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub region: Region,
    pub point: Tensor,
    pub conjunct: usize,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.region {
            Region::Segment(s) => write!(
                f,
                "segment {} - {} containing point {}",
                s.a().display_point(),
                s.b().display_point(),
                self.point.display_point()
            ),
            Region::Box(b) => write!(
                f,
                "box {} containing point {}",
                display_box(b.bounds()),
                self.point.display_point()
            ),
        }
    }
}

pub fn display_box(b: &IntervalTensor) -> String {
    let lo = b.lower();
    let hi = b.upper();
    let parts: Vec<String> = lo
        .data()
        .iter()
        .zip(hi.data())
        .map(|(l, u)| format!("[{l}, {u}]"))
        .collect();
    parts.join(" x ")
}

fn segment_conjunct_values(conj: &Conjunct, seg: &Segment) -> (f64, f64) {
    let g0 = Tensor::dot(&conj.c, seg.a()).expect("shape checked") + conj.d;
    let g1 = Tensor::dot(&conj.c, seg.b()).expect("shape checked") + conj.d;
    (g0, g1)
}

/// Range of `c . y + d` over a box: (worst corner, best corner).
fn box_conjunct_range(conj: &Conjunct, bounds: &IntervalTensor) -> (f64, f64) {
    let mid = Tensor::dot(&conj.c, bounds.center()).expect("shape checked") + conj.d;
    let spread: f64 = conj
        .c
        .data()
        .iter()
        .zip(bounds.radius().data())
        .map(|(c, r)| c.abs() * r)
        .sum();
    (mid - spread, mid + spread)
}

/// Corner of the box minimizing `c . y`.
fn worst_corner(conj: &Conjunct, bounds: &IntervalTensor) -> Tensor {
    let data: Vec<f64> = conj
        .c
        .data()
        .iter()
        .zip(bounds.center().data())
        .zip(bounds.radius().data())
        .map(|((&c, &m), &r)| if c >= 0.0 { m - r } else { m + r })
        .collect();
    Tensor::new(bounds.shape().to_vec(), data).expect("corner of a finite box")
}

/// Checks that every point of every region strictly satisfies the property.
/// Region weights play no role here.
pub fn certify_deterministic(state: &AbstractState, prop: &OutputProperty) -> Result<Verdict> {
    let conjuncts = prop.conjuncts(state.shape())?;
    for region in state.regions() {
        match &region {
            Region::Segment(seg) => {
                for (ci, conj) in conjuncts.iter().enumerate() {
                    let (g0, g1) = segment_conjunct_values(conj, seg);
                    // Affine along the segment: endpoint positivity is exact.
                    if g0 <= 0.0 || g1 <= 0.0 {
                        let point = if g0 <= 0.0 { seg.a() } else { seg.b() }.clone();
                        return Ok(Verdict::Unknown(Witness {
                            region,
                            point,
                            conjunct: ci,
                        }));
                    }
                }
            }
            Region::Box(b) => {
                for (ci, conj) in conjuncts.iter().enumerate() {
                    let (worst, _) = box_conjunct_range(conj, b.bounds());
                    if worst <= 0.0 {
                        let point = worst_corner(conj, b.bounds());
                        return Ok(Verdict::Unknown(Witness {
                            region,
                            point,
                            conjunct: ci,
                        }));
                    }
                }
            }
        }
    }
    Ok(Verdict::Verified)
}

/// Satisfying weight fraction of one segment, located exactly by splitting
/// at the conjunct crossings and classifying midpoints.
fn segment_exact_mass(conjuncts: &[Conjunct], seg: &Segment) -> f64 {
    let values: Vec<(f64, f64)> = conjuncts
        .iter()
        .map(|c| segment_conjunct_values(c, seg))
        .collect();
    let mut alphas: Vec<f64> = values
        .iter()
        .filter(|&&(g0, g1)| (g0 < 0.0 && g1 > 0.0) || (g0 > 0.0 && g1 < 0.0))
        .map(|&(g0, g1)| g0 / (g0 - g1))
        .collect();
    alphas.sort_unstable_by(f64::total_cmp);
    let mut cuts = vec![0.0];
    for a in alphas {
        if a <= ALPHA_TOL || a >= 1.0 - ALPHA_TOL {
            continue;
        }
        if a - cuts.last().expect("nonempty") > ALPHA_TOL {
            cuts.push(a);
        }
    }
    cuts.push(1.0);
    let mut fraction = 0.0;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let sat = values
            .iter()
            .all(|&(g0, g1)| g0 + mid * (g1 - g0) > 0.0);
        if sat {
            fraction += w[1] - w[0];
        }
    }
    fraction
}

fn box_membership(conjuncts: &[Conjunct], b: &BoxRegion) -> (bool, bool) {
    let mut inside = true;
    let mut overlaps = true;
    for conj in conjuncts {
        let (worst, best) = box_conjunct_range(conj, b.bounds());
        if worst <= 0.0 {
            inside = false;
        }
        if best <= 0.0 {
            // Some inequality fails on the whole box: provably disjoint.
            overlaps = false;
        }
    }
    (inside, overlaps)
}

/// Sound lower/upper bounds on the probability that the output satisfies
/// the property. Requires a probabilistic state.
pub fn prob_bounds(
    state: &AbstractState,
    prop: &OutputProperty,
    method: BoundMethod,
) -> Result<ProbBound> {
    if state.mode() != Mode::Probabilistic {
        return Err(Error::ProbabilisticRequired);
    }
    if method == BoundMethod::Interval {
        return Err(Error::InvalidArgument(
            "interval bounds come from interval_baseline, not from a state".into(),
        ));
    }
    let start = Instant::now();
    let conjuncts = prop.conjuncts(state.shape())?;
    let mut lower = 0.0;
    let mut upper = 0.0;
    for region in state.regions() {
        match &region {
            Region::Segment(seg) => match method {
                BoundMethod::ExactMass => {
                    let mass = seg.weight() * segment_exact_mass(&conjuncts, seg);
                    lower += mass;
                    upper += mass;
                }
                BoundMethod::CoarseIndicator => {
                    let values: Vec<(f64, f64)> = conjuncts
                        .iter()
                        .map(|c| segment_conjunct_values(c, seg))
                        .collect();
                    if values.iter().all(|&(g0, g1)| g0 > 0.0 && g1 > 0.0) {
                        lower += seg.weight();
                    }
                    // Excluded only when some inequality fails everywhere on
                    // the segment, mirroring the box test.
                    if values.iter().all(|&(g0, g1)| g0.max(g1) > 0.0) {
                        upper += seg.weight();
                    }
                }
                BoundMethod::Interval => unreachable!("rejected above"),
            },
            Region::Box(b) => {
                let (inside, overlaps) = box_membership(&conjuncts, b);
                if inside {
                    lower += b.weight();
                }
                if overlaps {
                    upper += b.weight();
                }
            }
        }
    }
    Ok(ProbBound {
        lower: lower.clamp(0.0, 1.0),
        upper: upper.clamp(0.0, 1.0),
        method,
        region_count: state.region_count(),
        runtime: start.elapsed(),
        status: RunStatus::Ok,
    })
}

/// Pure interval baseline: the bounding box of the two endpoints runs
/// through the network in interval arithmetic. Returns `(1,1)` when the
/// output box certifies the property, `(0,0)` when it refutes it, `(0,1)`
/// otherwise.
pub fn interval_baseline(
    a: &Tensor,
    b: &Tensor,
    net: &Network,
    prop: &OutputProperty,
) -> Result<ProbBound> {
    interval_baseline_from_box(&IntervalTensor::enclosing_points(a, b)?, net, prop)
}

pub fn interval_baseline_from_box(
    input: &IntervalTensor,
    net: &Network,
    prop: &OutputProperty,
) -> Result<ProbBound> {
    let start = Instant::now();
    if input.shape() != net.input_shape() {
        return Err(Error::shape(
            "interval input",
            net.input_shape(),
            input.shape(),
        ));
    }
    let mut cur = input.clone();
    for (i, layer) in net.layers().iter().enumerate() {
        cur = layer.apply_interval(&cur).map_err(|e| Error::Layer {
            layer: i,
            message: e.to_string(),
        })?;
    }
    let conjuncts = prop.conjuncts(net.output_shape())?;
    let mut inside = true;
    let mut overlaps = true;
    for conj in &conjuncts {
        let (worst, best) = box_conjunct_range(conj, &cur);
        if worst <= 0.0 {
            inside = false;
        }
        if best <= 0.0 {
            overlaps = false;
        }
    }
    let (lower, upper) = if inside {
        (1.0, 1.0)
    } else if !overlaps {
        (0.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    Ok(ProbBound {
        lower,
        upper,
        method: BoundMethod::Interval,
        region_count: 1,
        runtime: start.elapsed(),
        status: RunStatus::Ok,
    })
}
