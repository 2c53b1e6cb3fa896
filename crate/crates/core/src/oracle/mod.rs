//! Statistical and exhaustive estimators used to cross-check certified
//! bounds. These know nothing about abstract states; they run the concrete
//! network on concrete points.

mod binomial;

pub use binomial::{binomial_tail_at_least, binomial_tail_at_most, clopper_pearson};

use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::certify::OutputProperty;
use crate::domain::Chain;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::tensor::Tensor;

/// Distribution over network inputs: uniform on a segment, or over a
/// weighted chain by cumulative weight.
#[derive(Debug, Clone)]
pub enum InputLine {
    Segment { a: Tensor, b: Tensor },
    Chain(Chain),
}

impl InputLine {
    pub fn segment(a: Tensor, b: Tensor) -> InputLine {
        InputLine::Segment { a, b }
    }

    /// Point at mass coordinate `alpha` in `[0, 1]`.
    pub fn point(&self, alpha: f64) -> Result<Tensor> {
        match self {
            InputLine::Segment { a, b } => Tensor::lerp(a, b, alpha),
            InputLine::Chain(chain) => Ok(chain.point_at_mass(alpha)),
        }
    }
}

/// Two-phase estimate with its exact confidence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingReport {
    pub samples: u64,
    pub successes: u64,
    pub confidence: f64,
    pub target_width: f64,
    pub lower: f64,
    pub upper: f64,
}

impl SamplingReport {
    pub fn estimate(&self) -> f64 {
        self.successes as f64 / self.samples as f64
    }
}

#[derive(Debug, Clone)]
pub struct SampleSettings {
    pub confidence: f64,
    pub target_width: f64,
    pub seed: u64,
    pub max_duration: Option<Duration>,
}

impl Default for SampleSettings {
    fn default() -> SampleSettings {
        SampleSettings {
            confidence: 0.9999,
            target_width: 0.002,
            seed: 0,
            max_duration: None,
        }
    }
}

/// Estimates the probability that a uniform point on the line satisfies
/// the property, in two phases: a pilot run doubles the sample count from
/// 64 until the Clopper-Pearson interval is narrower than the target, then
/// the pilot data is discarded and that many fresh samples produce the
/// reported interval. All draws come from one seeded stream, so results
/// are reproducible.
pub fn sample_probability(
    line: &InputLine,
    net: &Network,
    prop: &OutputProperty,
    settings: &SampleSettings,
) -> Result<SamplingReport> {
    if settings.target_width <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "target width {} must be positive",
            settings.target_width
        )));
    }
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(settings.seed);
    let check = |alpha: f64| -> Result<bool> {
        let out = net.forward(&line.point(alpha)?)?;
        prop.satisfied_at(&out)
    };

    let mut n: u64 = 64;
    let mut successes: u64 = 0;
    let mut drawn: u64 = 0;
    loop {
        while drawn < n {
            if check(rng.gen::<f64>())? {
                successes += 1;
            }
            drawn += 1;
        }
        let (lo, hi) = clopper_pearson(n, successes, settings.confidence)?;
        if hi - lo < settings.target_width {
            break;
        }
        if let Some(limit) = settings.max_duration {
            if start.elapsed() >= limit {
                return Err(Error::Timeout(limit.as_secs_f64()));
            }
        }
        n *= 2;
    }

    let mut fresh_successes: u64 = 0;
    for _ in 0..n {
        if check(rng.gen::<f64>())? {
            fresh_successes += 1;
        }
    }
    let (lower, upper) = clopper_pearson(n, fresh_successes, settings.confidence)?;
    Ok(SamplingReport {
        samples: n,
        successes: fresh_successes,
        confidence: settings.confidence,
        target_width: settings.target_width,
        lower,
        upper,
    })
}

/// Deterministic sweep over cell midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub resolution: usize,
    pub satisfied: usize,
    /// Adjacent midpoint pairs with differing outcomes. Each hides at most
    /// one cell of quantization error in `fraction`.
    pub boundary_cells: usize,
}

impl GridReport {
    pub fn fraction(&self) -> f64 {
        self.satisfied as f64 / self.resolution as f64
    }

    /// Sound allowance when comparing the midpoint fraction against exact
    /// mass: each sign change plus the two ends can misattribute a cell.
    pub fn tolerance(&self) -> f64 {
        (self.boundary_cells + 2) as f64 / self.resolution as f64 + 1e-9
    }
}

/// Evaluates the property at the midpoints `(i + 0.5) / resolution`.
pub fn grid_probability(
    line: &InputLine,
    net: &Network,
    prop: &OutputProperty,
    resolution: usize,
) -> Result<GridReport> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("grid resolution must be positive".into()));
    }
    let mut satisfied = 0;
    let mut boundary_cells = 0;
    let mut prev: Option<bool> = None;
    for i in 0..resolution {
        let alpha = (i as f64 + 0.5) / resolution as f64;
        let ok = prop.satisfied_at(&net.forward(&line.point(alpha)?)?)?;
        if ok {
            satisfied += 1;
        }
        if prev == Some(!ok) {
            boundary_cells += 1;
        }
        prev = Some(ok);
    }
    Ok(GridReport {
        resolution,
        satisfied,
        boundary_cells,
    })
}
