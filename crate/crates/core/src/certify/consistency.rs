//! Attribute consistency of a generative model under latent interpolation.
//!
//! Given two latent points, the question is how much of the line between
//! them decodes to images on which an attribute detector agrees with the
//! detector's call at the first endpoint. The detector score's sign at the
//! decoded first endpoint fixes the target (zero counts as negative), and
//! the interpolation segment runs through decoder and detector composed.

use std::time::{Duration, Instant};

use crate::certify::{
    prob_bounds, refine_with_schedule, BoundMethod, OutputProperty, ProbBound, RunStatus, Schedule,
};
use crate::domain::{propagate_network, AbstractState, Mode, RelaxConfig};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::tensor::Tensor;

/// Settings for consistency certification.
#[derive(Debug, Clone)]
pub struct CertifyConfig {
    pub relax: RelaxConfig,
    pub method: BoundMethod,
    /// Retry schedule for budget failures. Without one, a budget failure
    /// yields the vacuous `[0, 1]` bound.
    pub schedule: Option<Schedule>,
    pub timeout: Duration,
}

impl Default for CertifyConfig {
    fn default() -> CertifyConfig {
        CertifyConfig {
            relax: RelaxConfig::default(),
            method: BoundMethod::ExactMass,
            schedule: None,
            timeout: Duration::from_secs(60),
        }
    }
}

/// Bounds the probability that a uniformly random point on the latent
/// segment `e1`-`e2` decodes to an image the detector assigns the same
/// attribute sign as at `e1`. Attribute scores are the detector's outputs;
/// `attr` picks one.
pub fn attribute_consistency(
    e1: &Tensor,
    e2: &Tensor,
    decoder: &Network,
    detector: &Network,
    attr: usize,
    cfg: &CertifyConfig,
) -> Result<ProbBound> {
    let scores = detector.forward(&decoder.forward(e1)?)?;
    let n = scores.len();
    if attr >= n {
        return Err(Error::Property(format!(
            "attribute {attr} out of range for {n} detector outputs"
        )));
    }
    let sign: i8 = if scores.data()[attr] > 0.0 { 1 } else { -1 };
    let prop = OutputProperty::SignIs { index: attr, sign };
    let composed = decoder.compose(detector)?;
    let job = |rc: &RelaxConfig| -> Result<ProbBound> {
        let input = AbstractState::segment(e1.clone(), e2.clone(), Mode::Probabilistic)?;
        let out = propagate_network(&input, &composed, rc)?;
        prob_bounds(&out, &prop, cfg.method)
    };
    run_job(job, cfg)
}

pub(crate) fn run_job<F>(mut job: F, cfg: &CertifyConfig) -> Result<ProbBound>
where
    F: FnMut(&RelaxConfig) -> Result<ProbBound>,
{
    match cfg.schedule {
        Some(schedule) => {
            refine_with_schedule(job, schedule, &cfg.relax, cfg.timeout, cfg.method)
                .map(|run| run.bound)
        }
        None => {
            let start = Instant::now();
            match job(&cfg.relax) {
                Ok(bound) => Ok(bound),
                Err(Error::BudgetExceeded { .. }) => Ok(ProbBound::vacuous(
                    cfg.method,
                    RunStatus::BudgetExceeded,
                    start.elapsed(),
                )),
                Err(e) => Err(e),
            }
        }
    }
}

/// Mean consistency bounds over every latent pair and attribute. Pairs
/// whose run fails on budget or timeout contribute the vacuous `[0, 1]`.
pub fn average_consistency(
    pairs: &[(Tensor, Tensor)],
    attrs: &[usize],
    decoder: &Network,
    detector: &Network,
    cfg: &CertifyConfig,
) -> Result<ProbBound> {
    if pairs.is_empty() || attrs.is_empty() {
        return Err(Error::InvalidArgument(
            "average consistency needs at least one pair and one attribute".into(),
        ));
    }
    let start = Instant::now();
    let mut lower_sum = 0.0;
    let mut upper_sum = 0.0;
    let mut regions = 0;
    let mut status = RunStatus::Ok;
    for (e1, e2) in pairs {
        for &attr in attrs {
            let b = attribute_consistency(e1, e2, decoder, detector, attr, cfg)?;
            lower_sum += b.lower;
            upper_sum += b.upper;
            regions = regions.max(b.region_count);
            if b.status != RunStatus::Ok && status == RunStatus::Ok {
                status = b.status;
            }
        }
    }
    let count = (pairs.len() * attrs.len()) as f64;
    Ok(ProbBound {
        lower: lower_sum / count,
        upper: upper_sum / count,
        method: cfg.method,
        region_count: regions,
        runtime: start.elapsed(),
        status,
    })
}
