//! Retry schedules for region-budget failures.
//!
//! When propagation aborts because a layer produced more regions than the
//! budget allows, the schedule coarsens the relaxation and tries again:
//! boxing a larger fraction of each chain (higher `p`) across smaller
//! groups (lower `k`). One timeout clock spans all attempts.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::certify::{BoundMethod, ProbBound, RunStatus};
use crate::domain::RelaxConfig;
use crate::error::{Error, Result};

/// How aggressively to coarsen after a budget failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Gentle: `p <- min(1.5 p, 1)`.
    A,
    /// Aggressive: `p <- min(3 p, 1)`.
    B,
}

impl Schedule {
    fn growth(self) -> f64 {
        match self {
            Schedule::A => 1.5,
            Schedule::B => 3.0,
        }
    }

    /// Next configuration after a budget failure. Both schedules also
    /// shrink the grouping bound: `k <- max(ceil(0.95 k), 5)`.
    pub fn next(self, cfg: &RelaxConfig) -> RelaxConfig {
        let mut out = cfg.clone();
        out.p = (cfg.p * self.growth()).min(1.0);
        out.k = ((cfg.k as f64 * 0.95).ceil() as usize).max(5);
        out
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::A => "a",
            Schedule::B => "b",
        })
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Schedule> {
        match s {
            "a" | "A" => Ok(Schedule::A),
            "b" | "B" => Ok(Schedule::B),
            other => Err(Error::InvalidArgument(format!(
                "unknown schedule '{other}'; expected a or b"
            ))),
        }
    }
}

/// Outcome of a scheduled run: the final bound plus every configuration
/// that was attempted, in order.
#[derive(Debug, Clone)]
pub struct ScheduleRun {
    pub bound: ProbBound,
    pub attempts: Vec<RelaxConfig>,
}

/// Runs `job` under `cfg`, coarsening via `schedule` on every budget
/// failure. The deadline covers the whole sequence; once it passes, the
/// result is the vacuous `[0, 1]` bound marked as a timeout. Errors other
/// than budget failures abort immediately.
pub fn refine_with_schedule<F>(
    mut job: F,
    schedule: Schedule,
    cfg: &RelaxConfig,
    timeout: Duration,
    method: BoundMethod,
) -> Result<ScheduleRun>
where
    F: FnMut(&RelaxConfig) -> Result<ProbBound>,
{
    let start = Instant::now();
    let mut cfg = cfg.clone();
    let mut attempts = Vec::new();
    loop {
        if start.elapsed() >= timeout {
            return Ok(ScheduleRun {
                bound: ProbBound::vacuous(method, RunStatus::Timeout, start.elapsed()),
                attempts,
            });
        }
        attempts.push(cfg.clone());
        match job(&cfg) {
            Ok(mut bound) => {
                bound.runtime = start.elapsed();
                return Ok(ScheduleRun { bound, attempts });
            }
            Err(Error::BudgetExceeded { .. }) => {
                cfg = schedule.next(&cfg);
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: f64, k: usize) -> RelaxConfig {
        RelaxConfig {
            p,
            k,
            ..RelaxConfig::default()
        }
    }

    fn budget_err() -> Error {
        Error::BudgetExceeded {
            layer: 0,
            regions: 10,
            budget: 5,
        }
    }

    #[test]
    fn gentle_schedule_sequence() {
        let expected_p = [0.15, 0.225, 0.3375, 0.50625, 0.759375, 1.0];
        let expected_k = [95, 91, 87, 83, 79, 76];
        let mut c = cfg(0.1, 100);
        for (p, k) in expected_p.iter().zip(expected_k) {
            c = Schedule::A.next(&c);
            assert!((c.p - p).abs() < 1e-12, "p = {}, want {p}", c.p);
            assert_eq!(c.k, k);
        }
    }

    #[test]
    fn aggressive_schedule_sequence() {
        let expected_p = [0.3, 0.9, 1.0, 1.0];
        let expected_k = [95, 91, 87, 83];
        let mut c = cfg(0.1, 100);
        for (p, k) in expected_p.iter().zip(expected_k) {
            c = Schedule::B.next(&c);
            assert!((c.p - p).abs() < 1e-12, "p = {}, want {p}", c.p);
            assert_eq!(c.k, k);
        }
    }

    #[test]
    fn k_never_drops_below_five() {
        let c = Schedule::A.next(&cfg(1.0, 5));
        assert_eq!(c.k, 5);
        let c = Schedule::B.next(&cfg(1.0, 1));
        assert_eq!(c.k, 5);
    }

    #[test]
    fn first_success_returns_directly() {
        let run = refine_with_schedule(
            |rc| {
                assert_eq!(rc.p, 0.1);
                Ok(ProbBound {
                    lower: 0.4,
                    upper: 0.6,
                    method: BoundMethod::ExactMass,
                    region_count: 3,
                    runtime: Duration::ZERO,
                    status: RunStatus::Ok,
                })
            },
            Schedule::A,
            &cfg(0.1, 100),
            Duration::from_secs(60),
            BoundMethod::ExactMass,
        )
        .unwrap();
        assert_eq!(run.attempts.len(), 1);
        assert_eq!((run.bound.lower, run.bound.upper), (0.4, 0.6));
        assert_eq!(run.bound.status, RunStatus::Ok);
    }

    #[test]
    fn budget_failures_walk_the_schedule() {
        let mut calls = Vec::new();
        let run = refine_with_schedule(
            |rc| {
                calls.push((rc.p, rc.k));
                if calls.len() < 3 {
                    Err(budget_err())
                } else {
                    Ok(ProbBound {
                        lower: 0.0,
                        upper: 0.5,
                        method: BoundMethod::CoarseIndicator,
                        region_count: 2,
                        runtime: Duration::ZERO,
                        status: RunStatus::Ok,
                    })
                }
            },
            Schedule::B,
            &cfg(0.1, 100),
            Duration::from_secs(60),
            BoundMethod::CoarseIndicator,
        )
        .unwrap();
        assert_eq!(
            calls,
            vec![(0.1, 100), (0.30000000000000004, 95), (0.9000000000000001, 91)]
        );
        assert_eq!(run.attempts.len(), 3);
        assert_eq!(run.bound.status, RunStatus::Ok);
    }

    #[test]
    fn zero_timeout_yields_vacuous_bound_without_calling_job() {
        let run = refine_with_schedule(
            |_| panic!("job must not run"),
            Schedule::A,
            &cfg(0.1, 100),
            Duration::ZERO,
            BoundMethod::ExactMass,
        )
        .unwrap();
        assert!(run.attempts.is_empty());
        assert_eq!((run.bound.lower, run.bound.upper), (0.0, 1.0));
        assert_eq!(run.bound.status, RunStatus::Timeout);
    }

    #[test]
    fn persistent_budget_failure_times_out() {
        let run = refine_with_schedule(
            |_| -> Result<ProbBound> { Err(budget_err()) },
            Schedule::B,
            &cfg(0.1, 100),
            Duration::from_millis(20),
            BoundMethod::ExactMass,
        )
        .unwrap();
        assert_eq!(run.bound.status, RunStatus::Timeout);
        assert_eq!((run.bound.lower, run.bound.upper), (0.0, 1.0));
        assert!(!run.attempts.is_empty());
    }

    #[test]
    fn other_errors_abort() {
        let err = refine_with_schedule(
            |_| -> Result<ProbBound> { Err(Error::InvalidArgument("boom".into())) },
            Schedule::A,
            &cfg(0.1, 100),
            Duration::from_secs(60),
            BoundMethod::ExactMass,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }
}
