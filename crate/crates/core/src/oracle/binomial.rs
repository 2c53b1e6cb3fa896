//! Exact binomial tail sums and Clopper-Pearson confidence intervals.
//!
//! Tails are summed directly in f64, starting from the boundary term
//! (computed in log space) and stepping with the term ratio. Sums always
//! start in the tail away from the mode, so terms decay and the small side
//! is summed when it is the cheaper one. The interval endpoints are the
//! roots of the tail equations, found by bisection:
//!
//!   lower: P[X >= s | p] = (1 - confidence) / 2
//!   upper: P[X <= s | p] = (1 - confidence) / 2

use crate::error::{Error, Result};

const BISECT_TOL: f64 = 1e-13;
// Terms below this fraction of the accumulated sum cannot move f64 output.
const TERM_CUTOFF: f64 = 1e-18;

fn ln_choose(n: u64, s: u64) -> f64 {
    let m = s.min(n - s);
    (1..=m)
        .map(|i| (((n - m + i) as f64) / (i as f64)).ln())
        .sum()
}

/// Sums P[X = k] for k from `s` upward while terms matter.
fn sum_upward(n: u64, s: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    let ln_start = ln_choose(n, s) + (s as f64) * p.ln() + ((n - s) as f64) * q.ln();
    let mut term = ln_start.exp();
    let mut sum = 0.0;
    let ratio = p / q;
    let mut k = s;
    loop {
        sum += term;
        if k == n || term < sum * TERM_CUTOFF {
            break;
        }
        term *= ((n - k) as f64) / ((k + 1) as f64) * ratio;
        k += 1;
    }
    sum
}

/// Sums P[X = k] for k from `s` downward while terms matter.
fn sum_downward(n: u64, s: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    let ln_start = ln_choose(n, s) + (s as f64) * p.ln() + ((n - s) as f64) * q.ln();
    let mut term = ln_start.exp();
    let mut sum = 0.0;
    let ratio = q / p;
    let mut k = s;
    loop {
        sum += term;
        if k == 0 || term < sum * TERM_CUTOFF {
            break;
        }
        term *= (k as f64) / ((n - k + 1) as f64) * ratio;
        k -= 1;
    }
    sum
}

/// P[X >= s] for X ~ Binomial(n, p).
pub fn binomial_tail_at_least(n: u64, s: u64, p: f64) -> f64 {
    if s == 0 {
        return 1.0;
    }
    if s > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    if (s as f64) >= (n as f64) * p {
        sum_upward(n, s, p)
    } else {
        1.0 - sum_downward(n, s - 1, p)
    }
}

/// P[X <= s] for X ~ Binomial(n, p).
pub fn binomial_tail_at_most(n: u64, s: u64, p: f64) -> f64 {
    if s >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    if (s as f64) <= (n as f64) * p {
        sum_downward(n, s, p)
    } else {
        1.0 - sum_upward(n, s + 1, p)
    }
}

/// Bisects for the root of `f` on `[lo, hi]`, where `f(lo)` and `f(hi)`
/// have opposite signs.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let rising = f(lo) < 0.0;
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        let positive = f(mid) > 0.0;
        if positive == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact two-sided Clopper-Pearson interval for `s` successes out of `n`
/// trials at the given confidence level.
pub fn clopper_pearson(n: u64, s: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("no trials".into()));
    }
    if s > n {
        return Err(Error::InvalidArgument(format!(
            "{s} successes out of {n} trials"
        )));
    }
    if !(0.0..1.0).contains(&confidence) || confidence <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "confidence {confidence} must lie in (0, 1)"
        )));
    }
    let half_tail = 0.5 * (1.0 - confidence);
    let lower = if s == 0 {
        0.0
    } else {
        bisect(0.0, 1.0, |p| binomial_tail_at_least(n, s, p) - half_tail)
    };
    let upper = if s == n {
        1.0
    } else {
        bisect(0.0, 1.0, |p| half_tail - binomial_tail_at_most(n, s, p))
    };
    Ok((lower, upper))
}
