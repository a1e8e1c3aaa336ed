//! Finite witnesses of absolute convergence: partial-sum increments with a
//! fitted geometric tail.

use serde::{Deserialize, Serialize};

use crate::graded::TruncationPolicy;
use crate::scalar::C64;

/// Increments below this modulus count as exact zeros.
const ZERO_INCREMENT: f64 = 1e-300;

/// Ratio at or above which a run is never accepted.
pub const ACCEPT_RATIO: f64 = 0.95;

#[derive(Clone, Debug, PartialEq)]
pub struct TailReport {
    pub value: C64,
    pub last_terms: Vec<C64>,
    pub fitted_ratio: f64,
    pub bound_estimate: f64,
    pub accepted: bool,
    pub policy: TruncationPolicy,
}

/// JSON record `{value:[re,im], ratio, bound, accepted, policy:{N,tol}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRecord {
    pub value: [f64; 2],
    pub ratio: f64,
    pub bound: f64,
    pub accepted: bool,
    pub policy: PolicyRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PolicyRecord {
    pub N: u32,
    pub tol: f64,
}

impl TailReport {
    /// Sums the increments in order and fits `|inc_n| ~ C rho^n` by least
    /// squares on `log|inc_n|` over the last `tail_window` nonzero increments.
    pub fn from_increments(increments: &[C64], policy: &TruncationPolicy) -> Self {
        let value: C64 = increments.iter().fold(C64::new(0.0, 0.0), |a, b| a + b);
        let window = policy.tail_window.max(2);
        let tail_start = increments.len().saturating_sub(window);
        let last_terms = increments[tail_start..].to_vec();

        let nonzero: Vec<(f64, f64)> = increments
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > ZERO_INCREMENT)
            .map(|(n, c)| (n as f64, c.norm().ln()))
            .collect();
        let trailing_zero = last_terms.iter().all(|c| c.norm() <= ZERO_INCREMENT);

        let (ratio, bound) = if nonzero.is_empty() || trailing_zero {
            (0.0, 0.0)
        } else if nonzero.len() == 1 {
            (1.0, f64::INFINITY)
        } else {
            let pts = &nonzero[nonzero.len().saturating_sub(window)..];
            let slope = fit_slope(pts);
            let ratio = slope.exp();
            let last = increments.last().map(|c| c.norm()).unwrap_or(0.0);
            let last = if last > ZERO_INCREMENT { last } else { pts.last().map(|p| p.1.exp()).unwrap_or(0.0) };
            let bound = if ratio < 1.0 {
                last * ratio / (1.0 - ratio)
            } else {
                f64::INFINITY
            };
            (ratio, bound)
        };
        let accepted = ratio <= ACCEPT_RATIO && bound <= policy.tolerance * value.norm().max(f64::MIN_POSITIVE);
        let accepted = accepted || (ratio == 0.0 && bound == 0.0);
        TailReport {
            value,
            last_terms,
            fitted_ratio: ratio,
            bound_estimate: bound,
            accepted,
            policy: policy.clone(),
        }
    }

    /// A finite sum with nothing left over.
    pub fn exact(value: C64, policy: &TruncationPolicy) -> Self {
        TailReport {
            value,
            last_terms: Vec::new(),
            fitted_ratio: 0.0,
            bound_estimate: 0.0,
            accepted: true,
            policy: policy.clone(),
        }
    }

    pub fn record(&self) -> TailRecord {
        TailRecord {
            value: [self.value.re, self.value.im],
            ratio: self.fitted_ratio,
            bound: self.bound_estimate,
            accepted: self.accepted,
            policy: PolicyRecord {
                N: self.policy.max_weight,
                tol: self.policy.tolerance,
            },
        }
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
