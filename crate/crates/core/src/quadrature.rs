//! Iterated contour integrals `(1/2 pi i) oint w^m f(w) dw` by the trapezoid
//! rule on circles, tensored over several variables.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Starting node count per circle.
    pub nodes: usize,
    /// Largest node count tried per circle.
    pub max_nodes: usize,
    /// Two successive results closer than `tolerance * max(1, |I|)` stop the doubling.
    pub tolerance: f64,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule {
            nodes: 64,
            max_nodes: 1024,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureResult {
    pub value: Vec<C64>,
    pub nodes: usize,
    pub converged: bool,
    /// Difference between the last two node counts.
    pub change: f64,
}

/// One contour variable: the power `m` of `w^m` and the circle radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub m: i64,
    pub radius: f64,
}

fn sup(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Trapezoid sums with `n` and `n/2` nodes per circle from one pass over the
/// finer grid.
fn grid_sums<F>(circles: &[Circle], n: usize, f: &F) -> Result<(Vec<C64>, Vec<C64>)>
where
    F: Fn(&[C64]) -> Result<Vec<C64>> + Sync,
{
    let d = circles.len();
    let total = n.checked_pow(d as u32).ok_or_else(|| Error::InvalidPolicy("quadrature grid too large".into()))?;
    let nodes: Vec<Vec<(C64, C64)>> = circles
        .iter()
        .map(|c| {
            (0..n)
                .map(|j| {
                    let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                    let w = C64::from_polar(c.radius, theta);
                    // (1/2 pi i) w^m dw = w^{m+1} dtheta / 2 pi
                    (w, w.powi((c.m + 1) as i32) / n as f64)
                })
                .collect()
        })
        .collect();
    // fixed chunks summed in order keep the result independent of scheduling
    let chunk = n;
    let parts: Vec<Result<(Vec<C64>, Vec<C64>)>> = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut fine_sum: Vec<C64> = Vec::new();
            let mut coarse_sum: Vec<C64> = Vec::new();
            let scale = (2.0f64).powi(d as i32);
            for flat in c * chunk..((c + 1) * chunk).min(total) {
                let mut idx = flat;
                let mut point = Vec::with_capacity(d);
                let mut weight = C64::new(1.0, 0.0);
                let mut coarse = true;
                for dim in nodes.iter() {
                    let j = idx % n;
                    idx /= n;
                    point.push(dim[j].0);
                    weight *= dim[j].1;
                    coarse &= j % 2 == 0;
                }
                let value = f(&point)?;
                let fine: Vec<C64> = value.iter().map(|v| v * weight).collect();
                if coarse {
                    let half: Vec<C64> = fine.iter().map(|v| v * scale).collect();
                    accumulate(&mut coarse_sum, &half);
                }
                accumulate(&mut fine_sum, &fine);
            }
            Ok((fine_sum, coarse_sum))
        })
        .collect();
    let mut fine_sum: Vec<C64> = Vec::new();
    let mut coarse_sum: Vec<C64> = Vec::new();
    for part in parts {
        let (fine, half) = part?;
        accumulate(&mut fine_sum, &fine);
        accumulate(&mut coarse_sum, &half);
    }
    Ok((fine_sum, coarse_sum))
}

fn accumulate(acc: &mut Vec<C64>, x: &[C64]) {
    if acc.len() < x.len() {
        acc.resize(x.len(), C64::new(0.0, 0.0));
    }
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// `prod_i (1/2 pi i) oint_{|w_i| = radius_i} w_i^{m_i} dw_i  f(w)`, vector valued.
/// Doubles the node count until two successive results agree.
pub fn contour_integral<F>(circles: &[Circle], rule: &QuadratureRule, f: F) -> Result<QuadratureResult>
where
    F: Fn(&[C64]) -> Result<Vec<C64>> + Sync,
{
    if rule.nodes < 2 || rule.max_nodes < rule.nodes || !(rule.tolerance > 0.0) {
        return Err(Error::InvalidPolicy(format!("{rule:?}")));
    }
    for c in circles {
        if !(c.radius > 0.0) || !c.radius.is_finite() {
            return Err(Error::InvalidPolicy(format!("contour radius {}", c.radius)));
        }
    }
    if circles.is_empty() {
        return Ok(QuadratureResult {
            value: f(&[])?,
            nodes: 0,
            converged: true,
            change: 0.0,
        });
    }
    let mut n = rule.nodes * 2;
    loop {
        let (fine, coarse) = grid_sums(circles, n, &f)?;
        let diff: Vec<C64> = fine
            .iter()
            .enumerate()
            .map(|(i, a)| a - coarse.get(i).copied().unwrap_or_default())
            .collect();
        let change = sup(&diff);
        let converged = change <= rule.tolerance * sup(&fine).max(1.0);
        if converged || n >= rule.max_nodes {
            return Ok(QuadratureResult {
                value: fine,
                nodes: n,
                converged,
                change,
            });
        }
        n *= 2;
    }
}

/// Scalar convenience wrapper.
pub fn contour_integral_scalar<F>(circles: &[Circle], rule: &QuadratureRule, f: F) -> Result<(C64, QuadratureResult)>
where
    F: Fn(&[C64]) -> Result<C64> + Sync,
{
    let r = contour_integral(circles, rule, |w| Ok(vec![f(w)?]))?;
    let v = r.value.first().copied().unwrap_or_default();
    Ok((v, r))
}
