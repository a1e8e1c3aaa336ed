//! Sampled seminorms `max_{K_n} |f|` on the configuration space
//! `M^k = {z_i != 0, z_i != z_j}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlator::RationalCorrelator;
use crate::scalar::C64;

pub const SHELLS: usize = 8;
pub const PHASES: usize = 64;
pub const INTERIOR_POINTS: usize = 1024;
/// Picks from the shell-phase tensor grid once `k >= 2`.
pub const TENSOR_PICKS: usize = 4096;

/// Which exhaustion: all of `M^k`, or the part inside the unit disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Region {
    Full,
    UnitDisk,
}

/// `K_n = {1/(n+1) <= |z_i| <= n+1, |z_i - z_j| >= 1/(n+1)}`; the unit-disk
/// variant `J_n` also asks `|z_i| <= 1 - 1/(n+2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompactExhaustion {
    pub n: u32,
    pub k: usize,
    pub region: Region,
}

impl CompactExhaustion {
    pub fn new(n: u32, k: usize) -> Self {
        CompactExhaustion {
            n: n.max(1),
            k,
            region: Region::Full,
        }
    }

    pub fn unit_disk(n: u32, k: usize) -> Self {
        CompactExhaustion {
            region: Region::UnitDisk,
            ..Self::new(n, k)
        }
    }

    fn radii(&self) -> (f64, f64) {
        let n = self.n as f64;
        let lo = 1.0 / (n + 1.0);
        match self.region {
            Region::Full => (lo, n + 1.0),
            Region::UnitDisk => (lo, 1.0 - 1.0 / (n + 2.0)),
        }
    }

    pub fn contains(&self, z: &[C64]) -> bool {
        if z.len() != self.k {
            return false;
        }
        let (lo, hi) = self.radii();
        let sep = 1.0 / (self.n as f64 + 1.0);
        let eps = 1e-12;
        z.iter().all(|w| w.norm() >= lo - eps && w.norm() <= hi + eps)
            && (0..z.len()).all(|i| (i + 1..z.len()).all(|j| (z[i] - z[j]).norm() >= sep - eps))
    }

    fn shell(&self, s: usize) -> f64 {
        let (lo, hi) = self.radii();
        (lo.ln() + (hi.ln() - lo.ln()) * s as f64 / (SHELLS - 1) as f64).exp()
    }

    /// One coordinate from the shell-phase grid, indexed `0..SHELLS*PHASES`.
    fn grid_point(&self, idx: usize, offset: f64) -> C64 {
        let theta = 2.0 * std::f64::consts::PI * ((idx % PHASES) as f64 + offset) / PHASES as f64;
        C64::from_polar(self.shell(idx / PHASES), theta)
    }

    /// Deterministic sample of `K_n`: the shell-phase grid (all of it for
    /// `k = 1`, Halton picks otherwise) and Halton points with log-uniform
    /// moduli, filtered to the set.
    pub fn samples(&self) -> Vec<Vec<C64>> {
        let k = self.k;
        let mut out = Vec::new();
        if k == 0 {
            out.push(Vec::new());
            return out;
        }
        let cells = SHELLS * PHASES;
        if k == 1 {
            out.extend((0..cells).map(|i| vec![self.grid_point(i, 0.0)]));
        } else {
            for t in 1..=TENSOR_PICKS {
                // coordinate i gets a half-cell phase offset so that equal
                // indices do not collide
                let z: Vec<C64> = (0..k)
                    .map(|i| {
                        let idx = (radical_inverse(t, PRIMES[i % PRIMES.len()]) * cells as f64) as usize;
                        self.grid_point(idx.min(cells - 1), i as f64 / k as f64)
                    })
                    .collect();
                out.push(z);
            }
        }
        let (lo, hi) = self.radii();
        for t in 1..=INTERIOR_POINTS {
            let z: Vec<C64> = (0..k)
                .map(|i| {
                    let a = radical_inverse(t, PRIMES[(2 * i) % PRIMES.len()]);
                    let b = radical_inverse(t, PRIMES[(2 * i + 1) % PRIMES.len()]);
                    let r = (lo.ln() + (hi.ln() - lo.ln()) * a).exp();
                    C64::from_polar(r, 2.0 * std::f64::consts::PI * b)
                })
                .collect();
            out.push(z);
        }
        out.retain(|z| self.contains(z));
        out
    }
}

const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// A lower estimate of `max_{K_n} |f|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormEstimate {
    pub n: u32,
    pub value: f64,
    /// Sample points used, summed over the sets `K_1, ..., K_n`.
    pub points: usize,
    pub shells: usize,
    pub phases: usize,
    pub interior: usize,
}

fn sampled_max(f: &RationalCorrelator, pts: &[Vec<C64>]) -> f64 {
    pts.par_iter().map(|z| f.eval(z).norm()).reduce(|| 0.0, f64::max)
}

/// Maximum of `|f|` over the samples of `K_1, ..., K_n`; nondecreasing in `n`
/// because `K_m` is inside `K_n` for `m <= n`.
pub fn seminorm_rk(f: &RationalCorrelator, n: u32, region: Region) -> SeminormEstimate {
    seminorm_sweep(f, n.max(1), region).pop().expect("n >= 1")
}

/// `seminorm_rk` for every index `1..=max_n`, sharing the work.
pub fn seminorm_sweep(f: &RationalCorrelator, max_n: u32, region: Region) -> Vec<SeminormEstimate> {
    let k = f.nvars();
    let mut best = 0.0f64;
    let mut points = 0;
    (1..=max_n)
        .map(|n| {
            let set = CompactExhaustion { n, k, region };
            let pts = set.samples();
            points += pts.len();
            best = best.max(sampled_max(f, &pts));
            SeminormEstimate {
                n,
                value: best,
                points,
                shells: SHELLS,
                phases: PHASES,
                interior: INTERIOR_POINTS,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    #[test]
    fn nested_sets() {
        for k in 1..=3 {
            let small = CompactExhaustion::new(2, k);
            let big = CompactExhaustion::new(3, k);
            let pts = small.samples();
            assert!(!pts.is_empty());
            assert!(pts.iter().all(|z| big.contains(z)));
            let j = CompactExhaustion::unit_disk(2, k);
            assert!(j.samples().iter().all(|z| z.iter().all(|w| w.norm() < 1.0)));
        }
    }

    #[test]
    fn constant_and_pole() {
        let one = RationalCorrelator::constant(2, BigRational::from_integer(BigInt::from(1)));
        for e in seminorm_sweep(&one, 4, Region::Full) {
            assert_eq!(e.value, 1.0);
        }
        let pole = RationalCorrelator::diagonal(2, 0, 1, 2);
        let s: Vec<f64> = seminorm_sweep(&pole, 6, Region::Full).iter().map(|e| e.value).collect();
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
        assert!(s[5] > s[0]);
        // |z1 - z2| >= 1/(n+1) caps the sampled maximum
        for (n, v) in s.iter().enumerate() {
            assert!(*v <= ((n + 2) * (n + 2)) as f64 + 1e-9);
        }
    }
}
