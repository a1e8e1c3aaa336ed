//! Matrix coefficients `<v', Y(u1,z1)...Y(uk,zk) v>`: their expansions in
//! `|z1| > ... > |zk| > 0` and their exact rational continuations.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graded::{partitions_up_to, DualVector, GradedVector, Partition, Sector, TruncationPolicy};
use crate::poly::Poly;
use crate::scalar::{big, Scalar, C64};
use crate::vertex::Algebra;

type Q = BigRational;

fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn binom(n: i64, k: i64) -> Q {
    if k < 0 {
        return Q::zero();
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k {
        num *= BigInt::from(n - i);
        den *= BigInt::from(i + 1);
    }
    Q::new(num, den)
}

/// Element of `R_k`: `N(z) / (prod z_i^{a_i} prod_{i<j} (z_i - z_j)^{b_ij})`,
/// kept in reduced form so that equality is structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalCorrelator {
    numerator: Poly,
    zero_poles: Vec<u32>,
    diag_poles: BTreeMap<(usize, usize), u32>,
}

impl RationalCorrelator {
    pub fn zero(k: usize) -> Self {
        RationalCorrelator {
            numerator: Poly::zero(k),
            zero_poles: vec![0; k],
            diag_poles: BTreeMap::new(),
        }
    }

    pub fn constant(k: usize, c: Q) -> Self {
        RationalCorrelator::new(Poly::constant(k, c), vec![0; k], BTreeMap::new())
    }

    /// Builds and reduces. Diagonal keys must satisfy `i < j`.
    pub fn new(numerator: Poly, zero_poles: Vec<u32>, diag_poles: BTreeMap<(usize, usize), u32>) -> Self {
        let k = numerator.nvars();
        assert_eq!(zero_poles.len(), k);
        assert!(diag_poles.keys().all(|&(i, j)| i < j && j < k));
        let mut r = RationalCorrelator {
            numerator,
            zero_poles,
            diag_poles,
        };
        r.reduce();
        r
    }

    /// `1 / (z_i - z_j)^b`, `i < j`.
    pub fn diagonal(k: usize, i: usize, j: usize, b: u32) -> Self {
        let mut d = BTreeMap::new();
        d.insert((i, j), b);
        RationalCorrelator::new(Poly::one(k), vec![0; k], d)
    }

    /// `c / z_i^a`.
    pub fn pole_at_zero(k: usize, i: usize, a: u32, c: Q) -> Self {
        let mut zp = vec![0; k];
        zp[i] = a;
        RationalCorrelator::new(Poly::constant(k, c), zp, BTreeMap::new())
    }

    fn reduce(&mut self) {
        if self.numerator.is_zero() {
            self.zero_poles.iter_mut().for_each(|a| *a = 0);
            self.diag_poles.clear();
            return;
        }
        for i in 0..self.zero_poles.len() {
            let m = self.numerator.min_degree_in(i).min(self.zero_poles[i]);
            if m > 0 {
                self.numerator = self.numerator.unshift(i, m);
                self.zero_poles[i] -= m;
            }
        }
        let keys: Vec<(usize, usize)> = self.diag_poles.keys().copied().collect();
        for (i, j) in keys {
            loop {
                let b = self.diag_poles[&(i, j)];
                if b == 0 {
                    break;
                }
                match self.numerator.div_diff(i, j) {
                    Some(q) => {
                        self.numerator = q;
                        self.diag_poles.insert((i, j), b - 1);
                    }
                    None => break,
                }
            }
        }
        self.diag_poles.retain(|_, b| *b > 0);
    }

    pub fn nvars(&self) -> usize {
        self.zero_poles.len()
    }

    pub fn numerator(&self) -> &Poly {
        &self.numerator
    }

    pub fn zero_poles(&self) -> &[u32] {
        &self.zero_poles
    }

    pub fn diag_poles(&self) -> &BTreeMap<(usize, usize), u32> {
        &self.diag_poles
    }

    pub fn diag_order(&self, i: usize, j: usize) -> u32 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.diag_poles.get(&key).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    /// Total degree at infinity: `deg N - deg denominator` (homogeneous case).
    pub fn degree(&self) -> Option<i64> {
        let dn = self.numerator.total_degree()? as i64;
        let dd: i64 = self.zero_poles.iter().map(|&a| a as i64).sum::<i64>()
            + self.diag_poles.values().map(|&b| b as i64).sum::<i64>();
        Some(dn - dd)
    }

    fn denominator_factor(&self, extra_zero: &[u32], extra_diag: &BTreeMap<(usize, usize), u32>) -> Poly {
        let k = self.nvars();
        let mut p = Poly::one(k);
        for (i, &a) in extra_zero.iter().enumerate() {
            if a > 0 {
                p = p.shift(i, a);
            }
        }
        for (&(i, j), &b) in extra_diag {
            if b > 0 {
                p = p.mul(&Poly::diff(k, i, j).pow(b));
            }
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars(), other.nvars());
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let zp: Vec<u32> = self
            .zero_poles
            .iter()
            .zip(&other.zero_poles)
            .map(|(a, b)| *a.max(b))
            .collect();
        let mut dp = self.diag_poles.clone();
        for (key, &b) in &other.diag_poles {
            let e = dp.entry(*key).or_insert(0);
            *e = (*e).max(b);
        }
        let lift = |r: &Self| {
            let ez: Vec<u32> = zp.iter().zip(&r.zero_poles).map(|(a, b)| a - b).collect();
            let ed: BTreeMap<(usize, usize), u32> = dp
                .iter()
                .map(|(key, &b)| (*key, b - r.diag_poles.get(key).copied().unwrap_or(0)))
                .collect();
            r.numerator.mul(&r.denominator_factor(&ez, &ed))
        };
        let num = lift(self).add(&lift(other));
        RationalCorrelator::new(num, zp, dp)
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Q::one())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return RationalCorrelator::zero(self.nvars());
        }
        RationalCorrelator {
            numerator: self.numerator.scale(c),
            ..self.clone()
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let zp = self
            .zero_poles
            .iter()
            .zip(&other.zero_poles)
            .map(|(a, b)| a + b)
            .collect();
        let mut dp = self.diag_poles.clone();
        for (key, &b) in &other.diag_poles {
            *dp.entry(*key).or_insert(0) += b;
        }
        RationalCorrelator::new(self.numerator.mul(&other.numerator), zp, dp)
    }

    /// Renames variable `i` to `map[i]` (a permutation).
    pub fn relabel(&self, map: &[usize]) -> Self {
        let k = self.nvars();
        let mut zp = vec![0; k];
        for (i, &a) in self.zero_poles.iter().enumerate() {
            zp[map[i]] = a;
        }
        let mut num = self.numerator.relabel(map);
        let mut dp = BTreeMap::new();
        for (&(i, j), &b) in &self.diag_poles {
            let (mi, mj) = (map[i], map[j]);
            if mi < mj {
                dp.insert((mi, mj), b);
            } else {
                dp.insert((mj, mi), b);
                if b % 2 == 1 {
                    num = num.neg();
                }
            }
        }
        RationalCorrelator::new(num, zp, dp)
    }

    /// Exact `d/dz_i`.
    pub fn derivative(&self, i: usize) -> Self {
        let k = self.nvars();
        // factors phi with positive order that depend on z_i: (phi, order, d phi / dz_i)
        let mut factors: Vec<(Poly, u32, Q)> = Vec::new();
        let mut zp = self.zero_poles.clone();
        let mut dp = self.diag_poles.clone();
        if self.zero_poles[i] > 0 {
            factors.push((Poly::var(k, i), self.zero_poles[i], Q::one()));
            zp[i] += 1;
        }
        for (&(a, b), &o) in &self.diag_poles {
            if a == i || b == i {
                let sign = if a == i { Q::one() } else { -Q::one() };
                factors.push((Poly::diff(k, a, b), o, sign));
                *dp.get_mut(&(a, b)).unwrap() += 1;
            }
        }
        let full = factors.iter().fold(Poly::one(k), |acc, (f, _, _)| acc.mul(f));
        let mut num = self.numerator.derivative(i).mul(&full);
        for (idx, (_, o, d)) in factors.iter().enumerate() {
            let others = factors
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != idx)
                .fold(Poly::one(k), |acc, (_, (f, _, _))| acc.mul(f));
            num = num.sub(&self.numerator.mul(&others).scale(&(qi(*o as i64) * d)));
        }
        RationalCorrelator::new(num, zp, dp)
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        assert_eq!(z.len(), self.nvars());
        if self.is_zero() {
            return C64::new(0.0, 0.0);
        }
        let mut den = C64::new(1.0, 0.0);
        for (i, &a) in self.zero_poles.iter().enumerate() {
            den *= z[i].powi(a as i32);
        }
        for (&(i, j), &b) in &self.diag_poles {
            den *= (z[i] - z[j]).powi(b as i32);
        }
        self.numerator.eval(z) / den
    }

    pub fn eval_exact(&self, z: &[Q]) -> Option<Q> {
        let mut den = Q::one();
        for (i, &a) in self.zero_poles.iter().enumerate() {
            den *= num_traits::pow(z[i].clone(), a as usize);
        }
        for (&(i, j), &b) in &self.diag_poles {
            den *= num_traits::pow(&z[i] - &z[j], b as usize);
        }
        if den.is_zero() {
            return None;
        }
        Some(self.numerator.eval_exact(z) / den)
    }

    /// Expansion in `|z1| > ... > |zk|`, restricted to exponents whose
    /// intermediate levels `e_v + sum_{i>=j} (wt_i + e_i)` stay within `cap`.
    pub fn expand(&self, wts: &[i64], e_v: i64, cap: i64) -> BTreeMap<Vec<i64>, Q> {
        let k = self.nvars();
        let levels_ok = |e: &[i64], slack: i64| {
            let mut w = e_v;
            for j in (0..k).rev() {
                w += wts[j] + e[j];
                if w > cap + slack {
                    return false;
                }
            }
            true
        };
        let mut terms: BTreeMap<Vec<i64>, Q> = BTreeMap::new();
        for (e, c) in self.numerator.terms() {
            let e: Vec<i64> = e
                .iter()
                .zip(&self.zero_poles)
                .map(|(&x, &a)| x as i64 - a as i64)
                .collect();
            *terms.entry(e).or_insert_with(Q::zero) += c;
        }
        let pairs: Vec<((usize, usize), u32)> = self.diag_poles.iter().map(|(k, v)| (*k, *v)).collect();
        let mut slack: i64 = pairs.iter().map(|(_, b)| *b as i64).sum();
        for ((i, j), b) in pairs {
            slack -= b as i64;
            let mut next: BTreeMap<Vec<i64>, Q> = BTreeMap::new();
            for (e, c) in &terms {
                // (z_i - z_j)^{-b} = sum_t binom(b+t-1, t) z_j^t z_i^{-b-t}
                let mut t = 0i64;
                loop {
                    let mut e2 = e.clone();
                    e2[i] -= b as i64 + t;
                    e2[j] += t;
                    if !levels_ok(&e2, slack) {
                        break;
                    }
                    let coef = binom(b as i64 + t - 1, t) * c;
                    *next.entry(e2).or_insert_with(Q::zero) += coef;
                    t += 1;
                }
            }
            next.retain(|_, c| !c.is_zero());
            terms = next;
        }
        terms.retain(|e, c| !c.is_zero() && levels_ok(e, 0));
        terms
    }

    /// Canonical JSON record.
    pub fn to_json(&self) -> CanonicalCorrelator {
        CanonicalCorrelator {
            numerator: self
                .numerator
                .terms()
                .map(|(e, c)| (e.clone(), c.numer().to_string(), c.denom().to_string()))
                .collect(),
            zero_poles: self.zero_poles.clone(),
            diag_poles: self
                .diag_poles
                .iter()
                .map(|(&(i, j), &b)| (i, j, b))
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serializable")
    }

    pub fn from_json(c: &CanonicalCorrelator) -> Result<Self> {
        let k = c.zero_poles.len();
        let mut num = Poly::zero(k);
        for (e, n, d) in &c.numerator {
            if e.len() != k {
                return Err(Error::Parse("monomial arity differs from zeroPoles".into()));
            }
            let n: BigInt = n.parse().map_err(|_| Error::Parse(format!("bad integer `{n}`")))?;
            let d: BigInt = d.parse().map_err(|_| Error::Parse(format!("bad integer `{d}`")))?;
            if d.is_zero() {
                return Err(Error::Parse("zero denominator".into()));
            }
            num.add_term(e.clone(), Q::new(n, d));
        }
        let mut dp = BTreeMap::new();
        for &(i, j, b) in &c.diag_poles {
            if i >= j || j >= k {
                return Err(Error::Parse(format!("bad diagonal pole ({i},{j})")));
            }
            dp.insert((i, j), b);
        }
        Ok(RationalCorrelator::new(num, c.zero_poles.clone(), dp))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let c: CanonicalCorrelator =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        RationalCorrelator::from_json(&c)
    }
}

impl fmt::Display for RationalCorrelator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.numerator)?;
        let mut den = Vec::new();
        for (i, &a) in self.zero_poles.iter().enumerate() {
            if a > 0 {
                den.push(format!("z{}^{a}", i + 1));
            }
        }
        for (&(i, j), &b) in &self.diag_poles {
            den.push(format!("(z{}-z{})^{b}", i + 1, j + 1));
        }
        if !den.is_empty() {
            write!(f, " / {}", den.join("*"))?;
        }
        Ok(())
    }
}

/// `{numerator:[[exps, num, den]...], zeroPoles:[a_i], diagPoles:[[i,j,b]...]}`,
/// with 0-based variable indices and integers written as decimal strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CanonicalCorrelator {
    pub numerator: Vec<(Vec<u32>, String, String)>,
    pub zero_poles: Vec<u32>,
    pub diag_poles: Vec<(usize, usize, u32)>,
}

/// Truncated expansion of a correlator in `|z1| > ... > |zk| > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesCorrelator {
    pub nvars: usize,
    /// Bound on every intermediate level of `Y(u_j,z_j)...Y(u_k,z_k)v`.
    pub cap: u32,
    pub terms: BTreeMap<Vec<i64>, Q>,
}

impl SeriesCorrelator {
    pub fn coeff(&self, e: &[i64]) -> Q {
        self.terms.get(e).cloned().unwrap_or_else(Q::zero)
    }
}

/// Per basis combination: expansion coefficients with every intermediate
/// level at most `cap`, paired against one dual basis state.
fn series_basis(
    alg: &Algebra,
    vp: &Partition,
    us: &[Partition],
    v: &Partition,
    sector: &Sector,
    cap: i64,
) -> BTreeMap<Vec<i64>, Q> {
    let k = us.len();
    let mut out = BTreeMap::new();
    if k == 0 {
        if vp == v {
            out.insert(Vec::new(), Q::one());
        }
        return out;
    }
    if v.level() as i64 > cap {
        return out;
    }
    let target = vp.level() as i64;
    let mut frontier: BTreeMap<(Vec<i64>, Partition), Q> = BTreeMap::new();
    frontier.insert((vec![0; k], v.clone()), Q::one());
    for j in (0..k).rev() {
        let wt = us[j].level() as i64;
        let mut next: BTreeMap<(Vec<i64>, Partition), Q> = BTreeMap::new();
        for ((exps, part), c) in &frontier {
            let lv = part.level() as i64;
            let n0 = wt + lv;
            let (lo, hi) = if j == 0 {
                let n = wt + lv - 1 - target;
                (n, n)
            } else {
                (wt + lv - 1 - cap, n0 - 1)
            };
            for n in lo..=hi {
                let table = alg.basis_mode_table(&us[j], n, part, sector);
                for (p, x) in table {
                    if j == 0 && &p != vp {
                        continue;
                    }
                    let mut e = exps.clone();
                    e[j] = -n - 1;
                    *next.entry((e, p)).or_insert_with(Q::zero) += x * c;
                }
            }
        }
        next.retain(|_, c| !c.is_zero());
        frontier = next;
    }
    for ((e, _), c) in frontier {
        out.insert(e, c);
    }
    out
}

fn check_inputs<S: Scalar>(vp: &DualVector<S>, us: &[GradedVector<S>], v: &GradedVector<S>) -> Result<()> {
    vp.sector().expect(&v.sector())?;
    for u in us {
        if !u.sector().is_vacuum() {
            return Err(Error::AlgebraSectorRequired(u.sector()));
        }
    }
    Ok(())
}

/// All basis combinations `(vp, us, v)` with the product of coefficients.
fn combinations<'a, S: Scalar>(
    vp: &'a DualVector<S>,
    us: &'a [GradedVector<S>],
    v: &'a GradedVector<S>,
) -> Vec<(Partition, Vec<Partition>, Partition, S)> {
    let mut partial: Vec<(Vec<Partition>, S)> = vec![(Vec::new(), S::one())];
    for u in us {
        let mut next = Vec::new();
        for (ps, c) in &partial {
            for (p, x) in u.terms() {
                let mut ps2 = ps.clone();
                ps2.push(p.clone());
                next.push((ps2, c.clone() * x.clone()));
            }
        }
        partial = next;
    }
    let mut out = Vec::new();
    for (pp, cp) in vp.as_vector().terms() {
        for (ps, cu) in &partial {
            for (pv, cv) in v.terms() {
                out.push((
                    pp.clone(),
                    ps.clone(),
                    pv.clone(),
                    cp.clone() * cu.clone() * cv.clone(),
                ));
            }
        }
    }
    out
}

/// `<v', Y(u1,z1)...Y(uk,zk) v>` expanded in `|z1| > ... > |zk| > 0`, with every
/// intermediate level of `Y(u_j,z_j)...Y(u_k,z_k) v` at most `cap`.
pub fn series_correlator(
    alg: &Algebra,
    vp: &DualVector<Q>,
    us: &[GradedVector<Q>],
    v: &GradedVector<Q>,
    cap: u32,
) -> Result<SeriesCorrelator> {
    check_inputs(vp, us, v)?;
    let sector = v.sector();
    let mut terms: BTreeMap<Vec<i64>, Q> = BTreeMap::new();
    for (pp, ps, pv, c) in combinations(vp, us, v) {
        for (e, x) in series_basis(alg, &pp, &ps, &pv, &sector, cap as i64) {
            *terms.entry(e).or_insert_with(Q::zero) += x * &c;
        }
    }
    terms.retain(|_, c| !c.is_zero());
    Ok(SeriesCorrelator {
        nvars: us.len(),
        cap,
        terms,
    })
}

/// Bounds used by the reconstruction of one basis combination.
#[derive(Clone, Debug, PartialEq)]
pub struct PoleBounds {
    pub zero: Vec<u32>,
    pub diag: BTreeMap<(usize, usize), u32>,
    /// Total degree of the series terms.
    pub series_degree: i64,
    /// Degree bound of the numerator.
    pub numerator_degree: i64,
}

pub fn pole_bounds(vp_level: i64, wts: &[i64], e_v: i64) -> PoleBounds {
    let k = wts.len();
    let zero: Vec<u32> = wts.iter().map(|&w| (w + e_v) as u32).collect();
    let mut diag = BTreeMap::new();
    for i in 0..k {
        for j in i + 1..k {
            diag.insert((i, j), (wts[i] + wts[j]) as u32);
        }
    }
    let series_degree = vp_level - e_v - wts.iter().sum::<i64>();
    let numerator_degree = series_degree
        + zero.iter().map(|&a| a as i64).sum::<i64>()
        + diag.values().map(|&b| b as i64).sum::<i64>();
    PoleBounds {
        zero,
        diag,
        series_degree,
        numerator_degree,
    }
}

pub(crate) type CorrKey = (Partition, Vec<Partition>, Partition, Sector);

/// Memo tables for reconstructed correlators and bounding denominators.
#[derive(Default)]
pub struct CorrelatorCache {
    rational: RwLock<HashMap<CorrKey, Arc<RationalCorrelator>>>,
    denominators: RwLock<HashMap<(Vec<i64>, i64), Arc<Poly>>>,
}

impl CorrelatorCache {
    pub fn clear(&self) {
        self.rational.write().clear();
        self.denominators.write().clear();
    }

    pub fn len(&self) -> usize {
        self.rational.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn bounding_denominator(alg: &Algebra, wts: &[i64], e_v: i64) -> Arc<Poly> {
    let key = (wts.to_vec(), e_v);
    if let Some(hit) = alg.correlators.denominators.read().get(&key) {
        return hit.clone();
    }
    let k = wts.len();
    let b = pole_bounds(0, wts, e_v);
    let mut den = Poly::one(k);
    for (i, &a) in b.zero.iter().enumerate() {
        den = den.shift(i, a);
    }
    for (&(i, j), &o) in &b.diag {
        den = den.mul(&Poly::diff(k, i, j).pow(o));
    }
    let den = Arc::new(den);
    alg.correlators.denominators.write().insert(key, den.clone());
    den
}

fn reconstruct_basis(
    alg: &Algebra,
    vp: &Partition,
    us: &[Partition],
    v: &Partition,
    sector: &Sector,
) -> Result<Arc<RationalCorrelator>> {
    let key: CorrKey = (vp.clone(), us.to_vec(), v.clone(), *sector);
    if let Some(hit) = alg.correlators.rational.read().get(&key) {
        return Ok(hit.clone());
    }
    let k = us.len();
    let r = if k == 0 {
        RationalCorrelator::constant(0, if vp == v { Q::one() } else { Q::zero() })
    } else {
        let wts: Vec<i64> = us.iter().map(|u| u.level() as i64).collect();
        let e_v = v.level() as i64;
        let bounds = pole_bounds(vp.level() as i64, &wts, e_v);
        let d = bounds.numerator_degree.max(0);
        let cap0 = e_v + wts.iter().sum::<i64>() + d;
        let cert = cap0 + d + 2;
        let series = series_basis(alg, vp, us, v, sector, cert);
        let den = bounding_denominator(alg, &wts, e_v);
        let within = |e: &[i64]| {
            let mut w = e_v;
            for j in (0..k).rev() {
                w += wts[j] + e[j];
                if w > cert {
                    return false;
                }
            }
            true
        };
        let mut product: BTreeMap<Vec<i64>, Q> = BTreeMap::new();
        for (s, c) in &series {
            for (f, x) in den.terms() {
                let e: Vec<i64> = s.iter().zip(f).map(|(a, b)| a + *b as i64).collect();
                if within(&e) {
                    *product.entry(e).or_insert_with(Q::zero) += c * x;
                }
            }
        }
        let mut num = Poly::zero(k);
        for (e, c) in product {
            if c.is_zero() {
                continue;
            }
            if e.iter().all(|&x| x >= 0) && e.iter().sum::<i64>() <= d {
                num.add_term(e.iter().map(|&x| x as u32).collect(), c);
            } else {
                return Err(Error::PoleBoundViolated(format!(
                    "residual coefficient {c} at z^{e:?} for <{vp:?}| {us:?} |{v:?}>"
                )));
            }
        }
        RationalCorrelator::new(num, bounds.zero, bounds.diag)
    };
    let r = Arc::new(r);
    alg.correlators.rational.write().insert(key, r.clone());
    Ok(r)
}

/// Exact rational continuation of `<v', Y(u1,z1)...Y(uk,zk) v>`.
pub fn reconstruct_rational(
    alg: &Algebra,
    vp: &DualVector<Q>,
    us: &[GradedVector<Q>],
    v: &GradedVector<Q>,
) -> Result<RationalCorrelator> {
    check_inputs(vp, us, v)?;
    let sector = v.sector();
    let mut total = RationalCorrelator::zero(us.len());
    let mut pieces: BTreeMap<CorrKey, Q> = BTreeMap::new();
    for (pp, ps, pv, c) in combinations(vp, us, v) {
        *pieces.entry((pp, ps, pv, sector)).or_insert_with(Q::zero) += c;
    }
    for ((pp, ps, pv, _), c) in pieces {
        if c.is_zero() {
            continue;
        }
        let r = reconstruct_basis(alg, &pp, &ps, &pv, &sector)?;
        total = total.add(&r.scale(&c));
    }
    Ok(total)
}

/// Floating evaluation through the exact rational continuations of the basis
/// combinations.
pub fn correlator_value(
    alg: &Algebra,
    vp: &DualVector<C64>,
    us: &[GradedVector<C64>],
    v: &GradedVector<C64>,
    z: &[C64],
) -> Result<C64> {
    check_inputs(vp, us, v)?;
    if z.len() != us.len() {
        return Err(Error::ArityMismatch {
            expected: us.len(),
            found: z.len(),
        });
    }
    let sector = v.sector();
    let mut total = C64::new(0.0, 0.0);
    for (pp, ps, pv, c) in combinations(vp, us, v) {
        let r = reconstruct_basis(alg, &pp, &ps, &pv, &sector)?;
        if !r.is_zero() {
            total += c * r.eval(z);
        }
    }
    Ok(total)
}

/// Free-boson correlator of generator insertions by Wick contraction: pairs
/// contribute `(z_i - z_j)^{-2}`, unpaired insertions `p / z_i`.
pub fn wick_oracle(
    vp: &DualVector<Q>,
    us: &[GradedVector<Q>],
    v: &GradedVector<Q>,
) -> Result<RationalCorrelator> {
    check_inputs(vp, us, v)?;
    let lowest = |x: &GradedVector<Q>, what: &str| -> Result<Q> {
        let mut it = x.terms();
        match (it.next(), it.next()) {
            (Some((p, c)), None) if p.is_empty() => Ok(c.clone()),
            _ => Err(Error::UnsupportedInsertion(format!(
                "{what} must be a multiple of the lowest state, got {x}"
            ))),
        }
    };
    let mut scale = lowest(vp.as_vector(), "dual vector")? * lowest(v, "vector")?;
    let generator = Partition::new(vec![1]).expect("positive");
    for u in us {
        let mut it = u.terms();
        match (it.next(), it.next()) {
            (Some((p, c)), None) if *p == generator => scale *= c,
            _ => {
                return Err(Error::UnsupportedInsertion(format!(
                    "insertion must be a multiple of a[-1]|0>, got {u}"
                )))
            }
        }
    }
    let k = us.len();
    let p = big(&v.sector().zero_mode());
    // partial matchings of 0..k, unmatched points carry p/z_i
    fn rec(
        free: &mut Vec<usize>,
        k: usize,
        p: &Q,
        acc: RationalCorrelator,
        out: &mut RationalCorrelator,
    ) {
        let Some(&first) = free.first() else {
            *out = out.add(&acc);
            return;
        };
        free.remove(0);
        if !p.is_zero() {
            let single = RationalCorrelator::pole_at_zero(k, first, 1, p.clone());
            rec(free, k, p, acc.mul(&single), out);
        }
        for idx in 0..free.len() {
            let partner = free.remove(idx);
            let d = RationalCorrelator::diagonal(k, first, partner, 2);
            rec(free, k, p, acc.mul(&d), out);
            free.insert(idx, partner);
        }
        free.insert(0, first);
    }
    let mut out = RationalCorrelator::zero(k);
    let mut free: Vec<usize> = (0..k).collect();
    rec(&mut free, k, &p, RationalCorrelator::constant(k, Q::one()), &mut out);
    Ok(out.scale(&scale))
}

/// `<v', Y(Y(u1, x) u2, z2) v>` as coefficients of `x^a z2^b`, for `a <= max_x`.
pub fn iterate_expansion(
    alg: &Algebra,
    vp: &DualVector<Q>,
    u1: &GradedVector<Q>,
    u2: &GradedVector<Q>,
    v: &GradedVector<Q>,
    max_x: i64,
) -> Result<BTreeMap<(i64, i64), Q>> {
    check_inputs(vp, &[u1.clone(), u2.clone()], v)?;
    let n0 = crate::vertex::certified_n0(u1, u2);
    let mut out: BTreeMap<(i64, i64), Q> = BTreeMap::new();
    for n in (-max_x - 1)..n0 {
        let w = alg.mode_act(u1, n, u2)?;
        for (pw, cw) in w.terms() {
            let hw = pw.level() as i64;
            for (pv, cv) in v.terms() {
                for (pp, cp) in vp.as_vector().terms() {
                    let m = hw + pv.level() as i64 - 1 - pp.level() as i64;
                    let table = alg.basis_mode_table(pw, m, pv, &v.sector());
                    for (p, x) in table {
                        if &p == pp {
                            let key = (-n - 1, -m - 1);
                            *out.entry(key).or_insert_with(Q::zero) += x * cw * cv * cp;
                        }
                    }
                }
            }
        }
    }
    out.retain(|_, c| !c.is_zero());
    Ok(out)
}

/// Expansion of a 2-point function around `z1 = z2`: substitutes
/// `z1 = z2 + x` and expands in `|x| < |z2|`, keeping `x^a` for `a <= max_x`.
pub fn expand_near_diagonal(r: &RationalCorrelator, max_x: i64) -> BTreeMap<(i64, i64), Q> {
    assert_eq!(r.nvars(), 2);
    let a1 = r.zero_poles()[0] as i64;
    let a2 = r.zero_poles()[1] as i64;
    let b = r.diag_order(0, 1) as i64;
    // N(z2 + x, z2) as coefficients of x^i z2^j
    let mut num: BTreeMap<(i64, i64), Q> = BTreeMap::new();
    for (e, c) in r.numerator().terms() {
        let (d1, d2) = (e[0] as i64, e[1] as i64);
        for i in 0..=d1 {
            let key = (i, d1 - i + d2);
            *num.entry(key).or_insert_with(Q::zero) += binom(d1, i) * c;
        }
    }
    let mut out: BTreeMap<(i64, i64), Q> = BTreeMap::new();
    for ((i, j), c) in &num {
        // (z2+x)^{-a1} = sum_t binom(-a1, t) x^t z2^{-a1-t}
        let mut t = 0;
        while i + t - b <= max_x {
            let coef = binom(-a1, t) * c;
            if !coef.is_zero() {
                let key = (i + t - b, j - a1 - t - a2);
                *out.entry(key).or_insert_with(Q::zero) += coef;
            }
            if a1 == 0 {
                break;
            }
            t += 1;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// How `q_vector` evaluates its components.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QRoute {
    /// Wick contraction in floating point.
    FreeField,
    /// One exact rational continuation per dual basis state, then evaluated.
    Rational,
}

/// Components of `Q(us, v; z)` at levels `0..=policy.max_weight` above the
/// sector's base weight.
pub fn q_vector(
    alg: &Algebra,
    us: &[GradedVector<C64>],
    v: &GradedVector<C64>,
    z: &[C64],
    policy: &TruncationPolicy,
    route: QRoute,
) -> Result<GradedVector<C64>> {
    crate::freefield::check_configuration(z, crate::freefield::POINT_TOLERANCE)?;
    match route {
        QRoute::FreeField => {
            if alg.is_corrupted() {
                return Err(Error::Spec(
                    "the free-field route needs the undeformed bracket".into(),
                ));
            }
            crate::freefield::q_free_field(us, v, z, policy.max_weight)
        }
        QRoute::Rational => {
            let sector = v.sector();
            let mut out = GradedVector::zero(sector);
            for p in partitions_up_to(policy.max_weight) {
                let dual = DualVector::basis(p.clone(), sector);
                let c = correlator_value(alg, &dual, us, v, z)?;
                out.add_term(p, c);
            }
            Ok(out)
        }
    }
}

/// Checks that `f` and `g` agree as functions and that both are reduced;
/// structural equality.
pub fn same_function(f: &RationalCorrelator, g: &RationalCorrelator) -> bool {
    f == g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha() -> GradedVector<Q> {
        GradedVector::modes(&[1])
    }

    #[test]
    fn two_point_vacuum() {
        let alg = Algebra::heisenberg();
        let r = reconstruct_rational(
            &alg,
            &DualVector::vacuum(),
            &[alpha(), alpha()],
            &GradedVector::vacuum(),
        )
        .unwrap();
        assert_eq!(r, RationalCorrelator::diagonal(2, 0, 1, 2));
    }

    #[test]
    fn odd_vacuum_correlator_vanishes() {
        let alg = Algebra::heisenberg();
        let r = reconstruct_rational(
            &alg,
            &DualVector::vacuum(),
            &[alpha(), alpha(), alpha()],
            &GradedVector::vacuum(),
        )
        .unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn series_two_point() {
        let alg = Algebra::heisenberg();
        let s = series_correlator(
            &alg,
            &DualVector::vacuum(),
            &[alpha(), alpha()],
            &GradedVector::vacuum(),
            10,
        )
        .unwrap();
        for m in 1..=10i64 {
            assert_eq!(s.coeff(&[-m - 1, m - 1]), qi(m));
        }
        assert_eq!(s.terms.len(), 10);
    }

    #[test]
    fn canonical_json_round_trip() {
        let r = RationalCorrelator::diagonal(2, 0, 1, 2)
            .add(&RationalCorrelator::pole_at_zero(2, 0, 1, qi(1)).mul(&RationalCorrelator::pole_at_zero(2, 1, 1, qi(1))));
        let text = r.to_json_string();
        assert_eq!(RationalCorrelator::from_json_str(&text).unwrap(), r);
    }

    #[test]
    fn derivative_of_pole() {
        let r = RationalCorrelator::diagonal(2, 0, 1, 2);
        let d = r.derivative(0);
        assert_eq!(d, RationalCorrelator::diagonal(2, 0, 1, 3).scale(&qi(-2)));
        let d2 = r.derivative(1);
        assert_eq!(d2, RationalCorrelator::diagonal(2, 0, 1, 3).scale(&qi(2)));
    }
}
