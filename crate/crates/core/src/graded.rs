//! Weight-graded vectors in the partition basis of a Fock space.
//!
//! A basis state `a[-n1]...a[-nk]|sector>` is a partition `(n1 >= ... >= nk)`
//! together with a sector tag. Its weight is the sum of the parts plus the
//! sector's base weight (`p^2/2` in the momentum sector). The graded dual
//! pairs basis states by Kronecker delta.

use std::collections::BTreeMap;
use std::fmt::{self, Display};

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, ScaleFactor, C64};

/// Conformal weight; integral for algebra states, shifted by `p^2/2` in a module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weight(pub Rational64);

impl Weight {
    pub fn integer(n: i64) -> Self {
        Weight(Rational64::from_integer(n))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sector {
    Vacuum,
    /// Fock module with `a[0]` acting as the momentum `p`.
    Momentum(Rational64),
}

impl Sector {
    pub fn momentum(num: i64, den: i64) -> Self {
        Sector::Momentum(Rational64::new(num, den))
    }

    pub fn base_weight(&self) -> Rational64 {
        match self {
            Sector::Vacuum => Rational64::zero(),
            Sector::Momentum(p) => p * p / 2,
        }
    }

    /// Eigenvalue of the zero mode.
    pub fn zero_mode(&self) -> Rational64 {
        match self {
            Sector::Vacuum => Rational64::zero(),
            Sector::Momentum(p) => *p,
        }
    }

    pub fn is_vacuum(&self) -> bool {
        matches!(self, Sector::Vacuum)
    }

    pub(crate) fn expect(&self, other: &Sector) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SectorMismatch {
                expected: *self,
                found: *other,
            })
        }
    }
}

impl Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sector::Vacuum => write!(f, "0"),
            Sector::Momentum(p) => write!(f, "p={p}"),
        }
    }
}

/// Non-increasing list of positive mode labels. Ordered by level first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Partition {
    parts: Vec<u32>,
    level: u32,
}

impl Partition {
    fn from_sorted(parts: Vec<u32>) -> Self {
        let level = parts.iter().sum();
        Partition { parts, level }
    }

    pub fn empty() -> Self {
        Partition::default()
    }

    /// Sorts the parts; zero parts are rejected.
    pub fn new(mut parts: Vec<u32>) -> Result<Self> {
        if parts.iter().any(|&p| p == 0) {
            return Err(Error::Parse("partition parts must be positive".into()));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Partition::from_sorted(parts))
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn multiplicity(&self, part: u32) -> u32 {
        self.parts.iter().filter(|&&p| p == part).count() as u32
    }

    pub fn with_part(&self, part: u32) -> Partition {
        debug_assert!(part > 0);
        let mut parts = Vec::with_capacity(self.parts.len() + 1);
        let pos = self.parts.iter().position(|&p| p < part).unwrap_or(self.parts.len());
        parts.extend_from_slice(&self.parts[..pos]);
        parts.push(part);
        parts.extend_from_slice(&self.parts[pos..]);
        Partition {
            parts,
            level: self.level + part,
        }
    }

    pub fn without_part(&self, part: u32) -> Option<Partition> {
        let pos = self.parts.iter().position(|&p| p == part)?;
        let mut parts = self.parts.clone();
        parts.remove(pos);
        Some(Partition {
            parts,
            level: self.level - part,
        })
    }
}

impl PartialOrd for Partition {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Partition {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.level.cmp(&other.level).then_with(|| self.parts.cmp(&other.parts))
    }
}

/// All partitions of `n`, parts in non-increasing order.
pub fn partitions_of(n: u32) -> Vec<Partition> {
    fn rec(n: u32, max: u32, prefix: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if n == 0 {
            out.push(Partition::from_sorted(prefix.clone()));
            return;
        }
        for part in (1..=n.min(max)).rev() {
            prefix.push(part);
            rec(n - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

pub fn partitions_up_to(n: u32) -> Vec<Partition> {
    (0..=n).flat_map(partitions_of).collect()
}

/// A single basis state, used for canonical text rendering and parsing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub partition: Partition,
    pub sector: Sector,
}

impl BasisState {
    pub fn new(partition: Partition, sector: Sector) -> Self {
        BasisState { partition, sector }
    }

    pub fn weight(&self) -> Weight {
        Weight(self.sector.base_weight() + Rational64::from_integer(self.partition.level() as i64))
    }
}

impl Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for part in self.partition.parts() {
            write!(f, "a[-{part}]")?;
        }
        write!(f, "|{}>", self.sector)
    }
}

impl std::str::FromStr for BasisState {
    type Err = Error;

    /// Parses `a[-2]a[-1]|0>` or `a[-1]|p=1/2>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("malformed state `{s}`"));
        let bar = s.find('|').ok_or_else(bad)?;
        let (modes, ket) = s.split_at(bar);
        let inner = ket
            .strip_prefix('|')
            .and_then(|k| k.strip_suffix('>'))
            .ok_or_else(bad)?;
        let sector = if inner == "0" {
            Sector::Vacuum
        } else {
            let p = inner.strip_prefix("p=").ok_or_else(bad)?;
            Sector::Momentum(p.parse::<Rational64>().map_err(|_| bad())?)
        };
        let mut parts = Vec::new();
        let mut rest = modes;
        while !rest.is_empty() {
            let body = rest.strip_prefix("a[-").ok_or_else(bad)?;
            let close = body.find(']').ok_or_else(bad)?;
            parts.push(body[..close].parse::<u32>().map_err(|_| bad())?);
            rest = &body[close + 1..];
        }
        Ok(BasisState::new(Partition::new(parts)?, sector))
    }
}

/// Finitely supported vector in one sector; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedVector<S> {
    sector: Sector,
    terms: BTreeMap<Partition, S>,
}

impl<S: Scalar> GradedVector<S> {
    pub fn zero(sector: Sector) -> Self {
        GradedVector {
            sector,
            terms: BTreeMap::new(),
        }
    }

    pub fn basis(partition: Partition, sector: Sector) -> Self {
        let mut v = Self::zero(sector);
        v.add_term(partition, S::one());
        v
    }

    pub fn vacuum() -> Self {
        Self::basis(Partition::empty(), Sector::Vacuum)
    }

    /// `a[-n1]...a[-nk]|0>` with unit coefficient.
    pub fn modes(parts: &[u32]) -> Self {
        Self::basis(
            Partition::new(parts.to_vec()).expect("positive parts"),
            Sector::Vacuum,
        )
    }

    pub fn from_state(state: &BasisState) -> Self {
        Self::basis(state.partition.clone(), state.sector)
    }

    pub fn from_terms<I>(sector: Sector, terms: I) -> Self
    where
        I: IntoIterator<Item = (Partition, S)>,
    {
        let mut v = Self::zero(sector);
        for (p, c) in terms {
            v.add_term(p, c);
        }
        v
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn add_term(&mut self, partition: Partition, coeff: S) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(partition) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().clone() + coeff;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn coeff(&self, partition: &Partition) -> S {
        self.terms.get(partition).cloned().unwrap_or_else(S::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Partition, &S)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Levels (weight minus base weight) present in the support, ascending.
    pub fn levels(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self.terms.keys().map(Partition::level).collect();
        out.dedup();
        out
    }

    pub fn max_level(&self) -> Option<u32> {
        self.terms.keys().next_back().map(Partition::level)
    }

    pub fn weight_of_level(&self, level: u32) -> Weight {
        Weight(self.sector.base_weight() + Rational64::from_integer(level as i64))
    }

    /// Support weights, ascending.
    pub fn weights(&self) -> Vec<Weight> {
        self.levels()
            .into_iter()
            .map(|l| self.weight_of_level(l))
            .collect()
    }

    /// Homogeneous component of the given level.
    pub fn project_level(&self, level: u32) -> Self {
        GradedVector {
            sector: self.sector,
            terms: self
                .terms
                .iter()
                .filter(|(p, _)| p.level() == level)
                .map(|(p, c)| (p.clone(), c.clone()))
                .collect(),
        }
    }

    /// Components grouped by level.
    pub fn homogeneous_parts(&self) -> Vec<(u32, Self)> {
        self.levels()
            .into_iter()
            .map(|l| (l, self.project_level(l)))
            .collect()
    }

    pub fn truncate_levels(&self, max_level: u32) -> Self {
        GradedVector {
            sector: self.sector,
            terms: self
                .terms
                .iter()
                .filter(|(p, _)| p.level() <= max_level)
                .map(|(p, c)| (p.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::from_terms(
            self.sector,
            self.terms.iter().map(|(p, x)| (p.clone(), x.clone() * c.clone())),
        )
    }

    pub fn add_assign_scaled(&mut self, other: &Self, c: &S) -> Result<()> {
        self.sector.expect(&other.sector)?;
        for (p, x) in &other.terms {
            self.add_term(p.clone(), x.clone() * c.clone());
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_assign_scaled(other, &S::one())?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_assign_scaled(other, &-S::one())?;
        Ok(out)
    }

    pub fn to_complex(&self) -> GradedVector<C64> {
        GradedVector::from_terms(
            self.sector,
            self.terms.iter().map(|(p, c)| (p.clone(), c.to_c64())),
        )
    }

    /// Largest coefficient modulus.
    pub fn max_modulus(&self) -> f64 {
        self.terms.values().map(Scalar::modulus).fold(0.0, f64::max)
    }
}

impl<S: Scalar> Display for GradedVector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (p, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let state = BasisState::new(p.clone(), self.sector);
            if c.is_one() {
                write!(f, "{state}")?;
            } else {
                write!(f, "{}*{state}", c.render())?;
            }
        }
        Ok(())
    }
}

/// Weight-`n` homogeneous part of `v`; zero when `n` is not a support weight.
pub fn project<S: Scalar>(v: &GradedVector<S>, n: Weight) -> GradedVector<S> {
    let level = n.0 - v.sector.base_weight();
    if !level.is_integer() || level < Rational64::zero() {
        return GradedVector::zero(v.sector);
    }
    v.project_level(level.to_integer() as u32)
}

/// `r^{L(0)} v`.
pub fn scale_l0<S: Scalar>(r: &ScaleFactor, v: &GradedVector<S>) -> Result<GradedVector<S>> {
    let mut out = GradedVector::zero(v.sector);
    for (level, part) in v.homogeneous_parts() {
        let factor = S::weight_power(r, &v.weight_of_level(level))?;
        out.add_assign_scaled(&part, &factor)?;
    }
    Ok(out)
}

/// Element of the graded dual, paired with states by Kronecker delta.
#[derive(Clone, Debug, PartialEq)]
pub struct DualVector<S>(GradedVector<S>);

impl<S: Scalar> DualVector<S> {
    pub fn zero(sector: Sector) -> Self {
        DualVector(GradedVector::zero(sector))
    }

    pub fn basis(partition: Partition, sector: Sector) -> Self {
        DualVector(GradedVector::basis(partition, sector))
    }

    /// The dual of the vacuum, `1'`.
    pub fn vacuum() -> Self {
        DualVector(GradedVector::vacuum())
    }

    pub fn modes(parts: &[u32]) -> Self {
        DualVector(GradedVector::modes(parts))
    }

    /// The functional dual to `v` in the Kronecker pairing.
    pub fn from_vector(v: GradedVector<S>) -> Self {
        DualVector(v)
    }

    pub fn as_vector(&self) -> &GradedVector<S> {
        &self.0
    }

    pub fn sector(&self) -> Sector {
        self.0.sector
    }

    pub fn to_complex(&self) -> DualVector<C64> {
        DualVector(self.0.to_complex())
    }

    /// Dual scaling `λ ↦ λ ∘ r^{L(0)}`; multiplies the weight-`n` terms by `r^n`.
    pub fn scale_l0(&self, r: &ScaleFactor) -> Result<Self> {
        Ok(DualVector(scale_l0(r, &self.0)?))
    }
}

impl<S: Scalar> Display for DualVector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})'", self.0)
    }
}

pub fn pair<S: Scalar>(vp: &DualVector<S>, v: &GradedVector<S>) -> Result<S> {
    vp.sector().expect(&v.sector)?;
    let (small, large) = if vp.0.len() <= v.len() {
        (&vp.0, v)
    } else {
        (v, &vp.0)
    };
    let mut acc = S::zero();
    for (p, c) in small.terms() {
        if let Some(d) = large.terms.get(p) {
            acc = acc + c.clone() * d.clone();
        }
    }
    Ok(acc)
}

/// Truncation of infinite weight sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct TruncationPolicy {
    pub max_weight: u32,
    pub tolerance: f64,
    pub tail_window: usize,
}

impl TruncationPolicy {
    pub fn new(max_weight: u32, tolerance: f64, tail_window: usize) -> Result<Self> {
        let policy = TruncationPolicy {
            max_weight,
            tolerance,
            tail_window,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn with_max_weight(&self, max_weight: u32) -> Self {
        TruncationPolicy {
            max_weight,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidPolicy("tolerance must be nonnegative".into()));
        }
        if self.tail_window < 2 {
            return Err(Error::InvalidPolicy("tailWindow must be at least 2".into()));
        }
        Ok(())
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            max_weight: 20,
            tolerance: 1e-10,
            tail_window: 6,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n.into(), d.into())
    }

    #[test]
    fn project_picks_homogeneous_part() {
        let a1 = GradedVector::<Q>::modes(&[1]);
        let a2 = GradedVector::<Q>::modes(&[2]);
        let v = a1.add(&a2).unwrap();
        assert_eq!(project(&v, Weight::integer(1)), a1);
        assert!(project(&v, Weight::integer(5)).is_zero());
        assert!(project(&v, Weight(Rational64::new(1, 2))).is_zero());
    }

    #[test]
    fn projections_sum_to_identity() {
        let v = GradedVector::<Q>::from_terms(
            Sector::Vacuum,
            [
                (Partition::new(vec![1]).unwrap(), q(3, 1)),
                (Partition::new(vec![1, 1]).unwrap(), q(-1, 2)),
                (Partition::new(vec![2]).unwrap(), q(5, 7)),
                (Partition::new(vec![2, 1]).unwrap(), q(1, 3)),
            ],
        );
        let mut sum = GradedVector::zero(Sector::Vacuum);
        for w in v.weights() {
            sum = sum.add(&project(&v, w)).unwrap();
        }
        assert_eq!(sum, v);
    }

    #[test]
    fn scale_vacuum_and_weight_three() {
        let vac = GradedVector::<Q>::vacuum();
        assert_eq!(scale_l0(&ScaleFactor::rational(3, 7), &vac).unwrap(), vac);
        let v = GradedVector::<Q>::modes(&[2, 1]);
        assert_eq!(
            scale_l0(&ScaleFactor::rational(1, 2), &v).unwrap(),
            v.scale(&q(1, 8))
        );
    }

    #[test]
    fn module_scaling_in_exact_mode() {
        let p1 = Sector::momentum(1, 1);
        let w = GradedVector::<Q>::basis(Partition::empty(), p1);
        assert!(matches!(
            scale_l0(&ScaleFactor::rational(1, 2), &w),
            Err(Error::RequiresFloatingMode { .. })
        ));
        let p2 = Sector::momentum(2, 1);
        let w2 = GradedVector::<Q>::basis(Partition::new(vec![1]).unwrap(), p2);
        assert_eq!(
            scale_l0(&ScaleFactor::rational(1, 2), &w2).unwrap(),
            w2.scale(&q(1, 8))
        );
        let wf = w.to_complex();
        let s = scale_l0(&ScaleFactor::Real(0.25), &wf).unwrap();
        assert!((s.coeff(&Partition::empty()).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pairing_normalization_and_mismatch() {
        let one = GradedVector::<Q>::vacuum();
        assert_eq!(pair(&DualVector::vacuum(), &one).unwrap(), q(1, 1));
        assert_eq!(
            pair(&DualVector::<Q>::modes(&[1]), &GradedVector::modes(&[2])).unwrap(),
            q(0, 1)
        );
        let w = GradedVector::<Q>::basis(Partition::empty(), Sector::momentum(1, 1));
        assert!(matches!(
            pair(&DualVector::vacuum(), &w),
            Err(Error::SectorMismatch { .. })
        ));
    }

    #[test]
    fn partition_counts() {
        let counts: Vec<usize> = (0..=10).map(|n| partitions_of(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42]);
        assert_eq!(partitions_up_to(6).len(), 30);
    }

    #[test]
    fn state_text_round_trip() {
        for text in ["a[-2]a[-1]|0>", "a[-1]|p=1>", "|0>", "a[-3]a[-3]|p=1/2>"] {
            let state: BasisState = text.parse().unwrap();
            assert_eq!(state.to_string(), text);
        }
        let state: BasisState = "a[-1]a[-2]|0>".parse().unwrap();
        assert_eq!(state.to_string(), "a[-2]a[-1]|0>");
        assert!("a[-0]|0>".parse::<BasisState>().is_err());
        assert!("a[2]|0>".parse::<BasisState>().is_err());
        assert!("a[-2]".parse::<BasisState>().is_err());
        assert_eq!(
            "a[-1]|p=1>".parse::<BasisState>().unwrap().weight(),
            Weight(Rational64::new(3, 2))
        );
    }

    #[test]
    fn vector_rendering() {
        let v = GradedVector::<Q>::modes(&[2, 1])
            .add(&GradedVector::modes(&[1]).scale(&q(1, 2)))
            .unwrap();
        assert_eq!(v.to_string(), "1/2*a[-1]|0> + a[-2]a[-1]|0>");
        assert_eq!(GradedVector::<Q>::zero(Sector::Vacuum).to_string(), "0");
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::new(10, 1e-9, 1).is_err());
        assert!(TruncationPolicy::new(10, -1.0, 4).is_err());
        assert!(TruncationPolicy::new(0, 0.0, 2).is_ok());
    }
}
