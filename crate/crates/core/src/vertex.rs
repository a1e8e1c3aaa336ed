//! The rank-one Heisenberg vertex algebra and its Fock modules.
//!
//! For `u = a[-l1]...a[-lk]|0>` the vertex operator is the normal ordered
//! product `:phi_{l1-1}(z)...phi_{lk-1}(z):` with
//! `phi_a(z) = sum_n binom(-n-1, a) a[n] z^{-n-1-a}`, so `u_n v` is a finite
//! sum over tuples of field modes whose labels add up to `n + 1 - wt u`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Zero};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::correlator::CorrelatorCache;
use crate::error::{Error, Result};
use crate::graded::{partitions_of, GradedVector, Partition, Sector, TruncationPolicy, Weight};
use crate::scalar::{big, Scalar};

/// JSON form: `{"algebra":"heisenberg","conformal":true,"c":1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AlgebraSpec {
    pub algebra: String,
    #[serde(default = "default_true")]
    pub conformal: bool,
    #[serde(default = "default_c", with = "rational_text")]
    pub c: Rational64,
    /// Deforms the bracket to `[a(m), a(-m)] = m + shift*sign(m)`. Only a
    /// mutation fixture; any nonzero value breaks locality.
    #[serde(default, skip_serializing_if = "is_zero_i64")]
    pub commutator_shift: i64,
}

fn default_true() -> bool {
    true
}

fn default_c() -> Rational64 {
    Rational64::one()
}

fn is_zero_i64(x: &i64) -> bool {
    *x == 0
}

/// Rationals as JSON integers or strings such as `"1/2"`.
pub(crate) mod rational_text {
    use num_rational::Rational64;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        if r.is_integer() {
            s.serialize_i64(r.to_integer())
        } else {
            s.serialize_str(&r.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Rational64::from_integer(n)),
            Raw::Text(t) => t
                .trim()
                .parse::<Rational64>()
                .map_err(|_| D::Error::custom(format!("not a rational number: `{t}`"))),
        }
    }
}

impl Default for AlgebraSpec {
    fn default() -> Self {
        AlgebraSpec {
            algebra: "heisenberg".into(),
            conformal: true,
            c: Rational64::one(),
            commutator_shift: 0,
        }
    }
}

impl AlgebraSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: AlgebraSpec =
            serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algebra != "heisenberg" {
            return Err(Error::Spec(format!(
                "unsupported algebra `{}` (only `heisenberg`)",
                self.algebra
            )));
        }
        if self.conformal && self.c != Rational64::one() {
            return Err(Error::Spec(format!(
                "the rank-one Heisenberg conformal vector has c = 1, got {}",
                self.c
            )));
        }
        Ok(())
    }
}

type ModeKey = (Partition, i64, Partition, Sector);
type ModeTable = Vec<(Partition, BigRational)>;

/// A Heisenberg algebra instance with its memoized mode table.
pub struct Algebra {
    spec: AlgebraSpec,
    cache: RwLock<HashMap<ModeKey, Arc<ModeTable>>>,
    pub(crate) correlators: CorrelatorCache,
}

impl fmt::Debug for Algebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Algebra").field("spec", &self.spec).finish()
    }
}

impl Clone for Algebra {
    fn clone(&self) -> Self {
        Algebra::new(self.spec.clone()).expect("validated spec")
    }
}

impl Default for Algebra {
    fn default() -> Self {
        Algebra::heisenberg()
    }
}

fn binom_i(n: i64, k: u32) -> BigInt {
    // generalized binomial, n may be negative
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k as i64 {
        num *= BigInt::from(n - i);
        den *= BigInt::from(i + 1);
    }
    num / den
}

impl Algebra {
    pub fn new(spec: AlgebraSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Algebra {
            spec,
            cache: RwLock::new(HashMap::new()),
            correlators: CorrelatorCache::default(),
        })
    }

    pub fn heisenberg() -> Self {
        Algebra::new(AlgebraSpec::default()).expect("default spec")
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn is_corrupted(&self) -> bool {
        self.spec.commutator_shift != 0
    }

    /// `c(m)` in `[a(m), a(-m)] = c(m)`.
    pub fn bracket(&self, m: i64) -> i64 {
        m + self.spec.commutator_shift * m.signum()
    }

    /// `1`, `a[-1]|0>` and, when enabled, the conformal vector.
    pub fn generators<S: Scalar>(&self) -> Vec<GradedVector<S>> {
        let mut gens = vec![GradedVector::vacuum(), GradedVector::modes(&[1])];
        if self.spec.conformal {
            gens.push(self.conformal_vector());
        }
        gens
    }

    /// `omega = 1/2 a[-1]a[-1]|0>`.
    pub fn conformal_vector<S: Scalar>(&self) -> GradedVector<S> {
        let half = S::from_rational(&BigRational::new(1.into(), 2.into()));
        GradedVector::modes(&[1, 1]).scale(&half)
    }

    pub fn clear_cache(&self) {
        self.cache.write().clear();
        self.correlators.clear();
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().len()
    }

    /// Single mode `a(n)` on a basis state; at most one output term.
    pub fn single_mode(
        &self,
        n: i64,
        part: &Partition,
        sector: &Sector,
    ) -> Option<(Partition, BigRational)> {
        match n.signum() {
            -1 => Some((part.with_part((-n) as u32), BigRational::one())),
            0 => {
                let p = big(&sector.zero_mode());
                if p.is_zero() {
                    None
                } else {
                    Some((part.clone(), p))
                }
            }
            _ => {
                let mult = part.multiplicity(n as u32);
                let c = self.bracket(n);
                if mult == 0 || c == 0 {
                    return None;
                }
                let rest = part.without_part(n as u32)?;
                Some((rest, BigRational::from_integer(BigInt::from(mult as i64 * c))))
            }
        }
    }

    /// `u_n v` for basis states, cached.
    fn basis_mode(&self, u: &Partition, n: i64, v: &Partition, sector: &Sector) -> Arc<ModeTable> {
        let key = (u.clone(), n, v.clone(), *sector);
        if let Some(hit) = self.cache.read().get(&key) {
            return hit.clone();
        }
        let table = Arc::new(self.compute_basis_mode(u, n, v, sector));
        self.cache.write().insert(key, table.clone());
        table
    }

    fn compute_basis_mode(&self, u: &Partition, n: i64, v: &Partition, sector: &Sector) -> ModeTable {
        let derivs: Vec<u32> = u.parts().iter().map(|l| l - 1).collect();
        let target = n + 1 - u.level() as i64;
        let mut acc: BTreeMap<Partition, BigRational> = BTreeMap::new();
        let mut creators = Vec::with_capacity(derivs.len());
        self.enumerate(
            &derivs,
            0,
            target,
            v.clone(),
            BigRational::one(),
            &mut creators,
            sector,
            &mut acc,
        );
        acc.into_iter().filter(|(_, c)| !c.is_zero()).collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate(
        &self,
        derivs: &[u32],
        t: usize,
        rem: i64,
        cur: Partition,
        coef: BigRational,
        creators: &mut Vec<u32>,
        sector: &Sector,
        acc: &mut BTreeMap<Partition, BigRational>,
    ) {
        if t == derivs.len() {
            if rem != 0 {
                return;
            }
            let mut out = cur;
            for &m in creators.iter() {
                out = out.with_part(m);
            }
            let e = acc.entry(out).or_insert_with(BigRational::zero);
            *e += coef;
            return;
        }
        let a = derivs[t];
        let last = t + 1 == derivs.len();
        let capacity = cur.level() as i64;

        // annihilators, including the zero mode
        let mut labels: Vec<i64> = Vec::new();
        if !sector.zero_mode().is_zero() {
            labels.push(0);
        }
        let mut distinct: Vec<u32> = cur.parts().to_vec();
        distinct.dedup();
        labels.extend(distinct.iter().map(|&p| p as i64));
        for m in labels {
            if last && m != rem {
                continue;
            }
            let after = capacity - m;
            if !last && rem - m > after {
                continue;
            }
            let Some((next, c)) = self.single_mode(m, &cur, sector) else {
                continue;
            };
            let b = binom_i(-m - 1, a);
            let coef2 = &coef * &c * BigRational::from_integer(b);
            self.enumerate(derivs, t + 1, rem - m, next, coef2, creators, sector, acc);
        }

        // creators a(-m), m >= a+1
        let hi = -(a as i64 + 1);
        let lo = if last { rem } else { rem - capacity };
        if last {
            if rem > hi {
                return;
            }
        }
        let mut m = hi;
        while m >= lo {
            let b = binom_i(-m - 1, a);
            let coef2 = &coef * BigRational::from_integer(b);
            creators.push((-m) as u32);
            self.enumerate(derivs, t + 1, rem - m, cur.clone(), coef2, creators, sector, acc);
            creators.pop();
            m -= 1;
        }
    }

    /// `u_n v`. `u` must lie in the vacuum sector; `v` may lie in any sector.
    pub fn mode_act<S: Scalar>(
        &self,
        u: &GradedVector<S>,
        n: i64,
        v: &GradedVector<S>,
    ) -> Result<GradedVector<S>> {
        if !u.sector().is_vacuum() {
            return Err(Error::AlgebraSectorRequired(u.sector()));
        }
        let sector = v.sector();
        let mut out = GradedVector::zero(sector);
        for (up, uc) in u.terms() {
            for (vp, vc) in v.terms() {
                let table = self.basis_mode(up, n, vp, &sector);
                let c = uc.clone() * vc.clone();
                for (p, x) in table.iter() {
                    out.add_term(p.clone(), S::from_rational(x) * c.clone());
                }
            }
        }
        Ok(out)
    }

    /// Modes `u_n` of a basis state `u` on a basis state `v`, exact.
    pub fn basis_mode_table(
        &self,
        u: &Partition,
        n: i64,
        v: &Partition,
        sector: &Sector,
    ) -> Vec<(Partition, BigRational)> {
        self.basis_mode(u, n, v, sector).as_ref().clone()
    }

    /// The truncated series `Y(u, z) v`.
    pub fn vertex_series<S: Scalar>(
        &self,
        u: &GradedVector<S>,
        v: &GradedVector<S>,
        policy: &TruncationPolicy,
    ) -> Result<LaurentSeriesTrunc<S>> {
        if !u.sector().is_vacuum() {
            return Err(Error::AlgebraSectorRequired(u.sector()));
        }
        let n0 = certified_n0(u, v);
        // levels of u_n v are wt u + level(v) - n - 1 <= max_weight (above base)
        let max_out = policy.max_weight as i64;
        let min_level = |x: &GradedVector<S>| x.terms().map(|(p, _)| p.level() as i64).min().unwrap_or(0);
        let min_n = min_level(u) + min_level(v) - 1 - max_out;
        let lo = -n0;
        let hi = -min_n - 1;
        let mut coefficients = BTreeMap::new();
        if !u.is_zero() && !v.is_zero() {
            for n in min_n..n0 {
                let c = self.mode_act(u, n, v)?.truncate_levels(policy.max_weight);
                if !c.is_zero() {
                    coefficients.insert(-n - 1, c);
                }
            }
        }
        Ok(LaurentSeriesTrunc {
            sector: v.sector(),
            coefficients,
            lo,
            hi: hi.max(lo),
            policy: policy.clone(),
        })
    }

    /// `L(-1)`, realized as `omega_0` when the conformal vector is enabled
    /// and as `v -> v_{-2} 1` otherwise.
    pub fn translate<S: Scalar>(&self, v: &GradedVector<S>) -> Result<GradedVector<S>> {
        if !v.sector().is_vacuum() {
            return Err(Error::AlgebraSectorRequired(v.sector()));
        }
        if self.spec.conformal {
            self.mode_act(&self.conformal_vector(), 0, v)
        } else {
            self.mode_act(v, -2, &GradedVector::vacuum())
        }
    }

    /// `L(0)` via `omega_1`; requires the conformal vector.
    pub fn l0<S: Scalar>(&self, v: &GradedVector<S>) -> Result<GradedVector<S>> {
        if !self.spec.conformal {
            return Err(Error::Spec("L(0) needs the conformal vector".into()));
        }
        self.mode_act(&self.conformal_vector(), 1, v)
    }

    /// Matrix of `u_n` restricted to the level `from` of a sector:
    /// `(source basis, image)` pairs.
    pub fn mode_matrix(
        &self,
        u: &Partition,
        n: i64,
        from: u32,
        sector: &Sector,
    ) -> Vec<(Partition, Vec<(Partition, BigRational)>)> {
        partitions_of(from)
            .into_iter()
            .map(|p| {
                let img = self.basis_mode_table(u, n, &p, sector);
                (p, img)
            })
            .collect()
    }
}

/// `N0` with `u_n v = 0` for all `n >= N0`: `wt u + level v` (max over terms).
pub fn certified_n0<S: Scalar>(u: &GradedVector<S>, v: &GradedVector<S>) -> i64 {
    u.max_level().unwrap_or(0) as i64 + v.max_level().unwrap_or(0) as i64
}

/// Truncated `sum_e c_e z^e` with vector coefficients. Exponents below `lo`
/// are certified absent; coefficients whose weight exceeds the policy are
/// dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentSeriesTrunc<S> {
    pub sector: Sector,
    pub coefficients: BTreeMap<i64, GradedVector<S>>,
    pub lo: i64,
    pub hi: i64,
    pub policy: TruncationPolicy,
}

impl<S: Scalar> LaurentSeriesTrunc<S> {
    /// Coefficient of `z^e`.
    pub fn coeff(&self, e: i64) -> GradedVector<S> {
        self.coefficients
            .get(&e)
            .cloned()
            .unwrap_or_else(|| GradedVector::zero(self.sector))
    }

    /// The mode `u_n` term, i.e. the coefficient of `z^{-n-1}`.
    pub fn mode(&self, n: i64) -> GradedVector<S> {
        self.coeff(-n - 1)
    }

    pub fn has_negative_powers(&self) -> bool {
        self.coefficients.keys().any(|&e| e < 0)
    }

    /// Termwise `d/dz`.
    pub fn derivative(&self) -> Self {
        let mut coefficients = BTreeMap::new();
        for (&e, c) in &self.coefficients {
            if e != 0 {
                coefficients.insert(e - 1, c.scale(&S::from_i64(e)));
            }
        }
        LaurentSeriesTrunc {
            sector: self.sector,
            coefficients,
            lo: self.lo - 1,
            hi: self.hi - 1,
            policy: self.policy.clone(),
        }
    }
}

/// Weight of `u_n v` for homogeneous inputs.
pub fn mode_weight(wt_u: Weight, n: i64, wt_v: Weight) -> Weight {
    Weight(wt_u.0 + wt_v.0 - Rational64::from_integer(n + 1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub axiom: String,
    pub weight: u32,
    pub cases: usize,
    pub passed: bool,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AxiomReport {
    pub algebra: AlgebraSpec,
    pub max_weight: u32,
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AxiomCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

const MAX_LISTED_FAILURES: usize = 8;

struct CheckAcc {
    axiom: &'static str,
    weight: u32,
    cases: usize,
    failures: Vec<String>,
    failed: usize,
}

impl CheckAcc {
    fn new(axiom: &'static str, weight: u32) -> Self {
        CheckAcc {
            axiom,
            weight,
            cases: 0,
            failures: Vec::new(),
            failed: 0,
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < MAX_LISTED_FAILURES {
                self.failures.push(what());
            }
        }
    }

    fn finish(mut self) -> AxiomCheck {
        if self.failed > self.failures.len() {
            self.failures
                .push(format!("... {} failures in total", self.failed));
        }
        AxiomCheck {
            axiom: self.axiom.into(),
            weight: self.weight,
            cases: self.cases,
            passed: self.failed == 0,
            failures: self.failures,
        }
    }
}

type Q = BigRational;

/// Exact checks of the vacuum, creation, `L(-1)`-derivative and weak
/// commutativity axioms on all basis states of weight `1..=max_weight`.
pub fn verify_axioms(spec: &AlgebraSpec, max_weight: u32) -> Result<AxiomReport> {
    let alg = Algebra::new(spec.clone())?;
    let gens: Vec<GradedVector<Q>> = alg.generators();
    let mut checks = Vec::new();
    for h in 1..=max_weight {
        let states: Vec<GradedVector<Q>> = partitions_of(h)
            .into_iter()
            .map(|p| GradedVector::basis(p, Sector::Vacuum))
            .collect();

        // vacuum: 1_n v = delta_{n,-1} v
        let mut acc = CheckAcc::new("vacuum", h);
        let one = GradedVector::<Q>::vacuum();
        for v in &states {
            for n in -(h as i64) - 2..=(h as i64) + 1 {
                let got = alg.mode_act(&one, n, v)?;
                let want = if n == -1 { v.clone() } else { GradedVector::zero(Sector::Vacuum) };
                acc.record(got == want, || format!("1_{n} {v} = {got}"));
            }
        }
        checks.push(acc.finish());

        // creation: u_n 1 = 0 for n >= 0 and u_{-1} 1 = u
        let mut acc = CheckAcc::new("creation", h);
        for u in &states {
            for n in 0..=(h as i64) + 1 {
                let got = alg.mode_act(u, n, &one)?;
                acc.record(got.is_zero(), || format!("({u})_{n} 1 = {got}"));
            }
            let got = alg.mode_act(u, -1, &one)?;
            acc.record(&got == u, || format!("({u})_-1 1 = {got}"));
        }
        checks.push(acc.finish());

        // derivative: (L(-1)u)_n v = -n u_{n-1} v, for wt u + wt v = h
        let mut acc = CheckAcc::new("translation", h);
        for hu in 0..=h {
            let hv = h - hu;
            for up in partitions_of(hu) {
                let u = GradedVector::<Q>::basis(up, Sector::Vacuum);
                let tu = alg.translate(&u)?;
                let direct = alg.mode_act(&u, -2, &one)?;
                acc.record(tu == direct, || format!("L(-1)({u}) = {tu}, u_-2 1 = {direct}"));
                for vp in partitions_of(hv) {
                    let v = GradedVector::<Q>::basis(vp, Sector::Vacuum);
                    for n in -2..=(h as i64) + 1 {
                        let lhs = alg.mode_act(&tu, n, &v)?;
                        let rhs = alg.mode_act(&u, n - 1, &v)?.scale(&Q::from_integer((-n).into()));
                        acc.record(lhs == rhs, || {
                            format!("(L(-1){u})_{n} {v} = {lhs} but -n u_{{n-1}} v = {rhs}")
                        });
                    }
                }
            }
        }
        checks.push(acc.finish());

        // weak commutativity among generators on every basis state of weight h
        let mut acc = CheckAcc::new("locality", h);
        let window = max_weight as i64 + 2;
        for u in &gens {
            for w in &gens {
                let k = u.max_level().unwrap_or(0) as i64 + w.max_level().unwrap_or(0) as i64;
                for v in &states {
                    for m in -window..=window {
                        for n in -window..=window {
                            let out_weight = h as i64 - m - n - 2;
                            if out_weight < 0 || out_weight > max_weight as i64 + 2 {
                                continue;
                            }
                            let mut total = GradedVector::<Q>::zero(Sector::Vacuum);
                            for i in 0..=k {
                                let c = Q::from_integer(binom_i(k, i as u32))
                                    * if i % 2 == 0 { Q::one() } else { -Q::one() };
                                let a = m + k - i;
                                let b = n + i;
                                let uw = alg.mode_act(u, a, &alg.mode_act(w, b, v)?)?;
                                let wu = alg.mode_act(w, b, &alg.mode_act(u, a, v)?)?;
                                total.add_assign_scaled(&uw.sub(&wu)?, &c)?;
                            }
                            acc.record(total.is_zero(), || {
                                format!("(z1-z2)^{k}[Y({u},z1),Y({w},z2)] on {v}, modes ({m},{n}): {total}")
                            });
                        }
                    }
                }
            }
        }
        checks.push(acc.finish());

        if spec.conformal {
            // L(0) acts by the weight, on both the vacuum sector and a module
            let mut acc = CheckAcc::new("grading", h);
            for v in &states {
                let got = alg.l0(v)?;
                let want = v.scale(&Q::from_integer((h as i64).into()));
                acc.record(got == want, || format!("L(0) {v} = {got}"));
            }
            checks.push(acc.finish());
        }
    }
    Ok(AxiomReport {
        algebra: spec.clone(),
        max_weight,
        checks,
    })
}
