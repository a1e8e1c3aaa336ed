//! Functionals on the algebra and on spaces of correlation functions: the
//! family `lambda = v' o s^{L(0)}`, the maps `g_k`, `iota`, `gamma`, contour
//! and point-evaluation functionals, and the elements `e_k(us (x) v (x) mu)`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::correlator::{correlator_value, q_vector, reconstruct_rational, QRoute, RationalCorrelator};
use crate::error::{Error, Result};
use crate::freefield::{check_configuration, check_unit_configuration, POINT_TOLERANCE};
use crate::graded::{pair, partitions_of, DualVector, GradedVector, Sector, TruncationPolicy, Weight};
use crate::poly::Poly;
use crate::quadrature::{contour_integral_scalar, Circle, QuadratureRule};
use crate::scalar::{Scalar, ScaleFactor, C64};
use crate::tail::TailReport;
use crate::vertex::Algebra;

type Q = BigRational;

/// A linear functional on a graded space, evaluated on finite vectors.
pub trait VFunctional: Sync {
    fn sector(&self) -> Sector;
    fn eval(&self, alg: &Algebra, v: &GradedVector<C64>) -> Result<C64>;
}

/// `lambda(v) = <base, s^{L(0)} v>` with `0 < s <= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalG<S> {
    pub base: DualVector<S>,
    pub s: ScaleFactor,
}

impl<S: Scalar> FunctionalG<S> {
    pub fn new(base: DualVector<S>, s: ScaleFactor) -> Result<Self> {
        s.check_positive()?;
        if s.to_f64() > 1.0 {
            return Err(Error::NonPositiveScale(format!("damping {s} must lie in (0, 1]")));
        }
        Ok(FunctionalG { base, s })
    }

    /// An element of the graded dual, undamped.
    pub fn dual(base: DualVector<S>) -> Self {
        FunctionalG {
            base,
            s: ScaleFactor::one(),
        }
    }

    pub fn sector(&self) -> Sector {
        self.base.sector()
    }

    pub fn max_level(&self) -> u32 {
        self.base.as_vector().max_level().unwrap_or(0)
    }

    /// The finite dual `base o s^{L(0)}`.
    pub fn effective_dual(&self) -> Result<DualVector<S>> {
        self.base.scale_l0(&self.s)
    }

    pub fn apply(&self, v: &GradedVector<S>) -> Result<S> {
        pair(&self.effective_dual()?, v)
    }

    pub fn to_complex(&self) -> FunctionalG<C64> {
        FunctionalG {
            base: self.base.to_complex(),
            s: self.s.clone(),
        }
    }

    /// The functional `w -> lambda(u_n w)`, again of the form `base' o s^{L(0)}`.
    pub fn mode_transpose(&self, alg: &Algebra, u: &GradedVector<S>, n: i64) -> Result<Self> {
        if !u.sector().is_vacuum() {
            return Err(Error::AlgebraSectorRequired(u.sector()));
        }
        let sector = self.sector();
        let mut base = GradedVector::zero(sector);
        for (h, uh) in u.homogeneous_parts() {
            // s^{L(0)} u_n = s^{h-n-1} u_n s^{L(0)}
            let damping = S::weight_power(&self.s, &Weight::integer(h as i64 - n - 1))?;
            for (lp, bp) in self.base.as_vector().homogeneous_parts() {
                let src = lp as i64 - h as i64 + n + 1;
                if src < 0 {
                    continue;
                }
                for y in partitions_of(src as u32) {
                    let image = alg.mode_act(&uh, n, &GradedVector::basis(y.clone(), sector))?;
                    let c = pair(&DualVector::from_vector(bp.clone()), &image)?;
                    if !c.is_zero() {
                        base.add_term(y, c * damping.clone());
                    }
                }
            }
        }
        Ok(FunctionalG {
            base: DualVector::from_vector(base),
            s: self.s.clone(),
        })
    }
}

impl VFunctional for FunctionalG<C64> {
    fn sector(&self) -> Sector {
        self.base.sector()
    }

    fn eval(&self, _alg: &Algebra, v: &GradedVector<C64>) -> Result<C64> {
        self.apply(v)
    }
}

/// `gamma` on the functional side: `w -> lambda(u0_{-1} w)`.
pub fn gamma_apply<S: Scalar>(alg: &Algebra, u0: &GradedVector<S>, lambda: &FunctionalG<S>) -> Result<FunctionalG<S>> {
    lambda.mode_transpose(alg, u0, -1)
}

/// `g_k(lambda (x) us (x) v)` as an exact rational function.
pub fn gk_exact(
    alg: &Algebra,
    lambda: &FunctionalG<Q>,
    us: &[GradedVector<Q>],
    v: &GradedVector<Q>,
) -> Result<RationalCorrelator> {
    reconstruct_rational(alg, &lambda.effective_dual()?, us, v)
}

fn dual_level<S: Scalar>(d: &DualVector<S>, level: u32) -> DualVector<S> {
    DualVector::from_vector(d.as_vector().project_level(level))
}

/// `sum_n lambda(P_n Q(us, v; z))` at a point of `M^k_{<1}`, one increment
/// per level `n <= policy.max_weight`.
pub fn g_k_eval(
    alg: &Algebra,
    lambda: &FunctionalG<C64>,
    us: &[GradedVector<C64>],
    v: &GradedVector<C64>,
    point: &[C64],
    policy: &TruncationPolicy,
) -> Result<TailReport> {
    policy.validate()?;
    check_unit_configuration(point, POINT_TOLERANCE)?;
    let dual = lambda.effective_dual()?;
    let mut increments = Vec::with_capacity(policy.max_weight as usize + 1);
    for n in 0..=policy.max_weight {
        let dn = dual_level(&dual, n);
        if dn.as_vector().is_zero() {
            increments.push(C64::zero());
        } else {
            increments.push(correlator_value(alg, &dn, us, v, point)?);
        }
    }
    Ok(TailReport::from_increments(&increments, policy))
}

/// The same sum for an arbitrary functional, through the components of
/// `Q(us, v; z)`.
pub fn g_k_eval_functional(
    alg: &Algebra,
    lambda: &dyn VFunctional,
    us: &[GradedVector<C64>],
    v: &GradedVector<C64>,
    point: &[C64],
    policy: &TruncationPolicy,
) -> Result<TailReport> {
    policy.validate()?;
    check_unit_configuration(point, POINT_TOLERANCE)?;
    lambda.sector().expect(&v.sector())?;
    let route = if alg.is_corrupted() { QRoute::Rational } else { QRoute::FreeField };
    let q = q_vector(alg, us, v, point, policy, route)?;
    let mut increments = Vec::with_capacity(policy.max_weight as usize + 1);
    for n in 0..=policy.max_weight {
        let part = q.project_level(n);
        increments.push(if part.is_zero() { C64::zero() } else { lambda.eval(alg, &part)? });
    }
    Ok(TailReport::from_increments(&increments, policy))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IotaReport {
    pub reference: C64,
    pub values: Vec<C64>,
    pub variation: f64,
}

/// Values of `g_{k+1}(lambda (x) u0 (x) us (x) v)(z0, point)` over the `z0`
/// samples, against `g_k(lambda (x) us (x) v)(point)`.
pub fn iota_variation(
    alg: &Algebra,
    lambda: &FunctionalG<C64>,
    u0: &GradedVector<C64>,
    us: &[GradedVector<C64>],
    v: &GradedVector<C64>,
    z0_samples: &[C64],
    point: &[C64],
    policy: &TruncationPolicy,
) -> Result<IotaReport> {
    let reference = g_k_eval(alg, lambda, us, v, point, policy)?.value;
    let mut extended = vec![u0.clone()];
    extended.extend_from_slice(us);
    let mut values = Vec::with_capacity(z0_samples.len());
    for z0 in z0_samples {
        let mut p = vec![*z0];
        p.extend_from_slice(point);
        values.push(g_k_eval(alg, lambda, &extended, v, &p, policy)?.value);
    }
    let variation = values.iter().map(|x| (x - reference).norm()).fold(0.0, f64::max);
    Ok(IotaReport {
        reference,
        values,
        variation,
    })
}

/// `iota_{F_k}`: prepending the vacuum leaves the value unchanged for every `z0`.
pub fn iota_independence_check(
    alg: &Algebra,
    lambda: &FunctionalG<C64>,
    us: &[GradedVector<C64>],
    v: &GradedVector<C64>,
    z0_samples: &[C64],
    point: &[C64],
    policy: &TruncationPolicy,
) -> Result<IotaReport> {
    iota_variation(alg, lambda, &GradedVector::vacuum(), us, v, z0_samples, point, policy)
}

fn binom(n: i64, k: i64) -> Q {
    let mut acc = Q::one();
    for i in 0..k {
        acc = acc * Q::from_integer(BigInt::from(n - i)) / Q::from_integer(BigInt::from(i + 1));
    }
    acc
}

/// Compositions of `total` into `slots` nonnegative parts.
fn compositions(total: u32, slots: usize) -> Vec<Vec<u32>> {
    if slots == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, slots - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// The coefficient of `z0^0` in the expansion of `f` at `z0 = infinity`,
/// i.e. `(1/2 pi i) oint z0^{-1} f dz0` on a circle enclosing every other
/// point. Variable 0 is removed.
pub fn gamma_constant_term(f: &RationalCorrelator) -> RationalCorrelator {
    let k1 = f.nvars();
    assert!(k1 >= 1, "needs a variable to integrate");
    let k = k1 - 1;
    let a0 = f.zero_poles()[0] as i64;
    let partners: Vec<(usize, u32)> = (1..k1)
        .filter_map(|j| {
            let b = f.diag_order(0, j);
            (b > 0).then_some((j, b))
        })
        .collect();
    let bsum: i64 = partners.iter().map(|p| p.1 as i64).sum();
    let mut num = Poly::zero(k);
    for (e, c) in f.numerator().terms() {
        let t_total = e[0] as i64 - a0 - bsum;
        if t_total < 0 {
            continue;
        }
        for ts in compositions(t_total as u32, partners.len()) {
            // (z0 - zj)^{-b} = sum_t binom(b+t-1, t) zj^t z0^{-b-t}
            let mut coef = c.clone();
            let mut exps: Vec<u32> = e[1..].to_vec();
            for (&(j, b), &t) in partners.iter().zip(&ts) {
                coef *= binom(b as i64 + t as i64 - 1, t as i64);
                exps[j - 1] += t;
            }
            num.add_term(exps, coef);
        }
    }
    let zero_poles = f.zero_poles()[1..].to_vec();
    let diag: BTreeMap<(usize, usize), u32> = f
        .diag_poles()
        .iter()
        .filter(|((i, _), _)| *i > 0)
        .map(|(&(i, j), &b)| ((i - 1, j - 1), b))
        .collect();
    RationalCorrelator::new(num, zero_poles, diag)
}

/// `(1/2 pi i) oint_{|z0| = eps} z0^{-1} g_{k+1}(lambda (x) u0 (x) us (x) v)(z0, point) dz0`
/// with `eps` halfway between the outermost point and the unit circle.
pub fn gamma_contour(
    alg: &Algebra,
    lambda: &FunctionalG<C64>,
    u0: &GradedVector<C64>,
    us: &[GradedVector<C64>],
    v: &GradedVector<C64>,
    point: &[C64],
    rule: &QuadratureRule,
) -> Result<C64> {
    check_unit_configuration(point, POINT_TOLERANCE)?;
    let outer = point.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let radius = (outer + 1.0) / 2.0;
    let dual = lambda.effective_dual()?;
    let mut extended = vec![u0.clone()];
    extended.extend_from_slice(us);
    let (value, _) = contour_integral_scalar(&[Circle { m: -1, radius }], rule, |w| {
        let mut p = vec![w[0]];
        p.extend_from_slice(point);
        correlator_value(alg, &dual, &extended, v, &p)
    })?;
    Ok(value)
}

/// One variable of a functional on `F_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Slot {
    /// `(1/2 pi i) oint_{|z| = radius} z^m (.) dz`.
    Contour { m: i64, radius: f64 },
    /// Evaluation at a fixed point.
    Point(C64),
}

/// A continuous functional on `F_k`: iterated contour extractions, point
/// evaluations, or a mix.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalF {
    slots: Vec<Slot>,
}

/// How a contour slot is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum FRoute {
    /// Contour slots become mode transposes on `lambda`.
    Algebraic,
    /// Trapezoid rule on the circles.
    Quadrature(QuadratureRule),
}

impl FunctionalF {
    pub fn new(slots: Vec<Slot>) -> Result<Self> {
        let mut radii = Vec::new();
        let mut points = Vec::new();
        for s in &slots {
            match *s {
                Slot::Contour { radius, .. } => {
                    if !(radius > 0.0 && radius < 1.0) {
                        return Err(Error::InvalidPolicy(format!("contour radius {radius} outside (0, 1)")));
                    }
                    radii.push(radius);
                }
                Slot::Point(p) => points.push(p),
            }
        }
        if radii.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidPolicy(format!("contour radii {radii:?} must decrease strictly")));
        }
        check_unit_configuration(&points, POINT_TOLERANCE)?;
        for r in &radii {
            if points.iter().any(|p| (p.norm() - r).abs() <= POINT_TOLERANCE) {
                return Err(Error::NotInConfigurationSpace(format!("evaluation point on the circle |z| = {r}")));
            }
        }
        Ok(FunctionalF { slots })
    }

    /// `mu_{m_1, ..., m_k}` on circles of radii `eps_1 > ... > eps_k`.
    pub fn contour(ms: &[i64], radii: &[f64]) -> Result<Self> {
        if ms.len() != radii.len() {
            return Err(Error::ArityMismatch {
                expected: ms.len(),
                found: radii.len(),
            });
        }
        FunctionalF::new(ms.iter().zip(radii).map(|(&m, &radius)| Slot::Contour { m, radius }).collect())
    }

    pub fn point(p: &[C64]) -> Result<Self> {
        FunctionalF::new(p.iter().map(|&z| Slot::Point(z)).collect())
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn arity(&self) -> usize {
        self.slots.len()
    }

    pub fn is_contour(&self) -> bool {
        self.slots.iter().all(|s| matches!(s, Slot::Contour { .. }))
    }

    fn outer_modulus(&self) -> f64 {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Contour { radius, .. } => *radius,
                Slot::Point(p) => p.norm(),
            })
            .fold(0.0, f64::max)
    }

    /// `gamma_k^* mu`: the vacuum-slot extraction `z0^{-1}` prepended on a
    /// circle outside every other slot.
    pub fn gamma_adjoint(&self) -> FunctionalF {
        let radius = (self.outer_modulus() + 1.0) / 2.0;
        let mut slots = vec![Slot::Contour { m: -1, radius }];
        slots.extend_from_slice(&self.slots);
        FunctionalF { slots }
    }

    /// `mu(f)` for a function on the slots, by quadrature on the contour slots.
    pub fn apply_to<F>(&self, rule: &QuadratureRule, f: F) -> Result<C64>
    where
        F: Fn(&[C64]) -> Result<C64> + Sync,
    {
        let circles: Vec<Circle> = self
            .slots
            .iter()
            .filter_map(|s| match *s {
                Slot::Contour { m, radius } => Some(Circle { m, radius }),
                Slot::Point(_) => None,
            })
            .collect();
        let (value, _) = contour_integral_scalar(&circles, rule, |w| f(&self.fill(w)))?;
        Ok(value)
    }

    /// Full point from values of the contour variables.
    pub fn fill(&self, w: &[C64]) -> Vec<C64> {
        let mut it = w.iter();
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Contour { .. } => *it.next().expect("one value per contour slot"),
                Slot::Point(p) => *p,
            })
            .collect()
    }
}

/// `mu(g_k(lambda (x) us (x) v))`.
pub fn functional_f_apply(
    alg: &Algebra,
    mu: &FunctionalF,
    lambda: &FunctionalG<C64>,
    us: &[GradedVector<C64>],
    v: &GradedVector<C64>,
    route: &FRoute,
) -> Result<C64> {
    if mu.arity() != us.len() {
        return Err(Error::ArityMismatch {
            expected: mu.arity(),
            found: us.len(),
        });
    }
    match route {
        FRoute::Quadrature(rule) => {
            let dual = lambda.effective_dual()?;
            mu.apply_to(rule, |z| correlator_value(alg, &dual, us, v, z))
        }
        FRoute::Algebraic => {
            // peel the leading contour slots, outermost first
            let lead = mu.slots.iter().take_while(|s| matches!(s, Slot::Contour { .. })).count();
            let points: Vec<C64> = mu.slots[lead..]
                .iter()
                .map(|s| match s {
                    Slot::Point(p) => Ok(*p),
                    Slot::Contour { .. } => Err(Error::RouteUnavailable(
                        "contour slot after an evaluation point".into(),
                    )),
                })
                .collect::<Result<_>>()?;
            let inner = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
            let mut lam = lambda.clone();
            for (slot, u) in mu.slots[..lead].iter().zip(us) {
                let Slot::Contour { m, radius } = *slot else { unreachable!() };
                if radius <= inner {
                    return Err(Error::RouteUnavailable(format!(
                        "contour |z| = {radius} does not enclose the evaluation points"
                    )));
                }
                lam = lam.mode_transpose(alg, u, m)?;
            }
            let rest = &us[lead..];
            if rest.is_empty() {
                lam.apply(v)
            } else {
                check_configuration(&points, POINT_TOLERANCE)?;
                correlator_value(alg, &lam.effective_dual()?, rest, v, &points)
            }
        }
    }
}

/// Contour functionals in exact arithmetic: `lambda(u1_{m1} ... uk_{mk} v)`.
pub fn functional_f_exact(
    alg: &Algebra,
    ms: &[i64],
    lambda: &FunctionalG<Q>,
    us: &[GradedVector<Q>],
    v: &GradedVector<Q>,
) -> Result<Q> {
    lambda.apply(&modes_on(alg, us, ms, v)?)
}

/// `u1_{m1} ... uk_{mk} v`.
pub fn modes_on<S: Scalar>(alg: &Algebra, us: &[GradedVector<S>], ms: &[i64], v: &GradedVector<S>) -> Result<GradedVector<S>> {
    if ms.len() != us.len() {
        return Err(Error::ArityMismatch {
            expected: ms.len(),
            found: us.len(),
        });
    }
    let mut w = v.clone();
    for (u, &m) in us.iter().zip(ms).rev() {
        w = alg.mode_act(u, m, &w)?;
    }
    Ok(w)
}

/// `e_k(u_1 (x) ... (x) u_k (x) v (x) mu)`: the functional `lambda -> mu(g_k(lambda (x) us (x) v))`.
#[derive(Clone, Debug, PartialEq)]
pub struct EkElement {
    pub us: Vec<GradedVector<C64>>,
    pub v: GradedVector<C64>,
    pub mu: FunctionalF,
}

impl EkElement {
    pub fn new(us: Vec<GradedVector<C64>>, v: GradedVector<C64>, mu: FunctionalF) -> Result<Self> {
        if mu.arity() != us.len() {
            return Err(Error::ArityMismatch {
                expected: mu.arity(),
                found: us.len(),
            });
        }
        for u in &us {
            if !u.sector().is_vacuum() {
                return Err(Error::AlgebraSectorRequired(u.sector()));
            }
        }
        Ok(EkElement { us, v, mu })
    }

    pub fn apply(&self, alg: &Algebra, lambda: &FunctionalG<C64>, route: &FRoute) -> Result<C64> {
        functional_f_apply(alg, &self.mu, lambda, &self.us, &self.v, route)
    }

    /// The same element seen in `G_{k+1}`: `e_{k+1}(1 (x) us (x) v (x) gamma^* mu)`.
    pub fn lift(&self) -> EkElement {
        let mut us = vec![GradedVector::vacuum()];
        us.extend(self.us.iter().cloned());
        EkElement {
            us,
            v: self.v.clone(),
            mu: self.mu.gamma_adjoint(),
        }
    }

    /// For contour functionals the element is the vector `u1_{m1} ... uk_{mk} v`.
    pub fn to_vector(&self, alg: &Algebra) -> Result<GradedVector<C64>> {
        let ms: Vec<i64> = self
            .mu
            .slots()
            .iter()
            .map(|s| match s {
                Slot::Contour { m, .. } => Ok(*m),
                Slot::Point(_) => Err(Error::RouteUnavailable("point slots do not give a vector".into())),
            })
            .collect::<Result<_>>()?;
        modes_on(alg, &self.us, &ms, &self.v)
    }
}
