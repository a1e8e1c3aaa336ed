//! Sewing along `D(z; r1, r2)`: the operator `Y(r1^{L(0)} ., z) r2^{L(0)}`,
//! the diamond pullback of functionals, and the checks built on them.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::completion::{EkElement, FunctionalF, FunctionalG, Slot, VFunctional};
use crate::correlator::{correlator_value, reconstruct_rational};
use crate::error::{Error, Result};
use crate::freefield::{check_unit_configuration, q_free_field, POINT_TOLERANCE};
use crate::graded::{pair, partitions_up_to, scale_l0, DualVector, GradedVector, Partition, TruncationPolicy};
use crate::quadrature::{contour_integral, Circle, QuadratureRule};
use crate::scalar::{ScaleFactor, C64};
use crate::tail::TailReport;
use crate::vertex::Algebra;

type Q = BigRational;

/// The disk `D(z; r1, r2)`: unit disk minus `|w - z| < r1` and `|w| < r2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub z: C64,
    pub r1: f64,
    pub r2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiskValidity {
    /// `r2 + 2 r1 < 1` and `r2 < |z| < 1`.
    pub inequalities: bool,
    /// `|z| - r1 > r2` and `|z| + r1 < 1`.
    pub geometric: bool,
}

impl Disk {
    pub fn new(z: C64, r1: f64, r2: f64) -> Self {
        Disk { z, r1, r2 }
    }

    fn positive(&self) -> bool {
        self.r1 > 0.0 && self.r2 > 0.0 && self.z.re.is_finite() && self.z.im.is_finite()
    }

    pub fn inequalities_hold(&self) -> bool {
        let a = self.z.norm();
        self.positive() && self.r2 + 2.0 * self.r1 < 1.0 && self.r2 < a && a < 1.0
    }

    pub fn geometric_valid(&self) -> bool {
        let a = self.z.norm();
        self.positive() && a - self.r1 > self.r2 && a + self.r1 < 1.0
    }

    pub fn validity(&self) -> DiskValidity {
        DiskValidity {
            inequalities: self.inequalities_hold(),
            geometric: self.geometric_valid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.validity();
        if v.inequalities && v.geometric {
            Ok(())
        } else {
            Err(Error::InvalidDisk(format!(
                "z = {}, r1 = {}, r2 = {} (inequalities {}, disjointness {})",
                self.z, self.r1, self.r2, v.inequalities, v.geometric
            )))
        }
    }
}

/// Levels `<= max_level` of `Y(u, z) w`.
pub fn act_y(alg: &Algebra, u: &GradedVector<C64>, z: C64, w: &GradedVector<C64>, max_level: u32) -> Result<GradedVector<C64>> {
    if !u.sector().is_vacuum() {
        return Err(Error::AlgebraSectorRequired(u.sector()));
    }
    if !alg.is_corrupted() {
        return q_free_field(&[u.clone()], w, &[z], max_level);
    }
    let mut out = GradedVector::zero(w.sector());
    for (h, uh) in u.homogeneous_parts() {
        for (lw, wl) in w.homogeneous_parts() {
            for target in 0..=max_level {
                let n = h as i64 + lw as i64 - 1 - target as i64;
                let part = alg.mode_act(&uh, n, &wl)?;
                out.add_assign_scaled(&part, &z.powi(-(n as i32) - 1))?;
            }
        }
    }
    Ok(out)
}

fn real(x: f64) -> ScaleFactor {
    ScaleFactor::Real(x)
}

/// `u <> lambda`: `v -> sum_n lambda(P_n Y(r1^{L(0)} u, z) r2^{L(0)} v)`.
#[derive(Clone, Debug)]
pub struct Diamond {
    scaled_u: GradedVector<C64>,
    lambda: FunctionalG<C64>,
    disk: Disk,
    policy: TruncationPolicy,
}

pub fn diamond(u: &GradedVector<C64>, lambda: &FunctionalG<C64>, d: &Disk, policy: &TruncationPolicy) -> Result<Diamond> {
    d.validate()?;
    policy.validate()?;
    if !u.sector().is_vacuum() {
        return Err(Error::AlgebraSectorRequired(u.sector()));
    }
    Ok(Diamond {
        scaled_u: scale_l0(&real(d.r1), u)?,
        lambda: lambda.clone(),
        disk: *d,
        policy: policy.clone(),
    })
}

impl Diamond {
    pub fn disk(&self) -> &Disk {
        &self.disk
    }

    /// The sum over output levels with its tail diagnostics.
    pub fn apply_report(&self, alg: &Algebra, v: &GradedVector<C64>) -> Result<TailReport> {
        self.lambda.sector().expect(&v.sector())?;
        let top = self.policy.max_weight.min(self.lambda.max_level());
        let w = scale_l0(&real(self.disk.r2), v)?;
        let y = act_y(alg, &self.scaled_u, self.disk.z, &w, top)?;
        let dual = self.lambda.effective_dual()?;
        let mut increments = Vec::with_capacity(self.policy.max_weight as usize + 1);
        for n in 0..=self.policy.max_weight {
            increments.push(if n <= top { pair(&dual, &y.project_level(n))? } else { C64::zero() });
        }
        Ok(TailReport::from_increments(&increments, &self.policy))
    }
}

impl VFunctional for Diamond {
    fn sector(&self) -> crate::graded::Sector {
        self.lambda.sector()
    }

    fn eval(&self, alg: &Algebra, v: &GradedVector<C64>) -> Result<C64> {
        Ok(self.apply_report(alg, v)?.value)
    }
}

#[derive(Clone, Debug)]
pub struct FubiniReport {
    /// Outer sum over the level `m` of `Q(us, v; point)`.
    pub order_a: TailReport,
    /// Outer sum over the output level `n`; one inner report per `n`.
    pub order_b: Vec<TailReport>,
    pub value_b: C64,
    /// `g_{k+1}(lambda (x) r1 u (x) r2 us (x) r2 v)(z, r2 point)`.
    pub closed_form: C64,
    pub difference: f64,
    pub closed_form_error: f64,
}

impl FubiniReport {
    pub fn agree(&self, tol: f64) -> bool {
        let scale = self.order_a.value.norm().max(1.0);
        self.difference <= tol * scale && self.closed_form_error <= tol * scale
    }
}

/// Both iteration orders of `sum_{m,n} lambda(P_n Y(r1^{L(0)} u, z) r2^{L(0)} P_m Q(us, v; point))`.
#[allow(clippy::too_many_arguments)]
pub fn fubini_check(
    alg: &Algebra,
    lambda: &FunctionalG<C64>,
    u: &GradedVector<C64>,
    us: &[GradedVector<C64>],
    v: &GradedVector<C64>,
    d: &Disk,
    point: &[C64],
    policy: &TruncationPolicy,
) -> Result<FubiniReport> {
    let dia = diamond(u, lambda, d, policy)?;
    check_unit_configuration(point, POINT_TOLERANCE)?;
    let r2 = real(d.r2);
    let top = lambda.max_level().min(policy.max_weight);
    let dual = lambda.effective_dual()?;
    let m_max = policy.max_weight;

    // order A: outer m, r2^{L(0)} applied after the projection
    let q = q_free_field(us, v, point, m_max)?;
    let mut inc_a = Vec::new();
    for m in 0..=m_max {
        let w = scale_l0(&r2, &q.project_level(m))?;
        let y = act_y(alg, &dia.scaled_u, d.z, &w, top)?;
        inc_a.push(pair(&dual, &y)?);
    }
    let order_a = TailReport::from_increments(&inc_a, policy);

    // order B: outer n, with r2^{L(0)} Q(us, v; z) = Q(r2 us, r2 v; r2 z)
    let us2: Vec<GradedVector<C64>> = us.iter().map(|x| scale_l0(&r2, x)).collect::<Result<_>>()?;
    let v2 = scale_l0(&r2, v)?;
    let point2: Vec<C64> = point.iter().map(|z| z * d.r2).collect();
    let q2 = q_free_field(&us2, &v2, &point2, m_max)?;
    let images: Vec<GradedVector<C64>> = (0..=m_max)
        .map(|m| act_y(alg, &dia.scaled_u, d.z, &q2.project_level(m), top))
        .collect::<Result<_>>()?;
    let mut order_b = Vec::new();
    let mut value_b = C64::zero();
    for n in 0..=top {
        let dn = DualVector::from_vector(dual.as_vector().project_level(n));
        let inner: Vec<C64> = images
            .iter()
            .map(|y| pair(&dn, &y.project_level(n)))
            .collect::<Result<_>>()?;
        let rep = TailReport::from_increments(&inner, policy);
        value_b += rep.value;
        order_b.push(rep);
    }

    let mut ins = vec![dia.scaled_u.clone()];
    ins.extend(us2.iter().cloned());
    let mut pts = vec![d.z];
    pts.extend(point2.iter().copied());
    let closed_form = correlator_value(alg, &dual, &ins, &v2, &pts)?;
    Ok(FubiniReport {
        difference: (order_a.value - value_b).norm(),
        closed_form_error: (order_a.value - closed_form).norm(),
        order_a,
        order_b,
        value_b,
        closed_form,
    })
}

/// Levels `<= policy.max_weight` of `Y(r1^{L(0)} h1, z) r2^{L(0)} h2`, with
/// the per-level l1 norms as increments.
pub fn sew_vectors(
    alg: &Algebra,
    h1: &GradedVector<C64>,
    h2: &GradedVector<C64>,
    d: &Disk,
    policy: &TruncationPolicy,
) -> Result<(GradedVector<C64>, TailReport)> {
    d.validate()?;
    policy.validate()?;
    let a = scale_l0(&real(d.r1), h1)?;
    let b = scale_l0(&real(d.r2), h2)?;
    let out = act_y(alg, &a, d.z, &b, policy.max_weight)?;
    let increments: Vec<C64> = (0..=policy.max_weight)
        .map(|n| C64::new(out.project_level(n).terms().map(|(_, c)| c.norm()).sum(), 0.0))
        .collect();
    let report = TailReport::from_increments(&increments, policy);
    Ok((out, report))
}

fn shifted_point(d: &Disk, zeta: &[C64], eta: &[C64]) -> Result<Vec<C64>> {
    let mut p: Vec<C64> = zeta.iter().map(|x| d.z + x * d.r1).collect();
    p.push(d.z);
    p.extend(eta.iter().map(|x| x * d.r2));
    check_unit_configuration(&p, POINT_TOLERANCE).map_err(|e| Error::DegenerateSewingGeometry(e.to_string()))?;
    Ok(p)
}

#[derive(Clone, Debug)]
pub struct SewingIdentityReport {
    pub lhs: C64,
    pub rhs: C64,
    pub relative_error: f64,
    /// Increments indexed by `max(p, q)`.
    pub tail: TailReport,
}

/// `sum_{p,q} lambda(Y(P_p Q(r1 us, r1 u; r1 zeta), z) P_q Q(r2 vs, r2 v; r2 eta))`
/// against `g_{k+l+1}` at `(z + r1 zeta, z, r2 eta)`.
#[allow(clippy::too_many_arguments)]
pub fn sewing_identity_check(
    alg: &Algebra,
    lambda: &FunctionalG<C64>,
    us: &[GradedVector<C64>],
    u: &GradedVector<C64>,
    vs: &[GradedVector<C64>],
    v: &GradedVector<C64>,
    d: &Disk,
    zeta: &[C64],
    eta: &[C64],
    policy: &TruncationPolicy,
) -> Result<SewingIdentityReport> {
    d.validate()?;
    policy.validate()?;
    check_unit_configuration(zeta, POINT_TOLERANCE)?;
    check_unit_configuration(eta, POINT_TOLERANCE)?;
    let point = shifted_point(d, zeta, eta)?;
    let (r1, r2) = (real(d.r1), real(d.r2));
    let n = policy.max_weight;
    let us1: Vec<GradedVector<C64>> = us.iter().map(|x| scale_l0(&r1, x)).collect::<Result<_>>()?;
    let u1 = scale_l0(&r1, u)?;
    let vs2: Vec<GradedVector<C64>> = vs.iter().map(|x| scale_l0(&r2, x)).collect::<Result<_>>()?;
    let v2 = scale_l0(&r2, v)?;
    let zeta1: Vec<C64> = zeta.iter().map(|x| x * d.r1).collect();
    let eta2: Vec<C64> = eta.iter().map(|x| x * d.r2).collect();
    let a = q_free_field(&us1, &u1, &zeta1, n)?;
    let b = q_free_field(&vs2, &v2, &eta2, n)?;
    let dual = lambda.effective_dual()?;
    let top = lambda.max_level();
    let a_parts: Vec<GradedVector<C64>> = (0..=n).map(|p| a.project_level(p)).collect();
    let b_parts: Vec<GradedVector<C64>> = (0..=n).map(|q| b.project_level(q)).collect();
    let mut increments = vec![C64::zero(); n as usize + 1];
    for (p, ap) in a_parts.iter().enumerate() {
        if ap.is_zero() {
            continue;
        }
        for (q, bq) in b_parts.iter().enumerate() {
            if bq.is_zero() {
                continue;
            }
            let y = act_y(alg, ap, d.z, bq, top)?;
            increments[p.max(q)] += pair(&dual, &y)?;
        }
    }
    let tail = TailReport::from_increments(&increments, policy);
    let mut ins = us1.clone();
    ins.push(u1);
    ins.extend(vs2);
    let rhs = correlator_value(alg, &dual, &ins, &v2, &point)?;
    let lhs = tail.value;
    Ok(SewingIdentityReport {
        lhs,
        rhs,
        relative_error: (lhs - rhs).norm() / rhs.norm(),
        tail,
    })
}

/// Exact sewing data: real rational `z`, `r1`, `r2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDisk {
    pub z: Q,
    pub r1: Q,
    pub r2: Q,
}

impl ExactDisk {
    pub fn to_disk(&self) -> Disk {
        Disk::new(C64::new(self.z.to_f64().unwrap_or(f64::NAN), 0.0), self.r1.to_f64().unwrap_or(f64::NAN), self.r2.to_f64().unwrap_or(f64::NAN))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSewingReport {
    pub lhs: Q,
    pub rhs: Q,
    pub relative_error: f64,
}

fn qpow(x: &Q, e: i64) -> Q {
    if e >= 0 {
        num_traits::pow(x.clone(), e as usize)
    } else {
        num_traits::pow(x.recip(), (-e) as usize)
    }
}

/// `r^{L(0) - h} v`, `h` the lowest weight of the sector of `v`.
fn scale_levels(r: &Q, v: &GradedVector<Q>) -> GradedVector<Q> {
    let mut out = GradedVector::zero(v.sector());
    for (level, part) in v.homogeneous_parts() {
        out.add_assign_scaled(&part, &qpow(r, level as i64)).expect("same sector");
    }
    out
}

/// Levels `<= n` of `Y(a, x) b` for `|x| > 0` rational.
fn y_levels(alg: &Algebra, a: &GradedVector<Q>, x: &Q, b: &GradedVector<Q>, n: u32) -> Result<GradedVector<Q>> {
    let mut out = GradedVector::zero(b.sector());
    for (h, ah) in a.homogeneous_parts() {
        for (lb, bl) in b.homogeneous_parts() {
            for target in 0..=n {
                let m = h as i64 + lb as i64 - 1 - target as i64;
                let part = alg.mode_act(&ah, m, &bl)?;
                out.add_assign_scaled(&part, &qpow(x, -m - 1))?;
            }
        }
    }
    Ok(out)
}

/// The sewing identity in exact arithmetic for at most one insertion on each
/// side. The common factor `r2^{h}` from the lowest weight `h` of the sector
/// of `v` is left out of both sides.
#[allow(clippy::too_many_arguments)]
pub fn sewing_identity_exact(
    alg: &Algebra,
    lambda: &FunctionalG<Q>,
    us: &[GradedVector<Q>],
    u: &GradedVector<Q>,
    vs: &[GradedVector<Q>],
    v: &GradedVector<Q>,
    d: &ExactDisk,
    zeta: &[Q],
    eta: &[Q],
    n: u32,
) -> Result<ExactSewingReport> {
    if us.len() > 1 || vs.len() > 1 || zeta.len() != us.len() || eta.len() != vs.len() {
        return Err(Error::RouteUnavailable("exact sewing identity needs k, l <= 1 with matching points".into()));
    }
    d.to_disk().validate()?;
    let to_c = |x: &Q| C64::new(x.to_f64().unwrap_or(f64::NAN), 0.0);
    let zc: Vec<C64> = zeta.iter().map(to_c).collect();
    let ec: Vec<C64> = eta.iter().map(to_c).collect();
    check_unit_configuration(&zc, POINT_TOLERANCE)?;
    check_unit_configuration(&ec, POINT_TOLERANCE)?;
    shifted_point(&d.to_disk(), &zc, &ec)?;

    let u1 = scale_levels(&d.r1, u);
    let v2 = scale_levels(&d.r2, v);
    let a = match us.first() {
        None => u1.truncate_levels(n),
        Some(x) => y_levels(alg, &scale_levels(&d.r1, x), &(&d.r1 * &zeta[0]), &u1, n)?,
    };
    let vs2: Vec<GradedVector<Q>> = vs.iter().map(|x| scale_levels(&d.r2, x)).collect();
    let b = match vs2.first() {
        None => v2.truncate_levels(n),
        Some(x) => y_levels(alg, x, &(&d.r2 * &eta[0]), &v2, n)?,
    };
    let dual = lambda.effective_dual()?;
    let top = lambda.max_level();
    let mut lhs = Q::zero();
    for (_, ap) in a.homogeneous_parts() {
        for (_, bq) in b.homogeneous_parts() {
            lhs += pair(&dual, &y_levels(alg, &ap, &d.z, &bq, top)?)?;
        }
    }
    let mut ins: Vec<GradedVector<Q>> = us.iter().map(|x| scale_levels(&d.r1, x)).collect();
    ins.push(u1);
    ins.extend(vs2);
    let r = reconstruct_rational(alg, &dual, &ins, &v2)?;
    let mut pt: Vec<Q> = zeta.iter().map(|x| &d.z + &d.r1 * x).collect();
    pt.push(d.z.clone());
    pt.extend(eta.iter().map(|x| &d.r2 * x));
    let rhs = r
        .eval_exact(&pt)
        .ok_or_else(|| Error::DegenerateSewingGeometry(format!("{pt:?}")))?;
    let err = (&lhs - &rhs) / &rhs;
    let relative_error = err.to_f64().unwrap_or(f64::NAN).abs();
    Ok(ExactSewingReport {
        lhs,
        rhs,
        relative_error,
    })
}

/// `beta_{k,l}(mu, nu)` for a disk.
#[derive(Clone, Debug)]
pub struct BetaFunctional {
    pub mu: FunctionalF,
    pub nu: FunctionalF,
    pub disk: Disk,
}

pub fn beta_compose(mu: &FunctionalF, nu: &FunctionalF, d: &Disk) -> Result<BetaFunctional> {
    d.validate()?;
    Ok(BetaFunctional {
        mu: mu.clone(),
        nu: nu.clone(),
        disk: *d,
    })
}

/// The data of `g_{k+l+1}(lambda (x) us (x) u (x) vs (x) v)`.
#[derive(Clone, Debug)]
pub struct SewnData<'a> {
    pub us: &'a [GradedVector<C64>],
    pub u: &'a GradedVector<C64>,
    pub vs: &'a [GradedVector<C64>],
    pub v: &'a GradedVector<C64>,
}

fn circles_of(f: &FunctionalF) -> Vec<Circle> {
    f.slots()
        .iter()
        .filter_map(|s| match *s {
            Slot::Contour { m, radius } => Some(Circle { m, radius }),
            Slot::Point(_) => None,
        })
        .collect()
}

impl BetaFunctional {
    fn check(&self, data: &SewnData) -> Result<()> {
        if self.mu.arity() != data.us.len() || self.nu.arity() != data.vs.len() {
            return Err(Error::ArityMismatch {
                expected: self.mu.arity() + self.nu.arity(),
                found: data.us.len() + data.vs.len(),
            });
        }
        Ok(())
    }

    fn scaled(&self, data: &SewnData) -> Result<(Vec<GradedVector<C64>>, GradedVector<C64>)> {
        let (r1, r2) = (real(self.disk.r1), real(self.disk.r2));
        let mut ins: Vec<GradedVector<C64>> = data.us.iter().map(|x| scale_l0(&r1, x)).collect::<Result<_>>()?;
        ins.push(scale_l0(&r1, data.u)?);
        for x in data.vs {
            ins.push(scale_l0(&r2, x)?);
        }
        Ok((ins, scale_l0(&r2, data.v)?))
    }

    /// `(zeta, eta) -> g_{k+l+1}(...)(z + r1 zeta, z, r2 eta)`, both functionals by quadrature.
    pub fn apply_quadrature(&self, alg: &Algebra, lambda: &FunctionalG<C64>, data: &SewnData, rule: &QuadratureRule) -> Result<C64> {
        self.check(data)?;
        let (ins, v2) = self.scaled(data)?;
        let dual = lambda.effective_dual()?;
        let mut circles = circles_of(&self.mu);
        circles.extend(circles_of(&self.nu));
        let nmu = circles_of(&self.mu).len();
        let r = contour_integral(&circles, rule, |w| {
            let zeta = self.mu.fill(&w[..nmu]);
            let eta = self.nu.fill(&w[nmu..]);
            let p = shifted_point(&self.disk, &zeta, &eta)?;
            Ok(vec![correlator_value(alg, &dual, &ins, &v2, &p)?])
        })?;
        Ok(r.value[0])
    }

    /// `nu` extracted algebraically (it must be a contour functional), `mu` by quadrature.
    pub fn apply_nested(&self, alg: &Algebra, lambda: &FunctionalG<C64>, data: &SewnData, rule: &QuadratureRule) -> Result<C64> {
        self.check(data)?;
        let h2 = EkElement::new(data.vs.to_vec(), data.v.clone(), self.nu.clone())?.to_vector(alg)?;
        let (r1, r2) = (real(self.disk.r1), real(self.disk.r2));
        let mut ins: Vec<GradedVector<C64>> = data.us.iter().map(|x| scale_l0(&r1, x)).collect::<Result<_>>()?;
        ins.push(scale_l0(&r1, data.u)?);
        let h2s = scale_l0(&r2, &h2)?;
        let dual = lambda.effective_dual()?;
        self.mu.apply_to(rule, |zeta| {
            let mut p: Vec<C64> = zeta.iter().map(|x| self.disk.z + x * self.disk.r1).collect();
            p.push(self.disk.z);
            correlator_value(alg, &dual, &ins, &h2s, &p)
        })
    }

    /// Both functionals extracted algebraically: `lambda(Y(r1^{L(0)} h1, z) r2^{L(0)} h2)`.
    pub fn apply_algebraic(&self, alg: &Algebra, lambda: &FunctionalG<C64>, data: &SewnData) -> Result<C64> {
        self.check(data)?;
        let h1 = EkElement::new(data.us.to_vec(), data.u.clone(), self.mu.clone())?.to_vector(alg)?;
        let h2 = EkElement::new(data.vs.to_vec(), data.v.clone(), self.nu.clone())?.to_vector(alg)?;
        let policy = TruncationPolicy::default().with_max_weight(lambda.max_level());
        let (y, _) = sew_vectors(alg, &h1, &h2, &self.disk, &policy)?;
        pair(&lambda.effective_dual()?, &y)
    }
}

#[derive(Clone, Debug)]
pub struct RestrictionReport {
    pub direct: GradedVector<C64>,
    pub via_beta: GradedVector<C64>,
    pub relative_error: f64,
    pub quadrature_nodes: usize,
    pub quadrature_converged: bool,
}

/// `nu_bar_Y(h1 (x) h2)` through `beta_{k,l}` and quadrature, against the
/// vector `Y(r1^{L(0)} h1, z) r2^{L(0)} h2`, on every level `<= policy.max_weight`.
pub fn sewing_restriction_check(
    alg: &Algebra,
    h1: &EkElement,
    h2: &EkElement,
    d: &Disk,
    policy: &TruncationPolicy,
    rule: &QuadratureRule,
) -> Result<RestrictionReport> {
    if !h1.mu.is_contour() || !h2.mu.is_contour() {
        return Err(Error::RouteUnavailable("the restriction check rebuilds vectors from contour functionals".into()));
    }
    let beta = beta_compose(&h1.mu, &h2.mu, d)?;
    let direct = sew_vectors(alg, &h1.to_vector(alg)?, &h2.to_vector(alg)?, d, policy)?.0;
    let sector = h2.v.sector();
    let basis: Vec<Partition> = partitions_up_to(policy.max_weight);
    let data = SewnData {
        us: &h1.us,
        u: &h1.v,
        vs: &h2.us,
        v: &h2.v,
    };
    let (ins, v2) = beta.scaled(&data)?;
    let mut circles = circles_of(&beta.mu);
    let nmu = circles.len();
    circles.extend(circles_of(&beta.nu));
    let r = contour_integral(&circles, rule, |w| {
        let p = shifted_point(d, &beta.mu.fill(&w[..nmu]), &beta.nu.fill(&w[nmu..]))?;
        let q = q_free_field(&ins, &v2, &p, policy.max_weight)?;
        Ok(basis.iter().map(|b| q.coeff(b)).collect())
    })?;
    let via_beta = GradedVector::from_terms(sector, basis.iter().cloned().zip(r.value.iter().copied()));
    let diff = direct.sub(&via_beta)?;
    let scale = direct.max_modulus().max(f64::MIN_POSITIVE);
    Ok(RestrictionReport {
        relative_error: diff.max_modulus() / scale,
        direct,
        via_beta,
        quadrature_nodes: r.nodes,
        quadrature_converged: r.converged,
    })
}

/// `r^{L(0)}` with `r` rational on the algebra sector, exactly.
pub fn scale_exact(r: &Q, v: &GradedVector<Q>) -> Result<GradedVector<Q>> {
    scale_l0(&ScaleFactor::Exact(r.clone()), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn disk_predicates() {
        assert!(Disk::new(c(0.5, 0.0), 0.15, 0.05).validate().is_ok());
        // inside the stated inequalities but the first hole leaves the unit disk
        let d = Disk::new(c(0.95, 0.0), 0.2, 0.1);
        assert_eq!(d.validity(), DiskValidity { inequalities: true, geometric: false });
        assert!(matches!(d.validate(), Err(Error::InvalidDisk(_))));
        assert!(!Disk::new(c(0.5, 0.0), 0.1, 0.6).inequalities_hold());
    }

    #[test]
    fn vacuum_sews_to_scaling() {
        let alg = Algebra::heisenberg();
        let d = Disk::new(c(0.5, 0.1), 0.2, 0.05);
        let h2 = GradedVector::<C64>::modes(&[2, 1]);
        let (out, _) = sew_vectors(&alg, &GradedVector::vacuum(), &h2, &d, &TruncationPolicy::default()).unwrap();
        let expected = scale_l0(&ScaleFactor::Real(0.05), &h2).unwrap();
        assert!(out.sub(&expected).unwrap().max_modulus() < 1e-15);
    }

    #[test]
    fn creation_on_vacuum() {
        let alg = Algebra::heisenberg();
        let d = Disk::new(c(0.5, 0.0), 0.2, 0.05);
        let (out, _) = sew_vectors(&alg, &GradedVector::modes(&[1]), &GradedVector::vacuum(), &d, &TruncationPolicy::default()).unwrap();
        let a = Partition::new(vec![1]).unwrap();
        assert!((out.coeff(&a) - c(0.2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn unit_diamond_is_scaled_lambda() {
        let alg = Algebra::heisenberg();
        let d = Disk::new(c(0.5, 0.0), 0.2, 0.05);
        let lam = FunctionalG::dual(DualVector::<C64>::modes(&[1, 1]));
        let dia = diamond(&GradedVector::vacuum(), &lam, &d, &TruncationPolicy::default()).unwrap();
        let v = GradedVector::<C64>::modes(&[1, 1]);
        let r = dia.apply_report(&alg, &v).unwrap();
        assert!((r.value - c(0.0025, 0.0)).norm() < 1e-15);
        assert_eq!(r.fitted_ratio, 0.0);
    }
}
